import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from ..autodiff import frozen_array
from ..errors import ConfigError
from ..utils import Result, load_tensors, save_tensors
from .config import EncoderConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FrozenWeights:
    """Read-only named arrays of both encoders. Nothing here is ever a trainable leaf"""

    tensors: Mapping[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.tensors):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.tensors[name]).tobytes())
        return digest.hexdigest()

    @staticmethod
    def initialize(config: EncoderConfig) -> "FrozenWeights":
        """Scaled Gaussian initialisation from `config.weight_seed`. No pre-training"""
        rng = np.random.default_rng(config.weight_seed)
        tensors: dict[str, np.ndarray] = {}

        def linear(name: str, fan_in: int, fan_out: int):
            tensors[f"{name}.weight"] = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
            tensors[f"{name}.bias"] = np.zeros(fan_out)

        def norm(name: str, width: int):
            tensors[f"{name}.gamma"] = np.ones(width)
            tensors[f"{name}.beta"] = np.zeros(width)

        def blocks(prefix: str, depth: int, width: int):
            hidden = width * config.mlp_ratio
            for layer in range(depth):
                block = f"{prefix}.blocks.{layer}"
                norm(f"{block}.ln1", width)
                for projection in ("query", "key", "value", "out"):
                    linear(f"{block}.attn.{projection}", width, width)
                norm(f"{block}.ln2", width)
                linear(f"{block}.mlp.fc1", width, hidden)
                linear(f"{block}.mlp.fc2", hidden, width)

        d_i, d_t = config.image_width, config.text_width

        linear("image.patch", config.patch_dim, d_i)
        tensors["image.class_token"] = rng.standard_normal(d_i)
        tensors["image.position"] = 0.1 * rng.standard_normal((config.tokens_per_view, d_i))
        blocks("image", config.image_depth, d_i)
        norm("image.ln_post", d_i)
        tensors["image.proj"] = rng.standard_normal((d_i, d_i)) / np.sqrt(d_i)

        tensors["text.class_names"] = rng.standard_normal((config.num_classes, config.class_name_length, d_t))
        tensors["text.hand_prompt"] = rng.standard_normal((config.text_prompt_length, d_t))
        tensors["text.position"] = 0.1 * rng.standard_normal((config.text_length, d_t))
        blocks("text", config.text_depth, d_t)
        norm("text.ln_final", d_t)
        tensors["text.proj"] = rng.standard_normal((d_t, d_i)) / np.sqrt(d_t)

        return FrozenWeights({name: frozen_array(value) for name, value in tensors.items()})

    def save(self, path: str | Path) -> Result[Path, Exception]:
        return save_tensors(path, self.tensors)

    @staticmethod
    @Result.do(catch=(ConfigError,))
    def load(path: str | Path, config: EncoderConfig) -> "FrozenWeights":
        loaded = load_tensors(path).then()
        expected = FrozenWeights.initialize(config)

        for name, array in expected.tensors.items():
            if name not in loaded:
                raise ConfigError(f"weight snapshot {path} lacks {name}")
            if loaded[name].shape != array.shape:
                raise ConfigError(f"weight snapshot {path}: {name} has shape {loaded[name].shape} not {array.shape}")

        logger.debug("loaded %d frozen tensors from %s", len(loaded), path)
        return FrozenWeights({name: frozen_array(loaded[name]) for name in expected.tensors})
