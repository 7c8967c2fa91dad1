import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..autodiff import Parameter
from ..errors import ConfigError
from ..utils import Result, load_tensors, save_tensors

logger = logging.getLogger(__name__)

BANK_KEYS_ID = "bank.keys"
BANK_VALUES_ID = "bank.values"


@dataclass(frozen=True)
class MemoryPromptBank:
    """N_MPB learnable (key, value) pairs: keys (N_MPB, D_I), value prompt blocks (N_MPB, L_m, D_I)"""

    keys: Parameter
    values: Parameter

    def __post_init__(self):
        keys_shape, values_shape = self.keys.shape, self.values.shape
        if len(keys_shape) != 2 or len(values_shape) != 3:
            raise ConfigError(f"bank keys/values must be 2-D/3-D, got {keys_shape} and {values_shape}")
        if keys_shape[0] != values_shape[0] or keys_shape[1] != values_shape[2]:
            raise ConfigError(f"bank keys {keys_shape} do not pair with values {values_shape}")

    @property
    def size(self) -> int:
        "N_MPB"
        return self.keys.shape[0]

    @property
    def prompt_length(self) -> int:
        "L_m"
        return self.values.shape[1]

    @property
    def width(self) -> int:
        "D_I"
        return self.keys.shape[1]

    def with_arrays(self, keys: np.ndarray | None = None, values: np.ndarray | None = None) -> "MemoryPromptBank":
        return replace(
            self,
            keys=self.keys if keys is None else self.keys.with_value(keys),
            values=self.values if values is None else self.values.with_value(values),
        )

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {BANK_KEYS_ID: self.keys.value, BANK_VALUES_ID: self.values.value}

    def save(self, path: str | Path) -> Result[Path, Exception]:
        return save_tensors(path, self.to_tensors())

    @staticmethod
    @Result.do(catch=(ConfigError,))
    def load(path: str | Path) -> "MemoryPromptBank":
        tensors = load_tensors(path).then()
        if BANK_KEYS_ID not in tensors or BANK_VALUES_ID not in tensors:
            raise ConfigError(f"{path} holds no memory prompt bank")
        keys, values = tensors[BANK_KEYS_ID], tensors[BANK_VALUES_ID]
        return MemoryPromptBank(Parameter(BANK_KEYS_ID, keys), Parameter(BANK_VALUES_ID, values))


def init_bank(size: int, prompt_length: int, width: int, seed: int) -> MemoryPromptBank:
    """Keys and values drawn i.i.d. from N(0, 1) with a seeded generator"""
    if size < 1 or prompt_length < 1 or width < 1:
        raise ConfigError(f"bank extents must be positive, got N_MPB={size}, L_m={prompt_length}, D_I={width}")

    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((size, width))
    values = rng.standard_normal((size, prompt_length, width))

    logger.debug("initialised bank N_MPB=%d L_m=%d D_I=%d seed=%d", size, prompt_length, width, seed)

    return MemoryPromptBank(Parameter(BANK_KEYS_ID, keys), Parameter(BANK_VALUES_ID, values))
