import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from ..autodiff import Parameter
from ..encoders import DualEncoder
from ..errors import ConfigError
from ..memory import BANK_KEYS_ID, BANK_VALUES_ID, MemoryPromptBank, init_bank
from ..utils import Result, load_tensors, save_tensors
from .config import AblationMode, AdaptConfig

logger = logging.getLogger(__name__)

TEXT_PROMPT_ID = "text.prompt"
VISUAL_PROMPT_ID = "visual.prompt"


@dataclass(frozen=True)
class MintParams:
    """theta_MINT: the learnable text prompt and the memory prompt bank, plus the general visual prompt ablation"""

    text_prompt: Parameter
    "P_t, (L_t, D_T)"

    bank: MemoryPromptBank

    visual_prompt: Parameter
    "P_v, (L_m, D_I), only trained by the general-visual-prompt ablations"

    @staticmethod
    def initialize(encoder: DualEncoder, config: AdaptConfig) -> "MintParams":
        """P_t starts from the hand-crafted prompt P_h; bank and P_v are N(0, 1) from `config.bank_seed`"""
        width = encoder.config.image_width
        bank = init_bank(config.bank_size, config.prompt_length, width, config.bank_seed)
        visual_rng = np.random.default_rng([config.bank_seed, 1])

        return MintParams(
            text_prompt=Parameter(TEXT_PROMPT_ID, encoder.hand_prompt),
            bank=bank,
            visual_prompt=Parameter(VISUAL_PROMPT_ID, visual_rng.standard_normal((config.prompt_length, width))),
        )

    def all_parameters(self) -> dict[str, Parameter]:
        return {
            TEXT_PROMPT_ID: self.text_prompt,
            BANK_KEYS_ID: self.bank.keys,
            BANK_VALUES_ID: self.bank.values,
            VISUAL_PROMPT_ID: self.visual_prompt,
        }

    def trainable_ids(self, mode: AblationMode) -> set[str]:
        """The exact leaf set a loss of this ablation mode reaches"""
        ids: set[str] = set()
        if mode in ("mint", "general-visual-prompt", "text-only") and self.text_prompt.shape[0] > 0:
            ids.add(TEXT_PROMPT_ID)
        if mode in ("mint", "visual-only-associative"):
            ids |= {BANK_KEYS_ID, BANK_VALUES_ID}
        if mode in ("general-visual-prompt", "visual-only-general"):
            ids.add(VISUAL_PROMPT_ID)
        return ids

    def arrays(self) -> dict[str, np.ndarray]:
        return {parameter_id: parameter.value for parameter_id, parameter in self.all_parameters().items()}

    def with_arrays(self, arrays: Mapping[str, np.ndarray]) -> "MintParams":
        unknown = set(arrays) - set(self.all_parameters())
        if unknown:
            raise ConfigError(f"unknown parameter ids {sorted(unknown)}")

        return replace(
            self,
            text_prompt=(
                self.text_prompt.with_value(arrays[TEXT_PROMPT_ID]) if TEXT_PROMPT_ID in arrays else self.text_prompt
            ),
            bank=self.bank.with_arrays(arrays.get(BANK_KEYS_ID), arrays.get(BANK_VALUES_ID)),
            visual_prompt=(
                self.visual_prompt.with_value(arrays[VISUAL_PROMPT_ID])
                if VISUAL_PROMPT_ID in arrays
                else self.visual_prompt
            ),
        )

    def reset(self, initial: "MintParams", *, text: bool, visual: bool) -> "MintParams":
        """Restores P_t and/or the visual state (bank and P_v) from `initial`"""
        return replace(
            self,
            text_prompt=initial.text_prompt if text else self.text_prompt,
            bank=initial.bank if visual else self.bank,
            visual_prompt=initial.visual_prompt if visual else self.visual_prompt,
        )

    def save(self, path: str | Path) -> Result[Path, Exception]:
        return save_tensors(path, self.arrays())

    @staticmethod
    @Result.do(catch=(ConfigError,))
    def load(path: str | Path, like: "MintParams") -> "MintParams":
        tensors = load_tensors(path).then()
        for parameter_id, parameter in like.all_parameters().items():
            if parameter_id not in tensors:
                raise ConfigError(f"{path} lacks {parameter_id}")
            if tensors[parameter_id].shape != parameter.shape:
                raise ConfigError(f"{path}: {parameter_id} has shape {tensors[parameter_id].shape}")
        return like.with_arrays({parameter_id: tensors[parameter_id] for parameter_id in like.all_parameters()})
