import math
from dataclasses import asdict, dataclass
from typing import Literal, TypedDict, get_args

from ..errors import ConfigError
from ..utils import dataclass_kwargs

PersistencePolicy = Literal["persistent", "episodic-text", "fully-episodic"]

AblationMode = Literal["mint", "general-visual-prompt", "text-only", "visual-only-general", "visual-only-associative"]

UnionMode = Literal["set", "multiset"]


class AdaptConfigJson(TypedDict, total=False):
    views: int
    confidence: float
    reward_weight: float
    steps: int
    learning_rate: float
    betas: list[float]
    adam_eps: float
    weight_decay: float
    persistence: PersistencePolicy
    mode: AblationMode
    bank_size: int
    prompt_length: int
    selected_per_layer: int
    union_mode: UnionMode
    bank_seed: int
    augment_seed: int


@dataclass(frozen=True)
class AdaptConfig:
    views: int = 64
    "B, augmented views per test sample"

    confidence: float = 0.10
    "kappa, fraction of lowest-entropy views kept for the loss"

    reward_weight: float = 0.2
    "lambda, weight of the key similarity reward"

    steps: int = 1
    learning_rate: float = 5e-3
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0

    persistence: PersistencePolicy = "persistent"
    mode: AblationMode = "mint"

    bank_size: int = 512
    "N_MPB"

    prompt_length: int = 2
    "L_m"

    selected_per_layer: int = 3
    "N_sel"

    union_mode: UnionMode = "set"
    bank_seed: int = 0
    augment_seed: int = 0

    def __post_init__(self):
        if self.views < 1:
            raise ConfigError(f"adapt.views must be >= 1, got {self.views}")
        if not 0 < self.confidence <= 1:
            raise ConfigError(f"adapt.confidence must lie in (0, 1], got {self.confidence}")
        if self.reward_weight < 0:
            raise ConfigError("adapt.reward_weight must be >= 0")
        if self.steps < 1:
            raise ConfigError("adapt.steps must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("adapt.learning_rate must be > 0")
        if len(self.betas) != 2 or not all(0 <= beta < 1 for beta in self.betas):
            raise ConfigError(f"adapt.betas must be two values in [0, 1), got {self.betas}")
        if self.weight_decay < 0:
            raise ConfigError("adapt.weight_decay must be >= 0")
        if self.persistence not in get_args(PersistencePolicy):
            raise ConfigError(f"unknown persistence policy {self.persistence!r}")
        if self.mode not in get_args(AblationMode):
            raise ConfigError(f"unknown ablation mode {self.mode!r}")
        if self.union_mode not in get_args(UnionMode):
            raise ConfigError(f"unknown union mode {self.union_mode!r}")
        if self.bank_size < 1 or self.prompt_length < 1:
            raise ConfigError("adapt.bank_size and adapt.prompt_length must be positive")
        if not 1 <= self.selected_per_layer <= self.bank_size:
            raise ConfigError(f"adapt.selected_per_layer must lie in [1, {self.bank_size}]")

    @property
    def selected_views(self) -> int:
        return confident_count(self.views, self.confidence)

    @property
    def uses_text_prompt(self) -> bool:
        return self.mode in ("mint", "general-visual-prompt", "text-only")

    @property
    def uses_bank(self) -> bool:
        return self.mode in ("mint", "visual-only-associative")

    @property
    def uses_visual_prompt(self) -> bool:
        return self.mode in ("general-visual-prompt", "visual-only-general")

    @staticmethod
    def from_json(json: AdaptConfigJson) -> "AdaptConfig":
        return AdaptConfig(**dataclass_kwargs(json, AdaptConfig, "adapt"))

    def to_json(self) -> AdaptConfigJson:
        json = asdict(self)
        json["betas"] = list(self.betas)
        return json


def confident_count(views: int, confidence: float) -> int:
    """m = max(1, floor(kappa * B))"""
    return max(1, math.floor(confidence * views))
