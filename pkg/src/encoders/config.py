from dataclasses import asdict, dataclass
from typing import TypedDict

from ..errors import ConfigError
from ..utils import dataclass_kwargs


class EncoderConfigJson(TypedDict, total=False):
    image_width: int
    text_width: int
    image_depth: int
    text_depth: int
    heads: int
    channels: int
    grid: int
    patch: int
    mlp_ratio: int
    temperature: float
    num_classes: int
    text_prompt_length: int
    class_name_length: int
    query_layers: int
    injection_layer: int
    weight_seed: int


@dataclass(frozen=True)
class EncoderConfig:
    image_width: int = 32
    "D_I, width of image tokens and of the shared embedding space"

    text_width: int = 32
    "D_T, width of text tokens"

    image_depth: int = 6
    text_depth: int = 2
    heads: int = 4

    channels: int = 3
    grid: int = 4
    "patches per image side"

    patch: int = 4
    "pixels per patch side"

    mlp_ratio: int = 2

    temperature: float = 0.07
    "tau of the cosine classifier"

    num_classes: int = 10
    "K"

    text_prompt_length: int = 4
    "L_t, shared by the hand-crafted prompt P_h and the learnable prompt P_t"

    class_name_length: int = 2
    "tokens per class-name embedding sequence"

    query_layers: int = 3
    "N_layers, designated image layers supplying retrieval queries"

    injection_layer: int = 0
    "image block whose input receives prepended prompt tokens"

    weight_seed: int = 0

    def __post_init__(self):
        positive = ("image_width", "text_width", "image_depth", "text_depth", "heads", "channels", "grid", "patch")
        for name in (*positive, "mlp_ratio", "class_name_length", "query_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"encoder.{name} must be positive")

        if self.image_width % self.heads or self.text_width % self.heads:
            raise ConfigError(f"encoder widths must be divisible by heads={self.heads}")
        if not self.temperature > 0:
            raise ConfigError(f"encoder.temperature must be > 0, got {self.temperature}")
        if self.num_classes < 2:
            raise ConfigError(f"encoder.num_classes must be >= 2, got {self.num_classes}")
        if self.text_prompt_length < 0:
            raise ConfigError("encoder.text_prompt_length must be >= 0")
        if not 0 <= self.injection_layer < self.image_depth:
            raise ConfigError(f"encoder.injection_layer must lie in [0, {self.image_depth})")

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    @property
    def tokens_per_view(self) -> int:
        "N_I, including the readout token at index 0"
        return self.num_patches + 1

    @property
    def image_size(self) -> int:
        return self.grid * self.patch

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.channels, self.image_size, self.image_size)

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch * self.patch

    @property
    def text_length(self) -> int:
        return self.text_prompt_length + self.class_name_length

    @property
    def designated_query_layers(self) -> tuple[int, ...]:
        return designated_layers(self.image_depth, self.query_layers)

    @staticmethod
    def from_json(json: EncoderConfigJson) -> "EncoderConfig":
        return EncoderConfig(**dataclass_kwargs(json, EncoderConfig, "encoder"))

    def to_json(self) -> EncoderConfigJson:
        return asdict(self)


def designated_layers(depth: int, count: int) -> tuple[int, ...]:
    """`count` layer indices evenly spread over `depth`, always holding the first and the last layer"""
    if count == 1:
        return (depth - 1,)
    count = min(count, depth)
    return tuple(sorted({round(i * (depth - 1) / (count - 1)) for i in range(count)}))
