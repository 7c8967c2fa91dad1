from dataclasses import dataclass
from typing import Literal, TypedDict, get_args

import numpy as np

from ..errors import ConfigError
from ..utils import dataclass_kwargs

ShiftKind = Literal["gaussian-noise", "channel-style", "patch-dropout", "contrast-scale"]

MAX_STYLE_STRENGTH = 1.0
"a half turn of the channel space"


class ShiftOperatorJson(TypedDict):
    kind: ShiftKind
    strength: float


@dataclass(frozen=True)
class ShiftOperator:
    """
    One image corruption. `strength` is the noise sigma, the style rotation as a fraction of a half turn,
    the dropout rate or the contrast factor gamma depending on `kind`
    """

    kind: ShiftKind
    strength: float

    def __post_init__(self):
        if self.kind not in get_args(ShiftKind):
            raise ConfigError(f"unknown shift kind {self.kind!r}")

        match self.kind:
            case "gaussian-noise" if self.strength < 0:
                raise ConfigError("gaussian-noise sigma must be >= 0")
            case "channel-style" if not 0 <= self.strength <= MAX_STYLE_STRENGTH:
                raise ConfigError(f"channel-style strength must lie in [0, {MAX_STYLE_STRENGTH}]")
            case "patch-dropout" if not 0 <= self.strength <= 1:
                raise ConfigError("patch-dropout rate must lie in [0, 1]")
            case "contrast-scale" if self.strength < 0:
                raise ConfigError("contrast-scale gamma must be >= 0")

    def at_severity(self, severity: float) -> "ShiftOperator":
        """The same corruption scaled by `severity` >= 0: 0 is the identity, 1 the operator itself"""
        match self.kind:
            case "gaussian-noise":
                strength = self.strength * severity
            case "channel-style":
                strength = min(self.strength * severity, MAX_STYLE_STRENGTH)
            case "patch-dropout":
                strength = min(self.strength * severity, 1.0)
            case "contrast-scale":
                strength = self.strength**severity
            case _:
                raise ConfigError(f"unknown shift kind {self.kind!r}")
        return ShiftOperator(self.kind, strength)

    def apply(self, images: np.ndarray, rng: np.random.Generator, patch: int) -> np.ndarray:
        """Shifts a (N, C, S, S) batch; every random draw comes from `rng`"""
        match self.kind:
            case "gaussian-noise":
                return images + self.strength * rng.standard_normal(images.shape)

            case "channel-style":
                mixing = style_matrix(images.shape[1], self.strength, rng)
                return np.einsum("cd,ndhw->nchw", mixing, images)

            case "patch-dropout":
                count, _, height, width = images.shape
                keep = rng.random((count, height // patch, width // patch)) >= self.strength
                mask = np.repeat(np.repeat(keep, patch, axis=1), patch, axis=2)
                return images * mask[:, None, :, :]

            case "contrast-scale":
                mean = images.mean(axis=(1, 2, 3), keepdims=True)
                return mean + self.strength * (images - mean)

        raise ConfigError(f"unknown shift kind {self.kind!r}")

    @staticmethod
    def from_json(json: ShiftOperatorJson) -> "ShiftOperator":
        return ShiftOperator(**dataclass_kwargs(json, ShiftOperator, "shift"))

    def to_json(self) -> ShiftOperatorJson:
        return {"kind": self.kind, "strength": self.strength}


def style_matrix(channels: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Rotation by `strength` * pi within a random plane of the channel space. Orthogonal, so condition number 1"""
    if channels < 2:
        return np.eye(channels)
    plane, _ = np.linalg.qr(rng.standard_normal((channels, 2)))
    first, second = plane[:, :1], plane[:, 1:]
    angle = strength * np.pi

    return (
        np.eye(channels)
        + (np.cos(angle) - 1.0) * (first @ first.T + second @ second.T)
        + np.sin(angle) * (second @ first.T - first @ second.T)
    )


def apply_chain(
    operators: tuple[ShiftOperator, ...], images: np.ndarray, rng: np.random.Generator, patch: int
) -> np.ndarray:
    for operator in operators:
        images = operator.apply(images, rng, patch)
    return images
