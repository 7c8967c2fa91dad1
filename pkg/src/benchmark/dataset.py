import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, TypedDict, get_args

import numpy as np

from ..adaptation import AdaptConfig, Sample, adamw
from ..autodiff import Parameter, Tape, backward, log, mul, ops, scale
from ..encoders import DualEncoder, EncoderConfig, predict
from ..errors import ConfigError, GenerationError
from ..utils import Result, load_tensors, reject_unknown_keys, save_tensors
from .shifts import ShiftOperator, ShiftOperatorJson, apply_chain

logger = logging.getLogger(__name__)

Interleave = Literal["mixed", "sequential"]

MIN_CLEAN_ACCURACY = 0.8
MAX_RESEEDS = 10

PROTOTYPE_STEPS = 200
PROTOTYPE_LEARNING_RATE = 0.05
PROTOTYPE_TARGET = 0.95
"mean true-class probability at which prototype refinement stops"

PREDICT_CHUNK = 256

MAX_SEVERITY = 64.0
CALIBRATION_STEPS = 12

_ORDER_STREAM = 1
_DOMAIN_STREAM = 2

DATASET_TENSORS = "dataset.mtn"
DATASET_INDEX = "dataset.json"


class DomainSpecJson(TypedDict, total=False):
    name: str
    shifts: list[ShiftOperatorJson]
    target_accuracy: float | None


@dataclass(frozen=True)
class DomainSpec:
    name: str
    shifts: tuple[ShiftOperator, ...] = ()
    "applied in order; empty chain is the clean domain"

    target_accuracy: float | None = None
    "when set, the chain severity is calibrated until clean-encoder zero-shot accuracy drops to this level"

    def __post_init__(self):
        if self.target_accuracy is not None:
            if not self.shifts:
                raise ConfigError(f"domain {self.name!r}: target_accuracy needs a shift chain")
            if not 0 < self.target_accuracy < 1:
                raise ConfigError(f"domain {self.name!r}: target_accuracy must lie in (0, 1)")

    def at_severity(self, severity: float) -> tuple[ShiftOperator, ...]:
        return tuple(shift.at_severity(severity) for shift in self.shifts)

    @staticmethod
    def from_json(json: DomainSpecJson) -> "DomainSpec":
        reject_unknown_keys(json, DomainSpec, "dataset.domains")
        if "name" not in json:
            raise ConfigError("dataset.domains: every domain needs a name")
        shifts = tuple(ShiftOperator.from_json(s) for s in json.get("shifts", []))
        return DomainSpec(json["name"], shifts, json.get("target_accuracy"))

    def to_json(self) -> DomainSpecJson:
        json: DomainSpecJson = {"name": self.name, "shifts": [shift.to_json() for shift in self.shifts]}
        if self.target_accuracy is not None:
            json["target_accuracy"] = self.target_accuracy
        return json


SHIFTED_TARGET_ACCURACY = 0.65

DEFAULT_DOMAINS = (
    DomainSpec("clean"),
    DomainSpec("noise", (ShiftOperator("gaussian-noise", 1.0),), SHIFTED_TARGET_ACCURACY),
    DomainSpec("style", (ShiftOperator("channel-style", 0.5),), SHIFTED_TARGET_ACCURACY),
    DomainSpec(
        "occlusion",
        (ShiftOperator("patch-dropout", 0.25), ShiftOperator("contrast-scale", 0.8)),
        SHIFTED_TARGET_ACCURACY,
    ),
)


class DatasetSpecJson(TypedDict, total=False):
    num_classes: int
    samples_per_class: int
    domains: list[DomainSpecJson]
    seed: int
    interleave: Interleave
    sample_noise: float


@dataclass(frozen=True)
class DatasetSpec:
    num_classes: int = 10
    "K, must match the encoder"

    samples_per_class: int = 10
    "per domain"

    domains: tuple[DomainSpec, ...] = DEFAULT_DOMAINS
    seed: int = 0
    interleave: Interleave = "mixed"

    sample_noise: float = 0.1
    "pixel noise around the class prototype, relative to unit prototype contrast"

    def __post_init__(self):
        if self.num_classes < 2 or self.samples_per_class < 1:
            raise ConfigError("dataset.num_classes must be >= 2 and dataset.samples_per_class >= 1")
        if not self.domains:
            raise ConfigError("dataset.domains must not be empty")
        names = [domain.name for domain in self.domains]
        if len(set(names)) != len(names):
            raise ConfigError(f"dataset domain names must be unique, got {names}")
        if self.interleave not in get_args(Interleave):
            raise ConfigError(f"unknown interleave mode {self.interleave!r}")
        if self.sample_noise < 0:
            raise ConfigError("dataset.sample_noise must be >= 0")

    @property
    def domain_names(self) -> tuple[str, ...]:
        return tuple(domain.name for domain in self.domains)

    @staticmethod
    def from_json(json: DatasetSpecJson) -> "DatasetSpec":
        reject_unknown_keys(json, DatasetSpec, "dataset")
        kwargs = dict(json)
        if "domains" in kwargs:
            kwargs["domains"] = tuple(DomainSpec.from_json(domain) for domain in kwargs["domains"])
        return DatasetSpec(**kwargs)

    def to_json(self) -> DatasetSpecJson:
        return {
            "num_classes": self.num_classes,
            "samples_per_class": self.samples_per_class,
            "domains": [domain.to_json() for domain in self.domains],
            "seed": self.seed,
            "interleave": self.interleave,
            "sample_noise": self.sample_noise,
        }


@dataclass(frozen=True)
class Dataset:
    """A labeled test stream in arrival order"""

    images: np.ndarray
    "(N, C, S, S)"

    labels: np.ndarray
    domains: np.ndarray
    "index into `domain_names` per sample"

    domain_names: tuple[str, ...]
    clean_accuracy: float = float("nan")

    severities: tuple[float, ...] = ()
    "chain severity per domain, 1.0 where no calibration target was set"

    def __len__(self) -> int:
        return len(self.labels)

    def samples(self) -> list[Sample]:
        return [
            Sample(i, self.images[i], int(self.labels[i]), self.domain_names[self.domains[i]])
            for i in range(len(self))
        ]

    def save(self, directory: str | Path) -> Result[Path, Exception]:
        return _save_dataset(self, Path(directory))

    @staticmethod
    @Result.do(catch=(OSError, ConfigError))
    def load(directory: str | Path) -> "Dataset":
        directory = Path(directory)
        tensors = load_tensors(directory / DATASET_TENSORS).then()
        index = json.loads((directory / DATASET_INDEX).read_text(encoding="utf-8"))

        for name in ("images", "labels", "domains"):
            if name not in tensors:
                raise ConfigError(f"{directory / DATASET_TENSORS} lacks {name}")

        return Dataset(
            images=tensors["images"],
            labels=tensors["labels"].astype(np.int64),
            domains=tensors["domains"].astype(np.int64),
            domain_names=tuple(index["domains"]),
            clean_accuracy=index.get("clean_accuracy", float("nan")),
            severities=tuple(index.get("severities", ())),
        )


@Result.do(catch=(OSError,))
def _save_dataset(dataset: Dataset, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    tensors = {"images": dataset.images, "labels": dataset.labels, "domains": dataset.domains}
    save_tensors(directory / DATASET_TENSORS, tensors).then()
    index = {
        "domains": list(dataset.domain_names),
        "clean_accuracy": dataset.clean_accuracy,
        "severities": list(dataset.severities),
    }
    (directory / DATASET_INDEX).write_text(json.dumps(index, sort_keys=True) + "\n", encoding="utf-8")
    return directory


def unpatchify(patches: np.ndarray, config: EncoderConfig) -> np.ndarray:
    """(N, grid*grid, C*patch*patch) patch rows back to (N, C, S, S) images"""
    count = patches.shape[0]
    grid, patch, channels = config.grid, config.patch, config.channels
    tiles = patches.reshape(count, grid, grid, channels, patch, patch)
    return tiles.transpose(0, 3, 1, 4, 2, 5).reshape(count, *config.image_shape)


def initial_prototypes(encoder: DualEncoder, rng: np.random.Generator) -> np.ndarray:
    """
    One image per class: its zero-shot text feature pulled back through the patch embedding
    (pseudo-inverse), tiled over the grid with random per-patch jitter, scaled to unit contrast
    """
    config = encoder.config
    text = encoder.zero_shot_text_features().data
    lift = np.linalg.pinv(encoder.weights["image.patch.weight"])

    patches = text @ lift
    jitter = rng.standard_normal((config.num_classes, config.num_patches, config.patch_dim))
    tiled = patches[:, None, :] + 0.5 * patches.std() * jitter

    images = unpatchify(tiled, config)
    return images / images.std(axis=(1, 2, 3), keepdims=True)


def refine_prototypes(encoder: DualEncoder, prototypes: np.ndarray) -> np.ndarray:
    """Gradient descent on the prototype pixels (encoder frozen) until each is confidently its own class"""
    config = encoder.config
    text = encoder.zero_shot_text_features()
    optimizer_config = AdaptConfig(learning_rate=PROTOTYPE_LEARNING_RATE)
    leaf = Parameter("dataset.prototypes", prototypes)
    moments = None

    for step in range(PROTOTYPE_STEPS):
        with Tape() as tape:
            probabilities = predict(encoder.encode_images(leaf.track()).v, text, config.temperature)
            true_class = ops.sum(mul(probabilities, np.eye(config.num_classes)), axis=1)
            loss = scale(ops.mean(log(true_class)), -1.0)
            gradients = backward(loss, tape)

        if true_class.data.mean() >= PROTOTYPE_TARGET:
            logger.debug("prototypes reached target confidence after %d steps", step)
            break

        updated, moments = adamw(leaf.value, gradients[leaf.id], moments, optimizer_config)
        leaf = leaf.with_value(updated)

    return leaf.value


def zero_shot_accuracy(encoder: DualEncoder, images: np.ndarray, labels: np.ndarray) -> float:
    predictions = np.concatenate(
        [
            np.argmax(encoder.zero_shot_predict(images[start : start + PREDICT_CHUNK]), axis=-1)
            for start in range(0, len(images), PREDICT_CHUNK)
        ]
    )
    return float(np.mean(predictions == labels))


def calibrate_severity(
    domain: DomainSpec, base: np.ndarray, labels: np.ndarray, encoder: DualEncoder, seed: list[int]
) -> tuple[float, float]:
    """
    Smallest chain severity (within bisection precision) at which the zero-shot accuracy of the shifted base set
    is at most `domain.target_accuracy`. Every trial replays the same random stream.
    Returns (severity, accuracy)
    """

    def accuracy_at(severity: float) -> float:
        shifted = apply_chain(domain.at_severity(severity), base, np.random.default_rng(seed), encoder.config.patch)
        return zero_shot_accuracy(encoder, shifted, labels)

    target = domain.target_accuracy
    low, high = 0.0, 1.0
    high_accuracy = accuracy_at(high)
    while high_accuracy > target and high < MAX_SEVERITY:
        low, high = high, 2 * high
        high_accuracy = accuracy_at(high)

    if high_accuracy > target:
        logger.warning(
            "domain %r: zero-shot accuracy %.3f at the largest severity %g stays above the target %.3f",
            domain.name,
            high_accuracy,
            high,
            target,
        )
        return high, high_accuracy

    for _ in range(CALIBRATION_STEPS):
        middle = (low + high) / 2
        accuracy = accuracy_at(middle)
        if accuracy > target:
            low = middle
        else:
            high, high_accuracy = middle, accuracy

    return high, high_accuracy


def stream_order(spec: DatasetSpec, count: int) -> np.ndarray:
    if spec.interleave == "mixed":
        return np.random.default_rng([spec.seed, _ORDER_STREAM]).permutation(count)
    return np.arange(count)


@Result.do(catch=(ConfigError, GenerationError))
def generate_dataset(spec: DatasetSpec, encoder: DualEncoder) -> Dataset:
    """
    Clean samples are class prototypes plus pixel noise, one shared base set per attempt; each domain applies
    its shift chain to that base set, at a calibrated severity when the domain sets a target accuracy.
    Retries with a new seed while clean zero-shot accuracy is not above 0.8
    """
    config = encoder.config
    if spec.num_classes != config.num_classes:
        raise ConfigError(f"dataset has {spec.num_classes} classes, the encoder {config.num_classes}")

    # samples cycle through the classes: label of base sample i is i mod K
    labels = np.tile(np.arange(spec.num_classes), spec.samples_per_class)

    for attempt in range(MAX_RESEEDS):
        rng = np.random.default_rng([spec.seed, attempt])
        prototypes = refine_prototypes(encoder, initial_prototypes(encoder, rng))
        base = prototypes[labels] + spec.sample_noise * rng.standard_normal((len(labels), *config.image_shape))

        accuracy = zero_shot_accuracy(encoder, base, labels)
        if accuracy > MIN_CLEAN_ACCURACY:
            break
        logger.warning("attempt %d: clean zero-shot accuracy %.3f, reseeding", attempt, accuracy)
    else:
        raise GenerationError(f"clean zero-shot accuracy stayed <= {MIN_CLEAN_ACCURACY} after {MAX_RESEEDS} seeds")

    images, domains, severities = [], [], []
    for index, domain in enumerate(spec.domains):
        seed = [spec.seed, attempt, _DOMAIN_STREAM, index]
        severity = 1.0
        if domain.target_accuracy is not None:
            severity, domain_accuracy = calibrate_severity(domain, base, labels, encoder, seed)
            logger.info("domain %r: severity %.4g, zero-shot accuracy %.3f", domain.name, severity, domain_accuracy)

        shifts = domain.at_severity(severity)
        images.append(apply_chain(shifts, base, np.random.default_rng(seed), config.patch))
        domains.append(np.full(len(base), index))
        severities.append(severity)

    order = stream_order(spec, len(base) * len(spec.domains))
    all_labels = np.tile(labels, len(spec.domains))

    logger.info(
        "generated %d samples over %d domains, clean zero-shot accuracy %.3f",
        len(order),
        len(spec.domains),
        accuracy,
    )

    return Dataset(
        images=np.concatenate(images)[order],
        labels=all_labels[order],
        domains=np.concatenate(domains)[order],
        domain_names=spec.domain_names,
        clean_accuracy=accuracy,
        severities=tuple(severities),
    )
