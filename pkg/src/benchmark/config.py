import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, TypedDict, get_args

from ..adaptation import AdaptConfig, AdaptConfigJson
from ..encoders import EncoderConfig, EncoderConfigJson
from ..errors import ConfigError
from ..utils import Result, canonical_json, read_json_document, reject_unknown_keys
from .dataset import DatasetSpec, DatasetSpecJson
from .report import config_fingerprint

logger = logging.getLogger(__name__)

SweepParameter = Literal["N_MPB", "L_m", "N_sel", "injection-layer", "lambda", "kappa"]

SWEEP_FIELDS: dict[SweepParameter, tuple[str, str, type]] = {
    "N_MPB": ("adapt", "bank_size", int),
    "L_m": ("adapt", "prompt_length", int),
    "N_sel": ("adapt", "selected_per_layer", int),
    "injection-layer": ("encoder", "injection_layer", int),
    "lambda": ("adapt", "reward_weight", float),
    "kappa": ("adapt", "confidence", float),
}
"sweep parameter -> (config section, field, value type)"

SWEEP_ALIASES = {"λ": "lambda", "κ": "kappa"}


class SweepSpecJson(TypedDict):
    parameter: SweepParameter
    values: list[float]


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    values: tuple[float, ...]

    def __post_init__(self):
        if self.parameter not in get_args(SweepParameter):
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}, expected one of {list(SWEEP_FIELDS)}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")

    @staticmethod
    def parse(parameter: str, values) -> "SweepSpec":
        parameter = SWEEP_ALIASES.get(parameter, parameter)
        value_type = SWEEP_FIELDS[parameter][2] if parameter in SWEEP_FIELDS else float
        try:
            return SweepSpec(parameter, tuple(value_type(value) for value in values))
        except (TypeError, ValueError):
            raise ConfigError(f"sweep values {list(values)} are not valid for {parameter}") from None

    @staticmethod
    def from_json(json: SweepSpecJson) -> "SweepSpec":
        reject_unknown_keys(json, SweepSpec, "sweep")
        return SweepSpec.parse(json.get("parameter", ""), json.get("values", []))

    def to_json(self) -> SweepSpecJson:
        return {"parameter": self.parameter, "values": list(self.values)}


class RunConfigJson(TypedDict, total=False):
    encoder: EncoderConfigJson
    adapt: AdaptConfigJson
    dataset: DatasetSpecJson
    methods: list[str]
    out_dir: str
    seed: int | None
    sweep: SweepSpecJson | None
    write_traces: bool


@dataclass(frozen=True)
class RunConfig:
    encoder: EncoderConfig = EncoderConfig()
    adapt: AdaptConfig = AdaptConfig()
    dataset: DatasetSpec = DatasetSpec()
    methods: tuple[str, ...] = ("zero-shot", "mint")
    out_dir: str = "runs"

    seed: int | None = None
    "master seed; when set it replaces the weight, dataset, bank and augmentation seeds"

    sweep: SweepSpec | None = None
    write_traces: bool = True

    def __post_init__(self):
        if self.dataset.num_classes != self.encoder.num_classes:
            raise ConfigError(
                f"dataset.num_classes={self.dataset.num_classes} differs from encoder.num_classes="
                f"{self.encoder.num_classes}"
            )
        if not self.methods:
            raise ConfigError("methods must not be empty")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    def resolved(self) -> "RunConfig":
        """Copy whose component seeds all equal the master seed (unchanged when no master seed is set)"""
        if self.seed is None:
            return self
        return replace(
            self,
            encoder=replace(self.encoder, weight_seed=self.seed),
            adapt=replace(self.adapt, bank_seed=self.seed, augment_seed=self.seed),
            dataset=replace(self.dataset, seed=self.seed),
        )

    def with_overrides(self, *, seed: int | None = None, out_dir: str | None = None) -> "RunConfig":
        return replace(
            self,
            seed=self.seed if seed is None else seed,
            out_dir=self.out_dir if out_dir is None else out_dir,
        )

    def with_sweep_value(self, parameter: SweepParameter, value) -> "RunConfig":
        section, field, value_type = SWEEP_FIELDS[parameter]
        return replace(self, **{section: replace(getattr(self, section), **{field: value_type(value)})})

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def fingerprint(self) -> str:
        """sha256 of the canonical JSON of the resolved configuration, output directory excluded"""
        json = self.resolved().to_json()
        del json["out_dir"]
        return config_fingerprint(canonical_json(json))

    @staticmethod
    def from_json(json: RunConfigJson) -> "RunConfig":
        reject_unknown_keys(json, RunConfig, "config")
        kwargs = {}
        if "encoder" in json:
            kwargs["encoder"] = EncoderConfig.from_json(json["encoder"])
        if "adapt" in json:
            kwargs["adapt"] = AdaptConfig.from_json(json["adapt"])
        if "dataset" in json:
            kwargs["dataset"] = DatasetSpec.from_json(json["dataset"])
        if "methods" in json:
            kwargs["methods"] = tuple(json["methods"])
        if json.get("sweep") is not None:
            kwargs["sweep"] = SweepSpec.from_json(json["sweep"])
        for key in ("out_dir", "seed", "write_traces"):
            if key in json:
                kwargs[key] = json[key]
        return RunConfig(**kwargs)

    def to_json(self) -> RunConfigJson:
        return {
            "encoder": self.encoder.to_json(),
            "adapt": self.adapt.to_json(),
            "dataset": self.dataset.to_json(),
            "methods": list(self.methods),
            "out_dir": self.out_dir,
            "seed": self.seed,
            "sweep": self.sweep.to_json() if self.sweep is not None else None,
            "write_traces": self.write_traces,
        }


@Result.do(catch=(OSError, ConfigError))
def load_run_config(path: str | Path) -> RunConfig:
    document = read_json_document(path)
    try:
        config = RunConfig.from_json(document)
    except TypeError as error:
        raise ConfigError(f"{path}: {error}") from None
    logger.debug("loaded run configuration from %s", path)
    return config
