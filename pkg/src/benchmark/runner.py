import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..adaptation import write_episode_trace
from ..encoders import DualEncoder
from ..errors import ConfigError
from ..registry import METHODS_TO_REGISTER
from ..utils import Result
from .config import RunConfig
from .dataset import Dataset, generate_dataset
from .methods import MethodResult, run_method
from .report import RunReport, summarize

logger = logging.getLogger(__name__)

PARAMS_SNAPSHOT = "params.mtn"
TRACES_DIRECTORY = "traces"


@dataclass(frozen=True)
class Experiment:
    config: RunConfig
    "resolved: component seeds already derived from the master seed"

    encoder: DualEncoder
    dataset: Dataset


@Result.do()
def prepare_experiment(config: RunConfig) -> Experiment:
    config = config.resolved()
    encoder = DualEncoder(config.encoder)
    dataset = generate_dataset(config.dataset, encoder).then()
    return Experiment(config, encoder, dataset)


def check_methods(methods: Sequence[str]):
    unknown = [method for method in methods if method not in METHODS_TO_REGISTER]
    if unknown:
        raise ConfigError(f"unknown method(s) {', '.join(unknown)}, expected one of {sorted(METHODS_TO_REGISTER)}")


def run_methods(
    experiment: Experiment, methods: Sequence[str], fingerprint: str
) -> tuple[RunReport, list[MethodResult]]:
    check_methods(methods)
    samples = experiment.dataset.samples()
    report = RunReport(fingerprint=fingerprint)
    results = []

    for method in methods:
        result = run_method(method, experiment.encoder, experiment.config.adapt, samples)
        report = report.extend(summarize(result, experiment.dataset.domain_names))
        results.append(result)

    return report, results


@Result.do()
def write_method_outputs(out_dir: Path, results: Sequence[MethodResult], write_traces: bool) -> Path:
    """Episode traces per method and the adapted MINT parameters"""
    for result in results:
        if write_traces:
            trace_path = out_dir / TRACES_DIRECTORY / f"{result.method}.jsonl"
            write_episode_trace(trace_path, result.episodes, result.method).then()
        if result.method == "mint" and result.params is not None:
            result.params.save(out_dir / PARAMS_SNAPSHOT).then()
    return out_dir
