import logging
from typing import Sequence

from ..adaptation import Sample
from ..encoders import DualEncoder, FrozenWeights
from ..errors import ConfigError
from .config import RunConfig, SweepParameter
from .methods import run_method
from .report import RunReport, summarize

logger = logging.getLogger(__name__)


def sweep_label(parameter: SweepParameter, value) -> str:
    return f"mint@{parameter}={value:g}"


def sweep(
    parameter: SweepParameter,
    values: Sequence,
    config: RunConfig,
    samples: Sequence[Sample],
    domain_names: Sequence[str],
    weights: FrozenWeights,
) -> RunReport:
    """Runs mint once per value; the row group of each value carries the method label mint@<parameter>=<value>"""
    if not values:
        raise ConfigError("sweep needs at least one value")

    report = RunReport(fingerprint=config.fingerprint())

    for value in values:
        swept = config.with_sweep_value(parameter, value).resolved()
        logger.info("sweep %s = %s", parameter, value)
        result = run_method("mint", DualEncoder(swept.encoder, weights), swept.adapt, samples)
        report = report.extend(summarize(result, domain_names, sweep_label(parameter, value)))

    return report
