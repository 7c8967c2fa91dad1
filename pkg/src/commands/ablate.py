import logging
from argparse import ArgumentParser, Namespace
from dataclasses import replace

from ..benchmark import (
    ABLATION_METHODS,
    ORDERING_FILE,
    RunConfig,
    RunReport,
    check_ordering,
    emit_ordering,
    emit_report,
    prepare_experiment,
    run_methods,
    write_method_outputs,
)
from ..errors import ConfigError
from ..registry import register_command
from ..utils import command_do
from .common import command_config

logger = logging.getLogger(__name__)

ABLATION_REPORT_FILE = "ablation.csv"


def configure_ablate(parser: ArgumentParser):
    parser.add_argument(
        "--seeds",
        type=int,
        default=1,
        help="consecutive master seeds from --seed (default 0), each run into its own seed-<n> directory",
    )


def ablate_once(config: RunConfig) -> RunReport:
    experiment = prepare_experiment(config).then()
    report, results = run_methods(experiment, ABLATION_METHODS, config.fingerprint())

    path = emit_report(report, config.out_path / ABLATION_REPORT_FILE).then()
    write_method_outputs(config.out_path, results, config.write_traces).then()
    logger.info("ablation report written to %s", path)
    return report


@register_command(
    "ablate",
    help="Run zero-shot and the five component ablations, ignoring the methods list",
    configure=configure_ablate,
)
@command_do
def ablate_command(args: Namespace):
    config = replace(command_config(args), methods=ABLATION_METHODS)
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")

    configs = [config]
    if args.seeds > 1:
        first = config.seed or 0
        seeds = range(first, first + args.seeds)
        configs = [config.with_overrides(seed=seed, out_dir=str(config.out_path / f"seed-{seed}")) for seed in seeds]
    reports = [ablate_once(seed_config) for seed_config in configs]

    shifted = [domain.name for domain in config.dataset.domains if domain.shifts]
    if not shifted:
        return

    check = check_ordering(reports, shifted)
    path = emit_ordering(check, config.out_path / ORDERING_FILE).then()
    for inversion in check.inversions:
        logger.warning("ordering inversion: %s", inversion)
    if check.hard_failure:
        logger.error("mint did not beat zero-shot on any shifted domain, see %s", path)
    else:
        logger.info("ordering check %s, written to %s", "passed" if check.passed else "failed", path)
