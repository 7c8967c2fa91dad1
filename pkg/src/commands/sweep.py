import logging
from argparse import ArgumentParser, Namespace
from dataclasses import replace

from ..benchmark import SweepSpec, emit_report, prepare_experiment
from ..benchmark.sweep import sweep as run_sweep
from ..errors import ConfigError
from ..registry import register_command
from ..utils import command_do
from .common import command_config

logger = logging.getLogger(__name__)


def configure_sweep(parser: ArgumentParser):
    parser.add_argument("--param", help="N_MPB, L_m, N_sel, injection-layer, lambda or kappa")
    parser.add_argument("--values", nargs="+", help="values to sweep, overriding the configuration's sweep section")


@register_command("sweep", help="Run mint once per value of one hyperparameter", configure=configure_sweep)
@command_do
def sweep_command(args: Namespace):
    config = command_config(args)

    if args.param is not None or args.values is not None:
        spec = SweepSpec.parse(args.param or "", args.values or [])
    elif config.sweep is not None:
        spec = config.sweep
    else:
        raise ConfigError("sweep needs --param and --values or a sweep section in the configuration")

    config = replace(config, sweep=spec)
    experiment = prepare_experiment(config).then()
    dataset = experiment.dataset

    report = run_sweep(
        spec.parameter,
        spec.values,
        experiment.config,
        dataset.samples(),
        dataset.domain_names,
        experiment.encoder.weights,
    )

    path = emit_report(report, config.out_path / f"sweep-{spec.parameter}.csv").then()
    logger.info("sweep report written to %s", path)
