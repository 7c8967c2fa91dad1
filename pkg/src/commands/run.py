import logging
from argparse import Namespace

from ..benchmark import emit_report, prepare_experiment, run_methods, write_method_outputs
from ..registry import register_command
from ..utils import command_do
from .common import command_config

logger = logging.getLogger(__name__)

REPORT_FILE = "report.csv"


@register_command("run", help="Run the configured methods over the benchmark stream and write a report")
@command_do
def run_command(args: Namespace):
    config = command_config(args)
    experiment = prepare_experiment(config).then()

    report, results = run_methods(experiment, config.methods, config.fingerprint())

    path = emit_report(report, config.out_path / REPORT_FILE).then()
    write_method_outputs(config.out_path, results, config.write_traces).then()
    logger.info("report written to %s", path)
