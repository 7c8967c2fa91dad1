import logging
from argparse import Namespace

from ..benchmark import prepare_experiment
from ..registry import register_command
from ..utils import command_do
from .common import command_config

logger = logging.getLogger(__name__)


@register_command("generate", help="Generate the synthetic shifted benchmark and store it under --out")
@command_do
def generate_command(args: Namespace):
    config = command_config(args)
    experiment = prepare_experiment(config).then()
    directory = experiment.dataset.save(config.out_path).then()
    logger.info("wrote %d samples to %s", len(experiment.dataset), directory)
