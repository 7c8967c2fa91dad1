import logging
from argparse import ArgumentParser, Namespace

from ..errors import ContractError
from ..gradcheck import MAX_RELATIVE_ERROR, run_gradcheck
from ..registry import register_command
from ..utils import command_do

logger = logging.getLogger(__name__)


def configure_gradcheck(parser: ArgumentParser):
    parser.add_argument("--cases", type=int, default=20, help="random toy configurations to check")
    parser.add_argument("--max-entries", type=int, default=None, help="entries sampled per parameter (all by default)")


@register_command(
    "gradcheck",
    help="Compare reverse-mode gradients of the adaptation loss with central differences",
    configure=configure_gradcheck,
)
@command_do
def gradcheck_command(args: Namespace):
    cases = run_gradcheck(args.cases, seed=args.seed or 0, max_entries=args.max_entries)

    for case in cases:
        logger.info(
            "case %d: K=%d depth=%d D_I=%d N_MPB=%d, %d entries, max relative error %.3e (unfloored %.3e)",
            case.seed,
            case.encoder.num_classes,
            case.encoder.image_depth,
            case.encoder.image_width,
            case.adapt.bank_size,
            case.checked_entries,
            case.max_relative_error,
            case.max_pure_relative_error,
        )

    failed = [case.seed for case in cases if not case.passed]
    if failed:
        raise ContractError(f"gradient check exceeded {MAX_RELATIVE_ERROR:g} on case(s) {failed}")
    logger.info("all %d cases within %g", len(cases), MAX_RELATIVE_ERROR)
