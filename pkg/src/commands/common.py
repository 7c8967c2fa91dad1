from argparse import Namespace

from ..benchmark import RunConfig, load_run_config


def command_config(args: Namespace) -> RunConfig:
    """The configuration file (or defaults) with the --seed and --out overrides applied. Call inside `Result.do`"""
    config = load_run_config(args.config).then() if args.config else RunConfig()
    return config.with_overrides(seed=args.seed, out_dir=args.out)
