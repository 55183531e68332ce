"""Command-line entry point tying the pipeline stages together."""

import argparse
import os
import sys

from .config import PRESETS, parse_config
from .errors import ConfigError, MaskgradError, PrerequisiteError
from .pipeline import Pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PREREQUISITE = 3
EXIT_RUNTIME = 4

COMMANDS = ("synth", "train", "explain", "attack", "grid", "sweep", "report", "all")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="maskgrad",
        description="Train a malware-category classifier, rank features by "
                    "attribution, and run feature-masked targeted FGSM/PGD "
                    "evasion attacks.",
    )
    parser.add_argument("command", choices=COMMANDS, help="pipeline stage to run")
    parser.add_argument("--config", metavar="FILE", help="INI configuration file")
    parser.add_argument("--preset", choices=PRESETS,
                        help="bundled configuration preset")
    parser.add_argument("--seed", type=int, help="root seed (overrides config)")
    parser.add_argument("--workers", type=int,
                        help="worker threads for attack/explain/sweep")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory (falls back to config, then "
                             "MASKGRAD_OUT)")
    parser.add_argument("--force", action="store_true",
                        help="re-run stages even when artifacts are current")
    parser.add_argument("--no-clip", action="store_true",
                        help="disable per-feature clip bounds on attacks")
    return parser


def resolve_out(config_out, flag_out):
    if flag_out:
        return flag_out
    if config_out:
        return config_out
    env = os.environ.get("MASKGRAD_OUT")
    if env:
        return env
    return "maskgrad-run"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {"seed": args.seed, "workers": args.workers}
        if args.no_clip:
            overrides["clip"] = False
        cfg = parse_config(path=args.config, preset=args.preset,
                           overrides=overrides)
        pipeline = Pipeline(cfg, resolve_out(cfg.out, args.out), force=args.force)
        pipeline.run(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrerequisiteError as exc:
        print(f"prerequisite error: {exc}", file=sys.stderr)
        return EXIT_PREREQUISITE
    except MaskgradError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
