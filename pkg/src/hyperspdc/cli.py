"""``hyperspdc`` command line: one experiment kind per invocation."""

from __future__ import annotations

import argparse
import json
import sys

from ._version import __version__
from .pipeline import KINDS, ConfigError, ExperimentConfig, PipelineError, run, validate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperspdc",
        description="Simulate and analyse frequency-bin / polarisation hyperentangled photon-pair sources.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", metavar="KIND", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", metavar="PATH", help="JSON config with unit-suffixed keys")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, metavar="N", help="RNG seed (overrides the config)")
        p.add_argument("--validate-only", action="store_true", help="report config problems and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = ExperimentConfig.load(args.config)
        else:
            cfg = ExperimentConfig(kind=args.kind)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    diags = []
    if cfg.kind is not None and cfg.kind != args.kind:
        diags.append(f"kind: config says {cfg.kind!r} but the command is {args.kind!r}")
    cfg = cfg.with_overrides(kind=args.kind, output_dir=args.out, seed=args.seed)
    diags += validate(cfg, require_output=not args.validate_only)
    where = cfg.config_path or "<no config>"
    if args.validate_only:
        for d in diags:
            print(f"{where}: {d}")
        if not diags:
            print(f"{where}: ok")
        return 1 if diags else 0
    if diags:
        for d in diags:
            print(f"error: {where}: {d}", file=sys.stderr)
        return 2

    try:
        result = run(cfg)
    except (PipelineError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"output_dir": str(result.output_dir), "files": list(result.files)}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
