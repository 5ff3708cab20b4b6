"""Command line entry point: ``socialsim {simulate,ablate,evaluate,ingest,replay}``.

Exit status is 0 on success, 2 for a bad config or input, 3 when a run fails
part-way (its last daily checkpoint stays on disk for ``simulate --resume``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .config import load_config
from .datasets import COORDINATES, KINDS, DatasetManifest, ingest
from .engine import CHECKPOINT_DIR
from .errors import ConfigError, InvalidInputError, SchemaVersionError
from .experiment import ablate, resume, simulate

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3
log = logging.getLogger("socialsim")


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}", [f"--set: {item!r}"])
        out[key.strip()] = yaml.safe_load(raw)
    for flag, key in (("seed", "seed"), ("mode", "execution.mode"), ("workers", "execution.workers")):
        if getattr(args, flag, None) is not None:
            out[key] = getattr(args, flag)
    for flag in ("days", "ticks"):
        if getattr(args, flag, None) is not None:
            out[flag] = getattr(args, flag)
    return out


def _config(args: argparse.Namespace):
    cfg = load_config(args.config)
    changes = _overrides(args)
    return cfg.with_overrides(**changes) if changes else cfg


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.resume:
        if args.output is None:
            raise ConfigError("--resume needs --output pointing at the interrupted run", ["--output: required"])
        result = resume(args.output)
    else:
        cfg = _config(args)
        result = simulate(cfg, args.output or cfg.output.dir)
    for kind, path in result.paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = Path(args.output or cfg.output.dir)
    manifest = ablate(cfg, args.axes, out)
    for r in manifest["runs"]:
        print(f"{r['label']}: {out / r['dir']}")
    print(f"manifest: {out / 'ablation.json'}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .report import evaluate_path, reference_from

    manifests = [DatasetManifest.load(p) for p in args.reference or []]
    social = None
    if args.social_proportion is not None or args.social_median_km is not None:
        social = {k: v for k, v in (("proportion", args.social_proportion), ("median_km", args.social_median_km)) if v is not None}
    reference = reference_from(manifests, social) if manifests or social else None
    result = evaluate_path(args.path, reference, args.out, plots=args.plots)
    for label, paths in result["paths"].items():
        for kind, path in paths.items():
            print(f"{label} {kind}: {path}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    m = ingest(args.path, args.kind, args.out, coordinates=args.coordinates)
    print(f"{m.kind}: {m.record_count} records written to {m.path}, {m.rejected_count} rejected")
    for r in m.rejected:
        print(f"  row {r['row']}: {r['reason']}")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    from .report import dump_entries, format_replay, replay

    entries = replay(args.run_dir, args.agent, args.day)
    sys.stdout.write(dump_entries(entries) if args.json else format_replay(entries))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="socialsim", description="Need-driven agent mobility simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def run_options(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("config", help="YAML run configuration")
        sp.add_argument("--output", "-o", help="output directory (default: output.dir from the config)")
        sp.add_argument("--seed", type=int, help="override the run seed")
        length = sp.add_mutually_exclusive_group()
        length.add_argument("--days", type=int, help="override the run length in days")
        length.add_argument("--ticks", type=int, help="override the run length in 30-minute ticks")
        sp.add_argument("--mode", choices=("sequential", "concurrent"), help="override execution.mode")
        sp.add_argument("--workers", type=int, help="override execution.workers")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="dotted config override, value parsed as YAML (repeatable)")

    sp = sub.add_parser("simulate", help="run one simulation")
    run_options(sp)
    sp.add_argument("--resume", action="store_true", help="continue the run in --output from its last checkpoint")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ablate", help="run the full model and the chosen ablations on identical seeds")
    run_options(sp)
    sp.add_argument("--axes", default="MPL", help="subset of M (motivation), P (planning), L (learning); default MPL")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("evaluate", help="compute metric reports for a run or an ablation directory")
    sp.add_argument("path", help="run directory, ablation directory, or ablation.json")
    sp.add_argument("--reference", action="append", metavar="MANIFEST", help="manifest written by ingest (repeatable)")
    sp.add_argument("--social-proportion", type=float, help="reference social-trip share in percent")
    sp.add_argument("--social-median-km", type=float, help="reference median social-trip distance")
    sp.add_argument("--out", help="report directory (default: alongside the runs)")
    sp.add_argument("--plots", action="store_true", help="also write PNG charts (needs matplotlib)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("ingest", help="validate a CSV/JSONL dataset and write its canonical form")
    sp.add_argument("path")
    sp.add_argument("--kind", required=True, choices=KINDS)
    sp.add_argument("--out", help="canonical output path (default: <input>.canonical.jsonl)")
    sp.add_argument("--coordinates", choices=COORDINATES, default="planar")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("replay", help="print one agent-day as a narrative")
    sp.add_argument("run_dir")
    sp.add_argument("agent")
    sp.add_argument("--day", type=int, default=0)
    sp.add_argument("--json", action="store_true", help="one JSON object per entry instead of text")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for e in exc.errors:
            if e not in str(exc):
                print(f"  {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidInputError, SchemaVersionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("run failed", exc_info=True)
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        out = getattr(args, "output", None)
        if out and (Path(out) / CHECKPOINT_DIR).is_dir():
            print(f"last checkpoint kept under {Path(out) / CHECKPOINT_DIR}; rerun with --resume", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
