"""Command-line entry point: ``graphent <verb> [options]``.

Exit codes: 0 success (including a "not fully entangled" verdict), 2 usage
error, 3 validation failure, 4 coverage gap, 5 numeric-contract failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import ContractViolation, CoverageError, GraphentError, UnreachableBranch, ValidationError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_COVERAGE = 4
EXIT_NUMERIC = 5
EXIT_OTHER = 1


def _common(p: argparse.ArgumentParser, *, seed=False, shots=False, resamples=False, noise=False):
    p.add_argument("--config", metavar="PATH", help="experiment YAML (defaults apply when omitted)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    if seed:
        p.add_argument("--seed", type=int, metavar="N", help="master seed")
    if shots:
        p.add_argument("--shots", type=int, metavar="N", help="shots per measurement setting")
    if resamples:
        p.add_argument("--resamples", type=int, metavar="N", help="bootstrap resamples (at least 100)")
    if noise:
        p.add_argument("--noise", metavar="p1,p2,ro0,ro1", help="gate and readout error rates")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphent", description="Graph-state entanglement experiments.")
    ap.add_argument("--version", action="version", version=f"graphent {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="simulate one tomography dataset per quad")
    _common(p, seed=True, shots=True, noise=True)

    p = sub.add_parser("ingest", help="validate and store externally measured datasets")
    _common(p)
    p.add_argument("files", nargs="+", type=Path, help="dataset JSON files")

    p = sub.add_parser("analyze", help="negativities, witnesses and bootstrap intervals")
    _common(p, seed=True, resamples=True)

    p = sub.add_parser("report", help="render figures and print the negativity table")
    _common(p)

    p = sub.add_parser("run", help="simulate, analyze and report in one go")
    _common(p, seed=True, shots=True, resamples=True, noise=True)

    p = sub.add_parser("config-init", help="write a configuration file with every default")
    p.add_argument("--out", metavar="DIR", help="write DIR/config.yaml instead of printing")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    return ap


def _config(args):
    from .config import load_config

    cfg = load_config(args.config)
    return cfg.with_overrides(
        seed=getattr(args, "seed", None),
        shots=getattr(args, "shots", None),
        resamples=getattr(args, "resamples", None),
        noise=getattr(args, "noise", None),
    )


def _dispatch(args) -> int:
    from . import pipeline
    from .report import format_table, run_report

    if args.verb == "config-init":
        from .config import default_config_text

        text = default_config_text()
        if args.out is None:
            sys.stdout.write(text)
            return EXIT_OK
        target = Path(args.out) / "config.yaml"
        if target.exists() and not args.force:
            raise ValidationError(f"{target} exists; pass --force to overwrite")
        pipeline.write_atomic(target, text)
        print(f"wrote {target}")
        return EXIT_OK

    cfg = _config(args)
    out = Path(args.out or cfg.output_dir)
    if args.verb == "simulate":
        arts = pipeline.run_simulate(cfg, out)
        print(f"wrote {len(arts)} datasets to {out / 'datasets'}")
    elif args.verb == "ingest":
        arts = pipeline.run_ingest(cfg, args.files, out)
        print(f"stored {len(arts)} datasets under {out / 'datasets'}")
    elif args.verb in ("analyze", "run"):
        result = pipeline.run_all(cfg, out) if args.verb == "run" else pipeline.run_analyze(cfg, out)
        sig = sum(w.significant for w in result.witnesses)
        print(f"fully entangled: {result.fully_entangled}; significant chains: {sig} of {len(result.witnesses)}")
        print(f"reports in {out / 'reports'}")
    elif args.verb == "report":
        figs = run_report(cfg, out)
        print(format_table(out / "reports"))
        print(f"figures: {', '.join(str(out / 'figures' / f) for f in sorted(figs))}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"graphent: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CoverageError as exc:
        print(f"graphent: missing data: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (ContractViolation, UnreachableBranch) as exc:
        print(f"graphent: numeric contract failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GraphentError as exc:
        print(f"graphent: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
