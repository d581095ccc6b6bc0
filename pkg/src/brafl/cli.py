"""Command line entry point.

    brafl run CONFIG [--out DIR]
    brafl sweep CONFIG --epsilons 0,0.1,0.2 [--out DIR] [--jobs N]
    brafl oracle-check CONFIG
    brafl selftest

Output goes to ``--out``, else ``$BRAFL_OUTPUT_DIR``, else ``./runs``. On
failure a single ``error: {json}`` line is printed to stderr and the exit
code is nonzero (2 for configuration errors, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, parse_experiment

DEFAULT_OUT_ENV = "BRAFL_OUTPUT_DIR"


def _out_dir(arg: str | None, config: str) -> Path:
    base = arg or os.environ.get(DEFAULT_OUT_ENV) or "runs"
    return Path(base) if arg else Path(base) / Path(config).stem


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None


def _cmd_run(args) -> int:
    from .experiment import run_experiment

    text = _read(args.config)
    out = _out_dir(args.out, args.config)
    manifest = run_experiment(text, out, args.config)
    summary = json.loads((out / "summary.json").read_text())
    print(json.dumps(summary, sort_keys=True))
    print(f"wrote {len(manifest.files)} files to {out}")
    return 0


def _cmd_sweep(args) -> int:
    from .experiment import sweep

    text = _read(args.config)
    try:
        eps = [float(s) for s in args.epsilons.split(",") if s.strip()]
    except ValueError:
        raise ConfigError("--epsilons", "expected comma-separated fractions") from None
    if not eps:
        raise ConfigError("--epsilons", "at least one value required")
    out = _out_dir(args.out, args.config)
    sweep(text, eps, out, args.config, jobs=args.jobs)
    print((out / "summary.csv").read_text(), end="")
    return 0


def _cmd_oracle_check(args) -> int:
    from .experiment import oracle_check

    exp = parse_experiment(_read(args.config))
    outcomes = oracle_check(exp.oracle)
    bad = [o for o in outcomes if not o.satisfied or not o.jensen_ok]
    worst = max(o.worst_ratio for o in outcomes)
    bra_ok = sum(o.bra_ratio <= 1.0 + 1e-9 for o in outcomes)
    for o in bad:
        print(f"FAIL instance {o.instance}: K={o.K} M={o.M} d={o.d} worst_ratio={o.worst_ratio!r}")
    print(f"{'PASS' if not bad else 'FAIL'} exact-subset certificate: {len(outcomes) - len(bad)}/{len(outcomes)} "
          f"instances, worst ratio {worst:.6g}")
    print(f"info: BRA output within the same bound on {bra_ok}/{len(outcomes)} instances")
    return 0 if not bad else 1


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(args.seed) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brafl", description="Bayesian robust aggregation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one federated simulation")
    r.add_argument("config")
    r.add_argument("--out")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="repeat a run over malicious fractions")
    s.add_argument("config")
    s.add_argument("--epsilons", required=True)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=_cmd_sweep)

    o = sub.add_parser("oracle-check", help="exhaustive robustness-certificate suite")
    o.add_argument("config")
    o.set_defaults(func=_cmd_oracle_check)

    t = sub.add_parser("selftest", help="fast property checks")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=_cmd_selftest)
    return p


def _error(kind: str, message: str, **extra) -> None:
    print("error: " + json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        _error("config", str(exc), key=exc.key)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        _error(type(exc).__name__, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
