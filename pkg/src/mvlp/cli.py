"""Command-line entry point: ``mvlp <subcommand> [options]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .closure import ClosureInfeasible
from .harness import EMIT_FLAGS, RunConfig
from .scenarios import builtin_scenarios

DEFAULT_RESOLUTIONS = (40, 60, 80, 100, 120, 140, 160, 180, 200)
DEFAULT_ENTROPIES = ("quadratic", "abs:0.5")


def _emit_list(text):
    return frozenset(p.strip() for p in text.split(",") if p.strip())


def _int_list(text):
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file supplying defaults")
    p.add_argument("--scenario")
    p.add_argument("--nx", dest="n_x", type=int)
    p.add_argument("--nxi", dest="n_xi", type=int)
    p.add_argument("--nu", dest="n_u", type=int)
    p.add_argument("--lambda-f", dest="lambda_f", type=float)
    p.add_argument("--cfl", type=float)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--entropy")
    p.add_argument("--scheme", choices=harness.SCHEME_CHOICES)
    p.add_argument("--boundary")
    p.add_argument("--cfl-rule", dest="cfl_rule")
    p.add_argument("--relax-band", dest="relax_band", action="store_true", default=None)
    p.add_argument("--exact-projection", dest="exact_projection", action="store_true",
                   default=None)
    p.add_argument("--out")
    p.add_argument("--emit", type=_emit_list,
                   help=f"comma-separated subset of {','.join(EMIT_FLAGS)}; '' for none")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvlp", description="Young-measure closure vs collocation for random conservation laws"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one scenario")
    _common(p)
    for name, axis in (("converge-x", "x"), ("converge-xi", "xi")):
        p = sub.add_parser(name, help=f"convergence study in {axis}")
        _common(p)
        p.add_argument("--resolutions", type=_int_list)
    p = sub.add_parser("compare-entropy", help="mv runs with several entropies")
    _common(p)
    p.add_argument("--entropies", default=",".join(DEFAULT_ENTROPIES))
    sub.add_parser("list-scenarios", help="print the built-in scenarios")
    return parser


_CONFIG_KEYS = ("scenario", "n_x", "n_xi", "n_u", "lambda_f", "cfl", "t_final", "entropy",
                "scheme", "boundary", "cfl_rule", "relax_band", "exact_projection", "out", "emit")


def config_from_args(args, **defaults) -> RunConfig:
    """Built-in defaults, then the config file, then explicit flags."""
    values = dict(defaults)
    if args.config:
        values.update(harness.config_values(Path(args.config).read_text()))
    for key in _CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    # an output directory without any emit setting writes everything applicable
    if values.get("out") is not None and "emit" not in values:
        values["emit"] = frozenset(EMIT_FLAGS)
    return RunConfig(**values)


def _fmt_err(err) -> str:
    return " ".join(f"{e:.6e}" for e in np.atleast_1d(err))


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    p, res = harness.execute(cfg)
    print(f"scenario {p.scenario.name}: n_x={p.sgrid.n_x} n_xi={p.rgrid.n_xi} "
          f"n_u={p.grid.counts[0]} T={p.t_final} steps={len(res.trace)}")
    if "mv" in res.fields and "collocation" in res.fields:
        print(f"l1 error mv vs collocation: {_fmt_err(harness.l1_error(res.mv, res.collocation, p.sgrid, p.rgrid))}")
    for path in harness.emit_outputs(p, res, cfg):
        print(f"wrote {path}")
    return 0


def cmd_converge(args, axis: str) -> int:
    defaults = {"scenario": "burgers-step-xi"}
    if axis == "xi":
        defaults["n_x"] = 500
    cfg = config_from_args(args, **defaults)
    resolutions = args.resolutions or list(DEFAULT_RESOLUTIONS)
    rows = harness.convergence_study(axis, resolutions, cfg)
    label = "N_x" if axis == "x" else "N_xi"
    print(f"{label:>6} {'error':>14} {'rate':>8}")
    for r in rows:
        rate = "" if r.rate is None else f"{r.rate:.3f}"
        print(f"{r.n:>6} {r.error:>14.6e} {rate:>8}")
    if "table_csv" in cfg.emit:
        if cfg.out is None:
            raise ValueError("table_csv requested but no --out directory")
        path = harness.write_table_csv(Path(cfg.out) / f"table_{axis}.csv", rows)
        print(f"wrote {path}")
    return 0


def cmd_compare(args) -> int:
    cfg = config_from_args(args, scenario="dflux-step")
    names = [e.strip() for e in args.entropies.split(",") if e.strip()]
    if not names:
        raise ValueError("need at least one entropy")
    runs = harness.compare_entropies(cfg, names)
    labels = list(runs)
    for label, (p, res) in runs.items():
        per = replace(cfg, emit=cfg.emit & {"field_csv", "measure_csv"})
        safe = label.replace(":", "_").replace("(", "_").replace(")", "").replace("=", "")
        for path in harness.emit_outputs(p, res, per, prefix=f"{safe}_"):
            print(f"wrote {path}")
    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            pa, ra = runs[labels[a]]
            _, rb = runs[labels[b]]
            d = harness.l1_error(ra.mv, rb.mv, pa.sgrid, pa.rgrid)
            print(f"l1 distance {labels[a]} vs {labels[b]}: {_fmt_err(d)}")
    return 0


def cmd_list() -> int:
    for sc in builtin_scenarios():
        print(f"{sc.name:<18} n_x={sc.n_x} n_xi={sc.n_xi} n_u={sc.n_u} T={sc.t_final} "
              f"cfl_rule={sc.cfl_rule} lambda_f={sc.lambda_f}  {sc.description}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "converge-x":
            return cmd_converge(args, "x")
        if args.command == "converge-xi":
            return cmd_converge(args, "xi")
        if args.command == "compare-entropy":
            return cmd_compare(args)
        return cmd_list()
    except (ValueError, OSError, ClosureInfeasible, FloatingPointError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"mvlp: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
