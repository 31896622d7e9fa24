"""``intht`` command line: run, sweep-bk, sweep-mp, order3, validate-params."""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .atee import AteeParams, TheoryBounds, gradient_norm_bound, validate_params
from .config import MODES, build_config, read_config_file
from .errors import ConfigError, OutputError

log = logging.getLogger("intht")
LEVELS = ("debug", "info", "warning", "error")

# flag dest -> RunConfig field
FIELD = {"big_k": "K", "iters": "T"}
RUN_FLAGS = ("p", "n", "m", "big_k", "k", "iters", "eta", "b", "d", "delta", "mode", "order",
             "regime", "seed", "out", "hash_reuse", "theory_schedule", "include_diagonal",
             "alpha", "L", "t_inner", "scheme", "success_tol")


def _grid(text: str) -> list:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("grid is empty")
    return vals


def _add_run_flags(sp) -> None:
    g = sp.add_argument_group("run configuration")
    g.add_argument("--p", type=int, help="dimension (last coordinate is the constant)")
    g.add_argument("--n", type=int, help="samples (default 20*m)")
    g.add_argument("--m", type=int, help="batch size")
    g.add_argument("--big-k", type=int, help="true sparsity K")
    g.add_argument("--k", type=int, help="estimation sparsity (default 3K)")
    g.add_argument("--iters", type=int, help="iterations T (outer rounds for vr)")
    g.add_argument("--eta", type=float, help="step size")
    g.add_argument("--b", type=int, help="sketch buckets / output cap")
    g.add_argument("--d", type=int, help="sketch repetitions")
    g.add_argument("--delta", type=float, help="significance level (default: from the sketch)")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--order", type=int, choices=(2, 3))
    g.add_argument("--regime", choices=("uniform", "bernoulli"))
    g.add_argument("--seed", type=int)
    g.add_argument("--t-inner", type=int, help="inner steps per outer round (vr)")
    g.add_argument("--scheme", help="index code: plain-binary or repetition-R")
    g.add_argument("--alpha", type=float, help="restricted strong convexity (theory schedule)")
    g.add_argument("--L", type=float, help="restricted smoothness (theory schedule)")
    g.add_argument("--success-tol", type=float, help="relative error for the success flag")
    for name in ("hash-reuse", "theory-schedule", "include-diagonal"):
        g.add_argument(f"--{name}", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--out", help="output CSV (default stdout)")
    sp.add_argument("--config", help="key=value file; flags override it")
    sp.add_argument("--log-level", default=argparse.SUPPRESS, choices=LEVELS)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intht", description="Sparse interaction regression with sketched IHT.")
    ap.add_argument("--log-level", default="info", choices=LEVELS)
    sub = ap.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("run", help="one run, per-iteration CSV"))
    _add_run_flags(sub.add_parser("order3", help="order-3 run (p=30, K=20 defaults)"))

    bk = sub.add_parser("sweep-bk", help="recovery rate over b x K")
    _add_run_flags(bk)
    bk.add_argument("--b-grid", type=_grid, default=_grid("32,64,128,256,512"))
    bk.add_argument("--k-grid", type=_grid, default=_grid("1,5,10,20,30"))
    bk.add_argument("--repeats", type=int, default=3)
    bk.add_argument("--workers", type=int, default=1)

    mp = sub.add_parser("sweep-mp", help="exact-mode recovery rate over m x p")
    _add_run_flags(mp)
    mp.add_argument("--m-grid", type=_grid, default=_grid("1,2,5,10,20,40,60,80,99"))
    mp.add_argument("--p-grid", type=_grid, default=_grid("10,40,160,640"))
    mp.add_argument("--repeats", type=int, default=5)
    mp.add_argument("--workers", type=int, default=1)

    vp = sub.add_parser("validate-params", help="check b, d, delta against the recovery bounds")
    _add_run_flags(vp)
    vp.add_argument("--grad-norm", type=float, help="gradient norm estimate (default: theory bound)")
    vp.add_argument("--omega", type=float, default=20.0, help="entrywise bound on the true tensor")
    vp.add_argument("--grad-star", type=float, default=0.0, help="gradient norm bound at the optimum")
    vp.add_argument("--c", type=float, default=4.0, help="failure-rate control")
    return ap


def config_from_args(args, defaults=None):
    file_values = read_config_file(args.config) if args.config else {}
    flags = {FIELD.get(f, f): getattr(args, f) for f in RUN_FLAGS}
    return build_config(defaults, file_values, flags)


def _validate_params(args) -> int:
    cfg = config_from_args(args)
    bounds = TheoryBounds(L=cfg.L or 1.0, omega=args.omega, G=args.grad_star, c=args.c)
    k = cfg.k_eff
    gnorm = args.grad_norm if args.grad_norm is not None else gradient_norm_bound(bounds, k)
    report = validate_params(AteeParams(b=cfg.b, d=cfg.d, delta=cfg.delta, k_top=2 * k), gnorm, bounds)
    header = list(report)
    harness.write_csv(cfg.out, header, [report])
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "validate-params":
            return _validate_params(args)
        if args.command == "run":
            cfg = config_from_args(args)
            harness.cmd_run(cfg)
        elif args.command == "order3":
            harness.cmd_order3(config_from_args(args, harness.ORDER3_DEFAULTS))
        elif args.command == "sweep-bk":
            harness.cmd_sweep_bk(config_from_args(args), args.b_grid, args.k_grid, args.repeats, args.workers)
        elif args.command == "sweep-mp":
            cfg = config_from_args(args, harness.SWEEP_MP_DEFAULTS)
            harness.cmd_sweep_mp(cfg, args.m_grid, args.p_grid, args.repeats, args.workers)
    except ConfigError as exc:
        print(f"intht: config error: {exc}", file=sys.stderr)
        return 2
    except (OutputError, OSError) as exc:
        print(f"intht: i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
