"""``deunet`` command line: train, gradcheck, sweep, reproduce.

Exit codes: 0 success, 2 bad configuration or arguments, 3 data errors,
4 failed checks.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments, oracle, runner
from .config import ConfigError, load_config
from .data import DataError
from .ode_core import DeuParams, evaluate_regime
from .sweep import parse_range, sweep_family, write_sweep

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECK = 0, 2, 3, 4


def _flip_da(regime, **kw):
    """Analytic evaluator with a sign error in dy/da (test hook for gradcheck)."""
    ev = evaluate_regime(regime, **kw)
    return type(ev)(ev.y, ev.dy_dt, -ev.dy_da, ev.dy_db, ev.dy_dc, ev.dy_dc1, ev.dy_dc2)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir

    def show(rec):
        if rec["epoch"] % max(1, cfg.epochs // 10) == 0:
            extra = f"  acc={rec['accuracy']:.4f}" if "accuracy" in rec else ""
            print(f"epoch {rec['epoch']:6d}  train_loss={rec['train_loss']:.6g}{extra}", flush=True)

    results = runner.run(cfg, on_epoch=None if args.quiet else show)
    for k, metrics in enumerate(results):
        prefix = f"fold {k}: " if len(results) > 1 else ""
        print(prefix + "  ".join(f"{key}={val:.6g}" if isinstance(val, float) else f"{key}={val}"
                                 for key, val in metrics.summary().items()))
    print(f"wrote {cfg.output_dir}/metrics.jsonl")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    evaluator = _flip_da if args.inject_fault else evaluate_regime
    report = oracle.run_gradcheck(args.trials, args.seed, evaluator=evaluator)
    print(f"{report.trials} trials, residual tol {report.residual_tol:g}, gradient tol {report.grad_tol:g}")
    for line in report.lines():
        print(line)
    print("PASS" if report.ok else "FAIL")
    return EXIT_OK if report.ok else EXIT_CHECK


def cmd_sweep(args) -> int:
    lo, hi = parse_range(args.range)
    if args.n < 2:
        raise ValueError("--n must be at least 2")
    p = DeuParams(args.a, args.b, args.c, args.c1, args.c2)
    values = [float(v) for v in args.values.split(",")] if args.values else []
    t, cols = sweep_family(p, lo, hi, args.n, args.vary, values)
    write_sweep(args.out, t, cols, p)
    print(f"wrote {len(t)} points x {len(cols)} series to {args.out}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    table = experiments.reproduce(args.name, data_dir=args.data_dir, extended=args.extended,
                                  output_root=args.output_dir)
    print(table.render())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deunet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="ODE residual and finite-difference checks over all regimes")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("sweep", help="write (t, y) plot data for one activation or a family")
    for name, default in (("a", 0.0), ("b", 1.0), ("c", 0.0), ("c1", 0.0), ("c2", 0.0)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--range", default="-5:5", help="lo:hi (write --range=-2:2 when lo is negative)")
    p.add_argument("--n", type=int, default=1001)
    p.add_argument("--vary", choices=["a", "b", "c", "c1", "c2"], help="coefficient to vary")
    p.add_argument("--values", help="comma-separated values for --vary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a canned experiment and print its table")
    p.add_argument("name", choices=sorted(experiments.EXPERIMENTS))
    p.add_argument("--data-dir", help="data directory (default: $DEU_DATA_DIR)")
    p.add_argument("--output-dir", default="runs/reproduce")
    p.add_argument("--extended", action="store_true", help="also run the large MNIST MLP")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
