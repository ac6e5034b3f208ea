"""Command-line entry point: ``randompursuit {run,bench,verify,sweep-mu,scan-dims}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness, theory
from .linesearch import LineSearchConfig
from .objectives import make_benchmark
from .solvers import GRADIENT_METHODS, SolverConfig, calibrate_sigma0, run


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _sigma0(text: str):
    if text == "auto":
        return None
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("sigma0 must be positive or 'auto'")
    return v


def _ladder(acc):
    return harness.default_ladder() if acc is None else harness.ladder_to(acc)


def _add_search_flags(p, defaults: bool):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--mu", type=float, default=d(1e-5), help="line-search / finite-difference accuracy")
    p.add_argument("--ls-mode", choices=["absolute", "relative"], default=d("relative"))
    p.add_argument("--precision", choices=["double", "compensated"], default=d("double"),
                   help="compensated evaluates f(x + h u) in double-double for the line search")
    p.add_argument("--sampler", choices=["sphere", "discrete"], default=d("sphere"),
                   help="direction source for rp")
    p.add_argument("--rg-dirs", choices=["sphere", "gaussian"], default=d("gaussian"),
                   help="direction distribution for rg and fg")
    p.add_argument("--sigma0", type=_sigma0, default=None, help="initial ES step, 'auto' to calibrate")


def cmd_run(args) -> int:
    spec = make_benchmark(args.function, args.dim)
    algo = args.algo.replace("-", "_")
    N = args.iters or harness.default_cap(algo, spec.dim)
    cfg = SolverConfig(algorithm=algo, N=N, mu=args.mu, seed=args.seed, sampler_kind=args.sampler,
                       sigma0=args.sigma0, rg_dirs=args.rg_dirs, accuracies=_ladder(args.accuracy),
                       stop_at_target=not args.no_stop, store_iterates=args.store_iterates)
    ls = LineSearchConfig(mode=args.ls_mode, mu=args.mu, precision=args.precision)
    tr = run(spec, cfg, ls)
    scale = 1 if cfg.algorithm in GRADIENT_METHODS else spec.dim
    print(f"# {cfg.algorithm} on {spec.name} n={spec.dim} seed={args.seed}")
    print(f"# iterations={tr.iterations} fes={tr.total_fes} final_accuracy="
          f"{(tr.values[-1] - spec.f_star) / spec.S:.6g}")
    print("accuracy,its,fes,its_scaled,fes_per_n")
    for acc, i, f in zip(tr.accuracies, tr.its, tr.fes):
        if i < 0:
            print(f"{acc:.6g},,,,")
        else:
            print(f"{acc:.6g},{i},{f},{i / scale:.6g},{f / spec.dim:.6g}")
    if args.out:
        rows = np.column_stack([np.arange(tr.values.size), tr.values])
        header = "iteration,value"
        if tr.iterates is not None:
            rows = np.column_stack([rows, tr.iterates])
            header += "," + ",".join(f"x{i}" for i in range(spec.dim))
        np.savetxt(args.out, rows, delimiter=",", header=header, comments="", fmt="%.17g")
    return 0


def cmd_bench(args) -> int:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    overrides = {
        "function": args.function, "dim": args.dim, "repetitions": args.reps, "base_seed": args.seed,
        "mu": args.mu, "ls_mode": args.ls_mode, "precision": args.precision, "rg_dirs": args.rg_dirs,
        "sigma0": args.sigma0, "max_iters": args.max_iters, "workers": args.workers,
        "output_path": args.out,
    }
    if args.sampler is not None:
        overrides["sampler"] = args.sampler
    if args.algos is not None:
        overrides["algorithms"] = args.algos.split(",")
    if args.accuracy is not None:
        overrides["accuracies"] = harness.ladder_to(args.accuracy)
    data.update({k: v for k, v in overrides.items() if v is not None})
    config = harness.ExperimentConfig.from_mapping(data)
    result = harness.run_experiment(config)
    if config.output_path:
        harness.export_results(result, config.output_path, "csv")
    else:
        sys.stdout.write(harness.stats_csv(result.stats))
    if args.markdown:
        harness.export_results(result, args.markdown, "markdown")
    if args.plot_data:
        harness.export_results(result, args.plot_data, "plot-data", max_points=args.plot_points)
    print(harness.stats_markdown([s for s in result.stats if s.accuracy == config.accuracies[-1]]),
          file=sys.stderr)
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    for algo, why in result.skipped.items():
        print(f"skipped {algo}: {why}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    results = theory.run_verification_suite(quick=args.quick, seed=args.seed)
    print(theory.format_results(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep_mu(args) -> int:
    sw = harness.mu_sweep(args.function, args.dim, tuple(args.mus), args.reps, args.accuracy,
                          base_seed=args.seed, ls_mode=args.ls_mode, precision=args.precision,
                          workers=args.workers)
    text = harness.sweep_csv(sw.rows, "mu")
    _emit(text, args.out)
    print(f"ITS/n spread {sw.its_spread:.1%}, FES/n max/min ratio {sw.fes_ratio:.2f}", file=sys.stderr)
    return 0


def cmd_scan_dims(args) -> int:
    rows = harness.scan_dims(args.function, tuple(args.dims), args.algo.replace("-", "_"), args.reps,
                             args.accuracy, base_seed=args.seed, mu=args.mu, ls_mode=args.ls_mode,
                             workers=args.workers)
    _emit(harness.sweep_csv(rows, "n"), args.out)
    return 0


def cmd_sigma0(args) -> int:
    spec = make_benchmark(args.function, args.dim)
    print(f"{calibrate_sigma0(spec, None, args.p, args.trials, seed=args.seed):.6g}")
    return 0


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randompursuit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run of one algorithm")
    p.add_argument("--function", default="sphere")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--algo", default="rp", choices=["rp", "arp", "rg", "fg", "es", "gm", "gm-ls", "gm_ls"])
    p.add_argument("--iters", type=int, default=None, help="iteration cap (default: protocol cap)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--accuracy", type=float, default=None, help="terminal relative accuracy")
    p.add_argument("--no-stop", action="store_true", help="run all iterations even after the target")
    p.add_argument("--store-iterates", action="store_true")
    p.add_argument("--out", help="CSV file for the per-iteration trace")
    _add_search_flags(p, defaults=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="repeated runs with aggregated statistics")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--function")
    p.add_argument("--dim", type=int)
    p.add_argument("--algos", help="comma separated, e.g. rp,arp,rg,fg,es,gm,gm-ls")
    p.add_argument("--reps", type=int)
    p.add_argument("--accuracy", type=float, help="terminal relative accuracy (default 2^-19)")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV results file (default: stdout)")
    p.add_argument("--markdown", help="also write a markdown table here")
    p.add_argument("--plot-data", help="also write convergence series here")
    p.add_argument("--plot-points", type=int, default=200)
    _add_search_flags(p, defaults=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="numerical checks of the convergence analysis")
    p.add_argument("--quick", action="store_true", help="smaller samples")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep-mu", help="sensitivity to the line-search accuracy")
    p.add_argument("--function", default="ellipsoid")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--mus", type=_floats, default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10])
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--accuracy", type=float, default=harness.TERMINAL_ACCURACY)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ls-mode", choices=["absolute", "relative"], default="relative")
    p.add_argument("--precision", choices=["double", "compensated"], default="double")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_mu)

    p = sub.add_parser("scan-dims", help="iterations per dimension across n")
    p.add_argument("--function", default="sphere")
    p.add_argument("--dims", type=_ints, default=[4, 8, 16, 32, 64, 128, 256, 512, 1024])
    p.add_argument("--algo", default="rp")
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--accuracy", type=float, default=harness.TERMINAL_ACCURACY)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mu", type=float, default=1e-5)
    p.add_argument("--ls-mode", choices=["absolute", "relative"], default="relative")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan_dims)

    p = sub.add_parser("sigma0", help="calibrate the initial ES step size")
    p.add_argument("--function", default="sphere")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--p", type=float, default=0.27)
    p.add_argument("--trials", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sigma0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
