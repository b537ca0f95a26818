"""Command-line front end: ``lpthresh {solve,bench,sweep-p,gen}``.

Exit codes: 0 success, 1 invalid input or flags, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from lpthresh import bench
from lpthresh.errors import ContractError
from lpthresh.problems import generate_instance, load_instance, save_instance
from lpthresh.solvers import (
    DEFAULT_EPS_FLOOR,
    DEFAULT_EPS_SCALE,
    DEFAULT_ETA,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    Algorithm,
    SolverConfig,
    relative_error,
    solve,
)

EXIT_OK, EXIT_CONTRACT, EXIT_IO = 0, 1, 2
TRACE_HEADER = ["iter", "h1", "step_norm", "lambda", "support"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for I/O failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONTRACT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _add_solver_flags(p: argparse.ArgumentParser, with_p: bool = True) -> None:
    g = p.add_argument_group("solver")
    if with_p:
        g.add_argument("--p", type=float, default=0.7, help="exponent of the modified lp penalty (default: %(default)s)")
    g.add_argument("--eta", type=float, default=DEFAULT_ETA, help="step size is (1-eta)/||A||^2 (default: %(default)s)")
    g.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative step tolerance (default: %(default)s)")
    g.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS, help="iteration cap (default: %(default)s)")
    g.add_argument("--eps-scale", type=float, default=DEFAULT_EPS_SCALE, help="epsilon scale factor (default: %(default)s)")
    g.add_argument("--eps-floor", type=float, default=DEFAULT_EPS_FLOOR, help="epsilon lower bound (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpthresh", description="Sparse recovery by modified lp-norm iterative thresholding.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one instance and print its relative error")
    s.add_argument("instance", nargs="?", help="instance file written by `gen`")
    s.add_argument("--m", type=int, help="measurements (on-the-fly instance)")
    s.add_argument("--n", type=int, help="signal length (on-the-fly instance)")
    s.add_argument("--r", type=int, help="sparsity (on-the-fly instance; default for the instance file: its own r)")
    s.add_argument("--seed", type=int, help="instance seed (on-the-fly instance)")
    s.add_argument("--alg", choices=[a.value for a in Algorithm], default="it", help="algorithm (default: %(default)s)")
    s.add_argument("--fixed-lambda", type=float, default=None, help="use this lambda instead of the adaptive rule")
    s.add_argument("--trace", help="write the per-iteration trace CSV here")
    _add_solver_flags(s)

    for name, helptext in (("bench", "success-rate sweep over r for several algorithms"),
                           ("sweep-p", "IT success-rate sweep over r for several p")):
        b = sub.add_parser(name, help=helptext)
        b.add_argument("--config", help="flat `key = value` file; flags given explicitly override it")
        b.add_argument("--out", help="output directory (required)")
        b.add_argument("--m", type=int, default=None, help="measurements (default: 256)")
        b.add_argument("--n", type=int, default=None, help="signal length (default: 1024)")
        b.add_argument("--r", dest="r_values", type=_ints, default=None,
                       help="comma-separated sparsities (default: 10,20,...,90)")
        b.add_argument("--p", dest="p_values", type=_floats, default=None,
                       help="comma-separated p values for IT (default: 0.7 for bench, 0.1,0.3,0.5,0.7,0.9 for sweep-p)")
        if name == "bench":
            b.add_argument("--algs", type=lambda t: tuple(Algorithm(a) for a in t.replace(",", " ").split()),
                           default=None, help="comma-separated algorithms (default: it,soft,half)")
        b.add_argument("--trials", type=int, default=None, help=f"trials per cell (default: {bench.DEFAULT_TRIALS})")
        b.add_argument("--threshold", type=float, default=None,
                       help=f"success threshold on relative error (default: {bench.DEFAULT_SUCCESS_THRESHOLD})")
        b.add_argument("--seed", type=int, default=None, help="master seed (default: 0)")
        b.add_argument("--distribution", choices=["gaussian", "rademacher"], default=None,
                       help="nonzero values of x0 (default: gaussian)")
        b.add_argument("--jobs", type=int, default=None,
                       help=f"worker processes (default: CPU count, {bench.default_jobs()} here)")
        b.add_argument("--no-timing", action="store_true", help="write wall_time_s as 0 for byte-stable output")
        for opt, typ, dflt in (("--eta", float, DEFAULT_ETA), ("--tol", float, DEFAULT_TOL),
                               ("--max-iters", int, DEFAULT_MAX_ITERS), ("--eps-scale", float, DEFAULT_EPS_SCALE),
                               ("--eps-floor", float, DEFAULT_EPS_FLOOR)):
            b.add_argument(opt, type=typ, default=None, help=f"solver setting (default: {dflt})")

    g = sub.add_parser("gen", help="generate an instance file and print its checksum")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--distribution", choices=["gaussian", "rademacher"], default="gaussian",
                   help="nonzero values of x0 (default: %(default)s)")
    g.add_argument("--out", required=True, help="instance file to write")
    return parser


def _solver_config(args, alg: str, r: int) -> SolverConfig:
    return SolverConfig(
        algorithm=alg, p=args.p, eta=args.eta, sparsity_r=r, tolerance=args.tol,
        max_iterations=args.max_iters, epsilon_scale=args.eps_scale, epsilon_floor=args.eps_floor,
        fixed_lambda=args.fixed_lambda,
    )


def cmd_solve(args) -> int:
    if args.instance:
        try:
            inst = load_instance(args.instance)
        except (OSError, ContractError) as exc:
            print(f"lpthresh solve: cannot read instance {args.instance}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        missing = [f"--{k}" for k in ("m", "n", "r", "seed") if getattr(args, k) is None]
        if missing:
            raise UsageError(f"need an instance file or {' '.join(missing)}")
        inst = generate_instance(args.m, args.n, args.r, args.seed)
    r = args.r if args.r is not None else inst.sparsity
    res = solve(inst.A, inst.b, _solver_config(args, args.alg, r))
    re_val = relative_error(res.solution, inst.x0)
    print(f"alg={args.alg} m={inst.m} n={inst.n} r={inst.sparsity} re={re_val:.6e} "
          f"iterations={res.iterations} termination={res.termination.value}")
    if args.trace:
        try:
            with open(args.trace, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TRACE_HEADER)
                for it, h1, step, lam, supp in res.trace.rows():
                    w.writerow([it, bench.fmt_float(h1), bench.fmt_float(step), bench.fmt_float(lam), supp])
        except OSError as exc:
            print(f"lpthresh solve: cannot write trace {args.trace}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


# keys accepted in --config files, with their parsers
CONFIG_KEYS = {
    "m": int, "n": int, "r_values": _ints, "p_values": _floats, "trials": int,
    "success_threshold": float, "master_seed": int, "distribution": str,
    "algorithms": lambda t: tuple(Algorithm(a) for a in t.replace(",", " ").split()),
    "eta": float, "tolerance": float, "max_iterations": int,
    "epsilon_scale": float, "epsilon_floor": float, "jobs": int, "record_timing": lambda t: t.lower() in ("1", "true", "yes"),
}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"{path}:{lineno}: expected `key = value`")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ContractError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ContractError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _sweep_config(args, p_only: bool) -> tuple[bench.SweepConfig, int]:
    conf = read_config_file(args.config) if args.config else {}
    flags = {
        "m": args.m, "n": args.n, "r_values": args.r_values, "p_values": args.p_values,
        "trials": args.trials, "success_threshold": args.threshold, "master_seed": args.seed,
        "distribution": args.distribution, "eta": args.eta, "tolerance": args.tol,
        "max_iterations": args.max_iters, "epsilon_scale": args.eps_scale, "epsilon_floor": args.eps_floor,
    }
    if not p_only:
        flags["algorithms"] = args.algs
    conf.update({k: v for k, v in flags.items() if v is not None})
    if args.no_timing:
        conf["record_timing"] = False
    jobs = conf.pop("jobs", None)
    if args.jobs is not None:
        jobs = args.jobs
    if jobs is None:
        jobs = bench.default_jobs()
    solver_keys = ("eta", "tolerance", "max_iterations", "epsilon_scale", "epsilon_floor")
    solver = SolverConfig(**{k: conf.pop(k) for k in solver_keys if k in conf})
    if p_only:
        if conf.get("algorithms", (Algorithm.IT,)) != (Algorithm.IT,):
            raise ContractError("sweep-p runs the IT algorithm only")
        conf["algorithms"] = (Algorithm.IT,)
        conf.setdefault("p_values", (0.1, 0.3, 0.5, 0.7, 0.9))
    return bench.SweepConfig(solver=solver, **conf), jobs


def _print_table(report: bench.BenchmarkReport) -> None:
    print(f"{'algorithm':<10}{'p':>6}{'r':>6}{'success':>10}{'mean_re':>14}{'mean_iters':>12}")
    for c in report.cells:
        p = "" if c.p is None else f"{c.p:g}"
        print(f"{c.algorithm.value:<10}{p:>6}{c.r:>6}{c.success_rate:>10.2f}{c.mean_re:>14.3e}{c.mean_iters:>12.1f}")
    if report.best_p is not None:
        print(f"best p (area under success curve): {report.best_p:g}")


def cmd_bench(args, p_only: bool = False) -> int:
    if not args.out:
        raise UsageError("--out is required")
    config, jobs = _sweep_config(args, p_only)
    log = logging.getLogger("lpthresh.cli")
    progress = (lambda i, k: log.info("unit %d/%d", i, k)) if args.verbose else None
    if p_only:
        report = bench.sweep_p(config, jobs=jobs, progress=progress)
    else:
        report = bench.run_sweep(config, jobs=jobs, progress=progress)
    bench.write_report(report, args.out)
    _print_table(report)
    return EXIT_OK


def cmd_gen(args) -> int:
    inst = generate_instance(args.m, args.n, args.r, args.seed, args.distribution)
    try:
        digest = save_instance(inst, args.out)
    except OSError as exc:
        print(f"lpthresh gen: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"sha256={digest} path={args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "sweep-p":
            return cmd_bench(args, p_only=True)
        return cmd_gen(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lpthresh {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except ContractError as exc:
        print(f"lpthresh {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"lpthresh {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
