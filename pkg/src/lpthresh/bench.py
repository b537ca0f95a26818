"""Success-rate-versus-sparsity sweeps over seeded recovery trials.

Every (r, trial) pair gets one instance, seeded from the master seed, and
all requested solver variants run on that same instance. Results are
sorted before aggregation, so worker count never changes the output.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from lpthresh import __version__
from lpthresh.errors import ContractError
from lpthresh.problems import GENERATOR_ID, NORMAL_METHOD_ID, VALUE_DISTRIBUTIONS, derive_seed, generate_instance
from lpthresh.solvers import Algorithm, SolverConfig, Termination, relative_error, solve

log = logging.getLogger(__name__)

TRIALS_HEADER = ["algorithm", "p", "m", "n", "r", "trial", "seed", "re", "success", "iterations", "wall_time_s", "termination"]
AGGREGATE_HEADER = ["algorithm", "p", "r", "success_rate", "mean_re", "mean_iters"]
TRIALS_FILE = "trials.csv"
AGGREGATE_FILE = "aggregate.csv"
METADATA_FILE = "metadata.json"

DEFAULT_SUCCESS_THRESHOLD = 1e-3
DEFAULT_TRIALS = 20


def fmt_float(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class SweepConfig:
    m: int = 256
    n: int = 1024
    r_values: tuple[int, ...] = (10, 20, 30, 40, 50, 60, 70, 80, 90)
    p_values: tuple[float, ...] = (0.7,)
    algorithms: tuple[Algorithm, ...] = (Algorithm.IT, Algorithm.SOFT, Algorithm.HALF)
    trials: int = DEFAULT_TRIALS
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD
    master_seed: int = 0
    distribution: str = "gaussian"
    solver: SolverConfig = field(default_factory=SolverConfig)
    # Off: wall times are written as 0 so trial files compare byte-for-byte.
    record_timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "r_values", tuple(int(r) for r in self.r_values))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "algorithms", tuple(Algorithm(a) for a in self.algorithms))
        self.validate()

    def validate(self) -> None:
        if self.trials < 1:
            raise ContractError(f"trials must be >= 1, got {self.trials}")
        if not self.r_values:
            raise ContractError("r_values is empty")
        if not self.algorithms:
            raise ContractError("algorithms is empty")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ContractError("algorithms contains duplicates")
        if not 1 <= self.m < self.n:
            raise ContractError(f"need 1 <= m < n, got m={self.m}, n={self.n}")
        for r in self.r_values:
            if not 1 <= r < self.m:
                raise ContractError(f"every r must satisfy 1 <= r < m={self.m}, got r={r}")
        if Algorithm.IT in self.algorithms:
            if not self.p_values:
                raise ContractError("p_values is empty")
            for p in self.p_values:
                if not 0.0 < p < 1.0:
                    raise ContractError(f"p values must lie in (0, 1), got {p}")
        if not self.success_threshold > 0:
            raise ContractError("success_threshold must be positive")
        if self.distribution not in VALUE_DISTRIBUTIONS:
            raise ContractError(f"distribution must be one of {VALUE_DISTRIBUTIONS}")

    def variants(self) -> list[tuple[Algorithm, float | None]]:
        out = []
        for alg in self.algorithms:
            if alg is Algorithm.IT:
                out.extend((alg, p) for p in self.p_values)
            else:
                out.append((alg, None))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithms"] = [a.value for a in self.algorithms]
        d["solver"]["algorithm"] = self.solver.algorithm.value
        return d


@dataclass(frozen=True)
class TrialRecord:
    algorithm: Algorithm
    p: float | None
    m: int
    n: int
    r: int
    trial: int
    seed: int
    relative_error: float
    success: bool
    iterations: int
    wall_time: float
    termination: str

    def row(self) -> list[str]:
        return [
            self.algorithm.value,
            "" if self.p is None else fmt_float(self.p),
            str(self.m), str(self.n), str(self.r), str(self.trial), str(self.seed),
            fmt_float(self.relative_error),
            "1" if self.success else "0",
            str(self.iterations),
            fmt_float(self.wall_time),
            self.termination,
        ]

    def key(self):
        return (self.algorithm.value, -1.0 if self.p is None else self.p, self.r, self.trial)


@dataclass(frozen=True)
class CellSummary:
    algorithm: Algorithm
    p: float | None
    r: int
    success_rate: float
    mean_re: float
    mean_iters: float
    trials: int

    def row(self) -> list[str]:
        return [
            self.algorithm.value,
            "" if self.p is None else fmt_float(self.p),
            str(self.r),
            fmt_float(self.success_rate),
            fmt_float(self.mean_re),
            fmt_float(self.mean_iters),
        ]


@dataclass
class BenchmarkReport:
    config: SweepConfig
    trials: list[TrialRecord]
    cells: list[CellSummary]
    metadata: dict
    best_p: float | None = None

    def cell(self, algorithm, r: int, p: float | None = None) -> CellSummary:
        algorithm = Algorithm(algorithm)
        for c in self.cells:
            if c.algorithm is algorithm and c.r == r and (p is None or c.p == p):
                return c
        raise KeyError((algorithm, r, p))

    def curve(self, algorithm, p: float | None = None) -> list[float]:
        """Success rates over ``config.r_values`` for one variant."""
        return [self.cell(algorithm, r, p).success_rate for r in self.config.r_values]


def _run_unit(config: SweepConfig, r: int, trial: int) -> list[TrialRecord]:
    seed = derive_seed(config.master_seed, config.m, config.n, r, trial)
    records = []
    with threadpool_limits(limits=1):
        inst = generate_instance(config.m, config.n, r, seed, config.distribution)
        for alg, p in config.variants():
            scfg = replace(config.solver, algorithm=alg, sparsity_r=r, p=config.solver.p if p is None else p)
            t0 = time.perf_counter()
            res = solve(inst.A, inst.b, scfg)
            elapsed = time.perf_counter() - t0 if config.record_timing else 0.0
            if res.termination is Termination.DEGENERATE_INPUT:
                re_val = math.inf
            else:
                re_val = relative_error(res.solution, inst.x0)
            records.append(TrialRecord(
                algorithm=alg, p=p, m=config.m, n=config.n, r=r, trial=trial, seed=seed,
                relative_error=re_val,
                success=bool(re_val <= config.success_threshold),
                iterations=res.iterations,
                wall_time=elapsed,
                termination=res.termination.value,
            ))
    return records


def _run_unit_star(args):
    return _run_unit(*args)


def aggregate(trials: list[TrialRecord]) -> list[CellSummary]:
    groups: dict[tuple, list[TrialRecord]] = {}
    for t in sorted(trials, key=TrialRecord.key):
        groups.setdefault((t.algorithm, t.p, t.r), []).append(t)
    cells = []
    for (alg, p, r), recs in groups.items():
        k = len(recs)
        cells.append(CellSummary(
            algorithm=alg, p=p, r=r,
            success_rate=sum(t.success for t in recs) / k,
            mean_re=math.fsum(t.relative_error for t in recs) / k,
            mean_iters=sum(t.iterations for t in recs) / k,
            trials=k,
        ))
    return cells


def _metadata(config: SweepConfig, jobs: int) -> dict:
    return {
        "config": config.to_dict(),
        "rng": {"generator": GENERATOR_ID, "normal_method": NORMAL_METHOD_ID, "seed_derivation": "blake2b-64(master,m,n,r,trial)>>1"},
        "code_version": __version__,
        "jobs": jobs,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def run_sweep(config: SweepConfig, jobs: int = 1, progress=None) -> BenchmarkReport:
    """Run every (r, trial) unit of ``config`` and aggregate per cell.

    ``jobs > 1`` spreads units over a process pool. A degenerate solve is
    recorded as a failed trial and never stops the sweep.
    """
    config.validate()
    units = [(config, r, t) for r in config.r_values for t in range(config.trials)]
    jobs = max(1, int(jobs))
    trials: list[TrialRecord] = []
    if jobs == 1:
        for i, u in enumerate(units):
            trials.extend(_run_unit(*u))
            if progress:
                progress(i + 1, len(units))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, recs in enumerate(pool.map(_run_unit_star, units, chunksize=1)):
                trials.extend(recs)
                if progress:
                    progress(i + 1, len(units))
    trials.sort(key=TrialRecord.key)
    report = BenchmarkReport(config=config, trials=trials, cells=aggregate(trials), metadata=_metadata(config, jobs))
    log.info("sweep finished: %d trials, %d cells", len(trials), len(report.cells))
    return report


def success_auc(r_values, rates) -> float:
    """Trapezoidal area under a success-rate curve; a single point is its own area."""
    r = np.asarray(r_values, dtype=float)
    y = np.asarray(rates, dtype=float)
    if r.size == 1:
        return float(y[0])
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(r)))


def best_p(report: BenchmarkReport) -> float:
    # ties on success area go to the p with the smaller area under mean RE
    rs = report.config.r_values

    def score(p):
        auc = success_auc(rs, report.curve(Algorithm.IT, p))
        re_area = success_auc(rs, [min(report.cell(Algorithm.IT, r, p).mean_re, 1e300) for r in rs])
        return (auc, -re_area)

    return max(report.config.p_values, key=score)


def sweep_p(config: SweepConfig, jobs: int = 1, progress=None) -> BenchmarkReport:
    """IT-only sweep over ``config.p_values``; sets ``best_p`` on the report."""
    if not config.p_values:
        raise ContractError("p_values is empty")
    if tuple(config.algorithms) != (Algorithm.IT,):
        raise ContractError("sweep_p runs the IT algorithm only; set algorithms to (it,)")
    report = run_sweep(config, jobs=jobs, progress=progress)
    report.best_p = best_p(report)
    report.metadata["best_p"] = report.best_p
    report.metadata["auc"] = {
        fmt_float(p): success_auc(config.r_values, report.curve(Algorithm.IT, p)) for p in config.p_values
    }
    log.info("best p by area under success curve: %s", report.best_p)
    return report


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trials_csv(trials: list[TrialRecord]) -> str:
    return _csv_text(TRIALS_HEADER, (t.row() for t in trials))


def aggregate_csv(cells: list[CellSummary]) -> str:
    return _csv_text(AGGREGATE_HEADER, (c.row() for c in cells))


def write_report(report: BenchmarkReport, path) -> dict[str, Path]:
    """Write trials.csv, aggregate.csv and metadata.json into directory ``path``."""
    out = Path(path)
    files = {"trials": out / TRIALS_FILE, "aggregate": out / AGGREGATE_FILE, "metadata": out / METADATA_FILE}
    try:
        out.mkdir(parents=True, exist_ok=True)
        files["trials"].write_text(trials_csv(report.trials), encoding="utf-8", newline="")
        files["aggregate"].write_text(aggregate_csv(report.cells), encoding="utf-8", newline="")
        meta = dict(report.metadata)
        meta["written_at"] = datetime.now(timezone.utc).isoformat()
        files["metadata"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc.strerror or exc}") from exc
    return files


def read_trials(path) -> list[TrialRecord]:
    """Parse a trials CSV written by :func:`write_report`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRIALS_HEADER:
            raise ContractError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            alg, p, m, n, r, trial, seed, re_val, success, iters, wall, term = row
            out.append(TrialRecord(
                algorithm=Algorithm(alg), p=None if p == "" else float(p),
                m=int(m), n=int(n), r=int(r), trial=int(trial), seed=int(seed),
                relative_error=float(re_val), success=success == "1",
                iterations=int(iters), wall_time=float(wall), termination=term,
            ))
    return out


def default_jobs() -> int:
    return os.cpu_count() or 1
