"""Benchmark protocol: repeated runs, an accuracy ladder, aggregation and export.

Every run starts at the origin with seed ``base_seed + repetition`` and records
when the relative accuracy ``(f(x_k) - f*) / S`` first drops below each ladder
entry. Runs that never reach an entry are left out of that entry's statistics
and counted in a warning. Iteration counts of the randomized schemes are
reported per ``n`` iterations; gradient methods report absolute counts.
Evaluation counts are always divided by ``n``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .linesearch import LineSearchConfig, LineSearchError
from .objectives import ObjectiveSpec, canonical_name, make_benchmark
from .solvers import GRADIENT_METHODS, RunTrace, SolverConfig, calibrate_sigma0, canonical_algorithm, run

log = logging.getLogger(__name__)

TERMINAL_ACCURACY = 2.0 ** -19
CSV_COLUMNS = ("function", "n", "algorithm", "accuracy", "min_its", "mean_its", "max_its",
               "min_fes", "mean_fes", "max_fes", "successes", "repetitions")
PLOT_COLUMNS = ("algorithm", "iteration", "its_per_n", "mean_log10_accuracy")
_ACC_FLOOR = np.finfo(float).eps


def default_ladder(depth: int = 19) -> tuple[float, ...]:
    return tuple(2.0 ** -k for k in range(1, depth + 1))


def ladder_to(accuracy: float) -> tuple[float, ...]:
    """Powers of two above ``accuracy``, followed by ``accuracy`` itself."""
    if not (0 < accuracy < 1):
        raise ValueError("accuracy must lie in (0, 1)")
    out = []
    k = 1
    while 2.0 ** -k > accuracy * (1 + 1e-3):
        out.append(2.0 ** -k)
        k += 1
    out.append(float(accuracy))
    return tuple(out)


def default_cap(algorithm: str, n: int) -> int:
    return 10**6 if algorithm in GRADIENT_METHODS else 10**4 * n


@dataclass
class ExperimentConfig:
    """One (function, dimension) cell of the protocol and the schemes to run on it."""

    function: str = "sphere"
    dim: int = 64
    L1: float | None = None
    m: float | None = None
    algorithms: tuple[str, ...] = ("rp",)
    repetitions: int = 25
    accuracies: tuple[float, ...] = field(default_factory=default_ladder)
    base_seed: int = 0
    mu: float = 1e-5
    ls_mode: str = "relative"
    precision: str = "double"
    sampler: str = "unit_sphere"
    rg_dirs: str = "gaussian"
    sigma0: float | None = None
    p: float = 0.27
    max_iters: int | None = None
    store_iterates: bool = False
    workers: int = 1
    output_path: str | None = None

    def __post_init__(self):
        self.function = canonical_name(self.function)
        self.algorithms = tuple(canonical_algorithm(a) for a in self.algorithms)
        self.accuracies = tuple(float(a) for a in self.accuracies)
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.algorithms:
            raise ValueError("no algorithms selected")
        acc = self.accuracies
        if not acc or any(a <= 0 for a in acc) or any(b >= a for a, b in zip(acc, acc[1:])):
            raise ValueError("accuracy ladder must be nonempty, positive and strictly decreasing")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        """Build from a parsed JSON object; unknown keys are rejected."""
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        data = dict(data)
        for key in ("algorithms", "accuracies"):
            if key in data:
                v = data[key]
                data[key] = tuple(v.split(",")) if isinstance(v, str) else tuple(v)
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_mapping(json.load(fh))

    def spec(self) -> ObjectiveSpec:
        return make_benchmark(self.function, self.dim, self.L1, self.m)

    def line_search(self) -> LineSearchConfig:
        return LineSearchConfig(mode=self.ls_mode, mu=self.mu, precision=self.precision)


@dataclass
class AggregateStats:
    function: str
    n: int
    algorithm: str
    accuracy: float
    min_its: float
    mean_its: float
    max_its: float
    min_fes: float
    mean_fes: float
    max_fes: float
    successes: int
    repetitions: int

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    spec: ObjectiveSpec
    traces: dict[str, list[RunTrace | None]]
    stats: list[AggregateStats]
    skipped: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    sigma0: float | None = None

    def stats_for(self, algorithm: str) -> list[AggregateStats]:
        algorithm = canonical_algorithm(algorithm)
        return [s for s in self.stats if s.algorithm == algorithm]

    def final(self, algorithm: str) -> AggregateStats:
        """Statistics at the tightest ladder entry."""
        return self.stats_for(algorithm)[-1]


def check_pairing(spec: ObjectiveSpec, algorithm: str, mu: float) -> str | None:
    """Reason why ``algorithm`` cannot run on ``spec``, or ``None``."""
    if algorithm in ("arp", "fg") and not spec.m > 0:
        return f"{algorithm} needs a positive strong-convexity parameter"
    if algorithm in GRADIENT_METHODS and not spec.has_grad:
        return f"{algorithm} needs a gradient"
    if algorithm in ("rg", "fg") and not mu > 0:
        return f"{algorithm} needs mu > 0"
    return None


def _one_run(task):
    spec, cfg, ls = task
    try:
        return run(spec, cfg, ls), None
    except LineSearchError as exc:
        return None, f"{cfg.algorithm} seed {cfg.seed}: {exc}"


def _aggregate(spec, algorithm, accuracies, traces, reps) -> list[AggregateStats]:
    scale_its = 1.0 if algorithm in GRADIENT_METHODS else float(spec.dim)
    its = np.array([t.its if t is not None else np.full(len(accuracies), -1) for t in traces])
    fes = np.array([t.fes if t is not None else np.full(len(accuracies), -1) for t in traces])
    rows = []
    for j, acc in enumerate(accuracies):
        ok = its[:, j] >= 0
        if ok.any():
            i = its[ok, j] / scale_its
            f = fes[ok, j] / float(spec.dim)
            vals = (i.min(), i.mean(), i.max(), f.min(), f.mean(), f.max())
        else:
            vals = (math.nan,) * 6
        rows.append(AggregateStats(spec.name, spec.dim, algorithm, float(acc),
                                   *(float(v) for v in vals), int(ok.sum()), int(reps)))
    return rows


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    spec = config.spec()
    ls = config.line_search()
    traces: dict[str, list] = {}
    stats: list[AggregateStats] = []
    skipped: dict[str, str] = {}
    notes: list[str] = []
    sigma0 = config.sigma0
    for algo in config.algorithms:
        reason = check_pairing(spec, algo, config.mu)
        if reason:
            log.warning("skipping %s on %s: %s", algo, spec.name, reason)
            skipped[algo] = reason
            continue
        if algo == "es" and sigma0 is None:
            sigma0 = calibrate_sigma0(spec, np.zeros(spec.dim), config.p, seed=config.base_seed)
        cap = config.max_iters or default_cap(algo, spec.dim)
        tasks = []
        for rep in range(config.repetitions):
            cfg = SolverConfig(algorithm=algo, N=cap, mu=config.mu, seed=config.base_seed + rep,
                               sampler_kind=config.sampler, sigma0=sigma0, p=config.p,
                               rg_dirs=config.rg_dirs, accuracies=config.accuracies,
                               store_iterates=config.store_iterates)
            tasks.append((spec, cfg, ls))
        if config.workers > 1:
            with ProcessPoolExecutor(config.workers) as pool:
                outcomes = list(pool.map(_one_run, tasks))
        else:
            outcomes = [_one_run(t) for t in tasks]
        runs = []
        for trace, err in outcomes:
            runs.append(trace)
            if err:
                notes.append(err)
                log.warning("%s", err)
        traces[algo] = runs
        rows = _aggregate(spec, algo, config.accuracies, runs, config.repetitions)
        misses = config.repetitions - rows[-1].successes
        if misses:
            msg = (f"{algo} on {spec.name} n={spec.dim}: {misses}/{config.repetitions} runs missed "
                   f"accuracy {config.accuracies[-1]:.3g} within {cap} iterations; excluded from statistics")
            notes.append(msg)
            log.warning("%s", msg)
        stats.extend(rows)
    return ExperimentResult(config, spec, traces, stats, skipped, notes, sigma0)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def stats_csv(stats: list[AggregateStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in stats:
        w.writerow([_fmt(v) for v in s.row()])
    return buf.getvalue()


def stats_markdown(stats: list[AggregateStats]) -> str:
    """One block per (function, n, algorithm) with min/mean/max columns."""
    out = []
    blocks: dict[tuple, list[AggregateStats]] = {}
    for s in stats:
        blocks.setdefault((s.function, s.n, s.algorithm), []).append(s)
    for (fn, n, algo), rows in blocks.items():
        unit = "ITS" if algo in GRADIENT_METHODS else "ITS/n"
        out.append(f"### {algo} on {fn}, n={n}\n")
        out.append(f"| accuracy | min {unit} | mean {unit} | max {unit} | min FES/n | mean FES/n | max FES/n | runs |")
        out.append("|---:|---:|---:|---:|---:|---:|---:|---:|")
        for s in rows:
            nums = " | ".join(_fmt(round(v, 3)) if not math.isnan(v) else "-" for v in
                              (s.min_its, s.mean_its, s.max_its, s.min_fes, s.mean_fes, s.max_fes))
            out.append(f"| {s.accuracy:.3g} | {nums} | {s.successes}/{s.repetitions} |")
        out.append("")
    return "\n".join(out)


def plot_series(result: ExperimentResult, max_points: int = 200) -> dict[str, np.ndarray]:
    """Mean ``log10`` relative accuracy against iterations per ``n`` for every algorithm.

    Runs that stopped early keep their last value. Accuracies below machine
    epsilon are clamped there. Each series holds at most ``max_points`` rows of
    ``(iteration, iteration/n, mean log10 accuracy)``.
    """
    spec = result.spec
    out = {}
    for algo, runs in result.traces.items():
        runs = [r for r in runs if r is not None]
        if not runs:
            continue
        length = max(r.values.size for r in runs)
        logs = np.empty((len(runs), length))
        for i, r in enumerate(runs):
            acc = np.maximum((r.values - spec.f_star) / spec.S, _ACC_FLOOR)
            logs[i, : acc.size] = np.log10(acc)
            logs[i, acc.size:] = logs[i, acc.size - 1]
        mean = logs.mean(axis=0)
        idx = np.unique(np.linspace(0, length - 1, min(max_points, length)).round().astype(int))
        out[algo] = np.column_stack([idx, idx / spec.dim, mean[idx]])
    return out


def plot_csv(result: ExperimentResult, max_points: int = 200) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_COLUMNS)
    for algo, arr in plot_series(result, max_points).items():
        for it, per_n, val in arr:
            w.writerow([algo, int(it), _fmt(float(per_n)), _fmt(float(val))])
    return buf.getvalue()


def export_results(result: ExperimentResult | list[AggregateStats], path, fmt: str = "csv",
                   max_points: int = 200) -> Path:
    """Write ``csv``, ``markdown`` or ``plot-data`` output to ``path``."""
    stats = result.stats if isinstance(result, ExperimentResult) else list(result)
    if not stats:
        raise ValueError("nothing to export")
    fmt = fmt.lower()
    if fmt == "csv":
        text = stats_csv(stats)
    elif fmt in ("markdown", "md", "markdown-table"):
        text = stats_markdown(stats)
    elif fmt in ("plot-data", "plot"):
        if not isinstance(result, ExperimentResult):
            raise ValueError("plot data needs the full experiment result")
        text = plot_csv(result, max_points)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    value: float
    mean_its: float
    mean_fes: float
    successes: int
    repetitions: int


@dataclass
class MuSweep:
    function: str
    n: int
    accuracy: float
    rows: list[SweepRow]

    @property
    def its_spread(self) -> float:
        """Relative spread ``max/min - 1`` of the mean ITS/n across the sweep."""
        its = [r.mean_its for r in self.rows]
        return max(its) / min(its) - 1.0

    @property
    def fes_ratio(self) -> float:
        fes = [r.mean_fes for r in self.rows]
        return max(fes) / min(fes)


def mu_sweep(function: str = "ellipsoid", n: int = 64,
             mu_list=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10),
             repetitions: int = 25, accuracy: float = TERMINAL_ACCURACY, algorithm: str = "rp",
             base_seed: int = 0, ls_mode: str = "relative", precision: str = "double",
             workers: int = 1) -> MuSweep:
    """Mean ITS/n and FES/n at one accuracy for each line-search accuracy ``mu``."""
    rows = []
    for mu in mu_list:
        res = run_experiment(ExperimentConfig(function=function, dim=n, algorithms=(algorithm,),
                                              repetitions=repetitions, accuracies=(accuracy,),
                                              base_seed=base_seed, mu=mu, ls_mode=ls_mode,
                                              precision=precision, workers=workers))
        s = res.final(algorithm)
        rows.append(SweepRow(float(mu), s.mean_its, s.mean_fes, s.successes, s.repetitions))
    return MuSweep(canonical_name(function), n, accuracy, rows)


def scan_dims(function: str = "sphere", dims=(4, 8, 16, 32, 64, 128, 256, 512, 1024),
              algorithm: str = "rp", repetitions: int = 25, accuracy: float = TERMINAL_ACCURACY,
              base_seed: int = 0, mu: float = 1e-5, ls_mode: str = "relative",
              workers: int = 1) -> list[SweepRow]:
    """Mean ITS/n and FES/n at one accuracy across dimensions (``value`` is ``n``)."""
    rows = []
    for n in dims:
        res = run_experiment(ExperimentConfig(function=function, dim=n, algorithms=(algorithm,),
                                              repetitions=repetitions, accuracies=(accuracy,),
                                              base_seed=base_seed, mu=mu, ls_mode=ls_mode,
                                              workers=workers))
        s = res.final(algorithm)
        rows.append(SweepRow(float(n), s.mean_its, s.mean_fes, s.successes, s.repetitions))
    return rows


def sweep_csv(rows: list[SweepRow], key: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((key, "mean_its", "mean_fes", "successes", "repetitions"))
    for r in rows:
        w.writerow([_fmt(r.value), _fmt(r.mean_its), _fmt(r.mean_fes), r.successes, r.repetitions])
    return buf.getvalue()


def config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["algorithms"] = list(d["algorithms"])
    d["accuracies"] = list(d["accuracies"])
    return d
