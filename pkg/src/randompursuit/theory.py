"""Numerical checks of the convergence analysis of random pursuit.

The checks fall into four groups:

* moment identities of the direction distributions (exact enumeration for
  signed unit vectors, Monte-Carlo otherwise);
* single-step expected-progress bounds, estimated with many fresh directions
  from one fixed iterate;
* closed-form rate bounds, compared against means of ``f(x_N) - f*`` over seeds;
* a brute-force iteration of the scalar recurrence behind the ``1/t`` rate.

Monte-Carlo comparisons use a margin of four standard errors throughout.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .linesearch import ABSOLUTE, STATUS_OK, LineSearchConfig, _line_search, mode_code, raise_for_status
from .objectives import ObjectiveSpec, _value, make_benchmark
from .sampling import GAUSSIAN, SIGNED_UNIT, UNIT_SPHERE, _draw, make_rng, sample_many, sampler_code
from .solvers import SolverConfig, run_rp

SIGMAS = 4.0


@dataclass
class MomentCheckReport:
    sampler: str
    x: np.ndarray
    estimator_mean: np.ndarray
    estimator_second_moment: float
    target_mean: np.ndarray
    target_second: float
    mean_stderr: np.ndarray
    mc_stderr: float
    trials: int
    exact: bool
    passed: bool


@dataclass
class SingleStepReport:
    mode: str
    mean: float
    stderr: float
    bound: float
    gradient_bound: float | None
    trials: int
    passed: bool

    @property
    def margin_sigmas(self) -> float:
        """How many standard errors the estimate sits below the tightest bound."""
        b = self.bound if self.gradient_bound is None else min(self.bound, self.gradient_bound)
        return (b - self.mean) / self.stderr if self.stderr > 0 else math.inf


@dataclass(frozen=True)
class RecurrenceParams:
    theta: float
    C: float
    D: float
    f1: float

    def __post_init__(self):
        if not (self.theta > 1.0):
            raise ValueError("theta must exceed 1")
        if not (self.C > 0.0):
            raise ValueError("C must be positive")
        if self.D < 0.0 or self.f1 < 0.0:
            raise ValueError("D and f1 must be nonnegative")

    @property
    def Q(self) -> float:
        return max(self.theta ** 2 * self.C / (self.theta - 1.0), self.f1)


@dataclass
class RecurrenceReport:
    params: RecurrenceParams
    t_max: int
    passed: bool
    first_violation: int | None
    value_at_violation: float | None
    bound_at_violation: float | None
    worst_ratio: float


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def _targets(code: int, x: np.ndarray):
    n = x.size
    sq = float(x @ x)
    if code == GAUSSIAN:
        return x.copy(), (n + 2) * sq
    return x / n, sq / n


def check_moments(sampler_kind: str, x, trials: int = 10**6, seed: int | None = 0,
                  exact: bool | None = None, chunk: int = 100_000) -> MomentCheckReport:
    """Estimate ``E[<x,u>u]`` and ``E[||<x,u>u||^2]`` for one direction distribution.

    Signed unit vectors are enumerated exactly unless ``exact=False``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or not np.any(x):
        raise ValueError("x must be a nonzero vector")
    code = sampler_code(sampler_kind)
    n = x.size
    t_mean, t_second = _targets(code, x)
    if exact is None:
        exact = code == SIGNED_UNIT
    if exact:
        if code != SIGNED_UNIT:
            raise ValueError("exact enumeration is only available for signed unit vectors")
        atoms = np.concatenate([np.eye(n), -np.eye(n)])
        proj = atoms @ x
        est_mean = (proj[:, None] * atoms).mean(axis=0)
        est_second = float(np.mean(proj ** 2))
        ok = np.allclose(est_mean, t_mean, rtol=0, atol=1e-12) and abs(est_second - t_second) <= 1e-12
        return MomentCheckReport(sampler_kind, x, est_mean, est_second, t_mean, t_second,
                                 np.zeros(n), 0.0, 2 * n, True, bool(ok))
    if trials < 10**4:
        raise ValueError("Monte-Carlo moment checks need at least 10^4 trials")
    rng = make_rng(seed)
    s1 = np.zeros(n)
    s1sq = np.zeros(n)
    s2 = 0.0
    s2sq = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        u = sample_many(sampler_kind, n, m, rng)
        proj = u @ x
        w = proj[:, None] * u
        s1 += w.sum(axis=0)
        s1sq += (w * w).sum(axis=0)
        q = proj * proj * np.sum(u * u, axis=1)
        s2 += q.sum()
        s2sq += (q * q).sum()
        done += m
    mean = s1 / trials
    se_mean = np.sqrt(np.maximum(s1sq / trials - mean ** 2, 0.0) / trials)
    second = s2 / trials
    se_second = math.sqrt(max(s2sq / trials - second ** 2, 0.0) / trials)
    ok_mean = np.all(np.abs(mean - t_mean) <= SIGMAS * se_mean + 1e-15)
    ok_second = abs(second - t_second) <= SIGMAS * se_second + 1e-15
    return MomentCheckReport(sampler_kind, x, mean, second, t_mean, t_second, se_mean, se_second,
                             int(trials), False, bool(ok_mean and ok_second))


def check_scalar_moments(trials: int = 10**6, seed: int | None = 0) -> dict:
    """First four moments of a standard normal against ``0, 1, 0, 3``.

    Returns ``{k: (estimate, target, stderr, passed)}``.
    """
    v = make_rng(seed).standard_normal(int(trials))
    out = {}
    for k, target in ((1, 0.0), (2, 1.0), (3, 0.0), (4, 3.0)):
        p = v ** k
        est = float(p.mean())
        se = float(p.std(ddof=1) / math.sqrt(trials))
        out[k] = (est, target, se, abs(est - target) <= SIGMAS * se)
    return out


# ---------------------------------------------------------------------------
# single-step progress
# ---------------------------------------------------------------------------


@njit(cache=True)
def _single_step_mc(kind, params, x, trials, sampler, mode, mu, precise, rng):
    n = x.size
    u = np.empty(n)
    y = np.empty(n)
    buf = np.empty(n)
    s = 0.0
    s2 = 0.0
    for _ in range(trials):
        _draw(sampler, rng, u)
        h, used, a, b, st = _line_search(kind, params, x, u, mode, mu, 1.0, 64, precise, buf)
        if st != STATUS_OK:
            return s, s2, st
        for i in range(n):
            y[i] = x[i] + h * u[i]
        f = _value(kind, params, y)
        s += f
        s2 += f * f
    return s, s2, STATUS_OK


def single_step_bounds(spec: ObjectiveSpec, x_k, h: float, z, mu: float, mode: str = "absolute"):
    """Upper bounds on ``E[f(x_{k+1}) | x_k]`` for one random-pursuit step.

    Returns ``(general, gradient)``. ``general`` holds for any ``h > 0`` and
    point ``z``; ``gradient`` is the gradient-norm form, valid for
    ``h <= 1/L1`` and ``None`` otherwise. In relative mode the dimension is
    inflated to ``n / (1 - mu)`` and the additive ``L1 mu^2 / 2`` term drops.
    """
    x_k = np.asarray(x_k, dtype=float)
    z = np.asarray(z, dtype=float)
    if not spec.convex:
        raise ValueError(f"single-step bounds need a convex objective, {spec.name} is not")
    if not (h > 0):
        raise ValueError("h must be positive")
    n = spec.dim
    f = float(spec.eval(x_k))
    g = spec.grad(x_k)
    if mode_code(mode) == ABSOLUTE:
        n_eff, slack = float(n), 0.5 * spec.L1 * mu ** 2
    else:
        n_eff, slack = n / (1.0 - mu), 0.0
    d = z - x_k
    general = f + (h / n_eff) * float(g @ d) + spec.L1 * h ** 2 / (2 * n_eff) * float(d @ d) + slack
    gradient = None
    if h <= 1.0 / spec.L1 * (1 + 1e-12):
        gradient = f - h / (2 * n_eff) * float(g @ g) + slack
    return general, gradient


def check_single_step(spec: ObjectiveSpec, x_k, h: float, z, mu: float, trials: int = 10**5,
                      mode: str = "absolute", seed: int | None = 0, sampler: str = "unit_sphere",
                      precision: str = "double") -> SingleStepReport:
    """Monte-Carlo estimate of one step's expected value against its bounds."""
    cfg = LineSearchConfig(mode=mode, mu=mu, precision=precision)
    general, gradient = single_step_bounds(spec, x_k, h, z, mu, mode)
    x = np.ascontiguousarray(x_k, dtype=float)
    s, s2, st = _single_step_mc(spec.kind, spec.params, x, int(trials), sampler_code(sampler),
                                cfg.code, float(mu), cfg.precise, make_rng(seed))
    raise_for_status(int(st), where="single-step check")
    mean = s / trials
    var = max(s2 / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
    se = math.sqrt(var / trials)
    # a few ulps of slack for points at the minimiser, where mean and bound coincide
    tol = SIGMAS * se + 1e-12 * max(1.0, abs(general))
    ok = mean <= general + tol and (gradient is None or mean <= gradient + tol)
    return SingleStepReport(mode=cfg.mode, mean=mean, stderr=se, bound=general,
                            gradient_bound=gradient, trials=int(trials), passed=bool(ok))


# ---------------------------------------------------------------------------
# rate bounds
# ---------------------------------------------------------------------------

RATE_BOUNDS = ("strong", "growth", "convex")


def rate_bound(kind: str, spec: ObjectiveSpec, f0_gap: float, N: int, mu: float,
                  R2: float | None = None) -> float:
    """Closed-form bound on ``E[f(x_N) - f*]`` for random pursuit with absolute accuracy ``mu``.

    ``"strong"`` strong convexity: ``(1 - m/(L1 n))^N gap + L1^2 n mu^2 / (2m)``.
    ``"growth"`` quadratic growth only: ``(1 - m/(4 L1 n))^N gap + 2 L1^2 n mu^2 / m``.
    ``"convex"`` plain convexity: ``Q/(N+1) + N L1 mu^2 / 2`` with
    ``Q = max(2 n L1 R^2, gap)``; ``R2`` defaults to ``spec.R2``.
    """
    tid = str(kind)
    if tid not in RATE_BOUNDS:
        raise ValueError(f"unknown rate bound {kind!r}; expected one of {RATE_BOUNDS}")
    if N < 0 or f0_gap < 0 or mu < 0:
        raise ValueError("N, f0_gap and mu must be nonnegative")
    if not spec.convex:
        raise ValueError(f"rate bounds do not apply to the non-convex {spec.name}")
    n, L1, m = spec.dim, spec.L1, spec.m
    if tid == "strong":
        if not spec.strongly_convex:
            raise ValueError(f"{spec.name} is not strongly convex")
        return (1.0 - m / (L1 * n)) ** N * f0_gap + L1 ** 2 * n * mu ** 2 / (2.0 * m)
    if tid == "growth":
        if not (m > 0):
            raise ValueError(f"{spec.name} has no quadratic-growth parameter")
        return (1.0 - m / (4.0 * L1 * n)) ** N * f0_gap + 2.0 * L1 ** 2 * n * mu ** 2 / m
    R2 = spec.R2 if R2 is None else float(R2)
    Q = max(2.0 * n * L1 * R2, f0_gap)
    return Q / (N + 1) + N * L1 * mu ** 2 / 2.0


def n_opt(Q: float, L1: float, mu: float) -> float:
    """Iteration count minimising ``Q/N + N L1 mu^2 / 2``."""
    if not (mu > 0):
        raise ValueError("mu must be positive")
    return math.sqrt(2.0 * Q / (L1 * mu ** 2))


def check_n_opt(Qs=(1.0, 10.0, 1e3, 1e6), L1s=(1.0, 1000.0), mus=(1e-3, 1e-5, 1e-8)) -> CheckResult:
    """The balanced iteration count minimises the absolute-error bound and meets ``mu sqrt(2 Q L1)``."""
    t0 = time.perf_counter()
    worst = -math.inf
    ok = True
    for Q in Qs:
        for L1 in L1s:
            for mu in mus:
                N = n_opt(Q, L1, mu)
                val = Q / N + N * L1 * mu ** 2 / 2.0
                cap = mu * math.sqrt(2.0 * Q * L1)
                worst = max(worst, val / cap - 1.0)
                ok &= val <= cap * (1 + 1e-12)
                for f in (0.5, 0.9, 1.1, 2.0):
                    ok &= Q / (f * N) + f * N * L1 * mu ** 2 / 2.0 >= val * (1 - 1e-12)
    return CheckResult("balanced iteration count", bool(ok),
                       f"max relative excess over mu*sqrt(2QL1): {worst:.2e}", time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------


def check_recurrence(params: RecurrenceParams, t_max: int = 10**4, rtol: float = 1e-12) -> RecurrenceReport:
    """Iterate ``f_{t+1} = (1 - theta/t) f_t + C theta^2 / t^2 + D`` and test ``f_t <= Q/t + (t-1) D``.

    The raw recurrence is used as the envelope, without clamping negative
    values at zero.
    """
    th, C, D, Q = params.theta, params.C, params.D, params.Q
    f = params.f1
    worst = -math.inf
    for t in range(1, t_max + 1):
        bound = Q / t + (t - 1) * D
        worst = max(worst, f / bound)
        if f > bound * (1 + rtol):
            return RecurrenceReport(params, t_max, False, t, f, bound, worst)
        f = (1.0 - th / t) * f + C * th ** 2 / t ** 2 + D
    return RecurrenceReport(params, t_max, True, None, None, None, worst)


def recurrence_grid(thetas=(1.5, 2.0, 4.0), Cs=(0.1, 1.0, 10.0), Ds=(0.0, 1e-6),
                    f1_factors=(1.0, 0.5, 2.0), t_max: int = 10**4) -> list[RecurrenceReport]:
    """Run :func:`check_recurrence` over a parameter grid; ``f1`` is scaled from ``theta^2 C/(theta-1)``."""
    out = []
    for th in thetas:
        for C in Cs:
            base = th ** 2 * C / (th - 1.0)
            for D in Ds:
                for k in f1_factors:
                    out.append(check_recurrence(RecurrenceParams(th, C, D, k * base), t_max))
    return out


# ---------------------------------------------------------------------------
# function inequalities
# ---------------------------------------------------------------------------


def check_sandwich(spec: ObjectiveSpec, points: int = 1000, seed: int | None = 0,
                   scale: float = 1.0, tol: float = 1e-9) -> CheckResult:
    """``(m/2)||x - x*||^2 <= f(x) - f* <= ||grad f(x)||^2 / (2m)`` at random points."""
    t0 = time.perf_counter()
    if not spec.strongly_convex:
        raise ValueError(f"{spec.name} is not strongly convex")
    rng = make_rng(seed)
    x = spec.x_star + scale * rng.standard_normal((points, spec.dim))
    gap = spec.eval(x) - spec.f_star
    d = x - spec.x_star
    lower = 0.5 * spec.m * np.sum(d * d, axis=1)
    g = spec.grad(x)
    upper = np.sum(g * g, axis=1) / (2.0 * spec.m)
    slack = tol * np.maximum(1.0, np.abs(gap))
    ok = bool(np.all(lower <= gap + slack) and np.all(gap <= upper + slack))
    worst = float(np.max(np.maximum(lower - gap, gap - upper)))
    return CheckResult(f"quadratic sandwich on {spec.name} n={spec.dim}", ok,
                       f"worst excess {worst:.2e}", time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# empirical rates
# ---------------------------------------------------------------------------


@dataclass
class RateReport:
    kind: str
    function: str
    dim: int
    N: int
    seeds: int
    mean_gap: float
    rel_stderr: float
    bound: float
    fitted_decay: float
    predicted_decay: float
    passed_bound: bool
    passed_decay: bool
    mean_curve: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.passed_bound and self.passed_decay


def empirical_rate(spec: ObjectiveSpec, N: int, seeds: int, mu: float, kind: str = "strong",
                   base_seed: int = 0, decay_tol: float = 0.10, precision: str = "compensated",
                   x0=None) -> RateReport:
    """Mean of ``f(x_k) - f*`` over seeds compared with a rate bound.

    Random pursuit runs in absolute mode, as the bounds assume. The fitted
    decay is the least-squares slope of ``log(mean gap)`` over all ``k``; it
    is compared with ``log(1 - m/(L1 n))``.
    """
    ls = LineSearchConfig(mode="absolute", mu=mu, precision=precision)
    curves = np.empty((seeds, N + 1))
    for r in range(seeds):
        tr = run_rp(spec, SolverConfig(algorithm="rp", x0=x0, N=N, mu=mu, seed=base_seed + r,
                                       stop_at_target=False), ls)
        curves[r] = tr.values - spec.f_star
    f0_gap = float(curves[0, 0])
    final = curves[:, -1]
    mean_gap = float(final.mean())
    rse = float(final.std(ddof=1) / math.sqrt(seeds) / mean_gap) if mean_gap > 0 else 0.0
    bound = rate_bound(kind, spec, f0_gap, N, mu)
    mean_curve = curves.mean(axis=0)
    k = np.arange(N + 1)
    slope = float(np.polyfit(k, np.log(mean_curve), 1)[0])
    predicted = math.log(1.0 - spec.m / (spec.L1 * spec.dim))
    return RateReport(kind=kind, function=spec.name, dim=spec.dim, N=N, seeds=seeds,
                      mean_gap=mean_gap, rel_stderr=rse, bound=bound, fitted_decay=slope,
                      predicted_decay=predicted,
                      passed_bound=mean_gap <= bound * (1 + SIGMAS * rse),
                      passed_decay=abs(slope - predicted) <= decay_tol * abs(predicted),
                      mean_curve=mean_curve)


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------


def _timed(name, fn):
    t0 = time.perf_counter()
    passed, detail, data = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0, data)


def single_step_points(spec: ObjectiveSpec, count: int, seed: int | None):
    """Random iterates around the minimiser used by the single-step checks."""
    rng = make_rng(seed)
    return spec.x_star + rng.standard_normal((count, spec.dim))


def run_verification_suite(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    """Run every check; ``quick`` shrinks sample sizes for smoke testing."""
    mc = 10**5 if quick else 10**6
    step_trials = 10**4 if quick else 10**5
    step_points = 3 if quick else 20
    results = []

    def moments():
        reps = [check_moments("signed_unit", [3.0, 4.0])]
        rng = make_rng(seed)
        for n in (2, 10):
            x = rng.standard_normal(n)
            reps.append(check_moments("signed_unit", x))
            for kind in ("unit_sphere", "gaussian"):
                reps.append(check_moments(kind, x, trials=mc, seed=seed + n))
        bad = [f"{r.sampler} n={r.x.size}" for r in reps if not r.passed]
        return not bad, "all moment identities hold" if not bad else "failed: " + ", ".join(bad), {}

    results.append(_timed("direction moments", moments))

    def scalar():
        out = check_scalar_moments(mc, seed)
        bad = [k for k, v in out.items() if not v[3]]
        return not bad, ", ".join(f"E[v^{k}]={v[0]:.4f}" for k, v in out.items()), {}

    results.append(_timed("normal scalar moments", scalar))

    for name, n in (("sphere", 16), ("ellipsoid", 8), ("nesterov_strong", 16)):
        results.append(check_sandwich(make_benchmark(name, n), seed=seed))

    def single_step():
        worst = math.inf
        bad = []
        for name in ("sphere", "ellipsoid"):
            for n in (4, 8, 16):
                spec = make_benchmark(name, n)
                for j, x in enumerate(single_step_points(spec, step_points, seed + n)):
                    z = x - spec.grad(x)
                    h = 1.0 / spec.L1
                    for mode, mu in (("absolute", 1e-5), ("relative", 1e-2)):
                        rep = check_single_step(spec, x, h, z, mu, trials=step_trials, mode=mode,
                                                seed=seed + 1000 * n + j)
                        worst = min(worst, rep.margin_sigmas)
                        if not rep.passed:
                            bad.append(f"{name} n={n} point {j} {mode}")
        detail = f"smallest margin {worst:.2f} sigma" if not bad else "failed: " + ", ".join(bad[:5])
        return not bad, detail, {}

    results.append(_timed("single-step progress bounds", single_step))

    def recurrence():
        reps = recurrence_grid()
        bad = [r for r in reps if not r.passed]
        detail = f"{len(reps) - len(bad)}/{len(reps)} grid cells within the bound"
        if bad:
            cells = sorted({(r.params.theta, r.params.C) for r in bad})
            detail += "; violations at (theta, C) " + ", ".join(f"({a:g},{b:g})" for a, b in cells)
        return not bad, detail, {"violations": bad}

    results.append(_timed("1/t recurrence bound", recurrence))

    def rate_strong():
        rep = empirical_rate(make_benchmark("sphere", 16), N=320, seeds=50 if quick else 200, mu=1e-9,
                             base_seed=seed)
        return rep.passed, (f"mean gap {rep.mean_gap:.3e} vs bound {rep.bound:.3e}; "
                            f"decay {rep.fitted_decay:.5f} vs {rep.predicted_decay:.5f}"), {"report": rep}

    results.append(_timed("linear rate under strong convexity", rate_strong))

    def rate_growth():
        rep = empirical_rate(make_benchmark("sphere", 16), N=320, seeds=20 if quick else 50, mu=1e-9,
                             kind="growth", base_seed=seed)
        return rep.passed_bound, f"mean gap {rep.mean_gap:.3e} vs bound {rep.bound:.3e}", {"report": rep}

    results.append(_timed("linear rate under quadratic growth", rate_growth))

    def rate_convex():
        spec = make_benchmark("nesterov_smooth", 8)
        ls = LineSearchConfig(mode="absolute", mu=1e-5)
        N = 400
        gaps = []
        for r in range(20 if quick else 50):
            tr = run_rp(spec, SolverConfig(N=N, mu=1e-5, seed=seed + r, stop_at_target=False), ls)
            gaps.append(tr.values - spec.f_star)
        gaps = np.array(gaps)
        f0 = float(gaps[0, 0])
        # R^2 of the starting level set, bounded through the smallest curvature of the quadratic
        lam_min = spec.L1 / 4.0 * 4.0 * math.sin(math.pi / (2 * (spec.dim + 1))) ** 2
        R2 = 2.0 * f0 / lam_min
        ok = True
        worst = 0.0
        for k in (1, 10, 50, 100, 200, 400):
            b = rate_bound("convex", spec, f0, k, 1e-5, R2=R2)
            mean = float(gaps[:, k].mean())
            worst = max(worst, mean / b)
            ok &= mean <= b
        return ok, f"largest mean/bound ratio {worst:.3e}", {}

    results.append(_timed("1/N rate under convexity", rate_convex))
    results.append(check_n_opt())
    return results


def format_results(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
