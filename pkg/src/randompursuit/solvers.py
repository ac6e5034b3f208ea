"""Optimisation schemes sharing one trace format.

* ``rp``     random direction plus line search
* ``arp``    accelerated variant with a two-sequence momentum recursion
* ``rg``     fixed-step random gradient with a forward-difference quotient
* ``fg``     accelerated random gradient (same recursion as ``arp``)
* ``es``     (1+1) evolution strategy with success-based step adaptation
* ``gm``     gradient method with step ``1/L1``
* ``gm_ls``  steepest descent with the comparison line search

Each scheme is a compiled loop. ``f(x_k)`` is recorded after every iteration
through an uncounted monitor evaluation, so the FES totals only count the
evaluations the scheme itself needs. For ``gm`` and ``gm_ls`` every gradient
call counts as one oracle call.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .linesearch import STATUS_OK, LineSearchConfig, _line_search, raise_for_status
from .objectives import ObjectiveSpec, _gradient, _value
from .sampling import GAUSSIAN, UNIT_SPHERE, _draw, make_rng, sampler_code

ALGORITHMS = ("rp", "arp", "rg", "fg", "es", "gm", "gm_ls")
GRADIENT_METHODS = ("gm", "gm_ls")
DEFAULT_P = 0.27


def canonical_algorithm(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {list(ALGORITHMS)}")
    return key


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Inputs for a single run.

    ``accuracies`` are relative accuracies (gap divided by the benchmark scale
    ``S``); the run records when each is first reached and, with
    ``stop_at_target``, ends once the tightest one is. ``x0=None`` starts at
    the origin. ``sigma0=None`` calibrates the ES step size from ``x0``.
    """

    algorithm: str = "rp"
    x0: np.ndarray | None = None
    N: int = 1000
    mu: float = 1e-5
    seed: int | None = 0
    sampler_kind: str = "unit_sphere"
    sigma0: float | None = None
    p: float = DEFAULT_P
    rg_dirs: str = "gaussian"
    accuracies: tuple[float, ...] = ()
    stop_at_target: bool = True
    store_iterates: bool = False

    def __post_init__(self):
        object.__setattr__(self, "algorithm", canonical_algorithm(self.algorithm))
        if int(self.N) < 1:
            raise ValueError("N must be at least 1")
        if not (self.mu >= 0.0):
            raise ValueError("mu must be nonnegative")
        if not (0.0 < self.p < 1.0):
            raise ValueError("p must lie in (0, 1)")
        if self.sigma0 is not None and not (self.sigma0 > 0.0):
            raise ValueError("sigma0 must be positive")
        sampler_code(self.sampler_kind)
        if sampler_code(self.rg_dirs) not in (UNIT_SPHERE, GAUSSIAN):
            raise ValueError("rg_dirs must be 'sphere' or 'gaussian'")
        acc = tuple(float(a) for a in self.accuracies)
        if any(a <= 0 for a in acc) or any(b >= a for a, b in zip(acc, acc[1:])):
            raise ValueError("accuracies must be positive and strictly decreasing")
        object.__setattr__(self, "accuracies", acc)


@dataclass
class RunTrace:
    """Record of one run.

    ``values[k]`` is ``f(x_k)``. ``its[j]`` / ``fes[j]`` give the iteration and
    cumulative evaluation count at which accuracy ``accuracies[j]`` was first
    reached, ``-1`` when it never was.
    """

    algorithm: str
    function: str
    dim: int
    seed: int | None
    values: np.ndarray
    accuracies: np.ndarray
    its: np.ndarray
    fes: np.ndarray
    iterations: int
    total_fes: int
    x_final: np.ndarray
    iterates: np.ndarray | None = None
    sigma0: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> np.ndarray:
        return self.its >= 0


@dataclass(frozen=True)
class ArpState:
    """Coefficients of one step of the accelerated recursion."""

    theta: float
    gamma: float
    beta: float
    lam: float
    delta: float
    gamma_next: float


@dataclass(frozen=True)
class EsState:
    sigma: float
    c_s: float
    c_f: float


def es_factors(p: float = DEFAULT_P) -> tuple[float, float]:
    """Step multipliers on success and failure for target success rate ``p``."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    c_s = math.exp(1.0 / 3.0)
    return c_s, c_s * math.exp(-p / (1.0 - p))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mark(gap, k, fes, thr, its_at, fes_at, nxt):
    while nxt < thr.size and gap <= thr[nxt]:
        its_at[nxt] = k
        fes_at[nxt] = fes
        nxt += 1
    return nxt


@njit(cache=True)
def _done(stop, thr, nxt):
    return stop and thr.size > 0 and nxt == thr.size


@njit(cache=True)
def _arp_coeffs(theta, gamma, m):
    # positive root of beta^2 / theta = (1 - beta) gamma + beta m
    b = theta * (gamma - m)
    beta = 0.5 * (-b + math.sqrt(b * b + 4.0 * theta * gamma))
    gamma_next = beta * beta / theta
    lam = beta * m / gamma_next
    delta = beta * gamma / (gamma + beta * m)
    return beta, gamma_next, lam, delta


@njit(cache=True)
def _rp_kernel(kind, params, fstar, x0, N, thr, stop, store, sampler,
               mode, mu, step0, max_exp, precise, rng):
    n = x0.size
    x = x0.copy()
    u = np.empty(n)
    buf = np.empty(n)
    values = np.empty(N + 1)
    iters = np.empty((N + 1 if store else 0, n))
    its_at = np.full(thr.size, -1, dtype=np.int64)
    fes_at = np.full(thr.size, -1, dtype=np.int64)
    fes = 0
    status = STATUS_OK
    f = _value(kind, params, x)
    values[0] = f
    if store:
        iters[0] = x
    nxt = _mark(f - fstar, 0, 0, thr, its_at, fes_at, 0)
    k = 0
    while k < N and not _done(stop, thr, nxt):
        _draw(sampler, rng, u)
        h, used, a, b, st = _line_search(kind, params, x, u, mode, mu, step0, max_exp, precise, buf)
        fes += used
        if st != STATUS_OK:
            status = st
            break
        for i in range(n):
            x[i] += h * u[i]
        k += 1
        f = _value(kind, params, x)
        values[k] = f
        if store:
            iters[k] = x
        nxt = _mark(f - fstar, k, fes, thr, its_at, fes_at, nxt)
    return values[: k + 1], its_at, fes_at, k, fes, status, x, iters[: k + 1]


@njit(cache=True)
def _arp_kernel(kind, params, fstar, x0, N, thr, stop, store, theta, m,
                mode, mu, step0, max_exp, precise, rng):
    n = x0.size
    x = x0.copy()
    v = x0.copy()
    y = np.empty(n)
    u = np.empty(n)
    buf = np.empty(n)
    values = np.empty(N + 1)
    iters = np.empty((N + 1 if store else 0, n))
    its_at = np.full(thr.size, -1, dtype=np.int64)
    fes_at = np.full(thr.size, -1, dtype=np.int64)
    fes = 0
    status = STATUS_OK
    gamma = m
    f = _value(kind, params, x)
    values[0] = f
    if store:
        iters[0] = x
    nxt = _mark(f - fstar, 0, 0, thr, its_at, fes_at, 0)
    k = 0
    while k < N and not _done(stop, thr, nxt):
        beta, gamma_next, lam, delta = _arp_coeffs(theta, gamma, m)
        for i in range(n):
            y[i] = (1.0 - delta) * x[i] + delta * v[i]
        _draw(UNIT_SPHERE, rng, u)
        h, used, a, b, st = _line_search(kind, params, y, u, mode, mu, step0, max_exp, precise, buf)
        fes += used
        if st != STATUS_OK:
            status = st
            break
        s = h / (beta * n)
        for i in range(n):
            x[i] = y[i] + h * u[i]
            v[i] = (1.0 - lam) * v[i] + lam * y[i] + s * u[i]
        gamma = gamma_next
        k += 1
        f = _value(kind, params, x)
        values[k] = f
        if store:
            iters[k] = x
        nxt = _mark(f - fstar, k, fes, thr, its_at, fes_at, nxt)
    return values[: k + 1], its_at, fes_at, k, fes, status, x, iters[: k + 1]


@njit(cache=True)
def _quotient(kind, params, x, u, mu, buf):
    f0 = _value(kind, params, x)
    for i in range(x.size):
        buf[i] = x[i] + mu * u[i]
    return (_value(kind, params, buf) - f0) / mu


@njit(cache=True)
def _rg_kernel(kind, params, fstar, x0, N, thr, stop, store, dirs, step, mu, rng):
    n = x0.size
    x = x0.copy()
    u = np.empty(n)
    buf = np.empty(n)
    values = np.empty(N + 1)
    iters = np.empty((N + 1 if store else 0, n))
    its_at = np.full(thr.size, -1, dtype=np.int64)
    fes_at = np.full(thr.size, -1, dtype=np.int64)
    fes = 0
    f = _value(kind, params, x)
    values[0] = f
    if store:
        iters[0] = x
    nxt = _mark(f - fstar, 0, 0, thr, its_at, fes_at, 0)
    k = 0
    while k < N and not _done(stop, thr, nxt):
        _draw(dirs, rng, u)
        g = _quotient(kind, params, x, u, mu, buf)
        fes += 2
        for i in range(n):
            x[i] -= step * g * u[i]
        k += 1
        f = _value(kind, params, x)
        values[k] = f
        if store:
            iters[k] = x
        nxt = _mark(f - fstar, k, fes, thr, its_at, fes_at, nxt)
    return values[: k + 1], its_at, fes_at, k, fes, STATUS_OK, x, iters[: k + 1]


@njit(cache=True)
def _fg_kernel(kind, params, fstar, x0, N, thr, stop, store, dirs, step, theta, m, mu, rng):
    n = x0.size
    x = x0.copy()
    v = x0.copy()
    y = np.empty(n)
    u = np.empty(n)
    buf = np.empty(n)
    values = np.empty(N + 1)
    iters = np.empty((N + 1 if store else 0, n))
    its_at = np.full(thr.size, -1, dtype=np.int64)
    fes_at = np.full(thr.size, -1, dtype=np.int64)
    fes = 0
    gamma = m
    f = _value(kind, params, x)
    values[0] = f
    if store:
        iters[0] = x
    nxt = _mark(f - fstar, 0, 0, thr, its_at, fes_at, 0)
    k = 0
    while k < N and not _done(stop, thr, nxt):
        beta, gamma_next, lam, delta = _arp_coeffs(theta, gamma, m)
        for i in range(n):
            y[i] = (1.0 - delta) * x[i] + delta * v[i]
        _draw(dirs, rng, u)
        d = -step * _quotient(kind, params, y, u, mu, buf)
        fes += 2
        s = d / (beta * n)
        for i in range(n):
            x[i] = y[i] + d * u[i]
            v[i] = (1.0 - lam) * v[i] + lam * y[i] + s * u[i]
        gamma = gamma_next
        k += 1
        f = _value(kind, params, x)
        values[k] = f
        if store:
            iters[k] = x
        nxt = _mark(f - fstar, k, fes, thr, its_at, fes_at, nxt)
    return values[: k + 1], its_at, fes_at, k, fes, STATUS_OK, x, iters[: k + 1]


@njit(cache=True)
def _es_kernel(kind, params, fstar, x0, N, thr, stop, store, sigma0, c_s, c_f, rng):
    n = x0.size
    x = x0.copy()
    u = np.empty(n)
    z = np.empty(n)
    values = np.empty(N + 1)
    iters = np.empty((N + 1 if store else 0, n))
    its_at = np.full(thr.size, -1, dtype=np.int64)
    fes_at = np.full(thr.size, -1, dtype=np.int64)
    fes = 0
    sigma = sigma0
    f = _value(kind, params, x)
    values[0] = f
    if store:
        iters[0] = x
    nxt = _mark(f - fstar, 0, 0, thr, its_at, fes_at, 0)
    k = 0
    while k < N and not _done(stop, thr, nxt):
        _draw(GAUSSIAN, rng, u)
        for i in range(n):
            z[i] = x[i] + sigma * u[i]
        fz = _value(kind, params, z)
        fes += 1
        if fz <= f:
            x[:] = z
            f = fz
            sigma *= c_s
        else:
            sigma *= c_f
        k += 1
        values[k] = f
        if store:
            iters[k] = x
        nxt = _mark(f - fstar, k, fes, thr, its_at, fes_at, nxt)
    return values[: k + 1], its_at, fes_at, k, fes, STATUS_OK, x, iters[: k + 1]


@njit(cache=True)
def _gm_kernel(kind, params, fstar, x0, N, thr, stop, store, use_ls,
               mode, mu, step0, max_exp, precise):
    n = x0.size
    x = x0.copy()
    g = np.empty(n)
    d = np.empty(n)
    buf = np.empty(n)
    values = np.empty(N + 1)
    iters = np.empty((N + 1 if store else 0, n))
    its_at = np.full(thr.size, -1, dtype=np.int64)
    fes_at = np.full(thr.size, -1, dtype=np.int64)
    fes = 0
    status = STATUS_OK
    L1 = params[0]
    f = _value(kind, params, x)
    values[0] = f
    if store:
        iters[0] = x
    nxt = _mark(f - fstar, 0, 0, thr, its_at, fes_at, 0)
    k = 0
    while k < N and not _done(stop, thr, nxt):
        _gradient(kind, params, x, g)
        fes += 1
        if use_ls:
            gn = 0.0
            for i in range(n):
                gn += g[i] * g[i]
            gn = math.sqrt(gn)
            if gn == 0.0:
                break
            for i in range(n):
                d[i] = -g[i] / gn
            h, used, a, b, st = _line_search(kind, params, x, d, mode, mu, step0, max_exp, precise, buf)
            fes += used
            if st != STATUS_OK:
                status = st
                break
            for i in range(n):
                x[i] += h * d[i]
        else:
            for i in range(n):
                x[i] -= g[i] / L1
        k += 1
        f = _value(kind, params, x)
        values[k] = f
        if store:
            iters[k] = x
        nxt = _mark(f - fstar, k, fes, thr, its_at, fes_at, nxt)
    return values[: k + 1], its_at, fes_at, k, fes, status, x, iters[: k + 1]


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def arp_coefficients(theta: float, gamma: float, m: float) -> ArpState:
    if not (theta > 0 and gamma > 0 and m >= 0):
        raise ValueError("need theta > 0, gamma > 0 and m >= 0")
    beta, gamma_next, lam, delta = _arp_coeffs(float(theta), float(gamma), float(m))
    assert beta > 0.0, "the coefficient quadratic always has one positive root"
    return ArpState(theta=float(theta), gamma=float(gamma), beta=float(beta), lam=float(lam),
                    delta=float(delta), gamma_next=float(gamma_next))


def _prepare(spec: ObjectiveSpec, cfg: SolverConfig):
    if cfg.x0 is None:
        x0 = np.zeros(spec.dim)
    else:
        x0 = np.array(cfg.x0, dtype=float)
        if x0.shape != (spec.dim,):
            raise ValueError(f"x0 must have shape ({spec.dim},), got {x0.shape}")
    thr = np.array(cfg.accuracies, dtype=float) * spec.S
    return x0, thr, make_rng(cfg.seed)


def _ls(cfg: SolverConfig, ls_config: LineSearchConfig | None) -> LineSearchConfig:
    return ls_config if ls_config is not None else LineSearchConfig(mu=cfg.mu)


def _ls_args(ls: LineSearchConfig):
    return ls.code, float(ls.mu), float(ls.initial_step), int(ls.max_expansions), ls.precise


def _finish(spec, cfg, out, sigma0=None, **extra) -> RunTrace:
    values, its, fes, k, total, status, x, iters = out
    raise_for_status(int(status), where=f"{cfg.algorithm} on {spec.name}")
    return RunTrace(
        algorithm=cfg.algorithm, function=spec.name, dim=spec.dim, seed=cfg.seed,
        values=values, accuracies=np.array(cfg.accuracies), its=its, fes=fes,
        iterations=int(k), total_fes=int(total), x_final=x,
        iterates=iters if cfg.store_iterates else None, sigma0=sigma0, extra=extra,
    )


def run_rp(spec: ObjectiveSpec, cfg: SolverConfig, ls_config: LineSearchConfig | None = None) -> RunTrace:
    """Random pursuit. ``ls_config`` overrides the line search built from ``cfg.mu``."""
    x0, thr, rng = _prepare(spec, cfg)
    out = _rp_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                     cfg.store_iterates, sampler_code(cfg.sampler_kind), *_ls_args(_ls(cfg, ls_config)), rng)
    return _finish(spec, cfg, out)


def _need_strong(spec: ObjectiveSpec, algo: str):
    if not (spec.m > 0.0):
        raise ValueError(f"{algo} needs a positive strong-convexity parameter, {spec.name} has m={spec.m}")


def run_arp(spec: ObjectiveSpec, cfg: SolverConfig, ls_config: LineSearchConfig | None = None) -> RunTrace:
    """Accelerated random pursuit with ``theta = 1/(L1 n^2)`` and ``gamma_0 = m``."""
    _need_strong(spec, "arp")
    x0, thr, rng = _prepare(spec, cfg)
    theta = 1.0 / (spec.L1 * spec.dim ** 2)
    out = _arp_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                      cfg.store_iterates, theta, spec.m, *_ls_args(_ls(cfg, ls_config)), rng)
    return _finish(spec, cfg, out, theta=theta)


def _rg_step(spec: ObjectiveSpec) -> float:
    return 1.0 / (4.0 * (spec.dim + 4) * spec.L1)


def run_rg(spec: ObjectiveSpec, cfg: SolverConfig) -> RunTrace:
    """Fixed step ``1/(4(n+4)L1)`` against a forward-difference directional derivative."""
    if not (cfg.mu > 0.0):
        raise ValueError("rg needs mu > 0 for the difference quotient")
    x0, thr, rng = _prepare(spec, cfg)
    out = _rg_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                     cfg.store_iterates, sampler_code(cfg.rg_dirs), _rg_step(spec), float(cfg.mu), rng)
    return _finish(spec, cfg, out)


def run_fg(spec: ObjectiveSpec, cfg: SolverConfig) -> RunTrace:
    """Accelerated random gradient.

    Uses the ``arp`` coefficient recursion with ``theta = 1/(4(n+4) L1 n)``;
    the line-search displacement is replaced by the ``rg`` step.
    """
    if not (cfg.mu > 0.0):
        raise ValueError("fg needs mu > 0 for the difference quotient")
    _need_strong(spec, "fg")
    x0, thr, rng = _prepare(spec, cfg)
    step = _rg_step(spec)
    theta = step / spec.dim
    out = _fg_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                     cfg.store_iterates, sampler_code(cfg.rg_dirs), step, theta, spec.m, float(cfg.mu), rng)
    return _finish(spec, cfg, out, theta=theta)


def run_es(spec: ObjectiveSpec, cfg: SolverConfig) -> RunTrace:
    """(1+1) evolution strategy; equal values count as success."""
    x0, thr, rng = _prepare(spec, cfg)
    sigma0 = cfg.sigma0
    if sigma0 is None:
        seed = None if cfg.seed is None else cfg.seed + 7919
        sigma0 = calibrate_sigma0(spec, x0, cfg.p, seed=seed)
    c_s, c_f = es_factors(cfg.p)
    out = _es_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                     cfg.store_iterates, float(sigma0), c_s, c_f, rng)
    return _finish(spec, cfg, out, sigma0=float(sigma0))


def run_gm(spec: ObjectiveSpec, cfg: SolverConfig) -> RunTrace:
    x0, thr, _ = _prepare(spec, cfg)
    out = _gm_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                     cfg.store_iterates, False, *_ls_args(LineSearchConfig()))
    return _finish(spec, cfg, out)


def run_gm_ls(spec: ObjectiveSpec, cfg: SolverConfig, ls_config: LineSearchConfig | None = None) -> RunTrace:
    """Steepest descent with line search; stops early on an exactly zero gradient."""
    x0, thr, _ = _prepare(spec, cfg)
    out = _gm_kernel(spec.kind, spec.params, spec.f_star, x0, int(cfg.N), thr, cfg.stop_at_target,
                     cfg.store_iterates, True, *_ls_args(_ls(cfg, ls_config)))
    return _finish(spec, cfg, out)


def run(spec: ObjectiveSpec, cfg: SolverConfig, ls_config: LineSearchConfig | None = None) -> RunTrace:
    """Dispatch on ``cfg.algorithm``."""
    algo = cfg.algorithm
    if algo == "rp":
        return run_rp(spec, cfg, ls_config)
    if algo == "arp":
        return run_arp(spec, cfg, ls_config)
    if algo == "gm_ls":
        return run_gm_ls(spec, cfg, ls_config)
    return {"rg": run_rg, "fg": run_fg, "es": run_es, "gm": run_gm}[algo](spec, cfg)


# ---------------------------------------------------------------------------
# ES step-size calibration
# ---------------------------------------------------------------------------


def success_probability(spec: ObjectiveSpec, x0, sigma: float, directions: np.ndarray) -> float:
    """Fraction of ``x0 + sigma * u`` (rows of ``directions``) not worse than ``x0``."""
    f0 = spec.eval(x0)
    return float(np.mean(spec.eval(x0 + sigma * directions) <= f0))


def calibrate_sigma0(spec: ObjectiveSpec, x0=None, p: float = DEFAULT_P, trials: int = 20000,
                     seed: int | None = 0, tol: float = 1e-3, max_iter: int = 200) -> float:
    """Initial ES step with improvement probability close to ``p`` at ``x0``.

    All candidate steps share one batch of Gaussian directions, which makes the
    estimated probability monotone in ``sigma`` on convex functions, so plain
    bisection in ``log sigma`` applies.
    """
    if trials < 1000:
        raise ValueError("calibration needs at least 1000 trials")
    x0 = np.zeros(spec.dim) if x0 is None else np.asarray(x0, dtype=float)
    dirs = make_rng(seed).standard_normal((int(trials), spec.dim))

    def prob(log_s):
        return success_probability(spec, x0, math.exp(log_s), dirs)

    lo = hi = 0.0
    for _ in range(max_iter):
        if prob(lo) > p:
            break
        lo -= 2.0
    else:
        raise ValueError(f"no step size reaches success probability {p} on {spec.name}")
    for _ in range(max_iter):
        if prob(hi) < p:
            break
        hi += 2.0
    else:
        raise ValueError(f"success probability never drops below {p} on {spec.name}")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if prob(mid) > p:
            lo = mid
        else:
            hi = mid
    sigma = math.exp(0.5 * (lo + hi))
    if abs(prob(math.log(sigma)) - p) > 0.02:
        warnings.warn(f"calibrated sigma0={sigma:.3g} misses p={p} by more than 0.02", RuntimeWarning)
    return sigma
