"""Benchmark objectives: shifted quadratics, Nesterov's smooth functions and a funnel.

Every benchmark has two evaluation routes. ``ObjectiveSpec.eval`` / ``.grad``
are plain numpy and accept batches of points (shape ``(..., n)``). The
``_value`` / ``_gradient`` kernels are numba-compiled scalar loops used by the
solvers; they dispatch on an integer ``kind`` so that compiled solvers can be
cached on disk. Tests cross-check the two routes against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

SPHERE = 0
ELLIPSOID = 1
NESTEROV_SMOOTH = 2
NESTEROV_STRONG = 3
FUNNEL = 4

BENCHMARKS = {
    "sphere": SPHERE,
    "ellipsoid": ELLIPSOID,
    "nesterov_smooth": NESTEROV_SMOOTH,
    "nesterov_strong": NESTEROV_STRONG,
    "funnel": FUNNEL,
}

_KIND_NAMES = {v: k for k, v in BENCHMARKS.items()}


def canonical_name(name: str) -> str:
    """Map CLI spellings (``nesterov-smooth``, ``f2``) onto registry names."""
    key = name.strip().lower().replace("-", "_")
    aliases = {"f1": "sphere", "f2": "ellipsoid", "f3": "nesterov_smooth",
               "f4": "nesterov_strong", "f5": "funnel"}
    key = aliases.get(key, key)
    if key not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; expected one of {sorted(BENCHMARKS)}")
    return key


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _chain_energy(x):
    # 0.5 * (x_1^2 + sum (x_{i+1} - x_i)^2 + x_n^2) - x_1
    n = x.size
    s = x[0] * x[0] + x[n - 1] * x[n - 1]
    for i in range(n - 1):
        d = x[i + 1] - x[i]
        s += d * d
    return 0.5 * s - x[0]


@njit(cache=True)
def _shifted_sq(x):
    s = 0.0
    for i in range(x.size):
        d = x[i] - 1.0
        s += d * d
    return s


@njit(cache=True)
def _value(kind, params, x):
    L1 = params[0]
    m = params[1]
    if kind == SPHERE:
        return 0.5 * _shifted_sq(x)
    elif kind == ELLIPSOID:
        half = x.size // 2
        s = 0.0
        for i in range(x.size):
            d = x[i] - 1.0
            if i < half:
                s += L1 * d * d
            else:
                s += d * d
        return 0.5 * s
    elif kind == NESTEROV_SMOOTH:
        return 0.25 * L1 * _chain_energy(x)
    elif kind == NESTEROV_STRONG:
        sq = 0.0
        for i in range(x.size):
            sq += x[i] * x[i]
        return 0.25 * (L1 - m) * _chain_energy(x) + 0.5 * m * sq
    else:
        return math.log1p(10.0 * math.sqrt(_shifted_sq(x)))


@njit(cache=True)
def _tridiag_apply(x, out):
    # out = A x with A = tridiag(-1, 2, -1)
    n = x.size
    for i in range(n):
        v = 2.0 * x[i]
        if i > 0:
            v -= x[i - 1]
        if i < n - 1:
            v -= x[i + 1]
        out[i] = v


@njit(cache=True)
def _gradient(kind, params, x, out):
    L1 = params[0]
    m = params[1]
    n = x.size
    if kind == SPHERE:
        for i in range(n):
            out[i] = x[i] - 1.0
    elif kind == ELLIPSOID:
        half = n // 2
        for i in range(n):
            out[i] = (L1 if i < half else 1.0) * (x[i] - 1.0)
    elif kind == NESTEROV_SMOOTH or kind == NESTEROV_STRONG:
        _tridiag_apply(x, out)
        out[0] -= 1.0
        c = 0.25 * L1 if kind == NESTEROV_SMOOTH else 0.25 * (L1 - m)
        for i in range(n):
            out[i] *= c
        if kind == NESTEROV_STRONG:
            for i in range(n):
                out[i] += m * x[i]
    else:
        r = math.sqrt(_shifted_sq(x))
        if r == 0.0:
            for i in range(n):
                out[i] = 0.0
        else:
            c = 10.0 / ((1.0 + 10.0 * r) * r)
            for i in range(n):
                out[i] = c * (x[i] - 1.0)


# ---------------------------------------------------------------------------
# compensated (double-double) evaluation along a line
# ---------------------------------------------------------------------------
# f(x + h u) is formed and reduced in double-double arithmetic and returned as
# an unevaluated pair (hi, lo). Ordering pairs lexicographically resolves steps
# far below the sqrt(eps * f) floor of plain doubles. The funnel's square root
# and logarithm are refined to double-double accuracy as well, so that it
# orders points exactly like the sphere it is a monotone transform of.


@njit(cache=True)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True)
def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(cache=True)
def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


@njit(cache=True)
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True)
def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    return _quick_two_sum(s, e + al + bl)


@njit(cache=True)
def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _quick_two_sum(p, e + ah * bl + al * bh)


@njit(cache=True)
def _dd_point(x, u, h, i):
    ph, pl = _two_prod(h, u[i])
    return _dd_add(x[i], 0.0, ph, pl)


@njit(cache=True)
def _dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = _dd_mul(q1, 0.0, bh, bl)
    rh, rl = _dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = _dd_mul(q2, 0.0, bh, bl)
    rh, rl = _dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = _quick_two_sum(q1, q2)
    return _dd_add(q1, q2, q3, 0.0)


_LN2_HI = 0.6931471805599453
_LN2_LO = 2.3190468138462996e-17


@njit(cache=True)
def _dd_expm1(ah, al):
    # exp(a) - 1 = 2^k (1 + expm1(r)) - 1 with |r| <= ln2/2; expm1(r) comes from a
    # Taylor series at r / 1024 followed by ten doublings e -> 2e + e^2
    k = float(round(ah / _LN2_HI))
    ph, pl = _two_prod(k, _LN2_HI)
    rh, rl = _dd_add(ah, al, -ph, -pl)
    rh, rl = _dd_add(rh, rl, -k * _LN2_LO, 0.0)
    rh *= 1.0 / 1024.0
    rl *= 1.0 / 1024.0
    sh, sl = rh, rl
    th, tl = rh, rl
    for j in range(2, 40):
        th, tl = _dd_mul(th, tl, rh, rl)
        th, tl = _dd_div(th, tl, float(j), 0.0)
        sh, sl = _dd_add(sh, sl, th, tl)
        if abs(th) <= 1e-34 * abs(sh):
            break
    for _ in range(10):
        qh, ql = _dd_mul(sh, sl, sh, sl)
        sh, sl = _dd_add(2.0 * sh, 2.0 * sl, qh, ql)
    if k == 0.0:
        return sh, sl
    sh, sl = _dd_add(sh, sl, 1.0, 0.0)
    scale = 2.0 ** k
    return _dd_add(sh * scale, sl * scale, -1.0, 0.0)


@njit(cache=True)
def _dd_log1p(wh, wl):
    # one Newton step on expm1(y) = w from the double-accurate start
    y = math.log1p(wh)
    eh, el = _dd_expm1(y, 0.0)
    nh, nl = _dd_add(wh, wl, -eh, -el)
    dh, dl = _dd_add(eh, el, 1.0, 0.0)
    ch, cl = _dd_div(nh, nl, dh, dl)
    return _dd_add(y, 0.0, ch, cl)


@njit(cache=True)
def _value_dd(kind, params, x, u, h):
    L1 = params[0]
    m = params[1]
    n = x.size
    sh = 0.0
    sl = 0.0
    if kind == SPHERE or kind == ELLIPSOID or kind == FUNNEL:
        half = n // 2
        for i in range(n):
            ph, pl = _dd_point(x, u, h, i)
            dh, dl = _dd_add(ph, pl, -1.0, 0.0)
            qh, ql = _dd_mul(dh, dl, dh, dl)
            if kind == ELLIPSOID and i < half:
                qh, ql = _dd_mul(qh, ql, L1, 0.0)
            sh, sl = _dd_add(sh, sl, qh, ql)
        if kind != FUNNEL:
            return 0.5 * sh, 0.5 * sl
        if sh == 0.0:
            return 0.0, 0.0
        r = math.sqrt(sh)
        rh, rl = _two_prod(r, r)
        eh, el = _dd_add(sh, sl, -rh, -rl)
        wh, wl = _dd_mul(10.0, 0.0, r, (eh + el) / (2.0 * r))
        return _dd_log1p(wh, wl)
    # chain energy 0.5 * (p_1^2 + sum (p_{i+1} - p_i)^2 + p_n^2) - p_1
    p0h, p0l = _dd_point(x, u, h, 0)
    prevh, prevl = p0h, p0l
    sh, sl = _dd_mul(p0h, p0l, p0h, p0l)
    nh, nl = sh, sl
    for i in range(1, n):
        ph, pl = _dd_point(x, u, h, i)
        dh, dl = _dd_add(ph, pl, -prevh, -prevl)
        qh, ql = _dd_mul(dh, dl, dh, dl)
        sh, sl = _dd_add(sh, sl, qh, ql)
        qh, ql = _dd_mul(ph, pl, ph, pl)
        nh, nl = _dd_add(nh, nl, qh, ql)
        prevh, prevl = ph, pl
    qh, ql = _dd_mul(prevh, prevl, prevh, prevl)
    sh, sl = _dd_add(sh, sl, qh, ql)
    eh, el = _dd_add(0.5 * sh, 0.5 * sl, -p0h, -p0l)
    if kind == NESTEROV_SMOOTH:
        return _dd_mul(0.25 * L1, 0.0, eh, el)
    eh, el = _dd_mul(0.25 * (L1 - m), 0.0, eh, el)
    qh, ql = _dd_mul(0.5 * m, 0.0, nh, nl)
    return _dd_add(eh, el, qh, ql)


# ---------------------------------------------------------------------------
# numpy reference route
# ---------------------------------------------------------------------------


def _np_chain_energy(x):
    x = np.asarray(x, dtype=float)
    diffs = np.diff(x, axis=-1)
    s = x[..., 0] ** 2 + np.sum(diffs * diffs, axis=-1) + x[..., -1] ** 2
    return 0.5 * s - x[..., 0]


def _np_tridiag(x):
    ax = 2.0 * x
    ax[..., 1:] -= x[..., :-1]
    ax[..., :-1] -= x[..., 1:]
    return ax


def _np_value(kind, L1, m, x):
    x = np.asarray(x, dtype=float)
    if kind == SPHERE:
        d = x - 1.0
        return 0.5 * np.sum(d * d, axis=-1)
    if kind == ELLIPSOID:
        d = x - 1.0
        w = np.ones(x.shape[-1])
        w[: x.shape[-1] // 2] = L1
        return 0.5 * np.sum(w * d * d, axis=-1)
    if kind == NESTEROV_SMOOTH:
        return 0.25 * L1 * _np_chain_energy(x)
    if kind == NESTEROV_STRONG:
        return 0.25 * (L1 - m) * _np_chain_energy(x) + 0.5 * m * np.sum(x * x, axis=-1)
    d = x - 1.0
    return np.log1p(10.0 * np.sqrt(np.sum(d * d, axis=-1)))


def _np_grad(kind, L1, m, x):
    x = np.asarray(x, dtype=float)
    if kind == SPHERE:
        return x - 1.0
    if kind == ELLIPSOID:
        w = np.ones(x.shape[-1])
        w[: x.shape[-1] // 2] = L1
        return w * (x - 1.0)
    if kind in (NESTEROV_SMOOTH, NESTEROV_STRONG):
        g = _np_tridiag(x)
        g[..., 0] -= 1.0
        if kind == NESTEROV_SMOOTH:
            return 0.25 * L1 * g
        return 0.25 * (L1 - m) * g + m * x
    d = x - 1.0
    r = np.sqrt(np.sum(d * d, axis=-1, keepdims=True))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = 10.0 * d / ((1.0 + 10.0 * r) * r)
    return np.where(r > 0.0, g, 0.0)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """A benchmark function together with the constants the protocol needs.

    ``L1`` bounds the curvature (quadratic upper bound), ``m`` is the
    strong-convexity parameter used by the accelerated schemes, ``R2`` the
    squared distance bound and ``S`` the scale that relative accuracies refer to.
    For the funnel, ``L1`` and ``m`` are those of the sphere it is a monotone
    transform of; it is neither convex nor in the curvature class.
    """

    name: str
    dim: int
    L1: float
    m: float
    x_star: np.ndarray
    f_star: float
    R2: float
    S: float
    convex: bool
    strongly_convex: bool
    kind: int = field(repr=False)
    params: np.ndarray = field(repr=False)

    def eval(self, x) -> float | np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected points of dimension {self.dim}, got {x.shape}")
        return _np_value(self.kind, self.L1, self.m, x)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected points of dimension {self.dim}, got {x.shape}")
        return _np_grad(self.kind, self.L1, self.m, x)

    @property
    def has_grad(self) -> bool:
        return True

    def __call__(self, x):
        return self.eval(x)


@dataclass
class EvalCounter:
    """Per-run function-evaluation (FES) accumulator."""

    count: int = 0

    def add(self, k: int = 1) -> None:
        self.count += int(k)


def eval_counted(spec: ObjectiveSpec, x, counter: EvalCounter) -> float:
    """Evaluate ``spec`` at a single point and charge one evaluation to ``counter``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"{spec.name}: expected a point of shape ({spec.dim},), got {x.shape}")
    counter.add(1)
    return float(_value(spec.kind, spec.params, x))


def tridiagonal_solve(n: int, shift: float = 0.0) -> np.ndarray:
    """Solve ``(A + shift*I) x = e1`` for the chain matrix ``A = tridiag(-1, 2, -1)``."""
    ab = np.zeros((3, n))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0 + shift
    ab[2, :-1] = -1.0
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return solve_banded((1, 1), ab, rhs)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_default(label, given, expected):
    if given is not None and not math.isclose(given, expected, rel_tol=1e-12):
        raise ValueError(f"{label} is fixed to {expected} for this benchmark, got {given}")


def make_benchmark(name: str, n: int, L1: float | None = None, m: float | None = None) -> ObjectiveSpec:
    """Build one of the five protocol benchmarks.

    ``L1`` / ``m`` default to the protocol values (sphere 1/1, ellipsoid 1000/1,
    Nesterov smooth 1000, Nesterov strong 1000/1). Parameters fixed by a
    function's definition (e.g. the sphere's curvature) are validated, not
    overridden.
    """
    key = canonical_name(name)
    n = int(n)
    if n < 1:
        raise ValueError("dimension must be a positive integer")
    kind = BENCHMARKS[key]
    ones = np.ones(n)

    if kind in (SPHERE, FUNNEL):
        _check_default("L1", L1, 1.0)
        _check_default("m", m, 1.0)
        L1v, mv = 1.0, 1.0
        x_star, f_star, R2 = ones, 0.0, float(n)
        S = 0.5 * n
        convex = kind == SPHERE
        strong = kind == SPHERE
    elif kind == ELLIPSOID:
        if n % 2:
            raise ValueError("ellipsoid needs an even dimension")
        L1v = 1000.0 if L1 is None else float(L1)
        if L1v < 1.0:
            raise ValueError("ellipsoid needs L1 >= 1 (the remaining diagonal entries are 1)")
        _check_default("m", m, 1.0)
        mv = 1.0
        x_star, f_star, R2 = ones, 0.0, float(n)
        # protocol scale S = 50 n at L1 = 1000, kept proportional to L1
        S = L1v * n / 20.0
        convex = strong = True
    elif kind == NESTEROV_SMOOTH:
        L1v = 1000.0 if L1 is None else float(L1)
        if L1v <= 0:
            raise ValueError("L1 must be positive")
        mv = L1v / (4.0 * (n + 1) ** 2)
        _check_default("m", m, mv)
        x_star = tridiagonal_solve(n)
        f_star = -0.125 * L1v * x_star[0]
        R2 = (n + 1) / 3.0
        S = 0.5 * L1v * R2
        convex, strong = True, False
    else:
        L1v = 1000.0 if L1 is None else float(L1)
        mv = 1.0 if m is None else float(m)
        if not (mv > 0.0):
            raise ValueError("nesterov_strong needs m > 0")
        if mv > L1v:
            raise ValueError(f"nesterov_strong needs L1 >= m, got L1={L1v}, m={mv}")
        if L1v == mv:
            x_star = np.zeros(n)
        else:
            x_star = tridiagonal_solve(n, shift=4.0 * mv / (L1v - mv))
        f_star = -0.125 * (L1v - mv) * x_star[0]
        # protocol constants R^2 = sqrt(1000)/4 and S = 1000 at L1 = 1000
        R2 = math.sqrt(L1v) / 4.0
        S = L1v
        convex = strong = True

    params = _frozen([L1v, mv])
    return ObjectiveSpec(
        name=key, dim=n, L1=L1v, m=mv, x_star=_frozen(x_star), f_star=float(f_star),
        R2=float(R2), S=float(S), convex=convex, strongly_convex=strong,
        kind=kind, params=params,
    )
