"""Comparison-based one-dimensional minimisation along a direction.

The oracle brackets a minimiser of ``phi(h) = f(x + h u)`` by doubling steps
away from zero and then shrinks the bracket with golden-section steps. Only
order comparisons between function values are used, so the returned step is
unchanged when ``f`` is replaced by any strictly increasing transform of it.

Absolute mode stops once the bracket is at most ``2 mu`` wide and returns its
midpoint, hence ``|h - h*| <= mu``. Relative mode keeps shrinking until the
bracket width is at most ``mu |mid| / 2`` and returns ``(1 - mu/2) * mid``,
which lies between ``(1 - mu) h*`` and ``h*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .objectives import EvalCounter, ObjectiveSpec, _value, _value_dd

ABSOLUTE = 0
RELATIVE = 1

STATUS_OK = 0
STATUS_UNBOUNDED = 1
STATUS_NAN = 2

_GOLD = 0.3819660112501051  # 2 - golden ratio
_EPS = 2.220446049250313e-16
_ZERO_FLOOR = 1e-12


class LineSearchError(RuntimeError):
    pass


class UnboundedDirectionError(LineSearchError):
    """Bracket expansion ran out before the function stopped decreasing."""


class InvalidObjectiveError(LineSearchError):
    """The objective returned NaN."""


@njit(cache=True)
def _phi(kind, params, x, u, h, precise, buf):
    if precise:
        return _value_dd(kind, params, x, u, h)
    for i in range(x.size):
        buf[i] = x[i] + h * u[i]
    return _value(kind, params, buf), 0.0


@njit(cache=True)
def _less(ah, al, bh, bl):
    return ah < bh or (ah == bh and al < bl)


@njit(cache=True)
def _takes_centre(fh, fl, h_new, ch, cl, h_c):
    # ties go to the step of smaller magnitude
    if _less(fh, fl, ch, cl):
        return True
    return fh == ch and fl == cl and abs(h_new) < abs(h_c)


@njit(cache=True)
def _line_search(kind, params, x, u, mode, mu, step0, max_exp, precise, buf):
    """Returns ``(h, fes, a, b, status)``."""
    f0h, f0l = _phi(kind, params, x, u, 0.0, precise, buf)
    fph, fpl = _phi(kind, params, x, u, step0, precise, buf)
    fmh, fml = _phi(kind, params, x, u, -step0, precise, buf)
    fes = 3
    if math.isnan(f0h) or math.isnan(fph) or math.isnan(fmh):
        return 0.0, fes, 0.0, 0.0, STATUS_NAN

    if not _less(fph, fpl, f0h, f0l) and not _less(fmh, fml, f0h, f0l):
        a = -step0
        c = 0.0
        b = step0
        fch, fcl = f0h, f0l
    else:
        d = 1.0 if not _less(fmh, fml, fph, fpl) else -1.0
        prev = 0.0
        cur = d * step0
        if d > 0:
            fch, fcl = fph, fpl
        else:
            fch, fcl = fmh, fml
        expansions = 0
        while True:
            if expansions >= max_exp:
                return cur, fes, 0.0, 0.0, STATUS_UNBOUNDED
            nxt = 2.0 * cur
            fnh, fnl = _phi(kind, params, x, u, nxt, precise, buf)
            fes += 1
            expansions += 1
            if math.isnan(fnh):
                return 0.0, fes, 0.0, 0.0, STATUS_NAN
            if not _less(fnh, fnl, fch, fcl):
                break
            prev = cur
            cur = nxt
            fch, fcl = fnh, fnl
        c = cur
        if d > 0:
            a = prev
            b = nxt
        else:
            a = nxt
            b = prev

    while True:
        width = b - a
        mid = 0.5 * (a + b)
        if mode == ABSOLUTE:
            if width <= 2.0 * mu:
                break
        else:
            if width <= 0.5 * mu * abs(mid):
                break
            if abs(mid) + 0.5 * width <= _ZERO_FLOOR:
                break
        if width <= 4.0 * _EPS * max(1.0, abs(a), abs(b)):
            break
        if b - c >= c - a:
            xn = c + _GOLD * (b - c)
        else:
            xn = c - _GOLD * (c - a)
        fnh, fnl = _phi(kind, params, x, u, xn, precise, buf)
        fes += 1
        if math.isnan(fnh):
            return 0.0, fes, a, b, STATUS_NAN
        if xn > c:
            if _takes_centre(fnh, fnl, xn, fch, fcl, c):
                a = c
                c = xn
                fch, fcl = fnh, fnl
            else:
                b = xn
        else:
            if _takes_centre(fnh, fnl, xn, fch, fcl, c):
                b = c
                c = xn
                fch, fcl = fnh, fnl
            else:
                a = xn

    mid = 0.5 * (a + b)
    if mode == ABSOLUTE:
        h = mid
    elif abs(mid) <= _ZERO_FLOOR:
        h = 0.0
    else:
        h = (1.0 - 0.5 * mu) * mid
    return h, fes, a, b, STATUS_OK


def mode_code(mode: str) -> int:
    key = mode.strip().lower()
    if key in ("absolute", "abs"):
        return ABSOLUTE
    if key in ("relative", "rel"):
        return RELATIVE
    raise ValueError(f"unknown line search mode {mode!r}")


@dataclass(frozen=True)
class LineSearchConfig:
    mode: str = "relative"
    mu: float = 1e-5
    initial_step: float = 1.0
    max_expansions: int = 64
    precision: str = "double"

    def __post_init__(self):
        code = mode_code(self.mode)
        if not (self.mu >= 0.0):
            raise ValueError("mu must be nonnegative")
        if code == RELATIVE and self.mu >= 1.0:
            raise ValueError("relative mode needs mu < 1")
        if not (self.initial_step > 0.0):
            raise ValueError("initial_step must be positive")
        if self.max_expansions < 1:
            raise ValueError("max_expansions must be at least 1")
        if self.precision not in ("double", "compensated"):
            raise ValueError("precision must be 'double' or 'compensated'")

    @property
    def code(self) -> int:
        return mode_code(self.mode)

    @property
    def precise(self) -> bool:
        return self.precision == "compensated"


@dataclass(frozen=True)
class LineSearchResult:
    """Step, evaluations spent and final bracket.

    In relative mode ``h = (1 - mu/2) * mid`` may sit slightly inside zero from
    the bracket, i.e. just outside ``[a, b]``.
    """

    h: float
    fes_used: int
    bracket: tuple[float, float]


def raise_for_status(status: int, where: str = "line search") -> None:
    if status == STATUS_UNBOUNDED:
        raise UnboundedDirectionError(f"{where}: no finite minimiser found along the direction")
    if status == STATUS_NAN:
        raise InvalidObjectiveError(f"{where}: objective returned NaN")


def line_search(spec: ObjectiveSpec, x, u, cfg: LineSearchConfig | None = None,
                counter: EvalCounter | None = None) -> LineSearchResult:
    """Approximately minimise ``spec`` along the line ``x + h u``.

    ``u`` must be a unit vector. Evaluations are charged to ``counter``.
    """
    cfg = cfg or LineSearchConfig()
    x = np.ascontiguousarray(x, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if x.shape != (spec.dim,) or u.shape != (spec.dim,):
        raise ValueError(f"expected x and u of shape ({spec.dim},)")
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("direction must have unit norm")
    buf = np.empty(spec.dim)
    h, fes, a, b, status = _line_search(spec.kind, spec.params, x, u, cfg.code, float(cfg.mu),
                                        float(cfg.initial_step), int(cfg.max_expansions), cfg.precise, buf)
    if counter is not None:
        counter.add(fes)
    raise_for_status(status)
    return LineSearchResult(h=float(h), fes_used=int(fes), bracket=(float(a), float(b)))
