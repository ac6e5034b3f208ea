"""Random search directions.

Three distributions are supported: uniform on the unit sphere (normalised
Gaussian vectors), uniform over the 2n signed unit vectors, and the standard
Gaussian. Draws come from a ``numpy.random.Generator`` (PCG64 seeded per run);
normal variates use numpy's ziggurat transform, which numba reproduces
bit-for-bit inside compiled solvers, so the Python sampler and the compiled
solvers consume one and the same stream.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

UNIT_SPHERE = 0
SIGNED_UNIT = 1
GAUSSIAN = 2

SAMPLERS = {"unit_sphere": UNIT_SPHERE, "signed_unit": SIGNED_UNIT, "gaussian": GAUSSIAN}
_ALIASES = {"sphere": "unit_sphere", "discrete": "signed_unit", "normal": "gaussian"}


def sampler_code(kind: str) -> int:
    key = kind.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in SAMPLERS:
        raise ValueError(f"unknown sampler {kind!r}; expected one of {sorted(SAMPLERS)} or {sorted(_ALIASES)}")
    return SAMPLERS[key]


def make_rng(seed: int | None) -> np.random.Generator:
    """Independent generator for one (run, repetition) pair."""
    return np.random.default_rng(seed)


@njit(cache=True)
def _draw(kind, rng, out):
    n = out.size
    if kind == SIGNED_UNIT:
        j = rng.integers(0, 2 * n)
        for i in range(n):
            out[i] = 0.0
        if j < n:
            out[j] = 1.0
        else:
            out[j - n] = -1.0
        return
    while True:
        v = rng.standard_normal(n)
        if kind == GAUSSIAN:
            out[:] = v
            return
        s = 0.0
        for i in range(n):
            s += v[i] * v[i]
        if s > 0.0:
            # zero vector has probability zero; redraw if it ever happens
            r = math.sqrt(s)
            for i in range(n):
                out[i] = v[i] / r
            return


class DirectionSampler:
    """Stateful direction generator for a single run; never share across runs."""

    def __init__(self, kind: str, dim: int, seed: int | None = None, rng: np.random.Generator | None = None):
        if dim < 1:
            raise ValueError("dimension must be at least 1")
        self.code = sampler_code(kind)
        self.kind = [k for k, v in SAMPLERS.items() if v == self.code][0]
        self.dim = int(dim)
        self.rng = rng if rng is not None else make_rng(seed)

    def sample(self) -> np.ndarray:
        out = np.empty(self.dim)
        _draw(self.code, self.rng, out)
        return out

    def __repr__(self):
        return f"DirectionSampler(kind={self.kind!r}, dim={self.dim})"


def sample_many(kind: str, dim: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised batch of ``size`` directions, shape ``(size, dim)``.

    Uses the same constructions as :class:`DirectionSampler` but consumes the
    stream in a different order, so it is meant for Monte-Carlo estimates only.
    """
    code = sampler_code(kind)
    if code == SIGNED_UNIT:
        j = rng.integers(0, 2 * dim, size=size)
        out = np.zeros((size, dim))
        rows = np.arange(size)
        out[rows, j % dim] = np.where(j < dim, 1.0, -1.0)
        return out
    v = rng.standard_normal((size, dim))
    if code == GAUSSIAN:
        return v
    norms = np.linalg.norm(v, axis=1)
    bad = norms == 0.0
    while np.any(bad):
        v[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(v, axis=1)
        bad = norms == 0.0
    return v / norms[:, None]
