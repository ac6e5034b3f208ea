import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randompursuit.linesearch import (
    InvalidObjectiveError,
    LineSearchConfig,
    UnboundedDirectionError,
    _line_search,
    line_search,
)
from randompursuit.objectives import EvalCounter, make_benchmark


def test_sphere_coordinate_step():
    spec = make_benchmark("sphere", 2)
    r = line_search(spec, np.zeros(2), np.array([1.0, 0.0]), LineSearchConfig(mode="absolute", mu=1e-5))
    assert abs(r.h - 1.0) <= 1e-5
    a, b = r.bracket
    assert a <= r.h <= b and b - a <= 2e-5


def test_ellipsoid_coordinate_step():
    spec = make_benchmark("ellipsoid", 2)
    r = line_search(spec, np.zeros(2), np.array([0.0, 1.0]), LineSearchConfig(mode="absolute", mu=1e-5))
    assert abs(r.h - 1.0) <= 1e-5


def test_funnel_and_sphere_give_identical_steps():
    # plain doubles round the two functions differently once the bracket is below
    # their resolution, so exact agreement needs the compensated comparisons
    f1, f5 = make_benchmark("sphere", 4), make_benchmark("funnel", 4)
    rng = np.random.default_rng(1)
    for mode in ("absolute", "relative"):
        cfg = LineSearchConfig(mode=mode, mu=1e-5, precision="compensated")
        for _ in range(50):
            x = rng.standard_normal(4)
            u = rng.standard_normal(4)
            u /= np.linalg.norm(u)
            assert line_search(f1, x, u, cfg).h == line_search(f5, x, u, cfg).h


def test_at_minimiser():
    spec = make_benchmark("sphere", 5)
    rng = np.random.default_rng(2)
    for _ in range(20):
        u = rng.standard_normal(5)
        u /= np.linalg.norm(u)
        assert abs(line_search(spec, spec.x_star, u, LineSearchConfig(mode="absolute", mu=1e-5)).h) <= 1e-5
        assert line_search(spec, spec.x_star, u, LineSearchConfig(mode="relative", mu=1e-5)).h == 0.0


@pytest.mark.parametrize("mode", ["absolute", "relative"])
@pytest.mark.parametrize("precision", ["double", "compensated"])
def test_contract_on_quadratics(mode, precision):
    mu = 1e-5
    rng = np.random.default_rng(5)
    for name in ("sphere", "ellipsoid", "nesterov_smooth", "nesterov_strong"):
        for _ in range(100):
            spec = make_benchmark(name, 6)
            x = spec.x_star + rng.standard_normal(6)
            u = rng.standard_normal(6)
            u /= np.linalg.norm(u)
            g = spec.grad(x)
            hs = -(g @ u) / ((spec.grad(x + u) - g) @ u)
            h = line_search(spec, x, u, LineSearchConfig(mode=mode, mu=mu, precision=precision)).h
            if mode == "absolute":
                assert abs(h - hs) <= mu * (1 + 1e-6)
            else:
                s = math.copysign(1.0, hs)
                assert s * (1 - mu) * hs * (1 - 1e-9) <= s * h <= s * hs * (1 + 1e-9)


def test_compensated_resolves_tiny_tolerance():
    spec = make_benchmark("sphere", 6)
    rng = np.random.default_rng(8)
    cfg = LineSearchConfig(mode="absolute", mu=1e-10, precision="compensated")
    for _ in range(200):
        x = rng.standard_normal(6)
        u = rng.standard_normal(6)
        u /= np.linalg.norm(u)
        assert abs(line_search(spec, x, u, cfg).h - (spec.x_star - x) @ u) <= 1e-10


def test_descent_up_to_tolerance():
    rng = np.random.default_rng(6)
    mu = 1e-3
    for name in ("sphere", "ellipsoid", "nesterov_smooth", "nesterov_strong"):
        spec = make_benchmark(name, 6)
        for _ in range(100):
            x = spec.x_star + rng.standard_normal(6)
            u = rng.standard_normal(6)
            u /= np.linalg.norm(u)
            h = line_search(spec, x, u, LineSearchConfig(mode="absolute", mu=mu)).h
            assert spec.eval(x + h * u) <= spec.eval(x) + spec.L1 * mu ** 2 / 2 + 1e-12


def test_fes_accounting():
    spec = make_benchmark("ellipsoid", 4)
    c = EvalCounter()
    u = np.array([0.5, 0.5, 0.5, 0.5])
    r1 = line_search(spec, np.zeros(4), u, counter=c)
    r2 = line_search(spec, np.ones(4), u, counter=c)
    assert c.count == r1.fes_used + r2.fes_used
    assert r1.fes_used >= 4

    buf = np.empty(4)
    h, fes, a, b, st = _line_search(spec.kind, spec.params, np.zeros(4), u, 1, 1e-5, 1.0, 64, False, buf)
    assert fes == r1.fes_used


def test_rejects_non_unit_direction():
    with pytest.raises(ValueError):
        line_search(make_benchmark("sphere", 2), np.zeros(2), np.array([1.0, 1.0]))


def test_config_validation():
    with pytest.raises(ValueError):
        LineSearchConfig(mu=-1)
    with pytest.raises(ValueError):
        LineSearchConfig(mode="relative", mu=1.0)
    with pytest.raises(ValueError):
        LineSearchConfig(mode="cubic")
    with pytest.raises(ValueError):
        LineSearchConfig(initial_step=0)
    with pytest.raises(ValueError):
        LineSearchConfig(precision="quad")


def test_unbounded_direction():
    # a tiny expansion budget cannot reach a minimiser a million units away
    spec = make_benchmark("sphere", 2)
    cfg = LineSearchConfig(mode="absolute", max_expansions=2)
    with pytest.raises(UnboundedDirectionError):
        line_search(spec, np.array([-1e6, 1.0]), np.array([1.0, 0.0]), cfg)


def test_nan_objective():
    spec = make_benchmark("sphere", 2)
    with pytest.raises(InvalidObjectiveError):
        line_search(spec, np.array([np.nan, 0.0]), np.array([1.0, 0.0]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1),
       st.sampled_from([1e-2, 1e-4, 1e-6]))
def test_sphere_contract_property(x, u, mu):
    spec = make_benchmark("sphere", 3)
    x = np.array(x)
    u = np.array(u) / np.linalg.norm(u)
    hs = (spec.x_star - x) @ u
    h = line_search(spec, x, u, LineSearchConfig(mode="absolute", mu=mu, precision="compensated")).h
    assert abs(h - hs) <= mu
