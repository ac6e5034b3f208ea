import math

import numpy as np
import pytest

from randompursuit.objectives import make_benchmark
from randompursuit.theory import (
    RecurrenceParams,
    check_moments,
    check_n_opt,
    check_recurrence,
    check_sandwich,
    check_scalar_moments,
    check_single_step,
    empirical_rate,
    format_results,
    n_opt,
    rate_bound,
    recurrence_grid,
    single_step_bounds,
)


def test_signed_unit_exact_enumeration():
    rep = check_moments("signed_unit", [3.0, 4.0])
    assert rep.exact and rep.passed
    np.testing.assert_allclose(rep.estimator_mean, [1.5, 2.0], rtol=0, atol=1e-12)
    assert rep.estimator_second_moment == pytest.approx(12.5, abs=1e-12)


def test_gaussian_second_moment_is_n_plus_two():
    rep = check_moments("gaussian", np.eye(5)[0], trials=10**6, seed=4)
    assert rep.target_second == 7.0
    assert abs(rep.estimator_second_moment - 7.0) <= 4 * rep.mc_stderr
    assert rep.passed


@pytest.mark.parametrize("kind", ["unit_sphere", "gaussian", "signed_unit"])
def test_monte_carlo_moments_pass(kind):
    x = np.random.default_rng(1).standard_normal(6)
    assert check_moments(kind, x, trials=2 * 10**5, seed=2, exact=False).passed


def test_moments_are_bilinear():
    x = np.array([0.3, -1.2, 0.0, 2.0])
    a = check_moments("unit_sphere", x, trials=10**5, seed=7)
    b = check_moments("unit_sphere", 2.5 * x, trials=10**5, seed=7)
    np.testing.assert_allclose(b.estimator_mean, 2.5 * a.estimator_mean, rtol=1e-12, atol=1e-15)
    assert b.estimator_second_moment == pytest.approx(6.25 * a.estimator_second_moment, rel=1e-12)


def test_moment_check_input_validation():
    with pytest.raises(ValueError):
        check_moments("unit_sphere", np.zeros(3))
    with pytest.raises(ValueError):
        check_moments("unit_sphere", np.ones(3), trials=100)
    with pytest.raises(ValueError):
        check_moments("gaussian", np.ones(3), exact=True)


def test_scalar_moments():
    out = check_scalar_moments(10**6, seed=3)
    assert all(v[3] for v in out.values())
    assert out[4][0] == pytest.approx(3.0, abs=0.05)


def test_single_step_at_minimiser():
    spec = make_benchmark("sphere", 6)
    mu = 1e-3
    rep = check_single_step(spec, spec.x_star, 1.0, spec.x_star, mu, trials=2 * 10**4, mode="absolute")
    assert rep.passed
    assert rep.mean <= spec.f_star + spec.L1 * mu ** 2 / 2


def test_single_step_gradient_bound_on_ellipsoid():
    spec = make_benchmark("ellipsoid", 8)
    h = 1.0 / spec.L1
    x = np.zeros(8)
    rep = check_single_step(spec, x, h, x - spec.grad(x), 1e-9, trials=10**5, mode="absolute",
                            precision="compensated", seed=5)
    assert rep.gradient_bound is not None
    assert rep.passed, rep


def test_single_step_relative_mode_uses_inflated_dimension():
    spec = make_benchmark("sphere", 8)
    x = np.zeros(8)
    z = spec.x_star
    mu = 0.1
    general, grad_form = single_step_bounds(spec, x, 1.0, z, mu, mode="relative")
    f, g = spec.eval(x), spec.grad(x)
    n_eff = 8 / (1 - mu)
    assert general == pytest.approx(f + g @ (z - x) / n_eff + (z - x) @ (z - x) / (2 * n_eff), rel=1e-14)
    assert grad_form == pytest.approx(f - g @ g / (2 * n_eff), rel=1e-14)
    assert check_single_step(spec, x, 1.0, z, mu, trials=10**5, mode="relative", seed=1).passed


def test_single_step_gradient_form_needs_small_h():
    spec = make_benchmark("ellipsoid", 4)
    _, grad_form = single_step_bounds(spec, np.zeros(4), 1.0, np.ones(4), 1e-5)
    assert grad_form is None
    with pytest.raises(ValueError):
        single_step_bounds(make_benchmark("funnel", 4), np.zeros(4), 1.0, np.ones(4), 1e-5)


def test_strong_convexity_bound_example():
    spec = make_benchmark("sphere", 16)
    assert rate_bound("strong", spec, 8.0, 160, 0.0) == pytest.approx(2.6211640988789523e-4, rel=1e-12)
    additive = rate_bound("strong", spec, 0.0, 160, 1e-5)
    assert additive == pytest.approx(8e-10, rel=1e-12)


def test_growth_and_convex_bounds():
    spec = make_benchmark("sphere", 16)
    assert rate_bound("growth", spec, 8.0, 10, 0.0) == pytest.approx(8 * (1 - 1 / 64) ** 10, rel=1e-14)
    vals = [rate_bound("convex", spec, 8.0, N, 0.0) for N in range(0, 200)]
    assert np.all(np.diff(vals) < 0)
    assert vals[0] == pytest.approx(2 * 16 * 16, rel=1e-14)


def test_rate_bound_rejects_bad_pairings():
    with pytest.raises(ValueError):
        rate_bound("strong", make_benchmark("funnel", 4), 1.0, 10, 1e-5)
    with pytest.raises(ValueError):
        rate_bound("strong", make_benchmark("nesterov_smooth", 4), 1.0, 10, 1e-5)
    with pytest.raises(ValueError):
        rate_bound("quadratic", make_benchmark("sphere", 4), 1.0, 10, 1e-5)
    with pytest.raises(ValueError):
        rate_bound("convex", make_benchmark("sphere", 4), 1.0, -1, 1e-5)


def test_n_opt():
    Q, L1, mu = 50.0, 4.0, 1e-3
    N = n_opt(Q, L1, mu)
    assert N == pytest.approx(math.sqrt(2 * Q / (L1 * mu ** 2)))
    assert Q / N + N * L1 * mu ** 2 / 2 == pytest.approx(mu * math.sqrt(2 * Q * L1), rel=1e-12)
    assert check_n_opt().passed


def test_recurrence_hand_iteration():
    p = RecurrenceParams(theta=2.0, C=1.0, D=0.0, f1=4.0)
    assert p.Q == 4.0
    rep = check_recurrence(p, t_max=10**4)
    assert rep.passed
    assert rep.worst_ratio <= 1.0


def test_recurrence_slack_is_linear_in_D():
    # the extra D per step accumulates to exactly (t - 1) D
    base = RecurrenceParams(2.0, 1.0, 0.0, 4.0)
    with_d = RecurrenceParams(2.0, 1.0, 1e-3, 4.0)
    assert with_d.Q == base.Q
    assert check_recurrence(with_d, 1000).passed


def test_recurrence_grid_violations_only_at_large_theta():
    # with theta = 4 the factor 1 - theta/t is negative for t < 4 and the
    # unclamped sequence overshoots; smaller theta stays within the bound
    reps = recurrence_grid()
    assert len(reps) == 54
    bad = {r.params.theta for r in reps if not r.passed}
    assert bad == {4.0}
    assert all(r.first_violation <= 4 for r in reps if not r.passed)


def test_recurrence_params_validation():
    for args in ((1.0, 1.0, 0.0, 1.0), (2.0, 0.0, 0.0, 1.0), (2.0, 1.0, -1.0, 1.0), (2.0, 1.0, 0.0, -1.0)):
        with pytest.raises(ValueError):
            RecurrenceParams(*args)


@pytest.mark.parametrize("name,n", [("sphere", 16), ("ellipsoid", 8), ("nesterov_strong", 16)])
def test_quadratic_sandwich(name, n):
    assert check_sandwich(make_benchmark(name, n), points=1000, seed=1).passed


def test_empirical_rate_quick():
    rep = empirical_rate(make_benchmark("sphere", 16), N=320, seeds=40, mu=1e-9)
    assert rep.passed_bound
    assert rep.passed_decay
    assert rep.mean_curve.shape == (321,)


def test_format_results_table():
    text = format_results([check_n_opt()])
    assert text.splitlines()[0].startswith("check")
    assert "PASS" in text
