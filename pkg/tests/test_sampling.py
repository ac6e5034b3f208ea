import numpy as np
import pytest

from randompursuit.sampling import DirectionSampler, sample_many, sampler_code


def test_sphere_has_unit_norm():
    s = DirectionSampler("unit_sphere", 3, seed=1)
    for _ in range(100):
        assert abs(np.linalg.norm(s.sample()) - 1.0) <= 1e-12


def test_signed_unit_frequencies():
    s = DirectionSampler("signed_unit", 2, seed=2)
    draws = np.array([s.sample() for _ in range(100_000)])
    atoms = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    for a in atoms:
        freq = np.mean(np.all(draws == a, axis=1))
        assert abs(freq - 0.25) <= 0.01
    assert np.all(np.sum(np.abs(draws), axis=1) == 1.0)


def test_gaussian_fourth_moment():
    v = sample_many("gaussian", 1, 10**6, np.random.default_rng(3))[:, 0]
    assert abs(np.mean(v ** 4) - 3.0) <= 0.05


@pytest.mark.parametrize("kind", ["unit_sphere", "signed_unit", "gaussian"])
def test_same_seed_same_stream(kind):
    a = DirectionSampler(kind, 5, seed=7)
    b = DirectionSampler(kind, 5, seed=7)
    for _ in range(20):
        np.testing.assert_array_equal(a.sample(), b.sample())


def test_aliases_and_errors():
    assert sampler_code("discrete") == sampler_code("signed_unit")
    assert sampler_code("sphere") == sampler_code("unit-sphere")
    with pytest.raises(ValueError):
        sampler_code("sobol")
    with pytest.raises(ValueError):
        DirectionSampler("gaussian", 0)


def test_sphere_isotropy():
    n = 4
    x = np.array([1.0, -2.0, 0.5, 3.0])
    u = sample_many("unit_sphere", n, 10**6, np.random.default_rng(9))
    w = (u @ x)[:, None] * u
    se = w.std(axis=0) / np.sqrt(len(u))
    assert np.all(np.abs(w.mean(axis=0) - x / n) <= 4 * se)


def test_gaussian_second_moment():
    n = 3
    x = np.array([0.3, 1.0, -1.0])
    u = sample_many("gaussian", n, 10**6, np.random.default_rng(10))
    q = (u @ x) ** 2 * np.sum(u * u, axis=1)
    assert abs(q.mean() - (n + 2) * x @ x) <= 4 * q.std() / np.sqrt(len(q))
