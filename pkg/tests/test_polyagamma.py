import math

import numpy as np
import pytest
from scipy import integrate, stats

from ladynet.polyagamma import pg1_mean, pg1_var, sample_pg1, sample_pg1_array

TILTS = [0.0, 0.1, 1.0, 2.0, 5.0, 20.0, 100.0]
N = 1_000_000


def pg1_density(x, c):
    """Alternating-series density of PG(1, c), summed to convergence."""
    n = np.arange(200)
    terms = ((-1.0) ** n * (2 * n + 1) / np.sqrt(2 * np.pi * x ** 3)
             * np.exp(-(2 * n + 1) ** 2 / (8 * x)))
    return math.cosh(c / 2) * math.exp(-c * c * x / 2) * terms.sum()


@pytest.fixture(scope="module")
def draws():
    rng = np.random.default_rng(20240501)
    out = {}
    for c in TILTS:
        x, k = sample_pg1_array(np.full(N, c), rng, return_proposals=True)
        out[c] = (x, k)
    return out


@pytest.mark.parametrize("c", TILTS)
def test_moments_within_4_se(draws, c):
    x, _ = draws[c]
    m, v = x.mean(), x.var()
    se_mean = math.sqrt(v / N)
    centred = x - m
    se_var = math.sqrt(((centred ** 4).mean() - v * v) / N)
    assert abs(m - pg1_mean(c)) < 4 * se_mean
    assert abs(v - pg1_var(c)) < 4 * se_var


def test_proposals_bounded(draws):
    total = sum(k for _, k in draws.values())
    assert total / (N * len(TILTS)) <= 1.3


def test_all_positive(draws):
    assert all(np.all(x > 0) for x, _ in draws.values())


def test_density_integration_oracle():
    # the closed forms against direct integration of the series density
    for c in (0.5, 2.0):
        f = lambda x, p: x ** p * pg1_density(x, c)
        mass = integrate.quad(f, 1e-6, 20, args=(0,), limit=200)[0]
        m1 = integrate.quad(f, 1e-6, 20, args=(1,), limit=200)[0]
        m2 = integrate.quad(f, 1e-6, 20, args=(2,), limit=200)[0]
        assert mass == pytest.approx(1.0, abs=1e-7)
        assert m1 == pytest.approx(pg1_mean(c), abs=1e-8)
        assert m2 - m1 ** 2 == pytest.approx(pg1_var(c), abs=1e-8)
    assert pg1_mean(2.0) == pytest.approx(math.tanh(1) / 4, abs=1e-12)
    assert pg1_mean(2.0) == pytest.approx(0.190399, abs=1e-6)


def test_limits():
    assert pg1_mean(0.0) == 0.25
    assert pg1_var(0.0) == pytest.approx(1 / 24)
    # series and closed form join smoothly
    for c in (1e-5, 9.9e-3, 1.01e-2):
        assert pg1_var(c) == pytest.approx(1 / 24 - c * c / 120, rel=1e-8)
        assert pg1_mean(c) == pytest.approx(math.tanh(c / 2) / (2 * c), rel=1e-10)
    assert np.isfinite(pg1_var(1e4)) and pg1_var(1e4) > 0


def test_symmetric_in_c():
    rng = np.random.default_rng(7)
    a = sample_pg1_array(np.full(100_000, 1.5), rng)
    b = sample_pg1_array(np.full(100_000, -1.5), rng)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_deterministic():
    c = np.linspace(-3, 3, 50)
    a = sample_pg1_array(c, np.random.default_rng(3))
    b = sample_pg1_array(c, np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert sample_pg1(1.0, 5) == sample_pg1(1.0, 5)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError):
        sample_pg1(bad, 0)
    with pytest.raises(ValueError):
        sample_pg1_array([0.0, bad], 0)


def test_shape_preserved():
    out = sample_pg1_array(np.zeros((3, 4)), 0)
    assert out.shape == (3, 4)
