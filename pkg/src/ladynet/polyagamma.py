"""Exact sampling from the Polya-gamma distribution PG(1, c).

The sampler draws ``J*(1, c/2)`` by rejection from a mixture of a
truncated inverse-Gaussian (left of ``TRUNC``) and a shifted exponential
(right of ``TRUNC``), accepting through the alternating series
representation of the target density; PG(1, c) = J*(1, c/2) / 4.
"""
import math

import numba
import numpy as np

__all__ = ["sample_pg1", "sample_pg1_array", "pg1_mean", "pg1_var"]

TRUNC = 0.64
_TRUNC_RECIP = 1.0 / TRUNC
_PI = math.pi


@numba.njit(cache=True)
def _log_norm_cdf(x):
    # log Phi(x); erfc keeps precision in the lower tail
    if x > -5.0:
        return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))
    # asymptotic expansion for the far left tail
    return (-0.5 * x * x - math.log(-x) - 0.5 * math.log(2.0 * _PI)
            + math.log1p(-1.0 / (x * x) + 3.0 / x ** 4))


@numba.njit(cache=True)
def _series_coef(n, x):
    k = (n + 0.5) * _PI
    if x > TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = (-1.5 * (math.log(0.5 * _PI) + math.log(x)) + math.log(k)
                 - 2.0 * (n + 0.5) * (n + 0.5) / x)
        return math.exp(expnt)
    return 0.0


@numba.njit(cache=True)
def _mass_texpon(z):
    t = TRUNC
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / _PI * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _rtigauss(z, rng):
    # inverse-Gaussian(mean 1/z, shape 1) truncated to (0, TRUNC)
    t = TRUNC
    x = t + 1.0
    if _TRUNC_RECIP > z:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            half_mu = 0.5 * mu
            mu_y = mu * y * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def _draw_one(c, rng):
    """Return ``(draw, proposals)`` for one PG(1, c) variate."""
    z = 0.5 * abs(c)
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    p_exp = _mass_texpon(z)
    proposals = 0
    while True:
        proposals += 1
        if rng.random() < p_exp:
            x = TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _series_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return 0.25 * x, proposals
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _draw_many(c, rng, out):
    total = 0
    for i in range(c.size):
        out[i], k = _draw_one(c[i], rng)
        total += k
    return total


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_pg1(c, rng=None):
    """One exact draw from PG(1, c)."""
    c = float(c)
    if not math.isfinite(c):
        raise ValueError(f"tilt must be finite, got {c}")
    return _draw_one(c, _as_generator(rng))[0]


def sample_pg1_array(c, rng=None, return_proposals=False):
    """Independent PG(1, c_k) draws for every entry of ``c``.

    With ``return_proposals`` the total number of proposals used is also
    returned, which is how the acceptance rate of the sampler is measured.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ValueError("tilts must be finite")
    flat = np.ascontiguousarray(c).ravel()
    out = np.empty_like(flat)
    proposals = _draw_many(flat, _as_generator(rng), out)
    out = out.reshape(c.shape)
    if return_proposals:
        return out, proposals
    return out


def pg1_mean(c):
    """Mean of PG(1, c): tanh(c/2) / (2c), with limit 1/4 at c = 0."""
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-4
    safe = np.where(small, 1.0, c)
    # series: 1/4 - c^2/48 + c^4/480
    series = 0.25 - c ** 2 / 48.0 + c ** 4 / 480.0
    out = np.where(small, series, np.tanh(0.5 * safe) / (2.0 * safe))
    return out if out.ndim else float(out)


def pg1_var(c):
    """Variance of PG(1, c): (sinh c - c) sech^2(c/2) / (4 c^3), limit 1/24."""
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-2
    safe = np.where(small, 1.0, c)
    series = 1.0 / 24.0 - c ** 2 / 120.0 + 17.0 * c ** 4 / 13440.0
    # sinh(c) sech^2(c/2) = 2 tanh(c/2), which avoids overflow
    e = np.exp(-safe)
    sech2 = 4.0 * e / (1.0 + e) ** 2
    closed = (2.0 * np.tanh(0.5 * safe) - safe * sech2) / (4.0 * safe ** 3)
    out = np.where(small, series, closed)
    return out if out.ndim else float(out)
