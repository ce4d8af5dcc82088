"""Gamma distribution CDF, quantile and moment fitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtri

from . import _kernels

# above this shape the Wilson-Hilferty cube-root transform is accurate to ~1e-10
# relative, and the series/continued fraction would need thousands of terms
_WH_SHAPE = 1e6


@dataclass
class GammaDist:
    shape: np.ndarray | float
    scale: np.ndarray | float
    degenerate: np.ndarray | bool = False

    def __post_init__(self):
        self.shape = np.asarray(self.shape, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if np.any(self.shape <= 0) or np.any(self.scale <= 0):
            raise ValueError("gamma shape and scale must be positive")

    @property
    def mean(self):
        return self.shape * self.scale

    @property
    def var(self):
        return self.shape * self.scale**2

    def sum_of(self, periods) -> "GammaDist":
        """Distribution of the sum of ``periods`` i.i.d. copies."""
        return GammaDist(self.shape * np.asarray(periods, dtype=np.float64), self.scale)

    def cdf(self, x):
        return gamma_cdf(x, self)

    def quantile(self, u):
        return gamma_quantile(u, self)


def gamma_params(mu, nu) -> tuple[np.ndarray, np.ndarray]:
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if np.any(mu <= 0) or np.any(nu <= 0):
        raise ValueError("mean and coefficient of variation must be positive")
    return 1.0 / nu**2, mu * nu**2


def gamma_cdf(x, dist: GammaDist):
    x = np.asarray(x, dtype=np.float64)
    return _kernels.gammainc_p(dist.shape, np.maximum(x, 0.0) / dist.scale)


def _seed(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    z = ndtri(u)
    c = 1.0 / (9.0 * a)
    wh = a * (1.0 - c + z * np.sqrt(c)) ** 3
    small = np.exp((np.log(u) + gammaln(a + 1.0)) / a)
    x0 = np.where((a < 1.0) | (wh <= 0), small, wh)
    return np.clip(x0, 1e-300, None)


def gamma_quantile(u, dist: GammaDist):
    """Inverse CDF by safeguarded Newton from a Wilson-Hilferty start."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u > 0) & (u < 1))):
        raise ValueError("quantile level must lie strictly inside (0, 1)")
    a, u_b, scale = np.broadcast_arrays(dist.shape, u, dist.scale)
    x0 = _seed(a, u_b)
    big = a >= _WH_SHAPE
    x = np.where(big, x0, 0.0)
    if not np.all(big):
        small = ~big
        x[small] = _kernels.gamma_ppf(a[small], u_b[small], x0[small])
    return x * scale


def fit_gamma_moments(window, axis: int = -1) -> GammaDist:
    """Method-of-moments fit with population standard deviation."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape[axis] == 0:
        raise ValueError("cannot fit an empty window")
    m = window.mean(axis=axis)
    s = window.std(axis=axis)
    s = np.maximum(s, 1e-6 * np.maximum(m, 1.0))
    degenerate = m <= 0
    m_safe = np.where(degenerate, 1.0, m)
    shape = np.where(degenerate, 1.0, (m_safe / s) ** 2)
    scale = np.where(degenerate, 1e-6, s**2 / m_safe)
    return GammaDist(shape, scale, degenerate)
