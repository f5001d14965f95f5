"""Exact 1D quantization via quantiles, and the low-variance Gaussian family.

In one dimension the equal-mass cells of the optimal transport to N points
are simply the quantile intervals [F^-1(i/N), F^-1((i+1)/N)], so costs and
barycenters are available in closed form; no rasterization is involved.
The truncated-Gaussian family with sigma shrinking like 1/sqrt(2 alpha ln N)
realizes a quantization cost decaying slower than the generic N^-2 rate.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .diagnostics import BoundCheck

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


class Uniform1D:
    """Uniform density on [-1, 1]."""

    def pdf(self, x):
        return 0.5 * np.ones_like(np.asarray(x, dtype=np.float64))

    def cdf(self, x):
        return (np.asarray(x, dtype=np.float64) + 1.0) / 2.0

    def quantile(self, t):
        return 2.0 * np.asarray(t, dtype=np.float64) - 1.0

    def mass(self, a, b):
        return (b - a) / 2.0

    def first_moment(self, a, b):
        return (b * b - a * a) / 4.0

    def second_moment(self, a, b):
        return (b**3 - a**3) / 6.0


class TruncGauss1D:
    """Centered Gaussian restricted to [-1, 1] and renormalized.

    m_sigma is the normalization: 1/m_sigma = integral over [-1,1] of
    exp(-x^2 / (2 sigma^2)) = sigma sqrt(2 pi) erf(1/(sigma sqrt(2))).
    """

    def __init__(self, sigma):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self._erf_edge = float(special.erf(1.0 / (self.sigma * _SQRT2)))
        self.m_sigma = 1.0 / (self.sigma * _SQRT2PI * self._erf_edge)

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.m_sigma * np.exp(-(x * x) / (2.0 * self.sigma**2))

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (special.erf(x / (self.sigma * _SQRT2)) + self._erf_edge) / (
            2.0 * self._erf_edge
        )

    def quantile(self, t):
        """Inverse cdf, polished by Newton to |F(x) - t| <= 1e-13."""
        t = np.asarray(t, dtype=np.float64)
        x = self.sigma * _SQRT2 * special.erfinv((2.0 * t - 1.0) * self._erf_edge)
        x = np.clip(x, -1.0, 1.0)
        for _ in range(3):
            err = self.cdf(x) - t
            if np.all(np.abs(err) <= 1e-15):
                break
            x = np.clip(x - err / np.maximum(self.pdf(x), 1e-300), -1.0, 1.0)
        return x

    def mass(self, a, b):
        return float(self.cdf(b) - self.cdf(a))

    def first_moment(self, a, b):
        # antiderivative of x exp(-x^2/(2 s^2)) is -s^2 exp(-x^2/(2 s^2))
        s2 = self.sigma**2
        return self.m_sigma * s2 * (
            math.exp(-(a * a) / (2.0 * s2)) - math.exp(-(b * b) / (2.0 * s2))
        )

    def second_moment(self, a, b):
        # integrate x^2 by parts against the Gaussian factor
        s2 = self.sigma**2
        boundary = a * math.exp(-(a * a) / (2.0 * s2)) - b * math.exp(
            -(b * b) / (2.0 * s2)
        )
        return self.m_sigma * s2 * boundary + s2 * self.mass(a, b)


@dataclass(frozen=True)
class Cells1D:
    """Equal-mass quantile partition of [-1,1] with exact moments."""

    breakpoints: np.ndarray
    barycenters: np.ndarray
    cost: float


def quantile_cells(rho1d, n):
    """Breakpoints at quantiles i/N, per-cell barycenters, exact total cost."""
    if n < 1:
        raise ValueError("need at least one cell")
    t = np.arange(1, n, dtype=np.float64) / n
    inner = np.atleast_1d(rho1d.quantile(t)) if n > 1 else np.zeros(0)
    bp = np.concatenate([[-1.0], inner, [1.0]])
    bary = np.empty(n)
    costs = []
    for i in range(n):
        a, b = float(bp[i]), float(bp[i + 1])
        m0 = rho1d.mass(a, b)
        m1 = rho1d.first_moment(a, b)
        m2 = rho1d.second_moment(a, b)
        bary[i] = m1 / m0
        costs.append(m2 - m1 * m1 / m0)
    return Cells1D(breakpoints=bp, barycenters=bary, cost=math.fsum(costs))


def sigma_for_alpha(n, alpha):
    """The width with exp(1/(2 sigma^2)) = N^alpha: sigma = 1/sqrt(2 a ln N)."""
    if n < 2:
        raise ValueError("need N >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 1.0 / math.sqrt(2.0 * alpha * math.log(n))


def gaussian_lower_bound_check(n_values, delta):
    """Quantization cost of the shrinking-Gaussian family stays above
    c N^(delta-2), with c calibrated at the smallest N of the sweep.

    Residual form: lhs = max over the sweep of (c N^(delta-2) - exact cost),
    rhs = 0; the calibration point contributes exactly 0.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    n_values = sorted(int(v) for v in n_values)
    if len(n_values) < 2:
        raise ValueError("need at least two N values")
    alpha = (1.0 + delta) / 2.0 + 0.05
    costs = [
        quantile_cells(TruncGauss1D(sigma_for_alpha(nv, alpha)), nv).cost
        for nv in n_values
    ]
    c = costs[0] * n_values[0] ** (2.0 - delta)
    residuals = [
        c * nv ** (delta - 2.0) - cost for nv, cost in zip(n_values, costs)
    ]
    return BoundCheck.make(max(residuals), 0.0)


def separable_grid_cost(rho1d_list, n_per_axis):
    """Cost of the tensor grid of per-axis quantile barycenters: the product
    cells factorize, so the total is the sum of the per-axis 1D costs."""
    return math.fsum(quantile_cells(r, n_per_axis).cost for r in rho1d_list)
