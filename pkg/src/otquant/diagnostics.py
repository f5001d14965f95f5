"""Separation statistics and numerical verification of the transport bounds.

Every check returns a BoundCheck with explicit left/right sides, so a failed
inequality is directly inspectable. The statistical checks (expected isolated
fraction, concentration of the one-step cost) use fixed seeds and 3-standard-
error margins.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import quantize, sdot
from .errors import EpsilonTooLarge

# volumes of the unit balls in R^1 and R^2
OMEGA_1 = 2.0
OMEGA_2 = math.pi


@dataclass(frozen=True)
class BoundCheck:
    """One verified inequality lhs <= rhs, with slack = rhs - lhs."""

    lhs: float
    rhs: float
    satisfied: bool
    slack: float

    @classmethod
    def make(cls, lhs, rhs):
        lhs, rhs = float(lhs), float(rhs)
        ok = lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
        return cls(lhs=lhs, rhs=rhs, satisfied=ok, slack=rhs - lhs)


@dataclass(frozen=True)
class SeparationStats:
    epsilon: float
    isolated: np.ndarray
    kappa: float
    min_pairwise: float


def nearest_other_distances(sites):
    """Distance from each site to its nearest distinct neighbor."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    if len(sites) < 2:
        return np.full(len(sites), np.inf)
    dist, _ = cKDTree(sites).query(sites, k=2)
    return dist[:, 1]


def separation_stats(sites, epsilon):
    """Isolated-site set at scale epsilon; ties (distance == epsilon) count."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    nearest = nearest_other_distances(sites)
    isolated = np.flatnonzero(nearest >= epsilon)
    return SeparationStats(
        epsilon=float(epsilon),
        isolated=isolated,
        kappa=len(isolated) / max(len(nearest), 1),
        min_pairwise=float(nearest.min()) if len(nearest) else math.inf,
    )


def barycenter_bound(sites, rho, epsilon, tol=1e-6):
    """One Lloyd step from Y lands within C (eps^(1-d)/N + 1 - kappa) of rho.

    lhs is the squared transport distance of the barycenter cloud, solved
    fresh; rhs uses the planar constant C = 4 (diam + 1)^3 and d = 2.
    """
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    n = len(sites)
    stats = separation_stats(sites, epsilon)
    bary = sdot.quantization(sites, rho, tol=tol).barycenters
    lhs = sdot.quantization(bary, rho, tol=tol).cost
    c = quantize.domain_constant(rho.domain.diameter())
    rhs = c * (epsilon ** (1 - 2) / n + 1.0 - stats.kappa)
    return BoundCheck.make(lhs, rhs)


def pl_check(sites, rho, epsilon, tol=1e-6):
    """F(Y) - C eps^(1-d)/N <= N |grad F(Y)|^2 for eps-separated clouds."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    n = len(sites)
    stats = separation_stats(sites, epsilon)
    if stats.min_pairwise < epsilon:
        raise EpsilonTooLarge(
            "min pairwise distance %.3e is below epsilon %.3e"
            % (stats.min_pairwise, epsilon)
        )
    q = sdot.quantization(sites, rho, tol=tol)
    c = quantize.domain_constant(rho.domain.diameter())
    lhs = q.f_value - c * epsilon ** (1 - 2) / n
    rhs = float(((sites - q.barycenters) ** 2).sum()) / n
    return BoundCheck.make(lhs, rhs)


def midline_cloud(n):
    """n sites ((2i-1)/(2n), 1/2): a critical, non-minimizing configuration."""
    i = np.arange(1, n + 1, dtype=np.float64)
    return np.c_[(2 * i - 1) / (2 * n), np.full(n, 0.5)]


def hyperplane_cloud(n):
    """n sites on the vertical line x = 1/2, equally spaced in y."""
    i = np.arange(1, n + 1, dtype=np.float64)
    return np.c_[np.full(n, 0.5), (2 * i - 1) / (2 * n)]


def hyperplane_bound_check(n, rho, tol=1e-6):
    """Sites pinned to x = 1/2 on the uniform square keep their barycenters
    on the line and the barycenter cloud at squared distance >= 1/12.

    Folds both constraints into one residual: lhs is the larger violation
    of { (1/12 - 1e-6) - W2^2, max|bary_x - 1/2| - 1e-9 }, rhs is 0.
    """
    sites = hyperplane_cloud(n)
    q = sdot.quantization(sites, rho, tol=tol)
    xdev = float(np.abs(q.barycenters[:, 0] - 0.5).max())
    wass = sdot.quantization(q.barycenters, rho, tol=tol).cost
    lhs = max((1.0 / 12.0 - 1e-6) - wass, xdev - 1e-9)
    return BoundCheck.make(lhs, 0.0)


def kappa_expectation_check(sigma, n, epsilon, trials=200, seed=0):
    """E[kappa] for an i.i.d. cloud from sigma is at least
    (1 - |sigma|_inf omega_2 eps^2)^(N-1); checked against the empirical
    mean plus three standard errors over seeded trials."""
    if trials < 2:
        raise ValueError("need at least 2 trials")
    sup = sigma.max_value
    coverage = sup * OMEGA_2 * epsilon * epsilon
    if coverage >= 1.0:
        raise ValueError("epsilon too large: |sigma|_inf * pi * eps^2 >= 1")
    lhs = (1.0 - coverage) ** (n - 1)
    kappas = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        pts = sigma.sample(rng, n)
        kappas[t] = separation_stats(pts, epsilon).kappa
    mean = float(kappas.mean())
    se = float(kappas.std(ddof=1)) / math.sqrt(trials)
    return BoundCheck.make(lhs, mean + 3.0 * se)


def concentration_check(
    sigma, n, epsilon, trials=20, seed=0, threshold_constant=None, rho=None, tol=1e-6
):
    """Fraction of i.i.d. clouds whose one-Lloyd-step cost is below
    K N^(-1/3) must reach 0.95; K defaults to the planar bound constant.

    epsilon is the separation scale of the underlying probabilistic
    statement (eps = N^(-2/3) in the d = 2 case); it is accepted and echoed
    for reporting but does not enter the default threshold, which already
    absorbs the eps^(1-d)/N = N^(-1/3) scaling."""
    rho = sigma if rho is None else rho
    if threshold_constant is None:
        threshold_constant = quantize.domain_constant(rho.domain.diameter())
    threshold = threshold_constant * n ** (-1.0 / 3.0)
    hits = 0
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        pts = sigma.sample(rng, n)
        bary = sdot.quantization(pts, rho, tol=tol).barycenters
        cost = sdot.quantization(bary, rho, tol=tol).cost
        if cost <= threshold:
            hits += 1
    return BoundCheck.make(0.95, hits / trials)
