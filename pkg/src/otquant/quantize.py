"""Quantization energy, its gradient, Lloyd steps, and fixed-step descent.

The energy of a cloud Y is F(Y) = W2^2(rho, uniform measure on Y) / 2; its
gradient off coinciding sites is (Y - B(Y))/N with B the per-cell barycenter
map, so a Lloyd step (replace sites by barycenters) is gradient descent with
unit step, and Y <- Y + tau (B(Y) - Y) is the general fixed-step iteration.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import sdot
from .geom2d import min_pairwise_distance


def domain_constant(diam):
    """The bound constant 4 (diam + 1)^3 for a planar domain of diameter diam."""
    return 4.0 * (float(diam) + 1.0) ** 3


def energy(sites, rho, tol=1e-6):
    """F(Y) = half the squared transport distance to the uniform N-point law."""
    return sdot.quantization(sites, rho, tol=tol).f_value


def barycenters(sites, rho, tol=1e-6, phi0=None):
    return sdot.quantization(sites, rho, tol=tol, phi0=phi0).barycenters


def gradient(sites, rho, tol=1e-6):
    """(Y - B(Y)) / N, the exact gradient of the energy."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    return (sites - barycenters(sites, rho, tol=tol)) / len(sites)


def lloyd_step(sites, rho, tol=1e-6):
    return barycenters(sites, rho, tol=tol)


def descent_step(sites, rho, tau, tol=1e-6):
    """Convex combination Y + tau (B(Y) - Y); tau = 1 is a Lloyd step."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    return sites + tau * (barycenters(sites, rho, tol=tol) - sites)


@dataclass(frozen=True)
class DescentConfig:
    """Fixed-step descent parameters.

    schedule "fixed_steps" runs max_steps steps; "kn_schedule" derives the
    step count k = floor((1/(d tau)) ln(F(Y0) N eps^(d-1))) from the initial
    energy and separation (d = 2), clamped at 0 (underflow flagged).
    """

    tau: float
    max_steps: int = 50
    epsilon0: float = None
    schedule: str = "fixed_steps"
    sdot_tol: float = 1e-6
    warm_start: bool = True
    snapshot_stride: int = 0

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.schedule not in ("fixed_steps", "kn_schedule"):
            raise ValueError("unknown schedule %r" % (self.schedule,))
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")


@dataclass
class DescentTrace:
    """Per-iterate monitoring of a descent run (index 0 is the start).

    lemma_gf_bound[k] is F(Y0) eta^k + 2 C (1-eta) (eps^(1-d)/N) (A^k-eta^k)/(A-eta);
    pl_lhs/pl_rhs are the two sides of F - C eps^(1-d)/N <= N |grad F|^2;
    expl_bound is the terminal-step right side
    W0 eta^k + 2 C ((1-eta)/(A-eta)) (A^k - eta^k)/(N eps^(d-1)).
    """

    f_value: np.ndarray
    grad_norm_sq: np.ndarray
    min_pairwise: np.ndarray
    lemma_gf_bound: np.ndarray
    pl_lhs: np.ndarray
    pl_rhs: np.ndarray
    eta: float
    big_a: float
    epsilon0: float
    steps: int
    schedule_underflow: bool
    expl_bound: float
    final_sites: np.ndarray
    positions: list = field(default_factory=list)


def kn_schedule_steps(f0, n, epsilon, tau, d=2):
    """floor((1/(d tau)) ln(f0 N eps^(d-1))); 0 when the argument is <= 1."""
    arg = f0 * n * epsilon ** (d - 1)
    if arg <= 1.0:
        return 0, True
    return int(math.floor(math.log(arg) / (d * tau))), False


def _geom_sum(big_a, eta, k):
    """(A^k - eta^k)/(A - eta) = sum_{m<k} A^m eta^(k-1-m), safe at A = inf."""
    if math.isinf(big_a):
        return 1.0 if k == 1 else math.inf
    return (big_a**k - eta**k) / (big_a - eta)


def _gf_bound(f0, eta, big_a, c, epsilon, n, k, d=2):
    if k == 0:
        return f0
    geom = _geom_sum(big_a, eta, k)
    return f0 * eta**k + 2.0 * c * (1.0 - eta) * (epsilon ** (1 - d) / n) * geom


def run_descent(sites0, rho, cfg):
    """Iterate Y <- Y + tau (B(Y) - Y), recording the monitored quantities."""
    sites = np.array(sites0, dtype=np.float64).reshape(-1, 2)
    n = len(sites)
    d = 2
    epsilon = (
        float(cfg.epsilon0)
        if cfg.epsilon0 is not None
        else min_pairwise_distance(sites)
    )
    eta = 1.0 - (cfg.tau / 2.0) * (2.0 - cfg.tau)
    big_a = (1.0 - cfg.tau) ** (1 - d) if cfg.tau < 1.0 else math.inf
    c = domain_constant(rho.domain.diameter())

    q = sdot.quantization(sites, rho, tol=cfg.sdot_tol)
    f0 = q.f_value
    if cfg.schedule == "kn_schedule":
        steps, underflow = kn_schedule_steps(f0, n, epsilon, cfg.tau, d)
        steps = min(steps, cfg.max_steps) if cfg.max_steps else steps
    else:
        steps, underflow = cfg.max_steps, False

    fs, gns, mpw, gfb, pll, plr = [], [], [], [], [], []
    positions = []
    cpl = c * epsilon ** (1 - d) / n
    for k in range(steps + 1):
        if k > 0:
            sites = sites + cfg.tau * (q.barycenters - sites)
            phi0 = q.phi if cfg.warm_start else None
            q = sdot.quantization(sites, rho, tol=cfg.sdot_tol, phi0=phi0)
        fs.append(q.f_value)
        gns.append(float(((sites - q.barycenters) ** 2).sum()) / n)
        mpw.append(min_pairwise_distance(sites))
        gfb.append(_gf_bound(f0, eta, big_a, c, epsilon, n, k, d))
        pll.append(q.f_value - cpl)
        plr.append(gns[-1])
        if cfg.snapshot_stride and k % cfg.snapshot_stride == 0:
            positions.append((k, sites.copy()))

    if steps == 0:
        expl = 2.0 * f0
    else:
        geom = _geom_sum(big_a, eta, steps)
        expl = 2.0 * f0 * eta**steps + 2.0 * c * (1.0 - eta) * geom / (
            n * epsilon ** (d - 1)
        )
    return DescentTrace(
        f_value=np.array(fs),
        grad_norm_sq=np.array(gns),
        min_pairwise=np.array(mpw),
        lemma_gf_bound=np.array(gfb),
        pl_lhs=np.array(pll),
        pl_rhs=np.array(plr),
        eta=eta,
        big_a=big_a,
        epsilon0=epsilon,
        steps=steps,
        schedule_underflow=underflow,
        expl_bound=expl,
        final_sites=sites,
        positions=positions,
    )
