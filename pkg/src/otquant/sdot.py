"""Semidiscrete optimal transport between a grid density and N point masses.

Solves the concave dual over potentials phi: at the optimum every power cell
carries mass exactly 1/N, and the transport cost is the sum over cells of
int |x - y_i|^2 drho. The solver is a damped Newton method on the dual; its
Hessian is (minus) a weighted graph Laplacian over the cell adjacency, with
edge weights given by density line integrals along shared cell boundaries.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .density import moments_cost_to_point
from .errors import EmptyCell, NotConverged
from .geom2d import PowerDiagram, power_diagram

_BACKTRACK_MIN = 2.0**-30


@dataclass
class SolveReport:
    iterations: int = 0
    final_residual: float = math.inf
    newton_steps: int = 0
    fallback_steps: int = 0
    dual_history: list = field(default_factory=list)


@dataclass(frozen=True)
class Quantization:
    """Optimal-transport summary of (rho, sites) at equal cell masses."""

    sites: np.ndarray
    phi: np.ndarray
    diagram: PowerDiagram
    masses: np.ndarray
    barycenters: np.ndarray
    cost: float
    f_value: float
    report: SolveReport = None


def _state(sites, phi, rho):
    """Diagram and per-cell (mass, int x, int y, int |x|^2) at phi."""
    diag = power_diagram(sites, phi, rho.domain)
    moments = rho.cells_moments(diag.verts, diag.offsets)
    return diag, moments


def _dual_from_moments(sites, phi, moments):
    n = len(sites)
    cell_costs = (
        moments[:, 3]
        - 2.0 * (sites[:, 0] * moments[:, 1] + sites[:, 1] * moments[:, 2])
        + (sites[:, 0] ** 2 + sites[:, 1] ** 2) * moments[:, 0]
    )
    return float(math.fsum(cell_costs) + math.fsum(phi * (1.0 / n - moments[:, 0])))


def dual_value(sites, phi, rho):
    """sum_i [ phi_i/N + int_{cell i} (|x - y_i|^2 - phi_i) drho ]."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    _, moments = _state(sites, phi, rho)
    return _dual_from_moments(sites, phi, moments)


def cell_masses(sites, phi, rho):
    _, moments = _state(sites, phi, rho)
    return moments[:, 0].copy()


def mass_gradient(sites, phi, rho):
    """Gradient of the dual: component i is 1/N - mass_i(phi)."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    masses = cell_masses(sites, phi, rho)
    return 1.0 / len(sites) - masses


def _laplacian(diag, rho):
    """Minus the dual Hessian: L_ij = -w_ij, L_ii = sum_j w_ij, where
    w_ij = (edge density integral) / (2 |y_i - y_j|) over shared edges."""
    lo, hi, x1, y1, x2, y2, length = diag._edges()
    tol = 1e-12 * max(diag.domain.diameter(), 1.0)
    keep = length > tol
    lo, hi = lo[keep], hi[keep]
    segs = np.c_[x1[keep], y1[keep], x2[keep], y2[keep]]
    n = len(diag)
    if len(lo) == 0:
        return sp.csr_matrix((n, n))
    integ = rho.segment_integrals(segs)
    d = np.hypot(
        diag.sites[hi, 0] - diag.sites[lo, 0], diag.sites[hi, 1] - diag.sites[lo, 1]
    )
    w = integ / (2.0 * d)
    rows = np.concatenate([lo, hi, lo, hi])
    cols = np.concatenate([hi, lo, lo, hi])
    vals = np.concatenate([-w, -w, w, w])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _newton_direction(lap, g):
    """Solve L delta = g with the gauge fixed by delta[0] = 0."""
    n = lap.shape[0]
    if n == 1:
        return np.zeros(1)
    reduced = lap[1:, 1:].tocsc()
    try:
        lu = splu(reduced)
    except RuntimeError:
        return None
    delta = np.zeros(n)
    delta[1:] = lu.solve(g[1:])
    if not np.all(np.isfinite(delta)):
        return None
    return delta


def solve_potentials(sites, rho, tol=1e-6, max_iter=60, phi0=None):
    """Damped Newton for the equal-mass potentials.

    tol is relative to 1/N: convergence when max_i |mass_i - 1/N| <= tol/N.
    Backtracking halves the step until the dual value does not decrease and
    the smallest cell mass stays above half of min(initial masses, 1/N);
    a diagonal-preconditioned gradient step is used whenever the Newton
    system is singular or cannot keep masses positive.
    """
    sites = np.ascontiguousarray(np.asarray(sites, dtype=np.float64).reshape(-1, 2))
    n = len(sites)
    if n == 0:
        raise ValueError("no sites")
    phi = (
        np.zeros(n)
        if phi0 is None
        else np.array(phi0, dtype=np.float64).reshape(-1).copy()
    )
    if len(phi) != n:
        raise ValueError("phi0 length mismatch")

    report = SolveReport()
    diag, moments = _state(sites, phi, rho)
    masses = moments[:, 0]

    # a warm start that empties cells is worse than none: fall back to the
    # Voronoi potentials when they open more mass than the supplied guess
    if phi0 is not None and masses.min() <= 0.0:
        zphi = np.zeros(n)
        zdiag, zmoments = _state(sites, zphi, rho)
        if zmoments[:, 0].min() > masses.min():
            phi, diag, moments = zphi, zdiag, zmoments
            masses = moments[:, 0]

    dual = _dual_from_moments(sites, phi, moments)
    report.dual_history.append(dual)

    # "does not decrease" up to round-off: the dual value is flat to machine
    # precision once the residual is ~sqrt(eps), so strict comparison stalls
    def _floor(val):
        return val - 1e-14 * max(1.0, abs(val))

    # pre-phase: plain gradient ascent until every cell has positive mass
    guard = 0
    step = 1.0
    while masses.min() <= 0.0:
        g = 1.0 / n - masses
        accepted = False
        t = step
        while t >= _BACKTRACK_MIN:
            cand = phi + t * g
            diag_c, moments_c = _state(sites, cand, rho)
            dual_c = _dual_from_moments(sites, cand, moments_c)
            if dual_c >= _floor(dual) and moments_c[:, 0].min() >= masses.min():
                phi, diag, moments = cand, diag_c, moments_c
                masses = moments[:, 0]
                dual = dual_c
                report.dual_history.append(dual)
                report.fallback_steps += 1
                accepted = True
                step = min(t * 2.0, 1.0)
                break
            t /= 2.0
        guard += 1
        if not accepted or guard > 500:
            report.final_residual = float(n * np.abs(masses - 1.0 / n).max())
            raise NotConverged(
                "could not open all cells from the initial potentials", report
            )

    eps_damp = 0.5 * min(float(masses.min()), 1.0 / n)

    for it in range(max_iter):
        residual = float(n * np.abs(masses - 1.0 / n).max())
        report.iterations = it
        report.final_residual = residual
        if residual <= tol:
            return phi - phi[0], report

        g = 1.0 / n - masses
        lap = _laplacian(diag, rho)
        delta = _newton_direction(lap, g)

        stepped = False
        if delta is not None:
            t = 1.0
            while t >= _BACKTRACK_MIN:
                cand = phi + t * delta
                diag_c, moments_c = _state(sites, cand, rho)
                dual_c = _dual_from_moments(sites, cand, moments_c)
                if dual_c >= _floor(dual) and moments_c[:, 0].min() >= eps_damp:
                    phi, diag, moments = cand, diag_c, moments_c
                    masses = moments[:, 0]
                    dual = dual_c
                    report.dual_history.append(dual)
                    report.newton_steps += 1
                    stepped = True
                    break
                t /= 2.0

        if not stepped:
            # fallback: diagonal-preconditioned gradient ascent
            dg = lap.diagonal()
            floor = max(dg.max(), 1.0) * 1e-12
            prec = g / np.maximum(dg, floor)
            t = 1.0
            while t >= _BACKTRACK_MIN:
                cand = phi + t * prec
                diag_c, moments_c = _state(sites, cand, rho)
                dual_c = _dual_from_moments(sites, cand, moments_c)
                if dual_c >= _floor(dual) and moments_c[:, 0].min() > 0.0:
                    phi, diag, moments = cand, diag_c, moments_c
                    masses = moments[:, 0]
                    dual = dual_c
                    report.dual_history.append(dual)
                    report.fallback_steps += 1
                    stepped = True
                    break
                t /= 2.0
            if not stepped:
                report.final_residual = float(n * np.abs(masses - 1.0 / n).max())
                raise NotConverged("no admissible step found", report)

    report.iterations = max_iter
    report.final_residual = float(n * np.abs(masses - 1.0 / n).max())
    if report.final_residual <= tol:
        return phi - phi[0], report
    raise NotConverged(
        "residual %.3e > tol %.3e after %d iterations"
        % (report.final_residual, tol, max_iter),
        report,
    )


def quantization(sites, rho, tol=1e-6, max_iter=60, phi0=None):
    """Solve, then package diagram, masses, barycenters, and exact cost."""
    sites = np.ascontiguousarray(np.asarray(sites, dtype=np.float64).reshape(-1, 2))
    phi, report = solve_potentials(sites, rho, tol=tol, max_iter=max_iter, phi0=phi0)
    diag, moments = _state(sites, phi, rho)
    masses = moments[:, 0].copy()
    if masses.min() <= 0.0:
        raise EmptyCell(
            "cell %d has zero mass at the returned potentials"
            % int(np.argmin(masses))
        )
    barycenters = moments[:, 1:3] / masses[:, None]
    cost = math.fsum(
        moments_cost_to_point(moments[i], sites[i]) for i in range(len(sites))
    )
    return Quantization(
        sites=sites,
        phi=phi,
        diagram=diag,
        masses=masses,
        barycenters=barycenters,
        cost=cost,
        f_value=0.5 * cost,
        report=report,
    )
