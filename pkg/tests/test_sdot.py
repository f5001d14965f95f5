"""Solver contracts: gauge, permutation symmetry, duality, robustness."""

import numpy as np
import pytest

from otquant import density, sdot
from otquant.errors import NotConverged


def gaussian(res=256):
    return density.analytic_gaussian2(8.0, resolution=res)


def test_returned_potentials_are_gauge_fixed():
    rng = np.random.default_rng(0)
    sites = rng.random((20, 2))
    rho = gaussian()
    phi, report = sdot.solve_potentials(sites, rho, tol=1e-9)
    assert phi[0] == 0.0
    assert report.final_residual <= 1e-9
    # shifting the initial guess by a constant changes nothing observable
    phi2, _ = sdot.solve_potentials(sites, rho, tol=1e-9, phi0=np.full(20, 4.2))
    masses1 = sdot.cell_masses(sites, phi, rho)
    masses2 = sdot.cell_masses(sites, phi2, rho)
    assert np.allclose(masses1, masses2, atol=1e-10)


def test_permutation_equivariance():
    rng = np.random.default_rng(1)
    sites = rng.random((15, 2))
    rho = gaussian()
    q = sdot.quantization(sites, rho, tol=1e-10)
    perm = rng.permutation(15)
    qp = sdot.quantization(sites[perm], rho, tol=1e-10)
    assert np.allclose(qp.masses, q.masses[perm], atol=1e-9)
    assert np.allclose(qp.barycenters, q.barycenters[perm], atol=1e-8)
    gauge = q.phi[perm] - q.phi[perm][0]
    assert np.allclose(qp.phi, gauge, atol=1e-8)
    assert abs(qp.cost - q.cost) < 1e-10


def test_dual_equals_primal_cost_at_optimum():
    rng = np.random.default_rng(2)
    sites = rng.random((30, 2))
    rho = gaussian()
    q = sdot.quantization(sites, rho, tol=1e-11)
    dual = sdot.dual_value(sites, q.phi, rho)
    assert abs(dual - q.cost) <= 1e-9 * max(1.0, q.cost)


def test_dual_history_nondecreasing_up_to_roundoff():
    rng = np.random.default_rng(3)
    sites = rng.random((60, 2))
    phi, report = sdot.solve_potentials(sites, gaussian(), tol=1e-10)
    h = np.asarray(report.dual_history)
    slack = 1e-13 * max(1.0, float(np.abs(h).max()))
    assert np.all(np.diff(h) >= -slack)


def test_masses_hit_the_tolerance():
    rng = np.random.default_rng(4)
    rho = gaussian()
    for n in (2, 7, 50):
        sites = rng.random((n, 2))
        q = sdot.quantization(sites, rho, tol=1e-8)
        assert n * np.abs(q.masses - 1.0 / n).max() <= 1e-8
        assert abs(q.masses.sum() - 1.0) < 1e-12
        assert abs(q.f_value - q.cost / 2.0) < 1e-15


def test_warm_start_is_instant_at_the_solution():
    rng = np.random.default_rng(5)
    sites = rng.random((25, 2))
    rho = gaussian()
    phi, _ = sdot.solve_potentials(sites, rho, tol=1e-9)
    _, report = sdot.solve_potentials(sites, rho, tol=1e-9, phi0=phi)
    assert report.iterations == 0


def test_bad_warm_start_recovers_via_voronoi_reset():
    rng = np.random.default_rng(6)
    sites = rng.random((12, 2))
    rho = gaussian()
    bad = np.zeros(12)
    bad[0] = 50.0  # site 0 swallows the whole square
    q = sdot.quantization(sites, rho, tol=1e-8, phi0=bad)
    assert 12 * np.abs(q.masses - 1.0 / 12).max() <= 1e-8


def test_not_converged_carries_report():
    rng = np.random.default_rng(7)
    sites = rng.random((40, 2))
    with pytest.raises(NotConverged) as err:
        sdot.solve_potentials(sites, gaussian(), tol=1e-9, max_iter=1)
    assert err.value.report is not None
    assert err.value.report.final_residual > 1e-9


def test_single_site_owns_everything():
    q = sdot.quantization(np.array([[0.4, 0.6]]), density.uniform(32), tol=1e-12)
    assert abs(q.masses[0] - 1.0) < 1e-12
    assert q.phi[0] == 0.0
    assert np.allclose(q.barycenters[0], [0.5, 0.5], atol=1e-12)


def test_mass_gradient_definition():
    rng = np.random.default_rng(8)
    sites = rng.random((9, 2))
    rho = gaussian()
    phi = np.zeros(9)
    g = sdot.mass_gradient(sites, phi, rho)
    m = sdot.cell_masses(sites, phi, rho)
    assert np.allclose(g, 1.0 / 9 - m, atol=1e-15)
