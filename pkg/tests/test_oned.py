"""Closed-form 1D quantization and the truncated-Gaussian family."""

import math

import numpy as np
import pytest

from otquant import oned


@pytest.mark.parametrize("sigma", [0.2, 0.5, 1.0])
def test_quantile_cdf_roundtrip(sigma):
    g = oned.TruncGauss1D(sigma)
    x = np.linspace(-1.0, 1.0, 1000)
    assert np.abs(g.quantile(g.cdf(x)) - x).max() < 1e-10
    t = np.linspace(1e-6, 1.0 - 1e-6, 1000)
    assert np.abs(g.cdf(g.quantile(t)) - t).max() < 1e-12


def test_cdf_endpoints_and_center():
    for sigma in (0.2, 0.5, 1.0):
        g = oned.TruncGauss1D(sigma)
        assert abs(g.cdf(-1.0)) < 1e-15
        assert abs(g.cdf(1.0) - 1.0) < 1e-15
        assert abs(g.cdf(0.0) - 0.5) < 1e-15
    u = oned.Uniform1D()
    assert u.cdf(-1.0) == 0.0 and u.cdf(1.0) == 1.0 and u.cdf(0.0) == 0.5


def test_cells_are_antisymmetric_equal_mass_and_ordered():
    g = oned.TruncGauss1D(0.4)
    n = 17
    cells = oned.quantile_cells(g, n)
    bp, bary = cells.breakpoints, cells.barycenters
    assert len(bp) == n + 1 and len(bary) == n
    # symmetric density: reflecting the partition reproduces it
    assert np.abs(bp + bp[::-1]).max() < 1e-10
    assert np.abs(bary + bary[::-1]).max() < 1e-10
    masses = np.diff(g.cdf(bp))
    assert np.abs(masses - 1.0 / n).max() < 1e-10
    assert np.all(bp[:-1] < bary) and np.all(bary < bp[1:])
    assert cells.cost > 0.0


def test_uniform_cells_exact():
    u = oned.Uniform1D()
    n = 5
    cells = oned.quantile_cells(u, n)
    assert np.abs(cells.breakpoints - (-1.0 + 2.0 * np.arange(n + 1) / n)).max() < 1e-15
    # per-axis uniform cost is 1/(3 n^2) on [-1, 1]
    assert abs(cells.cost - 1.0 / (3 * n * n)) < 1e-15
    with pytest.raises(ValueError):
        oned.quantile_cells(u, 0)


def test_sigma_for_alpha_closed_form_and_errors():
    assert oned.sigma_for_alpha(100, 0.5) == 1.0 / math.sqrt(math.log(100.0))
    n, alpha = 64, 0.3
    s = oned.sigma_for_alpha(n, alpha)
    assert abs(math.exp(1.0 / (2 * s * s)) - n**alpha) < 1e-9 * n**alpha
    with pytest.raises(ValueError):
        oned.sigma_for_alpha(1, 0.5)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            oned.sigma_for_alpha(100, bad)
    with pytest.raises(ValueError):
        oned.TruncGauss1D(0.0)


def test_first_cell_cost_persists_under_normalization():
    # c0 N^(3-2a) ln N nondecreasing: the tail cell never decays faster
    # than the calibrated rate, so calibrating at the smallest N is safe
    alpha = 0.75 + 0.05
    vals = []
    for n in (256, 1024, 4096):
        g = oned.TruncGauss1D(oned.sigma_for_alpha(n, alpha))
        cells = oned.quantile_cells(g, n)
        a, b = float(cells.breakpoints[0]), float(cells.breakpoints[1])
        m0, m1, m2 = g.mass(a, b), g.first_moment(a, b), g.second_moment(a, b)
        c0 = m2 - m1 * m1 / m0
        vals.append(c0 * n ** (3.0 - 2.0 * alpha) * math.log(n))
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_gaussian_lower_bound_check():
    bc = oned.gaussian_lower_bound_check([2**8, 2**10, 2**12], 0.5)
    assert bc.satisfied
    assert bc.lhs <= 0.0 + 1e-15  # calibration point contributes exactly zero
    with pytest.raises(ValueError):
        oned.gaussian_lower_bound_check([256, 512], 0.0)
    with pytest.raises(ValueError):
        oned.gaussian_lower_bound_check([256], 0.5)


def test_separable_grid_cost():
    g = oned.TruncGauss1D(0.5)
    assert oned.separable_grid_cost([g], 7) == oned.quantile_cells(g, 7).cost
    u = oned.Uniform1D()
    assert abs(oned.separable_grid_cost([u, u], 4) - 2.0 / 48.0) < 1e-15
