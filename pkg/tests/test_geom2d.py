"""Geometry invariants: tilings, gauge freedom, Voronoi limits, immutability."""

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from otquant import geom2d
from otquant.errors import DuplicateSites


def unit_square():
    return geom2d.ConvexPolygon.rectangle(0.0, 0.0, 1.0, 1.0)


def test_polygon_is_immutable():
    poly = unit_square()
    with pytest.raises(AttributeError):
        poly.vertices = np.zeros((3, 2))
    with pytest.raises(ValueError):
        poly.vertices[0, 0] = 5.0
    src = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tri = geom2d.ConvexPolygon(src)
    src[0, 0] = 9.0  # caller's array stays writable and detached
    assert tri.vertices[0, 0] == 0.0


def test_rectangle_basic_quantities():
    poly = geom2d.ConvexPolygon.rectangle(0.0, 0.0, 2.0, 1.0)
    assert abs(poly.area() - 2.0) < 1e-15
    assert np.allclose(poly.centroid(), [1.0, 0.5])
    assert abs(poly.diameter() - np.hypot(2.0, 1.0)) < 1e-15
    assert poly.contains(np.array([0.5, 0.5]))
    assert not poly.contains(np.array([2.5, 0.5]))


def test_clip_never_grows_and_is_idempotent():
    rng = np.random.default_rng(2)
    for _ in range(50):
        half = geom2d.HalfPlane(rng.normal(size=2), float(rng.uniform(-0.2, 1.2)))
        once = geom2d.clip(unit_square(), half)
        assert once.area() <= 1.0 + 1e-12
        twice = geom2d.clip(once, half)
        assert abs(twice.area() - once.area()) < 1e-12


def test_power_diagram_tiles_the_domain():
    rng = np.random.default_rng(4)
    for trial in range(8):
        n = int(rng.integers(2, 80))
        sites = rng.random((n, 2))
        phi = rng.normal(scale=0.005, size=n) if trial % 2 else np.zeros(n)
        diag = geom2d.power_diagram(sites, phi, unit_square())
        assert abs(diag.cell_areas().sum() - 1.0) < 1e-9


def test_power_diagram_shift_invariance():
    rng = np.random.default_rng(6)
    sites = rng.random((30, 2))
    phi = rng.normal(scale=0.01, size=30)
    base = geom2d.power_diagram(sites, phi, unit_square())
    shift = np.array([2.5, -1.25])
    moved_domain = geom2d.ConvexPolygon(unit_square().vertices + shift)
    moved = geom2d.power_diagram(sites + shift, phi, moved_domain)
    assert np.allclose(base.cell_areas(), moved.cell_areas(), atol=1e-12)
    for a, b in zip(base.cells, moved.cells):
        assert np.allclose(a.vertices + shift, b.vertices, atol=1e-9)


def test_gauge_freedom_leaves_cells_unchanged():
    rng = np.random.default_rng(8)
    sites = rng.random((25, 2))
    phi = rng.normal(scale=0.01, size=25)
    a = geom2d.power_diagram(sites, phi, unit_square())
    b = geom2d.power_diagram(sites, phi + 3.7, unit_square())
    for ca, cb in zip(a.cells, b.cells):
        assert np.allclose(ca.vertices, cb.vertices, atol=1e-9)


def test_zero_weights_reduce_to_voronoi():
    rng = np.random.default_rng(10)
    sites = rng.random((12, 2))
    diag = geom2d.power_diagram(sites, np.zeros(12), unit_square())
    probes = rng.random((4000, 2))
    d2 = ((probes[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
    owner = np.argmin(d2, axis=1)
    # probes clearly inside a Voronoi region must land in that power cell
    gap = np.partition(d2, 1, axis=1)
    clear = (gap[:, 1] - gap[:, 0]) > 1e-6
    for i, cell in enumerate(diag.cells):
        mine = probes[clear & (owner == i)]
        for p in mine[:50]:
            assert cell.contains(p)


def test_shared_edges_match_grid_spacing():
    # 3x3 grid of sites: interior shared edges have length exactly 1/3
    c = (2 * np.arange(3) + 1) / 6.0
    gx, gy = np.meshgrid(c, c, indexing="ij")
    sites = np.column_stack([gx.ravel(), gy.ravel()])
    diag = geom2d.power_diagram(sites, np.zeros(9), unit_square())
    lengths = diag.shared_edge_length
    assert len(lengths) == 12  # 2*3 vertical + 2*3 horizontal adjacencies
    for val in lengths.values():
        assert abs(val - 1.0 / 3.0) < 1e-12
    assert sorted(diag.neighbors[4]) == [1, 3, 5, 7]  # center touches the sides


def test_duplicate_sites_rejected():
    sites = np.array([[0.2, 0.2], [0.2, 0.2], [0.8, 0.8]])
    with pytest.raises(DuplicateSites):
        geom2d.power_diagram(sites, np.zeros(3), unit_square())


def test_min_pairwise_distance_matches_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(20):
        pts = rng.random((int(rng.integers(2, 40)), 2))
        assert abs(geom2d.min_pairwise_distance(pts) - pdist(pts).min()) < 1e-15
    assert geom2d.min_pairwise_distance(np.array([[0.5, 0.5]])) == np.inf


def test_empty_cell_from_dominated_site():
    # a heavily deweighted site owns nothing
    sites = np.array([[0.3, 0.5], [0.7, 0.5]])
    phi = np.array([0.0, -10.0])
    cell = geom2d.power_cell(1, sites, phi, unit_square())
    assert cell.is_empty()
    full = geom2d.power_cell(0, sites, phi, unit_square())
    assert abs(full.area() - 1.0) < 1e-12
