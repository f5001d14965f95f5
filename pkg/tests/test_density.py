"""Density construction, PGM parsing, moment queries, and sampling."""

import numpy as np
import pytest

from otquant import density, geom2d
from otquant.errors import FormatError, ZeroMass


def unit_square():
    return geom2d.ConvexPolygon.rectangle(0.0, 0.0, 1.0, 1.0)


def random_density(rng, h=24, w=24):
    vals = rng.uniform(0.1, 2.0, (h, w))
    return density.Density(vals, 0.0, 0.0, 1.0 / w, 1.0 / w)


def test_normalization_and_immutability():
    rng = np.random.default_rng(0)
    rho = random_density(rng)
    density.check_unit_mass(rho)
    assert abs(rho.total_mass() - 1.0) < 1e-12
    with pytest.raises(ValueError):
        rho.values[0, 0] = 2.0


def test_zero_density_rejected():
    with pytest.raises(ZeroMass):
        density.Density(np.zeros((4, 4)), 0.0, 0.0, 0.25, 0.25)


def test_moment_additivity_under_halfplane_splits():
    rng = np.random.default_rng(1)
    rho = random_density(rng)
    whole = density.polygon_moments(rho, unit_square())
    assert abs(whole.mass - 1.0) < 1e-12
    for _ in range(30):
        normal = rng.normal(size=2)
        offset = float(rng.uniform(0.1, 0.9) * normal.sum())
        left = geom2d.clip(unit_square(), geom2d.HalfPlane(normal, offset))
        right = geom2d.clip(unit_square(), geom2d.HalfPlane(-normal, -offset))
        ml = density.polygon_moments(rho, left)
        mr = density.polygon_moments(rho, right)
        assert abs(ml.mass + mr.mass - whole.mass) < 1e-10
        assert np.allclose(ml.first + mr.first, whole.first, atol=1e-10)
        assert abs(ml.second_trace + mr.second_trace - whole.second_trace) < 1e-10


def test_parallel_axis_identity():
    # cost to y == second_trace - 2 y . first + |y|^2 mass
    rng = np.random.default_rng(2)
    rho = random_density(rng)
    poly = geom2d.clip(unit_square(), geom2d.HalfPlane(np.array([1.0, 0.3]), 0.7))
    m = density.polygon_moments(rho, poly)
    for _ in range(10):
        y = rng.normal(size=2)
        direct = density.transport_cost_to_point(rho, poly, y)
        via = m.second_trace - 2.0 * y @ m.first + (y @ y) * m.mass
        assert abs(direct - via) < 1e-12


def test_gamma_dark_concentrates_mass():
    # 2x1 image, gray (0, 255): all mass in the dark pixel
    rho = density.from_image(np.array([[0, 255]], dtype=np.uint8))
    left = geom2d.ConvexPolygon.rectangle(0.0, 0.0, 0.5, 0.5)
    assert abs(density.polygon_moments(rho, left).mass - 1.0) < 1e-12


def test_image_rows_map_to_decreasing_y():
    # dark top row: after loading, the mass sits at large y
    img = np.full((4, 4), 200, dtype=np.uint8)
    img[0, :] = 0  # top row of the image
    rho = density.from_image(img)
    top = geom2d.ConvexPolygon.rectangle(0.0, 0.75, 1.0, 1.0)
    bottom = geom2d.ConvexPolygon.rectangle(0.0, 0.0, 1.0, 0.25)
    assert density.polygon_moments(rho, top).mass > density.polygon_moments(
        rho, bottom
    ).mass


def test_pgm_p2_p5_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    gray = rng.integers(0, 255, (6, 5), dtype=np.uint8)
    p5 = tmp_path / "img.pgm"
    with open(p5, "wb") as fh:
        fh.write(b"P5\n# comment\n5 6\n255\n" + gray.tobytes())
    p2 = tmp_path / "img2.pgm"
    body = "\n".join(" ".join(str(v) for v in row) for row in gray)
    p2.write_text("P2\n# comment\n5 6\n255\n" + body + "\n")
    ra = density.from_pgm(str(p5))
    rb = density.from_pgm(str(p2))
    assert np.array_equal(ra.values, rb.values)
    assert ra.shape == (6, 5)
    assert abs(ra.y1 - 6.0 / 5.0) < 1e-15  # taller than wide: y spans h/w


def test_pgm_format_errors(tmp_path):
    cases = {
        "magic.pgm": b"P6\n2 2\n255\n" + bytes(4),
        "maxval.pgm": b"P5\n2 2\n127\n" + bytes(4),
        "short.pgm": b"P5\n4 4\n255\n" + bytes(3),
        "range.pgm": b"P2\n2 1\n255\n300 0\n",
    }
    for name, blob in cases.items():
        path = tmp_path / name
        path.write_bytes(blob)
        with pytest.raises(FormatError):
            density.read_pgm(str(path))


def test_from_function_linear_moments():
    rho = density.from_function(lambda x, y: x + 0 * y, resolution=512)
    m = density.polygon_moments(rho, unit_square())
    assert abs(m.mass - 1.0) < 1e-12
    # barycenter of rho(x) = 2x on [0,1]: x = 2/3, y = 1/2
    assert abs(m.barycenter[0] - 2.0 / 3.0) < 1e-5
    assert abs(m.barycenter[1] - 0.5) < 1e-12


def test_outside_domain_carries_no_mass():
    rho = density.uniform(resolution=32)
    big = geom2d.ConvexPolygon.rectangle(-1.0, -1.0, 2.0, 2.0)
    m = density.polygon_moments(rho, big)
    assert abs(m.mass - 1.0) < 1e-12
    outside = geom2d.ConvexPolygon.rectangle(1.5, 1.5, 2.0, 2.0)
    assert density.polygon_moments(rho, outside).mass == 0.0


def test_segment_integrals_direction_invariant():
    rho = density.analytic_gaussian2(8.0, resolution=64)
    rng = np.random.default_rng(4)
    segs = rng.random((50, 4))
    flipped = segs[:, [2, 3, 0, 1]]
    a = rho.segment_integrals(segs)
    b = rho.segment_integrals(flipped)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)
    # uniform density: integral is just the length
    uni = density.uniform(resolution=16)
    lens = np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])
    assert np.allclose(uni.segment_integrals(segs), lens, rtol=1e-12)


def test_sampling_matches_cell_masses():
    rho = density.analytic_gaussian2(8.0, resolution=64)
    rng = np.random.default_rng(5)
    pts = rho.sample(rng, 200_000)
    assert pts.shape == (200_000, 2)
    assert pts.min() >= 0.0 and pts.max() <= 1.0
    # quadrant masses vs empirical frequencies, 4 standard errors
    for x0, y0 in [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)]:
        quad = geom2d.ConvexPolygon.rectangle(x0, y0, x0 + 0.5, y0 + 0.5)
        p = density.polygon_moments(rho, quad).mass
        freq = np.mean(
            (pts[:, 0] >= x0)
            & (pts[:, 0] < x0 + 0.5)
            & (pts[:, 1] >= y0)
            & (pts[:, 1] < y0 + 0.5)
        )
        se = np.sqrt(p * (1 - p) / len(pts))
        assert abs(freq - p) < 4 * se + 1e-3


def test_resolution_guard():
    with pytest.raises(ValueError):
        density.analytic_gaussian2(8.0, resolution=8)
