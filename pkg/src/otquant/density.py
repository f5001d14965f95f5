"""Probability densities stored piecewise-constant on a pixel grid.

The grid is the ground truth: analytic densities are rasterized once at a
declared resolution and every moment afterwards is exact (up to round-off)
for that piecewise-constant function, so bound checks are statements about
a single well-defined density rather than a quadrature approximation.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import FormatError, ZeroMass
from .geom2d import ConvexPolygon


@dataclass(frozen=True)
class PolygonMoments:
    """Integrals of 1, x, |x|^2 of the density over one polygon."""

    mass: float
    first: np.ndarray
    second_trace: float

    @property
    def barycenter(self):
        if self.mass <= 0.0:
            raise ZeroMass("barycenter of a zero-mass region")
        return self.first / self.mass


class Density:
    """Nonnegative pixel grid on an axis-aligned rectangle, total mass 1.

    values[r, c] covers [x0 + c dx, x0 + (c+1) dx) x [y0 + r dy, y0 + (r+1) dy);
    row 0 is the bottom of the domain.
    """

    __slots__ = ("values", "x0", "y0", "dx", "dy", "_ps", "_cdf")

    def __init__(self, values, x0, y0, dx, dy):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("values must be a nonempty 2D array")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("pixel values must be finite and nonnegative")
        total = float(values.sum()) * dx * dy
        if total <= 0.0:
            raise ZeroMass("density has zero total mass")
        self.values = values / total
        self.values.setflags(write=False)
        self.x0 = float(x0)
        self.y0 = float(y0)
        self.dx = float(dx)
        self.dy = float(dy)
        self._ps = None
        self._cdf = None

    # -- geometry ----------------------------------------------------------

    @property
    def shape(self):
        return self.values.shape

    @property
    def pixel_size(self):
        return (self.dx, self.dy)

    @property
    def x1(self):
        return self.x0 + self.shape[1] * self.dx

    @property
    def y1(self):
        return self.y0 + self.shape[0] * self.dy

    @property
    def domain(self):
        return ConvexPolygon.rectangle(self.x0, self.y0, self.x1, self.y1)

    @property
    def max_value(self):
        """Sup norm of the density (max pixel value)."""
        return float(self.values.max())

    def total_mass(self):
        return float(self.values.sum()) * self.dx * self.dy

    # -- cached row prefix sums for the moment kernels ----------------------

    def _prefix_sums(self):
        if self._ps is None:
            h, w = self.shape
            c = np.arange(w, dtype=np.float64)
            ps0 = np.zeros((h, w + 1))
            ps1 = np.zeros((h, w + 1))
            ps2 = np.zeros((h, w + 1))
            np.cumsum(self.values, axis=1, out=ps0[:, 1:])
            np.cumsum(self.values * c, axis=1, out=ps1[:, 1:])
            np.cumsum(self.values * c * c, axis=1, out=ps2[:, 1:])
            self._ps = (ps0, ps1, ps2)
        return self._ps

    def cells_moments(self, verts, offsets):
        """(mass, int x, int y, int |x|^2) rows for ragged cells."""
        ps0, ps1, ps2 = self._prefix_sums()
        return backend.cells_grid_moments(
            verts, offsets, self.values, self.x0, self.y0, self.dx, self.dy,
            ps0, ps1, ps2,
        )

    def segment_integrals(self, segs):
        """Line integrals of the density along segments (x1, y1, x2, y2)."""
        return backend.segment_density_integrals(
            segs, self.values, self.x0, self.y0, self.dx, self.dy
        )

    # -- sampling ------------------------------------------------------------

    def sample(self, rng, n):
        """n i.i.d. points: pixel by mass, uniform within the pixel."""
        if self._cdf is None:
            flat = self.values.ravel() * (self.dx * self.dy)
            cdf = np.cumsum(flat)
            cdf /= cdf[-1]
            self._cdf = cdf
        h, w = self.shape
        idx = np.searchsorted(self._cdf, rng.random(n), side="right")
        idx = np.minimum(idx, h * w - 1)
        r, c = np.divmod(idx, w)
        xy = rng.random((n, 2))
        return np.c_[
            self.x0 + (c + xy[:, 0]) * self.dx,
            self.y0 + (r + xy[:, 1]) * self.dy,
        ]

    def __repr__(self):
        h, w = self.shape
        return "Density(%dx%d on [%g,%g]x[%g,%g])" % (
            w, h, self.x0, self.x1, self.y0, self.y1,
        )


# ---------------------------------------------------------------------------
# constructors


def from_image(pixels, gamma_dark=True):
    """Density from a grayscale image (values 0..255).

    Darker pixels carry more mass when gamma_dark (value = 255 - gray),
    matching stippling use; the domain is [0,1] x [0, H/W] with image row 0
    at the top of the domain.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.size == 0:
        raise ValueError("image must be a nonempty 2D array")
    vals = 255.0 - pixels if gamma_dark else pixels.copy()
    if not np.any(vals > 0):
        raise ZeroMass("image yields an all-zero density")
    h, w = pixels.shape
    step = 1.0 / w
    return Density(vals[::-1], 0.0, 0.0, step, step)


def read_pgm(path):
    """8-bit PGM (P2 ascii or P5 binary), maxval 255, as an (H, W) array."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            if data[pos : pos + 1] == b"#":
                break
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        return data[start:pos]

    magic = token()
    if magic not in (b"P2", b"P5"):
        raise FormatError("not a PGM file (magic %r)" % magic)
    try:
        w = int(token())
        h = int(token())
        maxval = int(token())
    except ValueError as exc:
        raise FormatError("malformed PGM header") from exc
    if w < 1 or h < 1:
        raise FormatError("bad PGM dimensions %dx%d" % (w, h))
    if maxval != 255:
        raise FormatError("unsupported PGM maxval %d (need 255)" % maxval)
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        raster = data[pos : pos + w * h]
        if len(raster) != w * h:
            raise FormatError("truncated PGM raster")
        img = np.frombuffer(raster, dtype=np.uint8).reshape(h, w)
    else:
        try:
            flat = np.array(data[pos:].split(), dtype=np.int64)
        except ValueError as exc:
            raise FormatError("malformed PGM ascii raster") from exc
        if flat.size != w * h:
            raise FormatError(
                "PGM raster has %d samples, expected %d" % (flat.size, w * h)
            )
        if flat.min() < 0 or flat.max() > 255:
            raise FormatError("PGM sample out of range")
        img = flat.reshape(h, w).astype(np.uint8)
    return img


def from_pgm(path, gamma_dark=True):
    return from_image(read_pgm(path), gamma_dark=gamma_dark)


def from_function(f, x0=0.0, y0=0.0, x1=1.0, y1=1.0, resolution=1024):
    """Rasterize f(x, y) at pixel centers on [x0,x1] x [y0,y1], normalize.

    The taller axis gets proportionally more pixels so pixels stay square.
    """
    wspan, hspan = x1 - x0, y1 - y0
    if wspan <= 0 or hspan <= 0:
        raise ValueError("empty domain")
    if wspan >= hspan:
        w = int(resolution)
        h = max(1, int(round(resolution * hspan / wspan)))
    else:
        h = int(resolution)
        w = max(1, int(round(resolution * wspan / hspan)))
    dx, dy = wspan / w, hspan / h
    xs = x0 + (np.arange(w) + 0.5) * dx
    ys = y0 + (np.arange(h) + 0.5) * dy
    vals = np.asarray(f(xs[None, :], ys[:, None]), dtype=np.float64)
    vals = np.broadcast_to(vals, (h, w))
    return Density(vals, x0, y0, dx, dy)


def analytic_gaussian2(coeff, resolution=1024):
    """exp(-coeff ((x-1/2)^2 + (y-1/2)^2)) on [0,1]^2, normalized."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    coeff = float(coeff)
    return from_function(
        lambda x, y: np.exp(-coeff * ((x - 0.5) ** 2 + (y - 0.5) ** 2)),
        resolution=resolution,
    )


def uniform(resolution=64):
    """Uniform density on [0,1]^2."""
    return from_function(lambda x, y: np.ones_like(x + y), resolution=resolution)


# ---------------------------------------------------------------------------
# moment queries


def polygon_moments(rho, poly):
    """Moments of the density over a convex polygon.

    Parts of the polygon outside the density's domain carry no mass.
    """
    verts = poly.vertices if isinstance(poly, ConvexPolygon) else np.asarray(poly)
    offsets = np.array([0, len(verts)], dtype=np.int64)
    row = rho.cells_moments(np.ascontiguousarray(verts, dtype=np.float64), offsets)[0]
    return PolygonMoments(float(row[0]), row[1:3].copy(), float(row[3]))


def transport_cost_to_point(rho, poly, y):
    """int_poly |x - y|^2 drho, from the cached quadratic moments."""
    m = polygon_moments(rho, poly)
    y = np.asarray(y, dtype=np.float64)
    return m.second_trace - 2.0 * float(y @ m.first) + float(y @ y) * m.mass


def moments_cost_to_point(row, y):
    """Same expansion from a raw (mass, ix, iy, i2) moment row."""
    return float(row[3] - 2.0 * (y[0] * row[1] + y[1] * row[2])
                 + (y[0] * y[0] + y[1] * y[1]) * row[0])


def check_unit_mass(rho, tol=1e-12):
    return math.isclose(rho.total_mass(), 1.0, rel_tol=0.0, abs_tol=tol)
