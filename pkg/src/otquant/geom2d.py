"""Convex polygons and power (Laguerre) diagrams in the plane.

A power cell of site ``y_i`` with potential ``phi_i`` is the set of points
where ``|x - y_i|^2 - phi_i <= |x - y_j|^2 - phi_j`` for every other site;
equivalently the domain clipped by the half-planes
``2 (y_j - y_i) . x <= |y_j|^2 - |y_i|^2 - phi_j + phi_i``.
All potentials zero gives the Voronoi diagram.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .backend import clip_convex, power_cells
from .errors import DuplicateSites

# adjacency is only recorded for shared edges longer than this, relative to
# the domain diameter; point contacts carry no edge integral
ADJ_EDGE_REL = 1e-12


@dataclass(frozen=True)
class HalfPlane:
    """The set {x : normal . x <= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=np.float64).reshape(2)
        if not np.all(np.isfinite(a)) or float(np.hypot(a[0], a[1])) == 0.0:
            raise ValueError("half-plane normal must be finite and nonzero")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))


class ConvexPolygon:
    """Immutable convex polygon, vertices CCW; zero vertices = empty."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        v = np.array(vertices, dtype=np.float64).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __setattr__(self, name, value):
        raise AttributeError("ConvexPolygon is immutable")

    @classmethod
    def rectangle(cls, x0, y0, x1, y1):
        return cls([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)))

    def is_empty(self):
        return len(self.vertices) == 0

    def area(self):
        v = self.vertices
        if len(v) < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def centroid(self):
        v = self.vertices
        if len(v) < 3:
            raise ValueError("centroid of a degenerate polygon")
        x, y = v[:, 0], v[:, 1]
        x2, y2 = np.roll(x, -1), np.roll(y, -1)
        cr = x * y2 - x2 * y
        a = float(np.sum(cr)) / 2.0
        cx = float(np.sum((x + x2) * cr)) / (6.0 * a)
        cy = float(np.sum((y + y2) * cr)) / (6.0 * a)
        return np.array([cx, cy])

    def diameter(self):
        v = self.vertices
        if len(v) < 2:
            return 0.0
        return float(pdist(v).max())

    def contains(self, point, tol=1e-12):
        """Point on or inside every edge, with slack tol * diameter."""
        v = self.vertices
        n = len(v)
        if n < 3:
            return False
        p = np.asarray(point, dtype=np.float64)
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
        return bool(np.all(cross >= -tol * max(self.diameter(), 1.0)))

    def __repr__(self):
        return "ConvexPolygon(%d vertices)" % len(self.vertices)


def clip(poly, half):
    """poly intersected with a half-plane; degenerate output is empty."""
    out = clip_convex(poly.vertices, half.normal[0], half.normal[1], half.offset)
    return ConvexPolygon(out)


def _check_distinct(sites):
    """Exact duplicate detection via lexicographic sort, O(N log N)."""
    if len(sites) < 2:
        return
    order = np.lexsort((sites[:, 1], sites[:, 0]))
    s = sites[order]
    same = np.all(s[1:] == s[:-1], axis=1)
    if same.any():
        k = int(np.argmax(same))
        raise DuplicateSites(
            "sites %d and %d coincide at (%r, %r)"
            % (order[k], order[k + 1], float(s[k, 0]), float(s[k, 1]))
        )


def min_pairwise_distance(sites):
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    if len(sites) < 2:
        return np.inf
    return float(pdist(sites).min())


def power_cell(i, sites, phi, domain):
    """Power cell of site i clipped to the domain; possibly empty."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    _check_distinct(sites)
    verts = domain.vertices
    yi = sites[i]
    for j in range(len(sites)):
        if j == i or len(verts) == 0:
            continue
        yj = sites[j]
        a = 2.0 * (yj - yi)
        b = float(yj @ yj - yi @ yi - phi[j] + phi[i])
        verts = clip_convex(verts, a[0], a[1], b)
    return ConvexPolygon(verts)


@dataclass(frozen=True)
class PowerDiagram:
    """All N power cells of (sites, phi) clipped to the domain.

    Cells are stored as one ragged vertex array; `labels[k]` tags the edge
    leaving vertex k of its cell: the neighboring site index for a bisector
    edge, or -(e+1) for domain edge e.
    """

    sites: np.ndarray
    phi: np.ndarray
    domain: ConvexPolygon
    verts: np.ndarray
    offsets: np.ndarray
    labels: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.offsets) - 1

    @property
    def cells(self):
        if "cells" not in self._cache:
            self._cache["cells"] = [
                ConvexPolygon(self.verts[self.offsets[i] : self.offsets[i + 1]])
                for i in range(len(self))
            ]
        return self._cache["cells"]

    def cell(self, i):
        return ConvexPolygon(self.verts[self.offsets[i] : self.offsets[i + 1]])

    def _edges(self):
        """Bisector edges: arrays (i, j, x1, y1, x2, y2), one row per labeled
        edge with j >= 0, deduplicated over unordered pairs keeping the
        longest of the two copies."""
        if "edges" in self._cache:
            return self._cache["edges"]
        counts = np.diff(self.offsets)
        total = int(self.offsets[-1])
        if total == 0:
            out = (np.zeros(0, np.int64),) * 2 + (np.zeros(0),) * 5
            self._cache["edges"] = out
            return out
        cell_id = np.repeat(np.arange(len(self), dtype=np.int64), counts)
        nxt = np.arange(total, dtype=np.int64) + 1
        ends = self.offsets[1:][counts > 0] - 1
        nxt[ends] = self.offsets[:-1][counts > 0]
        mask = self.labels >= 0
        i = cell_id[mask]
        j = self.labels[mask]
        p1 = self.verts[mask]
        p2 = self.verts[nxt[mask]]
        length = np.hypot(p2[:, 0] - p1[:, 0], p2[:, 1] - p1[:, 1])
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        order = np.lexsort((-length, hi, lo))
        lo, hi = lo[order], hi[order]
        keep = np.ones(len(lo), dtype=bool)
        keep[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        sel = order[keep]
        out = (
            lo[keep],
            hi[keep],
            p1[sel, 0],
            p1[sel, 1],
            p2[sel, 0],
            p2[sel, 1],
            length[sel],
        )
        self._cache["edges"] = out
        return out

    @property
    def shared_edge_length(self):
        """{(i, j) with i < j: length of the shared boundary segment}."""
        if "shared" not in self._cache:
            lo, hi, _, _, _, _, length = self._edges()
            tol = ADJ_EDGE_REL * max(self.domain.diameter(), 1.0)
            self._cache["shared"] = {
                (int(a), int(b)): float(el)
                for a, b, el in zip(lo, hi, length)
                if el > tol
            }
        return self._cache["shared"]

    @property
    def neighbors(self):
        if "neighbors" not in self._cache:
            nb = [[] for _ in range(len(self))]
            for a, b in self.shared_edge_length:
                nb[a].append(b)
                nb[b].append(a)
            self._cache["neighbors"] = [sorted(x) for x in nb]
        return self._cache["neighbors"]

    def cell_areas(self):
        counts = np.diff(self.offsets)
        total = int(self.offsets[-1])
        if total == 0:
            return np.zeros(len(self))
        nxt = np.arange(total, dtype=np.int64) + 1
        ends = self.offsets[1:][counts > 0] - 1
        nxt[ends] = self.offsets[:-1][counts > 0]
        cr = (
            self.verts[:, 0] * self.verts[nxt, 1]
            - self.verts[nxt, 0] * self.verts[:, 1]
        )
        cell_id = np.repeat(np.arange(len(self), dtype=np.int64), counts)
        return 0.5 * np.bincount(cell_id, weights=cr, minlength=len(self))


def power_diagram(sites, phi, domain):
    """Build all N power cells plus adjacency; errors on coinciding sites."""
    sites = np.ascontiguousarray(np.asarray(sites, dtype=np.float64).reshape(-1, 2))
    phi = np.ascontiguousarray(np.asarray(phi, dtype=np.float64).reshape(-1))
    if len(phi) != len(sites):
        raise ValueError("phi length must match number of sites")
    _check_distinct(sites)
    try:
        verts, offsets, labels = power_cells(sites, phi, domain.vertices)
    except ValueError as exc:  # backend reports coincident sites lazily
        if "coincident" in str(exc):
            raise DuplicateSites(str(exc)) from exc
        raise
    return PowerDiagram(sites, phi, domain, verts, offsets, labels)
