"""Pure NumPy kernels: polygon clipping, power-cell construction, grid moments.

This is the fallback backend; `_speedups.pyx` implements the same interface
in C. Semantics must match within round-off (see tests/test_backends.py).

Conventions shared by both backends:
  - polygons are CCW float64 arrays of shape (K, 2); K = 0 is the empty polygon
  - ragged cell lists are (verts, offsets, labels) with labels[k] the tag of
    the edge leaving vertex k: site index j >= 0 for a bisector edge,
    -(e+1) for domain edge e
  - slivers below 1e-14 of the reference area collapse to the empty polygon
  - consecutive vertices closer than 1e-12 of the reference diameter merge
"""

import numpy as np

NAME = "reference"

SLIVER_REL = 1e-14
DEDUP_REL = 1e-12


def _area(verts):
    if len(verts) < 3:
        return 0.0
    x, y = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y2 - x2 * y))


def _bbox_diag(verts):
    if len(verts) == 0:
        return 0.0
    w = verts[:, 0].max() - verts[:, 0].min()
    h = verts[:, 1].max() - verts[:, 1].min()
    return float(np.hypot(w, h))


def _clip_labeled(verts, labels, a0, a1, b, new_label):
    """Sutherland-Hodgman against {a.x <= b}, propagating edge labels."""
    n = len(verts)
    d = a0 * verts[:, 0] + a1 * verts[:, 1] - b
    inside = d <= 0.0
    if inside.all():
        return verts, labels
    if not inside.any():
        return verts[:0], labels[:0]
    out_pts = []
    out_inlab = []  # label of the edge arriving at each emitted point
    for k in range(n):
        k2 = (k + 1) % n
        if inside[k]:
            if inside[k2]:
                out_pts.append(verts[k2])
                out_inlab.append(labels[k])
            else:
                t = d[k] / (d[k] - d[k2])
                out_pts.append(verts[k] + t * (verts[k2] - verts[k]))
                out_inlab.append(labels[k])
        elif inside[k2]:
            t = d[k] / (d[k] - d[k2])
            out_pts.append(verts[k] + t * (verts[k2] - verts[k]))
            out_inlab.append(new_label)
            out_pts.append(verts[k2])
            out_inlab.append(labels[k])
    pts = np.asarray(out_pts, dtype=np.float64)
    # leaving-label of vertex k is the label of the edge entering vertex k+1
    leav = np.roll(np.asarray(out_inlab, dtype=np.int64), -1)
    return pts, leav


def _clip_plain(verts, a0, a1, b):
    zeros = np.zeros(len(verts), dtype=np.int64)
    out, _ = _clip_labeled(verts, zeros, a0, a1, b, 0)
    return out


def _dedup(verts, labels, tol):
    """Merge consecutive vertices closer than tol; labels follow the survivor."""
    n = len(verts)
    if n == 0:
        return verts, labels
    keep_pts = [verts[0]]
    keep_lab = [labels[0]]
    for k in range(1, n):
        if np.hypot(*(verts[k] - keep_pts[-1])) < tol:
            keep_lab[-1] = labels[k]
        else:
            keep_pts.append(verts[k])
            keep_lab.append(labels[k])
    if len(keep_pts) > 1 and np.hypot(*(keep_pts[-1] - keep_pts[0])) < tol:
        keep_pts.pop()
        keep_lab.pop()
    if len(keep_pts) < 3:
        return verts[:0], labels[:0]
    return np.asarray(keep_pts), np.asarray(keep_lab, dtype=np.int64)


def clip_convex(verts, a0, a1, b):
    """Clip a convex CCW polygon by {a.x <= b}; degenerate results are empty."""
    verts = np.asarray(verts, dtype=np.float64).reshape(-1, 2)
    if len(verts) == 0:
        return verts
    ref_area = abs(_area(verts))
    labels = np.zeros(len(verts), dtype=np.int64)
    out, lab = _clip_labeled(verts, labels, float(a0), float(a1), float(b), 0)
    out, lab = _dedup(out, lab, DEDUP_REL * _bbox_diag(verts))
    if abs(_area(out)) <= SLIVER_REL * ref_area:
        return verts[:0]
    return np.ascontiguousarray(out)


def _cell_of_site(i, sites, phi, domain, phimax, dom_area, dom_diag):
    """Power cell of site i: clip the domain by bisector half-planes.

    Candidates are visited in distance order; site j cannot cut once
    ||y_j - y_i|| >= R + sqrt(R^2 + S) with R the cell's max vertex distance
    from y_i and S = max(phi) - phi_i (bisector offset bound).
    """
    verts = domain.copy()
    labels = -1 - np.arange(len(domain), dtype=np.int64)
    yi = sites[i]
    d2_row = (sites[:, 0] - yi[0]) ** 2 + (sites[:, 1] - yi[1]) ** 2
    s_i = max(0.0, phimax - phi[i])
    order = np.argsort(d2_row)
    rel = verts - yi
    r2 = float(np.max(rel[:, 0] ** 2 + rel[:, 1] ** 2))
    dedup_tol = DEDUP_REL * dom_diag
    for j in order:
        if j == i:
            continue
        d2 = d2_row[j]
        if d2 <= 0.0:
            raise ValueError("coincident sites")
        r = np.sqrt(r2)
        stop = r + np.sqrt(r2 + s_i)
        if d2 >= stop * stop:
            break
        # skip when the bisector offset t_ij = D/2 + (phi_i-phi_j)/(2D) >= R
        u = d2 + (phi[i] - phi[j])
        if u >= 0.0 and u * u >= 4.0 * r2 * d2:
            continue
        yj = sites[j]
        a0, a1 = 2.0 * (yj - yi)
        b = yj[0] ** 2 + yj[1] ** 2 - yi[0] ** 2 - yi[1] ** 2 - phi[j] + phi[i]
        verts, labels = _clip_labeled(verts, labels, a0, a1, b, int(j))
        verts, labels = _dedup(verts, labels, dedup_tol)
        if len(verts) == 0:
            break
        rel = verts - yi
        r2 = float(np.max(rel[:, 0] ** 2 + rel[:, 1] ** 2))
    if len(verts) != 0 and abs(_area(verts)) <= SLIVER_REL * dom_area:
        verts, labels = verts[:0], labels[:0]
    return verts, labels


def power_cells(sites, phi, domain):
    """All N power cells intersected with the domain, as ragged arrays."""
    sites = np.asarray(sites, dtype=np.float64).reshape(-1, 2)
    phi = np.asarray(phi, dtype=np.float64).reshape(-1)
    domain = np.asarray(domain, dtype=np.float64).reshape(-1, 2)
    n = len(sites)
    dom_area = abs(_area(domain))
    dom_diag = _bbox_diag(domain)
    phimax = float(phi.max()) if n else 0.0
    all_verts = []
    all_labels = []
    offsets = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if n == 1:
            v = domain.copy()
            lab = -1 - np.arange(len(domain), dtype=np.int64)
        else:
            v, lab = _cell_of_site(i, sites, phi, domain, phimax, dom_area, dom_diag)
        all_verts.append(v)
        all_labels.append(lab)
        offsets[i + 1] = offsets[i] + len(v)
    verts = (
        np.concatenate(all_verts, axis=0)
        if offsets[-1]
        else np.zeros((0, 2), dtype=np.float64)
    )
    labels = (
        np.concatenate(all_labels) if offsets[-1] else np.zeros(0, dtype=np.int64)
    )
    return np.ascontiguousarray(verts), offsets, labels


def _green_moments(verts):
    """Integrals of 1, x, y, x^2+y^2 over a CCW polygon (Green's theorem)."""
    if len(verts) < 3:
        return 0.0, 0.0, 0.0, 0.0
    x, y = verts[:, 0], verts[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    cr = x * y2 - x2 * y
    a = float(np.sum(cr)) / 2.0
    ix = float(np.sum((x + x2) * cr)) / 6.0
    iy = float(np.sum((y + y2) * cr)) / 6.0
    ixx = float(np.sum((x * x + x * x2 + x2 * x2) * cr)) / 12.0
    iyy = float(np.sum((y * y + y * y2 + y2 * y2) * cr)) / 12.0
    return a, ix, iy, ixx + iyy


def _extent_at_y(verts, yq):
    """[min x, max x] of a convex polygon at height yq, or None."""
    n = len(verts)
    xs = []
    for k in range(n):
        p, q = verts[k], verts[(k + 1) % n]
        dp, dq = p[1] - yq, q[1] - yq
        if dp * dq > 0.0:
            continue
        if p[1] == q[1]:
            xs.extend((p[0], q[0]))
        else:
            t = dp / (p[1] - q[1])
            xs.append(p[0] + t * (q[0] - p[0]))
    if not xs:
        return None
    return min(xs), max(xs)


def _poly_grid_moments(verts, values, x0, y0, dx, dy, ps0, ps1, ps2):
    """Moments of values (piecewise constant on the grid) over one polygon."""
    if len(verts) < 3:
        return np.zeros(4)
    h, w = values.shape
    ymin, ymax = verts[:, 1].min(), verts[:, 1].max()
    r0 = max(0, min(h - 1, int(np.floor((ymin - y0) / dy))))
    r1 = max(0, min(h - 1, int(np.ceil((ymax - y0) / dy)) - 1))
    acc = np.zeros(4)
    pixel_term = (dx * dx + dy * dy) / 12.0
    for r in range(r0, r1 + 1):
        yb0, yb1 = y0 + r * dy, y0 + (r + 1) * dy
        strip = _clip_plain(verts, 0.0, 1.0, yb1)
        if len(strip):
            strip = _clip_plain(strip, 0.0, -1.0, -yb0)
        if len(strip) < 3:
            continue
        sxmin, sxmax = strip[:, 0].min(), strip[:, 0].max()
        c_lo = max(0, min(w - 1, int(np.floor((sxmin - x0) / dx))))
        c_hi = max(c_lo, min(w - 1, int(np.ceil((sxmax - x0) / dx)) - 1))
        lo_ext = _extent_at_y(strip, yb0)
        hi_ext = _extent_at_y(strip, yb1)
        cf0, cf1 = 0, -1
        if lo_ext is not None and hi_ext is not None:
            lcov = max(lo_ext[0], hi_ext[0])
            rcov = min(lo_ext[1], hi_ext[1])
            cf0 = max(c_lo, int(np.ceil((lcov - x0) / dx)))
            cf1 = min(c_hi, int(np.floor((rcov - x0) / dx)) - 1)
        if cf0 <= cf1:
            # fully covered pixels via row prefix sums
            s0 = ps0[r, cf1 + 1] - ps0[r, cf0]
            s1 = ps1[r, cf1 + 1] - ps1[r, cf0]
            s2 = ps2[r, cf1 + 1] - ps2[r, cf0]
            xc0 = x0 + 0.5 * dx
            yc = yb0 + 0.5 * dy
            sx = xc0 * s0 + dx * s1
            sxx = xc0 * xc0 * s0 + 2.0 * xc0 * dx * s1 + dx * dx * s2
            cell = dx * dy
            acc[0] += cell * s0
            acc[1] += cell * sx
            acc[2] += cell * yc * s0
            acc[3] += cell * (sxx + yc * yc * s0 + pixel_term * s0)
            partial_cols = list(range(c_lo, cf0)) + list(range(cf1 + 1, c_hi + 1))
        else:
            partial_cols = list(range(c_lo, c_hi + 1))
        # boundary pixels by exact clipping
        for c in partial_cols:
            v = values[r, c]
            if v == 0.0:
                continue
            cx0, cx1 = x0 + c * dx, x0 + (c + 1) * dx
            piece = _clip_plain(strip, 1.0, 0.0, cx1)
            if len(piece):
                piece = _clip_plain(piece, -1.0, 0.0, -cx0)
            if len(piece) < 3:
                continue
            a, ix, iy, i2 = _green_moments(piece)
            acc += v * np.array([a, ix, iy, i2])
    return acc


def cells_grid_moments(verts, offsets, values, x0, y0, dx, dy, ps0, ps1, ps2):
    """(mass, int x, int y, int |x|^2) of the density over each ragged cell."""
    n = len(offsets) - 1
    out = np.zeros((n, 4))
    for i in range(n):
        out[i] = _poly_grid_moments(
            verts[offsets[i] : offsets[i + 1]], values, x0, y0, dx, dy, ps0, ps1, ps2
        )
    return out


def segment_density_integrals(segs, values, x0, y0, dx, dy):
    """Line integral of the grid density along each segment (x1,y1,x2,y2).

    Subdivides at every gridline crossing; each piece contributes
    length x mean of the two pixel values adjacent to the piece.
    """
    segs = np.asarray(segs, dtype=np.float64).reshape(-1, 4)
    h, w = values.shape
    out = np.zeros(len(segs))
    nudge = 1e-6 * min(dx, dy)
    for k, (x1, y1, x2, y2) in enumerate(segs):
        length = float(np.hypot(x2 - x1, y2 - y1))
        if length == 0.0:
            continue
        ts = [0.0, 1.0]
        if x2 != x1:
            clo = int(np.ceil((min(x1, x2) - x0) / dx))
            chi = int(np.floor((max(x1, x2) - x0) / dx))
            for c in range(clo, chi + 1):
                t = (x0 + c * dx - x1) / (x2 - x1)
                if 0.0 < t < 1.0:
                    ts.append(t)
        if y2 != y1:
            rlo = int(np.ceil((min(y1, y2) - y0) / dy))
            rhi = int(np.floor((max(y1, y2) - y0) / dy))
            for r in range(rlo, rhi + 1):
                t = (y0 + r * dy - y1) / (y2 - y1)
                if 0.0 < t < 1.0:
                    ts.append(t)
        ts = np.unique(np.clip(ts, 0.0, 1.0))
        nx, ny = (y1 - y2) / length, (x2 - x1) / length
        total = 0.0
        for t0, t1 in zip(ts[:-1], ts[1:]):
            tm = 0.5 * (t0 + t1)
            xm, ym = x1 + tm * (x2 - x1), y1 + tm * (y2 - y1)
            vsum = 0.0
            for sgn in (1.0, -1.0):
                c = int(np.floor((xm + sgn * nudge * nx - x0) / dx))
                r = int(np.floor((ym + sgn * nudge * ny - y0) / dy))
                c = max(0, min(w - 1, c))
                r = max(0, min(h - 1, r))
                vsum += values[r, c]
            total += (t1 - t0) * length * 0.5 * vsum
        out[k] = total
    return out
