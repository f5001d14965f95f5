"""Select the compute backend: compiled `_speedups` or pure NumPy `_reference`.

The compiled extension is optional; if it failed to build (or the environment
variable SDOT_BACKEND forces it off) the pure backend is used.  Both expose
the same four kernels:

    clip_convex(verts, a0, a1, b)            -> (K, 2) array
    power_cells(sites, phi, domain)          -> (verts, offsets, labels)
    cells_grid_moments(verts, offsets, values, x0, y0, dx, dy, ps0, ps1, ps2)
    segment_density_integrals(segs, values, x0, y0, dx, dy)

SDOT_BACKEND=auto|compiled|python (default auto).  Requesting "compiled"
when the extension is unavailable raises at import.
"""

import os

from . import _reference

try:
    from . import _speedups

    HAVE_COMPILED = True
except ImportError:
    _speedups = None
    HAVE_COMPILED = False

_choice = os.environ.get("SDOT_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        "SDOT_BACKEND must be one of auto, compiled, python; got %r" % _choice
    )
if _choice == "compiled" and not HAVE_COMPILED:
    raise ImportError("SDOT_BACKEND=compiled but the extension is not built")

if _choice == "python" or not HAVE_COMPILED:
    _active = _reference
else:
    _active = _speedups

BACKEND_NAME = "compiled" if _active is not _reference else "python"

clip_convex = _active.clip_convex
power_cells = _active.power_cells
cells_grid_moments = _active.cells_grid_moments
segment_density_integrals = _active.segment_density_integrals


def get_backend(name):
    """Return the module implementing the kernel interface for `name`.

    Used by the benchmark suite to time both implementations side by side.
    """
    if name == "python":
        return _reference
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ImportError("compiled backend is not built")
        return _speedups
    raise ValueError("unknown backend %r" % (name,))
