"""Compare the compiled and pure-Python geometry kernels.

Times the four hot kernels on a representative workload (power diagram of N
random sites over a rasterized Gaussian, grid moments of its cells, segment
integrals of random chords, plus raw polygon clipping) and reports per-kernel
speedups. Also cross-checks that both backends agree.

Usage: python3 benchmarks/bench_backends.py [--n 2000] [--resolution 512]
       [--repeat 5]
"""

import argparse
import time

import numpy as np

from otquant import backend, density
from otquant.geom2d import ConvexPolygon


def timeit(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="number of sites")
    ap.add_argument("--resolution", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not backend.HAVE_COMPILED:
        print("compiled backend not available; nothing to compare")
        return

    comp = backend.get_backend("compiled")
    pure = backend.get_backend("python")

    rho = density.analytic_gaussian2(8.0, resolution=args.resolution)
    ps0, ps1, ps2 = rho._prefix_sums()
    rng = np.random.default_rng(0)
    sites = rng.random((args.n, 2))
    phi = np.zeros(args.n)
    dom = ConvexPolygon.rectangle(0.0, 0.0, 1.0, 1.0).vertices

    rows = []

    def bench(name, f_comp, f_pure, same):
        tc, rc = timeit(f_comp, args.repeat)
        tp, rp = timeit(f_pure, args.repeat)
        rows.append((name, tc, tp, tp / tc, same(rc, rp)))

    verts, offsets, _labels = comp.power_cells(sites, phi, dom)

    bench(
        "power_cells",
        lambda: comp.power_cells(sites, phi, dom),
        lambda: pure.power_cells(sites, phi, dom),
        lambda a, b: bool(np.array_equal(a[1], b[1])),
    )
    bench(
        "cells_grid_moments",
        lambda: comp.cells_grid_moments(
            verts, offsets, rho.values, rho.x0, rho.y0, rho.dx, rho.dy, ps0, ps1, ps2
        ),
        lambda: pure.cells_grid_moments(
            verts, offsets, rho.values, rho.x0, rho.y0, rho.dx, rho.dy, ps0, ps1, ps2
        ),
        lambda a, b: bool(np.allclose(a, b, rtol=0, atol=1e-12)),
    )

    m = len(sites) // 2
    segs = np.column_stack([sites[:m], sites[m : 2 * m]])
    bench(
        "segment_density_integrals",
        lambda: comp.segment_density_integrals(
            segs, rho.values, rho.x0, rho.y0, rho.dx, rho.dy
        ),
        lambda: pure.segment_density_integrals(
            segs, rho.values, rho.x0, rho.y0, rho.dx, rho.dy
        ),
        lambda a, b: bool(np.allclose(a, b, rtol=1e-12, atol=1e-15)),
    )

    halves = rng.random((200, 3)) - 0.5

    def clip_many(mod):
        out = 0.0
        for a0, a1, b in halves:
            v = mod.clip_convex(dom, a0, a1, b * 0.1)
            out += v.sum()
        return out

    bench(
        "clip_convex x200",
        lambda: clip_many(comp),
        lambda: clip_many(pure),
        lambda a, b: abs(a - b) <= 1e-9 * max(1.0, abs(a)),
    )

    print(
        "N=%d sites, %dx%d density, best of %d runs"
        % (args.n, *rho.shape, args.repeat)
    )
    print("%-28s %10s %10s %8s  %s" % ("kernel", "compiled", "python", "speedup", "agree"))
    for name, tc, tp, sp, same in rows:
        print(
            "%-28s %9.4fs %9.4fs %7.1fx  %s" % (name, tc, tp, sp, "yes" if same else "NO")
        )


if __name__ == "__main__":
    main()
