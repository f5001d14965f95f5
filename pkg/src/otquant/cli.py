"""Command line front end.

Subcommands
    solve    solve the equal-mass transport problem for a fixed point cloud
    points   generate grid or seeded-random point clouds as CSV
    lloyd    run Lloyd iterations and emit the trace
    descent  run damped descent (fixed step count or the k_N schedule)
    rates    repeat an experiment over N values and trials, fit a log-log rate
    verify   run a named suite of inequality checks

Exit codes: 0 success, 1 input/parse failure, 2 solver non-convergence,
3 verify-suite failure.
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, density, diagnostics, oned, quantize, sdot
from .errors import (
    DuplicateSites,
    FormatError,
    NonSquareN,
    NotConverged,
    OtquantError,
)
from .geom2d import min_pairwise_distance


# ---------------------------------------------------------------------------
# points


def generate_points(kind, n, rho=None, seed=0):
    """Grid or seeded-random cloud inside the density's bounding rectangle.

    Grid points sit at cell centers ((2i+1)/(2m), (2j+1)/(2m)) of an m x m
    partition (n must equal m^2); random points are i.i.d. uniform drawn
    from a PCG64 stream, so identical seeds reproduce identical clouds on
    any platform.
    """
    if rho is None:
        x0, y0, x1, y1 = 0.0, 0.0, 1.0, 1.0
    else:
        x0, y0, x1, y1 = rho.x0, rho.y0, rho.x1, rho.y1
    if kind == "grid":
        m = math.isqrt(int(n))
        if m * m != n:
            raise NonSquareN("grid init needs a square N, got %d" % n)
        c = (2.0 * np.arange(m) + 1.0) / (2.0 * m)
        gx, gy = np.meshgrid(c, c, indexing="ij")
        u = np.column_stack([gx.ravel(), gy.ravel()])
    elif kind == "random":
        rng = np.random.default_rng(seed)
        u = rng.random((int(n), 2))
    else:
        raise FormatError("unknown point kind %r" % kind)
    pts = np.empty_like(u)
    pts[:, 0] = x0 + u[:, 0] * (x1 - x0)
    pts[:, 1] = y0 + u[:, 1] * (y1 - y0)
    return pts


def write_points_csv(path, pts):
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    lines = ["x,y"]
    for x, y in pts:
        lines.append("%.17g,%.17g" % (x, y))
    data = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(data)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(data)


def read_points_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "x,y":
        raise FormatError("%s: expected header 'x,y'" % path)
    pts = []
    for k, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise FormatError("%s:%d: expected two comma-separated values" % (path, k))
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise FormatError("%s:%d: not a number: %r" % (path, k, ln)) from None
    if not pts:
        raise FormatError("%s: no points" % path)
    return np.asarray(pts, dtype=np.float64)


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log N, log value) pairs."""

    slope: float
    intercept: float
    r_squared: float
    points: tuple


def fit_rate(n_values, values):
    """OLS fit of log(value) against log(N); needs >= 3 pairs."""
    n_values = np.asarray(n_values, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(n_values) < 3:
        raise ValueError("rate fit needs at least 3 N values")
    if np.any(values <= 0.0) or np.any(n_values <= 0.0):
        raise ValueError("rate fit needs positive N and values")
    lx, ly = np.log(n_values), np.log(values)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        points=tuple(zip(lx.tolist(), ly.tolist())),
    )


# ---------------------------------------------------------------------------
# shared plumbing


def _make_density(spec):
    if spec == "uniform":
        return density.uniform(resolution=1024)
    if spec.startswith("gauss2:"):
        try:
            coeff = float(spec.split(":", 1)[1])
        except ValueError:
            raise FormatError("bad gauss2 coefficient in %r" % spec) from None
        return density.analytic_gaussian2(coeff)
    if spec.startswith("pgm:"):
        return density.from_pgm(spec.split(":", 1)[1])
    raise FormatError(
        "unknown density %r (expected uniform, gauss2:COEFF, or pgm:PATH)" % spec
    )


def _initial_points(args, rho, n, seed):
    init = args.init
    if init.startswith("csv:"):
        return read_points_csv(init.split(":", 1)[1])
    if init in ("grid", "random"):
        return generate_points(init, n, rho, seed)
    raise FormatError("unknown init %r (expected grid, random, or csv:PATH)" % init)


def _threads():
    raw = os.environ.get("SDOT_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        raise FormatError("SDOT_THREADS must be an integer, got %r" % raw) from None
    if k <= 0:
        k = os.cpu_count() or 1
    return k


def _version_string():
    here = os.path.dirname(os.path.abspath(__file__))
    root = os.path.dirname(os.path.dirname(here))
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=root,
            capture_output=True,
            text=True,
            timeout=5,
        )
        tag = out.stdout.strip()
        if out.returncode == 0 and tag:
            return "%s+g%s" % (__version__, tag)
    except OSError:
        pass
    return __version__


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(report, args):
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.json or not out:
        sys.stdout.write(text)


def _base_report(args, **extra):
    cfg = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "json", "out", "fit_out") and v is not None
    }
    rep = {
        "config": cfg,
        "version": _version_string(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    rep.update(extra)
    return rep


# ---------------------------------------------------------------------------
# subcommands


def cmd_points(args):
    if args.init.startswith("csv:"):
        raise FormatError("points generates clouds; csv init is for the solvers")
    rho = _make_density(args.density) if args.density else None
    pts = generate_points(args.init, args.n[0], rho, args.seed)
    write_points_csv(args.out or "-", pts)
    return 0


def cmd_solve(args):
    rho = _make_density(args.density)
    pts = _initial_points(args, rho, args.n[0] if args.n else 0, args.seed)
    q = sdot.quantization(pts, rho, tol=args.tol)
    rep = _base_report(
        args,
        n=len(pts),
        phi=q.phi,
        masses=q.masses,
        barycenters=q.barycenters,
        cost=q.cost,
        f_n=q.f_value,
        solver={
            "iterations": q.report.iterations,
            "final_residual": q.report.final_residual,
            "newton_steps": q.report.newton_steps,
            "fallback_steps": q.report.fallback_steps,
        },
        backend=_backend_name(),
    )
    _emit(rep, args)
    return 0


def _backend_name():
    from . import backend

    return backend.BACKEND_NAME


def _trace_report(args, tr, n):
    return _base_report(
        args,
        n=n,
        steps=tr.steps,
        eta=tr.eta,
        big_a=tr.big_a,
        epsilon0=tr.epsilon0,
        schedule_underflow=tr.schedule_underflow,
        f_value=tr.f_value,
        grad_norm_sq=tr.grad_norm_sq,
        min_pairwise=tr.min_pairwise,
        lemma_gf_bound=tr.lemma_gf_bound,
        pl_lhs=tr.pl_lhs,
        pl_rhs=tr.pl_rhs,
        expl_bound=tr.expl_bound,
        final_sites=tr.final_sites,
        backend=_backend_name(),
    )


def cmd_lloyd(args):
    rho = _make_density(args.density)
    pts = _initial_points(args, rho, args.n[0] if args.n else 0, args.seed)
    cfg = quantize.DescentConfig(tau=1.0, max_steps=args.steps, sdot_tol=args.tol)
    tr = quantize.run_descent(pts, rho, cfg)
    _emit(_trace_report(args, tr, len(pts)), args)
    return 0


def cmd_descent(args):
    rho = _make_density(args.density)
    pts = _initial_points(args, rho, args.n[0] if args.n else 0, args.seed)
    schedule = "kn_schedule" if args.schedule == "kn" else "fixed_steps"
    cfg = quantize.DescentConfig(
        tau=args.tau,
        max_steps=args.steps,
        epsilon0=args.epsilon,
        schedule=schedule,
        sdot_tol=args.tol,
    )
    tr = quantize.run_descent(pts, rho, cfg)
    _emit(_trace_report(args, tr, len(pts)), args)
    return 0


def _one_rate_run(rho, init, n, trial, seed, mode, tau, steps, schedule, tol):
    """Value of one experiment run; used by both rates and its tests."""
    pts = generate_points(init, n, rho, seed + trial)
    if mode == "one_lloyd":
        q = sdot.quantization(pts, rho, tol=tol)
        return sdot.quantization(q.barycenters, rho, tol=tol, phi0=q.phi).f_value
    if mode == "lloyd":
        cfg = quantize.DescentConfig(tau=1.0, max_steps=steps, sdot_tol=tol)
        return quantize.run_descent(pts, rho, cfg).f_value[-1]
    if mode == "descent":
        cfg = quantize.DescentConfig(
            tau=tau, max_steps=steps, schedule=schedule, sdot_tol=tol
        )
        return quantize.run_descent(pts, rho, cfg).f_value[-1]
    raise FormatError("unknown mode %r" % mode)


def cmd_rates(args):
    rho = _make_density(args.density)
    n_values = sorted(set(args.n))
    if len(n_values) < 3:
        raise FormatError("rates needs at least 3 distinct N values")
    if args.init.startswith("csv:"):
        raise FormatError("rates generates its own clouds; csv init not supported")
    schedule = "kn_schedule" if args.schedule == "kn" else "fixed_steps"
    # grid clouds ignore the trial seed, so one run per N serves every trial
    deterministic = args.init == "grid"

    jobs = []
    for n in n_values:
        trials = 1 if deterministic else args.trials
        for t in range(trials):
            jobs.append((n, t))

    def run(job):
        n, t = job
        try:
            v = _one_rate_run(
                rho,
                args.init,
                n,
                t,
                args.seed,
                args.mode,
                args.tau,
                args.steps,
                schedule,
                args.tol,
            )
            return "ok", float(v)
        except NotConverged:
            return "not_converged", math.nan
        except OtquantError as exc:
            return "error:%s" % type(exc).__name__, math.nan

    k = _threads()
    if k > 1:
        with ThreadPoolExecutor(max_workers=k) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    rows = []
    by_n = {n: [] for n in n_values}
    for (n, t), (status, v) in zip(jobs, results):
        reps = args.trials if deterministic else 1
        for r in range(reps):
            trial = t if not deterministic else r
            rows.append((n, trial, args.seed + trial, status, v))
        if status == "ok":
            by_n[n].extend([v] * reps)
    rows.sort(key=lambda r: (r[0], r[1]))

    if args.out:
        lines = ["n,trial,seed,status,value"]
        for n, trial, seed, status, v in rows:
            sval = "" if math.isnan(v) else "%.17g" % v
            lines.append("%d,%d,%d,%s,%s" % (n, trial, seed, status, sval))
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    means_n = [n for n in n_values if by_n[n]]
    means = [float(np.mean(by_n[n])) for n in means_n]
    if len(means_n) < 3:
        raise FormatError(
            "rate fit needs >= 3 N values with surviving runs, got %d" % len(means_n)
        )
    fit = fit_rate(means_n, means)
    rep = _base_report(
        args,
        n_values=means_n,
        means=means,
        fit={
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "points": [list(p) for p in fit.points],
        },
        runs=len(rows),
        failed=sum(1 for r in rows if r[3] != "ok"),
        backend=_backend_name(),
    )
    text = json.dumps(_jsonable(rep), sort_keys=True, indent=2) + "\n"
    if args.fit_out:
        with open(args.fit_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.json or not (args.out or args.fit_out):
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# verify suites


def _check(name, bc):
    return {
        "name": name,
        "lhs": bc.lhs,
        "rhs": bc.rhs,
        "slack": bc.slack,
        "satisfied": bc.satisfied,
    }


def _suite_bounds(seed, tol):
    checks = []
    rho = density.analytic_gaussian2(8.0)
    for n in (400, 1600):
        pts = generate_points("grid", n, rho)
        eps = n**-0.5
        checks.append(
            _check("one_step_bound_n%d" % n, diagnostics.barycenter_bound(pts, rho, eps, tol=tol))
        )
    for t in range(5):
        pts = generate_points("random", 100, rho, seed + t)
        eps = min_pairwise_distance(pts)
        checks.append(
            _check("pl_random_%d" % t, diagnostics.pl_check(pts, rho, eps, tol=tol))
        )
    uni = density.uniform(resolution=256)
    mid = diagnostics.midline_cloud(8)
    checks.append(
        _check(
            "pl_midline",
            diagnostics.pl_check(mid, uni, min_pairwise_distance(mid), tol=tol),
        )
    )
    for n in (4, 16, 64):
        checks.append(
            _check(
                "hyperplane_n%d" % n, diagnostics.hyperplane_bound_check(n, uni, tol=tol)
            )
        )
    return checks


def _suite_lemmas(seed, tol):
    checks = []
    rho = density.analytic_gaussian2(8.0, resolution=512)
    pts = generate_points("random", 100, rho, seed)
    tr = quantize.run_descent(
        pts, rho, quantize.DescentConfig(tau=1.0, max_steps=25, sdot_tol=tol)
    )
    f = tr.f_value
    checks.append(
        _check("lloyd_monotone", diagnostics.BoundCheck.make(float(np.max(np.diff(f))), 0.0))
    )
    pts = generate_points("random", 64, rho, seed + 1)
    tr = quantize.run_descent(
        pts, rho, quantize.DescentConfig(tau=0.5, max_steps=20, sdot_tol=tol)
    )
    mp = tr.min_pairwise
    worst = float(np.max(0.5 * mp[:-1] - mp[1:]))
    checks.append(_check("stretch_contraction", diagnostics.BoundCheck.make(worst, 0.0)))
    grid = generate_points("grid", 400, rho)
    for tau in (0.1, 0.3):
        tr = quantize.run_descent(
            grid,
            rho,
            quantize.DescentConfig(tau=tau, max_steps=30, sdot_tol=tol),
        )
        worst = float(np.max(tr.f_value - tr.lemma_gf_bound))
        checks.append(
            _check("lemma_gf_tau%.1f" % tau, diagnostics.BoundCheck.make(worst, 0.0))
        )
    return checks


def _suite_gaussian1d(seed, tol):
    del seed, tol  # exact 1D computations, nothing to seed or tune
    n_values = [2**8, 2**10, 2**12, 2**14, 2**16]
    checks = [
        _check("calibrated_lower_bound", oned.gaussian_lower_bound_check(n_values, 0.5))
    ]
    costs = [oned.quantile_cells(oned.TruncGauss1D(0.3), n).cost for n in n_values]
    slope = fit_rate(n_values, costs).slope
    worst = max(slope - (-1.8), (-2.2) - slope)
    checks.append(_check("fixed_sigma_slope", diagnostics.BoundCheck.make(worst, 0.0)))
    return checks


def _suite_proba(seed, tol):
    uni = density.uniform(resolution=64)
    n = 1000
    eps = n ** (-2.0 / 3.0)
    checks = [
        _check(
            "kappa_expectation",
            diagnostics.kappa_expectation_check(uni, n, eps, trials=200, seed=seed),
        ),
        _check(
            "concentration",
            diagnostics.concentration_check(
                uni, 100, 100 ** (-2.0 / 3.0), trials=20, seed=seed, tol=tol
            ),
        ),
    ]
    return checks


_SUITES = {
    "bounds": _suite_bounds,
    "lemmas": _suite_lemmas,
    "gaussian1d": _suite_gaussian1d,
    "proba": _suite_proba,
}


def cmd_verify(args):
    if args.suite not in _SUITES:
        raise FormatError(
            "unknown suite %r (expected one of %s)" % (args.suite, sorted(_SUITES))
        )
    checks = _SUITES[args.suite](args.seed, args.tol)
    ok = all(c["satisfied"] for c in checks)
    rep = _base_report(
        args,
        suite=args.suite,
        checks=checks,
        passed=sum(c["satisfied"] for c in checks),
        failed=sum(not c["satisfied"] for c in checks),
        all_satisfied=ok,
        backend=_backend_name(),
    )
    _emit(rep, args)
    return 0 if ok else 3


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, density_required=True):
    p.add_argument(
        "--density",
        required=density_required,
        help="uniform | gauss2:COEFF | pgm:PATH",
    )
    p.add_argument("--init", default="random", help="grid | random | csv:PATH")
    p.add_argument("--n", type=int, action="append", help="point count (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6, help="solver mass tolerance")
    p.add_argument("--out", help="output path")
    p.add_argument("--json", action="store_true", help="print the JSON report")


def build_parser():
    ap = argparse.ArgumentParser(prog="otquant", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("points", help="generate a point cloud CSV")
    _add_common(p, density_required=False)
    p.set_defaults(func=cmd_points)

    p = sub.add_parser("solve", help="solve at fixed sites, report the transport")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("lloyd", help="run Lloyd steps, emit the trace")
    _add_common(p)
    p.add_argument("--steps", type=int, default=50)
    p.set_defaults(func=cmd_lloyd)

    p = sub.add_parser("descent", help="run damped descent, emit the trace")
    _add_common(p)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--schedule", choices=["kn"], default=None)
    p.add_argument("--epsilon", type=float, default=None, help="separation scale")
    p.set_defaults(func=cmd_descent)

    p = sub.add_parser("rates", help="trial sweep over N, log-log rate fit")
    _add_common(p)
    p.add_argument("--mode", choices=["one_lloyd", "lloyd", "descent"], default="one_lloyd")
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--schedule", choices=["kn"], default=None)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--fit-out", help="path for the JSON fit report")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("verify", help="run an inequality-check suite")
    p.add_argument("--suite", required=True, help="bounds | lemmas | gaussian1d | proba")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", help="output path")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "n", None) is None and hasattr(args, "n"):
        args.n = [100]
    try:
        return args.func(args)
    except NotConverged as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except DuplicateSites as exc:
        print("error: duplicate sites (%s)" % exc, file=sys.stderr)
        return 1
    except (OtquantError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
