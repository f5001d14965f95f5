"""Uniform quantization of 2D densities by semidiscrete optimal transport.

The package solves for the N-point configuration whose power cells each
carry mass 1/N of a given density, via an exact power-diagram solver for
the transport dual, and ships the energy-descent loop plus numerical
checks of the separation/convergence bounds that govern it.
"""

from . import backend, density, diagnostics, geom2d, oned, quantize, sdot
from .backend import BACKEND_NAME, HAVE_COMPILED
from .density import Density, PolygonMoments, analytic_gaussian2, from_image
from .density import from_pgm, polygon_moments, read_pgm, transport_cost_to_point
from .density import uniform
from .diagnostics import BoundCheck, SeparationStats, separation_stats
from .errors import (
    DuplicateSites,
    EmptyCell,
    EpsilonTooLarge,
    FormatError,
    NonSquareN,
    NotConverged,
    OtquantError,
    ZeroMass,
)
from .geom2d import ConvexPolygon, HalfPlane, PowerDiagram, clip
from .geom2d import min_pairwise_distance, power_cell, power_diagram
from .quantize import DescentConfig, DescentTrace, descent_step, domain_constant
from .quantize import energy, gradient, lloyd_step, run_descent
from .sdot import Quantization, SolveReport, dual_value, mass_gradient
from .sdot import quantization, solve_potentials

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "HAVE_COMPILED",
    "BoundCheck",
    "ConvexPolygon",
    "Density",
    "DescentConfig",
    "DescentTrace",
    "DuplicateSites",
    "EmptyCell",
    "EpsilonTooLarge",
    "FormatError",
    "HalfPlane",
    "NonSquareN",
    "NotConverged",
    "OtquantError",
    "PolygonMoments",
    "PowerDiagram",
    "Quantization",
    "SeparationStats",
    "SolveReport",
    "ZeroMass",
    "analytic_gaussian2",
    "backend",
    "clip",
    "density",
    "descent_step",
    "diagnostics",
    "domain_constant",
    "dual_value",
    "energy",
    "from_image",
    "from_pgm",
    "geom2d",
    "gradient",
    "lloyd_step",
    "mass_gradient",
    "min_pairwise_distance",
    "oned",
    "polygon_moments",
    "power_cell",
    "power_diagram",
    "quantization",
    "quantize",
    "read_pgm",
    "run_descent",
    "sdot",
    "separation_stats",
    "solve_potentials",
    "transport_cost_to_point",
    "uniform",
]
