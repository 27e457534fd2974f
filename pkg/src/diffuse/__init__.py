"""Spherical surface diffusion solver with RKL2 super-time-stepping.

Core pieces, bottom up: ``grid`` (geometry and areas), ``operator`` (the
flux-form stencil), ``integrator`` (RKL2 stages and the ``advance`` driver),
``execution`` (serial / parallel-loops / parallel-all), ``mapio`` (SDM1 and
CSV files, synthetic maps), ``bench`` (timing harness) and ``testkit``
(dense oracles).
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DiffuseError, InvalidArgumentError, MapFormatError,
                     MapValidationError, OracleError, ShapeError)
from .execution import ExecPlan, ExecutionMode, ReductionMode, resolve_thread_count
from .field import ScalarField
from .grid import SphericalGrid, area_weighted_sum, build_stretched_grid, build_uniform_grid, grid_from_nodes
from .integrator import AdvanceStats, Rkl2Plan, advance, build_rkl2_plan, compute_stage_count, rkl2_step
from .mapio import gen_harmonic, gen_noise, read_map, write_map
from .operator import StencilOperator, apply, build_operator, gershgorin_bound

__all__ = [
    "AdvanceStats", "ConfigurationError", "DiffuseError", "ExecPlan", "ExecutionMode",
    "InvalidArgumentError", "MapFormatError", "MapValidationError", "OracleError", "ReductionMode",
    "Rkl2Plan", "ScalarField", "ShapeError", "SphericalGrid", "StencilOperator", "advance", "apply",
    "area_weighted_sum", "build_operator", "build_rkl2_plan", "build_stretched_grid",
    "build_uniform_grid", "compute_stage_count", "gen_harmonic", "gen_noise", "gershgorin_bound",
    "grid_from_nodes", "read_map", "resolve_thread_count", "rkl2_step", "write_map",
]
