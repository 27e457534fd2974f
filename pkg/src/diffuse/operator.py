"""Conservative second-order discretization of du/dt = div(nu grad u) on the sphere.

Interior node (i, j), with s = sin(theta), face diffusivities by arithmetic
mean and periodic wrap in phi::

    (Mu)_ij = [ s_{i+1/2} nu_{i+1/2,j} (u_{i+1,j} - u_ij) / dtheta_{i+1/2}
              - s_{i-1/2} nu_{i-1/2,j} (u_ij - u_{i-1,j}) / dtheta_{i-1/2} ] / dcos_i
            + [ nu_{i,j+1/2} (u_{i,j+1} - u_ij) / dphi_{j+1/2}
              - nu_{i,j-1/2} (u_ij - u_{i,j-1}) / dphi_{j-1/2} ] / (s_i^2 dphi_cell_j)

where dcos_i = cos theta_{i-1/2} - cos theta_{i+1/2} is the cell's area per
unit longitude (a second-order match for s_i * dtheta_cell_i).  Using the
cell's own area as the metric makes every face flux enter its two cells with
equal and opposite area-weighted contributions, so the area-weighted sum of
M u vanishes to roundoff and M is self-adjoint in the area inner product.

Each pole is closed by balancing the flux through its cap boundary::

    du_pole/dt = (1 / A_cap) * sum_j s_{1/2} nu_{1/2,j} (u_{1,j} - u_pole) / dtheta_{1/2} * dphi_cell_j
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, ShapeError
from .execution import ExecPlan
from .field import ScalarField, unknown_index
from .grid import SphericalGrid


@dataclass(eq=False)
class StencilOperator:
    grid: SphericalGrid
    nu: ScalarField
    c_north: np.ndarray   # (nt, np), zero on pole rows
    c_south: np.ndarray
    c_east: np.ndarray
    c_west: np.ndarray
    c_center: np.ndarray  # (nt, np); pole rows hold the pole self-coefficient
    w_north: np.ndarray   # (np,) pole-to-ring-1 weights
    w_south: np.ndarray
    applications: int = 0  # how many times apply() has run with this operator

    @property
    def pole_center_north(self) -> float:
        return float(self.c_center[0, 0])

    @property
    def pole_center_south(self) -> float:
        return float(self.c_center[-1, 0])

    def to_dense(self) -> np.ndarray:
        """Coefficient matrix over packed unknowns (poles first, then interior row-major)."""
        nt, nph = self.grid.shape
        n = self.grid.n_unknowns()
        mat = np.zeros((n, n))
        for j in range(nph):
            mat[0, unknown_index(nt, nph, 1, j)] += self.w_north[j]
            mat[1, unknown_index(nt, nph, nt - 2, j)] += self.w_south[j]
        mat[0, 0] = self.pole_center_north
        mat[1, 1] = self.pole_center_south
        for i in range(1, nt - 1):
            for j in range(nph):
                r = unknown_index(nt, nph, i, j)
                mat[r, r] += self.c_center[i, j]
                mat[r, unknown_index(nt, nph, i - 1, j)] += self.c_north[i, j]
                mat[r, unknown_index(nt, nph, i + 1, j)] += self.c_south[i, j]
                mat[r, unknown_index(nt, nph, i, (j + 1) % nph)] += self.c_east[i, j]
                mat[r, unknown_index(nt, nph, i, (j - 1) % nph)] += self.c_west[i, j]
        return mat


def _as_nu_field(grid: SphericalGrid, nu) -> ScalarField:
    if isinstance(nu, ScalarField):
        if not nu.grid.same_as(grid):
            raise ShapeError("diffusivity field lives on a different grid")
        field = nu
        field.validate()
    elif np.isscalar(nu):
        field = ScalarField.constant(grid, float(nu))
        field.validate()
    else:
        field = ScalarField.from_array(grid, nu)
    if np.any(field.values < 0.0):
        raise InvalidArgumentError("diffusivity must be non-negative everywhere")
    return field


def build_operator(grid: SphericalGrid, nu: Union[ScalarField, np.ndarray, float] = 1.0) -> StencilOperator:
    """Precompute the 5-point flux-form coefficients and pole weights."""
    nu_field = _as_nu_field(grid, nu)
    v = nu_field.values
    nt, nph = grid.shape

    s = np.sin(grid.theta)
    s_face = np.sin(grid.theta_face)
    dcos = grid.dcos
    dth = grid.dtheta_face
    dph = grid.dphi_face
    dph_c = grid.dphi_cell

    nu_tface = 0.5 * (v[:-1] + v[1:])               # face i+1/2, shape (nt-1, np)
    nu_pface = 0.5 * (v + np.roll(v, -1, axis=1))   # face j+1/2, shape (nt, np)
    # theta-face conductance per unit phi: s_{i+1/2} nu_{i+1/2,j} / dtheta_{i+1/2}
    g_theta = (s_face / dth)[:, None] * nu_tface

    c_north = np.zeros((nt, nph))
    c_south = np.zeros((nt, nph))
    c_east = np.zeros((nt, nph))
    c_west = np.zeros((nt, nph))
    inner = slice(1, nt - 1)
    c_north[inner] = g_theta[:-1] / dcos[inner, None]
    c_south[inner] = g_theta[1:] / dcos[inner, None]
    metric_phi = (s[inner] ** 2)[:, None] * dph_c[None, :]
    c_east[inner] = nu_pface[inner] / dph[None, :] / metric_phi
    c_west[inner] = np.roll(nu_pface[inner] / dph[None, :], 1, axis=1) / metric_phi

    w_north = g_theta[0] * dph_c / grid.cap_north
    w_south = g_theta[-1] * dph_c / grid.cap_south

    c_center = np.zeros((nt, nph))
    c_center[inner] = -(c_north[inner] + c_south[inner] + c_east[inner] + c_west[inner])
    c_center[0] = -float(kernels.ordered_sum(w_north))
    c_center[-1] = -float(kernels.ordered_sum(w_south))

    return StencilOperator(grid=grid, nu=nu_field, c_north=c_north, c_south=c_south,
                           c_east=c_east, c_west=c_west, c_center=c_center,
                           w_north=w_north, w_south=w_south)


def _check_buffers(op: StencilOperator, u_in: ScalarField, u_out: ScalarField) -> None:
    for name, f in (("input", u_in), ("output", u_out)):
        if f.grid is not op.grid and not f.grid.same_as(op.grid):
            raise ShapeError(f"{name} field is not on the operator's grid")
    if u_in.values is u_out.values or np.shares_memory(u_in.values, u_out.values):
        raise InvalidArgumentError("input and output buffers must be distinct")


def apply(op: StencilOperator, u_in: ScalarField, u_out: ScalarField,
          exec: Optional[ExecPlan] = None) -> None:
    """u_out = M u_in, swept over row blocks by ``exec`` (serial if omitted)."""
    _check_buffers(op, u_in, u_out)
    plan = exec if exec is not None else ExecPlan()
    src, dst = u_in.values, u_out.values
    cn, cs, ce, cw, wn, ws = op.c_north, op.c_south, op.c_east, op.c_west, op.w_north, op.w_south

    def kernel(i0: int, i1: int) -> None:
        kernels.stencil_rows(src, cn, cs, ce, cw, wn, ws, dst, i0, i1)

    plan.parallel_sweep(range(op.grid.nt), kernel)
    op.applications += 1


def gershgorin_bound(op: StencilOperator) -> float:
    """Upper bound on the spectral radius: max absolute row sum = 2 * max |diagonal|.

    Exact equality with the row-sum form holds because rows sum to zero and
    off-diagonals are non-negative.
    """
    return 2.0 * float(np.max(np.abs(op.c_center)))
