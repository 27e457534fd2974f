"""Logically rectangular, non-uniform (theta, phi) grids on the unit sphere.

Nodes are placed at both poles, so ``theta[0] == 0`` and ``theta[-1] == pi``.
Each pole is a single cell (a spherical cap) shared by every longitude; the
field stores the pole value once per longitude, all copies equal.

Cell areas come from cosine differences of the cap boundaries, which makes
their total exactly 4*pi up to roundoff:

    interior:  A[i, j] = (cos theta_{i-1/2} - cos theta_{i+1/2}) * dphi_cell[j]
    north cap: 2*pi * (1 - cos theta_{1/2})
    south cap: 2*pi * (1 + cos theta_{nt-3/2})

In the ``area`` array each pole row holds ``cap / np`` per longitude, so an
elementwise ``field * area`` summed over the whole array counts each cap once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .execution import ReductionMode, reduce_values

TWO_PI = 2.0 * math.pi
AREA_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Immutable grid geometry.  Build with :func:`grid_from_nodes` or a generator."""

    theta: np.ndarray        # (nt,) colatitude nodes, 0 .. pi
    phi: np.ndarray          # (np,) longitude nodes in [0, 2pi)
    theta_face: np.ndarray   # (nt-1,) midpoints between theta nodes
    dtheta_face: np.ndarray  # (nt-1,) theta[i+1] - theta[i]
    dtheta_cell: np.ndarray  # (nt,) mean of adjacent face spacings (one-sided at poles)
    dphi_face: np.ndarray    # (np,) phi[j+1] - phi[j], seam wraps through 2pi
    dphi_cell: np.ndarray    # (np,) mean of the two faces around node j
    dcos: np.ndarray         # (nt,) cos(lower face) - cos(upper face), i.e. area per unit phi
    area: np.ndarray         # (nt, np) cell areas, pole rows hold cap / np
    cap_north: float
    cap_south: float

    @property
    def nt(self) -> int:
        return self.theta.shape[0]

    @property
    def np(self) -> int:
        return self.phi.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.np)

    @property
    def sin_theta(self) -> np.ndarray:
        return np.sin(self.theta)

    @property
    def sin_theta_face(self) -> np.ndarray:
        return np.sin(self.theta_face)

    def total_area(self) -> float:
        return float(np.sum(self.area))

    def n_unknowns(self) -> int:
        """Degrees of freedom with each pole counted once."""
        return (self.nt - 2) * self.np + 2

    def same_as(self, other: "SphericalGrid") -> bool:
        """Same node coordinates, bit for bit."""
        return other is self or (
            self.shape == other.shape
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.phi, other.phi)
        )


def grid_from_nodes(theta, phi) -> SphericalGrid:
    """Derive faces, spacings and areas from node coordinates and validate them.

    Raises InvalidArgumentError naming the first invariant that fails.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if theta.ndim != 1 or phi.ndim != 1:
        raise ShapeError("theta and phi must be one-dimensional")
    nt, nph = theta.shape[0], phi.shape[0]
    if nt < 3:
        raise InvalidArgumentError(f"nt >= 3 required, got {nt}")
    if nph < 3:
        raise InvalidArgumentError(f"np >= 3 required, got {nph}")
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi))):
        raise InvalidArgumentError("grid coordinates must be finite")
    if theta[0] != 0.0:
        raise InvalidArgumentError(f"theta[0] must be exactly 0, got {theta[0]!r}")
    if theta[-1] != math.pi:
        raise InvalidArgumentError(f"theta[-1] must be exactly pi, got {theta[-1]!r}")
    dtheta = np.diff(theta)
    if np.any(dtheta <= 0.0):
        raise InvalidArgumentError("theta must be strictly increasing")
    if phi[0] < 0.0 or phi[-1] >= TWO_PI:
        raise InvalidArgumentError("phi must lie in [0, 2*pi)")
    dphi = np.empty(nph)
    dphi[:-1] = np.diff(phi)
    dphi[-1] = (phi[0] + TWO_PI) - phi[-1]
    if np.any(dphi <= 0.0):
        raise InvalidArgumentError("phi must be strictly increasing with a positive seam spacing")
    if abs(float(np.sum(dphi)) - TWO_PI) > 1e-12:
        raise InvalidArgumentError("phi face spacings must sum to 2*pi")

    theta_face = 0.5 * (theta[:-1] + theta[1:])
    dtheta_cell = np.empty(nt)
    dtheta_cell[1:-1] = 0.5 * (dtheta[:-1] + dtheta[1:])
    dtheta_cell[0] = 0.5 * dtheta[0]
    dtheta_cell[-1] = 0.5 * dtheta[-1]
    dphi_cell = 0.5 * (np.roll(dphi, 1) + dphi)

    cos_face = np.cos(theta_face)
    dcos = np.empty(nt)
    dcos[0] = 1.0 - cos_face[0]
    dcos[1:-1] = cos_face[:-1] - cos_face[1:]
    dcos[-1] = 1.0 + cos_face[-1]
    if np.any(dcos <= 0.0):
        raise InvalidArgumentError("cell areas must be strictly positive")

    cap_north = TWO_PI * dcos[0]
    cap_south = TWO_PI * dcos[-1]
    area = np.empty((nt, nph))
    area[1:-1] = dcos[1:-1, None] * dphi_cell[None, :]
    area[0] = cap_north / nph
    area[-1] = cap_south / nph
    if np.any(area <= 0.0):
        raise InvalidArgumentError("cell areas must be strictly positive")
    total = float(np.sum(area))
    if abs(total - 4.0 * math.pi) > AREA_RTOL * 4.0 * math.pi:
        raise InvalidArgumentError(f"cell areas sum to {total!r}, expected 4*pi")

    return SphericalGrid(
        theta=_frozen(theta), phi=_frozen(phi), theta_face=_frozen(theta_face),
        dtheta_face=_frozen(dtheta), dtheta_cell=_frozen(dtheta_cell),
        dphi_face=_frozen(dphi), dphi_cell=_frozen(dphi_cell), dcos=_frozen(dcos),
        area=_frozen(area), cap_north=float(cap_north), cap_south=float(cap_south),
    )


def _check_counts(nt, nph):
    for name, n in (("nt", nt), ("np", nph)):
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise InvalidArgumentError(f"{name} must be an integer, got {n!r}")
        if n < 3:
            raise InvalidArgumentError(f"{name} >= 3 required, got {n}")


def _uniform_phi(nph: int) -> np.ndarray:
    return TWO_PI * np.arange(nph) / nph


def build_uniform_grid(nt: int, np_: int) -> SphericalGrid:
    """Equally spaced colatitudes on [0, pi] and longitudes on [0, 2pi)."""
    _check_counts(nt, np_)
    theta = np.linspace(0.0, math.pi, nt)
    theta[0], theta[-1] = 0.0, math.pi
    return grid_from_nodes(theta, _uniform_phi(np_))


def build_stretched_grid(nt: int, np_: int, cluster_strength: float) -> SphericalGrid:
    """Colatitudes theta_i = pi * g(i / (nt-1)), g(x) = x + c*sin(2*pi*x)/(2*pi).

    For 0 < c < 1 nodes crowd toward the equator; c = 0 gives the uniform
    grid exactly.  Longitudes are uniform.
    """
    _check_counts(nt, np_)
    c = float(cluster_strength)
    if not math.isfinite(c):
        raise InvalidArgumentError("cluster_strength must be finite")
    if c >= 1.0:
        raise InvalidArgumentError(f"cluster_strength must be < 1 for a monotone grid, got {c}")
    if c < 0.0:
        raise InvalidArgumentError(f"cluster_strength must be >= 0, got {c}")
    if c == 0.0:
        return build_uniform_grid(nt, np_)
    x = np.linspace(0.0, 1.0, nt)
    theta = math.pi * (x + c * np.sin(TWO_PI * x) / TWO_PI)
    theta[0], theta[-1] = 0.0, math.pi
    return grid_from_nodes(theta, _uniform_phi(np_))


def area_weighted_sum(grid: SphericalGrid, field, mode: ReductionMode = ReductionMode.ORDERED,
                      threads: int = 1) -> float:
    """Sum of field * area over all cells, each pole cap counted once.

    ``ORDERED`` reproduces a left-to-right row-major loop bit for bit;
    ``PARALLEL`` uses the block/tree reduction and may differ by roundoff.
    """
    values = getattr(field, "values", field)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.shape:
        raise ShapeError(f"field shape {values.shape} does not match grid {grid.shape}")
    return reduce_values(values * grid.area, mode, threads=threads)
