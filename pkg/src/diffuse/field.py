"""Scalar fields: one float64 per grid node, row-major (theta outer, phi inner)."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .grid import SphericalGrid


class ScalarField:
    """A value array bound to the grid it lives on.

    Pole rows must be single-valued: ``values[0, :]`` all equal, likewise
    ``values[-1, :]``.  The constructor only checks the shape; call
    :meth:`validate` (or use :meth:`from_array`) for the full check.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: SphericalGrid, values: np.ndarray):
        if not isinstance(values, np.ndarray) or values.dtype != np.float64:
            raise ShapeError("field values must be a float64 ndarray")
        if values.shape != grid.shape:
            raise ShapeError(f"field shape {values.shape} does not match grid {grid.shape}")
        if not values.flags.c_contiguous:
            raise ShapeError("field values must be C-contiguous")
        self.grid = grid
        self.values = values

    @classmethod
    def from_array(cls, grid: SphericalGrid, values) -> "ScalarField":
        arr = np.array(values, dtype=np.float64, order="C", copy=True)
        if arr.shape != grid.shape:
            raise ShapeError(f"field shape {arr.shape} does not match grid {grid.shape}")
        field = cls(grid, arr)
        field.validate()
        return field

    @classmethod
    def zeros(cls, grid: SphericalGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: SphericalGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def validate(self) -> None:
        v = self.values
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("field contains non-finite values")
        if np.any(v[0] != v[0, 0]) or np.any(v[-1] != v[-1, 0]):
            raise InvalidArgumentError("pole rows must be single-valued")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __repr__(self) -> str:
        return f"ScalarField(shape={self.shape})"


def unknown_index(nt: int, nph: int, i: int, j: int) -> int:
    """Position of node (i, j) in the packed unknown vector.

    Convention: north pole, south pole, then interior rows 1..nt-2 row-major.
    """
    if i == 0:
        return 0
    if i == nt - 1:
        return 1
    return 2 + (i - 1) * nph + j


def pack_unknowns(values: np.ndarray) -> np.ndarray:
    """Flatten a (nt, np) field to its (nt-2)*np + 2 distinct unknowns."""
    values = np.asarray(values, dtype=np.float64)
    return np.concatenate(([values[0, 0], values[-1, 0]], values[1:-1].ravel()))


def unpack_unknowns(nt: int, nph: int, vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != ((nt - 2) * nph + 2,):
        raise ShapeError(f"unknown vector of length {vec.shape} does not fit a {nt}x{nph} grid")
    out = np.empty((nt, nph))
    out[0] = vec[0]
    out[-1] = vec[1]
    out[1:-1] = vec[2:].reshape(nt - 2, nph)
    return out
