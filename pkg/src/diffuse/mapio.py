"""Map files and synthetic initial conditions.

SDM1 binary layout, all little-endian::

    offset 0   4 bytes   magic b"SDM1"
    offset 4   uint32    format version (1)
    offset 8   uint32    nt
    offset 12  uint32    np
    offset 16  float64[nt]        theta
               float64[np]        phi
               float64[nt * np]   data, row-major (theta outer)

Total size is exactly 16 + 8 * (nt + np + nt*np) bytes.

CSV layout: the first row holds the phi values after a corner label, the
first column holds theta, and cell (i, j) holds the value at (theta_i, phi_j).
Numbers are written with ``repr`` so a CSV roundtrip is bit-exact too.
"""

from __future__ import annotations

import csv
import io
import math
import os
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import InvalidArgumentError, MapFormatError, MapValidationError
from .field import ScalarField
from .grid import SphericalGrid, grid_from_nodes

MAGIC = b"SDM1"
VERSION = 1
HEADER = struct.Struct("<4sIII")
CSV_CORNER = "theta\\phi"

PathLike = Union[str, os.PathLike]


def sdm_size(nt: int, nph: int) -> int:
    return HEADER.size + 8 * (nt + nph + nt * nph)


def _is_csv(path: PathLike) -> bool:
    return Path(path).suffix.lower() == ".csv"


def encode_sdm(grid: SphericalGrid, field: ScalarField) -> bytes:
    _check_pair(grid, field)
    le = np.dtype("<f8")
    return b"".join([
        HEADER.pack(MAGIC, VERSION, grid.nt, grid.np),
        grid.theta.astype(le).tobytes(),
        grid.phi.astype(le).tobytes(),
        np.ascontiguousarray(field.values).astype(le).tobytes(),
    ])


def decode_sdm(blob: bytes, source: str = "<bytes>") -> Tuple[SphericalGrid, ScalarField]:
    if len(blob) < HEADER.size:
        raise MapFormatError(f"{source}: truncated header ({len(blob)} bytes)")
    magic, version, nt, nph = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise MapFormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise MapFormatError(f"{source}: unsupported format version {version}")
    if nt < 3 or nph < 3:
        raise MapFormatError(f"{source}: grid {nt}x{nph} below the 3x3 minimum")
    expected = sdm_size(nt, nph)
    if len(blob) != expected:
        raise MapFormatError(f"{source}: payload is {len(blob)} bytes, expected {expected} for {nt}x{nph}")
    floats = np.frombuffer(blob, dtype="<f8", offset=HEADER.size).astype(np.float64)
    theta = floats[:nt]
    phi = floats[nt:nt + nph]
    data = floats[nt + nph:].reshape(nt, nph)
    return _validated(theta, phi, data, source)


def _validated(theta, phi, data, source) -> Tuple[SphericalGrid, ScalarField]:
    try:
        grid = grid_from_nodes(theta, phi)
    except InvalidArgumentError as exc:
        raise MapValidationError(f"{source}: grid invariant violated: {exc}") from None
    try:
        field = ScalarField.from_array(grid, data)
    except InvalidArgumentError as exc:
        raise MapValidationError(f"{source}: field invariant violated: {exc}") from None
    return grid, field


def _check_pair(grid: SphericalGrid, field: ScalarField) -> None:
    if field.values.shape != grid.shape:
        raise InvalidArgumentError(f"field shape {field.values.shape} does not match grid {grid.shape}")


def encode_csv(grid: SphericalGrid, field: ScalarField) -> str:
    _check_pair(grid, field)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([CSV_CORNER] + [repr(float(p)) for p in grid.phi])
    for i, t in enumerate(grid.theta):
        writer.writerow([repr(float(t))] + [repr(float(x)) for x in field.values[i]])
    return buf.getvalue()


def decode_csv(text: str, source: str = "<text>") -> Tuple[SphericalGrid, ScalarField]:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise MapFormatError(f"{source}: CSV map needs a phi header row and at least one data row")
    try:
        phi = np.array([float(x) for x in rows[0][1:]])
        theta = np.array([float(r[0]) for r in rows[1:]])
        data = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise MapFormatError(f"{source}: non-numeric CSV entry ({exc})") from None
    except IndexError:
        raise MapFormatError(f"{source}: ragged CSV rows") from None
    if data.ndim != 2 or data.shape != (len(theta), len(phi)):
        raise MapFormatError(f"{source}: ragged CSV rows")
    if len(theta) < 3 or len(phi) < 3:
        raise MapFormatError(f"{source}: grid {len(theta)}x{len(phi)} below the 3x3 minimum")
    return _validated(theta, phi, data, source)


def write_map(path: PathLike, grid: SphericalGrid, field: ScalarField) -> None:
    """Write SDM1, or CSV when the path ends in ``.csv``."""
    try:
        if _is_csv(path):
            Path(path).write_text(encode_csv(grid, field), encoding="utf-8")
        else:
            Path(path).write_bytes(encode_sdm(grid, field))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write map {os.fspath(path)!r}: {exc.strerror}") from exc


def read_map(path: PathLike) -> Tuple[SphericalGrid, ScalarField]:
    source = os.fspath(path)
    try:
        if _is_csv(path):
            return decode_csv(Path(path).read_text(encoding="utf-8"), source)
        return decode_sdm(Path(path).read_bytes(), source)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read map {source!r}: {exc.strerror}") from exc


def _assoc_legendre(l: int, m: int, x: np.ndarray) -> np.ndarray:
    """P_l^m(x) without the Condon-Shortley phase, m >= 0."""
    somx2 = np.sqrt(np.clip((1.0 - x) * (1.0 + x), 0.0, None))
    pmm = np.ones_like(x)
    fact = 1.0
    for _ in range(m):
        pmm = pmm * fact * somx2
        fact += 2.0
    if l == m:
        return pmm
    pmmp1 = x * (2 * m + 1) * pmm
    if l == m + 1:
        return pmmp1
    for ll in range(m + 2, l + 1):
        pll = ((2 * ll - 1) * x * pmmp1 - (ll + m - 1) * pmm) / (ll - m)
        pmm, pmmp1 = pmmp1, pll
    return pmmp1


def gen_harmonic(grid: SphericalGrid, l: int, m: int = 0, phase: float = 0.0) -> ScalarField:
    """Unnormalized real harmonic P_l^|m|(cos theta) * cos(m*phi + phase).

    Pole rows take the analytic limit: (+-1)^l * cos(phase) for m = 0, zero otherwise.
    """
    if l < 0:
        raise InvalidArgumentError(f"l must be >= 0, got {l}")
    if abs(m) > l:
        raise InvalidArgumentError(f"|m| <= l required, got l={l}, m={m}")
    am = abs(m)
    radial = _assoc_legendre(l, am, np.cos(grid.theta))
    values = radial[:, None] * np.cos(m * grid.phi[None, :] + phase)
    if am == 0:
        values[0] = 1.0 * math.cos(phase)
        values[-1] = (-1.0) ** l * math.cos(phase)
    else:
        values[0] = 0.0
        values[-1] = 0.0
    return ScalarField(grid, np.ascontiguousarray(values))


def gen_noise(grid: SphericalGrid, seed: int, amplitude: float = 1.0) -> ScalarField:
    """Seeded uniform noise in [-amplitude, amplitude).

    Generator: numpy PCG64, one independent stream per theta row from
    ``SeedSequence(seed, spawn_key=(i,))``, so any row can be produced without
    the others.  Each pole row draws one value and repeats it.
    """
    amplitude = float(amplitude)
    if not math.isfinite(amplitude):
        raise InvalidArgumentError("amplitude must be finite")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    nt, nph = grid.shape
    values = np.empty((nt, nph))
    for i in range(nt):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i,))))
        if i == 0 or i == nt - 1:
            values[i] = rng.random()
        else:
            values[i] = rng.random(nph)
    if amplitude == 0.0:
        return ScalarField.zeros(grid)
    values = amplitude * (2.0 * values - 1.0)
    return ScalarField(grid, values)
