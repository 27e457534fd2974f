"""Independent dense oracles for the stencil operator and the RKL2 integrator.

Nothing here calls into ``operator``, ``integrator`` or the compiled kernels.
The dense matrix is assembled face by face straight from the node
coordinates: every face contributes a conductance G that enters its two
cells as +-G / area.  Agreement with the stencil path is therefore evidence,
not a tautology.

Unknown ordering: north pole, south pole, then interior rows row-major
(see ``field.unknown_index``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import OracleError
from .field import pack_unknowns, unknown_index, unpack_unknowns

MAX_UNKNOWNS = 4096


@dataclass
class DenseOperator:
    nt: int
    np: int
    matrix: np.ndarray   # (n, n)
    areas: np.ndarray    # (n,) cell areas, caps counted once

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, u):
        """Apply to a packed vector, or to a (nt, np) array (returned in the same form)."""
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 2:
            return unpack_unknowns(self.nt, self.np, self.matrix @ pack_unknowns(u))
        return self.matrix @ u

    def gershgorin(self) -> float:
        return float(np.max(np.sum(np.abs(self.matrix), axis=1)))


def _cell_areas(theta: np.ndarray, phi: np.ndarray):
    nt, nph = len(theta), len(phi)
    dphi = [((phi[(j + 1) % nph] + (2 * math.pi if j == nph - 1 else 0.0)) - phi[j]) for j in range(nph)]
    dphi_c = [0.5 * (dphi[j - 1] + dphi[j]) for j in range(nph)]
    faces = [0.5 * (theta[i] + theta[i + 1]) for i in range(nt - 1)]
    band = [0.0] * nt
    band[0] = 1.0 - math.cos(faces[0])
    band[nt - 1] = 1.0 + math.cos(faces[-1])
    for i in range(1, nt - 1):
        band[i] = math.cos(faces[i - 1]) - math.cos(faces[i])
    return dphi, dphi_c, faces, band


def dense_assemble(grid, nu) -> DenseOperator:
    """Assemble the diffusion matrix entry by entry from per-face flux exchanges.

    theta face between (i, j) and (i+1, j):
        G = nu_face * sin(theta_{i+1/2}) * dphi_cell_j / (theta_{i+1} - theta_i)
    phi face between (i, j) and (i, j+1):
        G = nu_face * (cos theta_{i-1/2} - cos theta_{i+1/2}) / (sin(theta_i)^2 * dphi_{j+1/2})
    """
    theta = [float(x) for x in grid.theta]
    phi = [float(x) for x in grid.phi]
    nt, nph = len(theta), len(phi)
    n = (nt - 2) * nph + 2
    if nt * nph > MAX_UNKNOWNS:
        raise OracleError(f"dense oracle refuses {nt}x{nph} = {nt * nph} nodes (cap {MAX_UNKNOWNS})")
    nu_vals = np.broadcast_to(np.asarray(getattr(nu, "values", nu), dtype=np.float64), (nt, nph))

    dphi, dphi_c, faces, band = _cell_areas(theta, phi)
    areas = np.empty(n)
    areas[0] = 2 * math.pi * band[0]
    areas[1] = 2 * math.pi * band[nt - 1]
    for i in range(1, nt - 1):
        for j in range(nph):
            areas[unknown_index(nt, nph, i, j)] = band[i] * dphi_c[j]

    mat = np.zeros((n, n))

    def exchange(a: int, b: int, g: float) -> None:
        mat[a, b] += g / areas[a]
        mat[a, a] -= g / areas[a]
        mat[b, a] += g / areas[b]
        mat[b, b] -= g / areas[b]

    for i in range(nt - 1):
        for j in range(nph):
            nu_f = 0.5 * (nu_vals[i, j] + nu_vals[i + 1, j])
            g = nu_f * math.sin(faces[i]) * dphi_c[j] / (theta[i + 1] - theta[i])
            exchange(unknown_index(nt, nph, i, j), unknown_index(nt, nph, i + 1, j), g)
    for i in range(1, nt - 1):
        s2 = math.sin(theta[i]) ** 2
        for j in range(nph):
            jp = (j + 1) % nph
            nu_f = 0.5 * (nu_vals[i, j] + nu_vals[i, jp])
            g = nu_f * band[i] / (s2 * dphi[j])
            exchange(unknown_index(nt, nph, i, j), unknown_index(nt, nph, i, jp), g)
    return DenseOperator(nt=nt, np=nph, matrix=mat, areas=areas)


def power_iteration(dense, iterations: int = 10000, tol: float = 1e-10, seed: int = 12345) -> float:
    """Magnitude of the dominant eigenvalue by repeated multiplication.

    Accepts a DenseOperator or a bare square matrix.  The estimate is the
    Rayleigh quotient in the area-weighted inner product (plain Euclidean for
    a bare matrix), in which the diffusion matrix is self-adjoint.  The start
    vector is random: a constant vector sits in the operator's null space.
    Stops once the eigen-residual is below ``tol`` relative, which bounds the
    quotient's distance to an eigenvalue by the same amount; raises
    OracleError if that has not happened within ``iterations``.
    """
    mat = np.atleast_2d(np.asarray(getattr(dense, "matrix", dense), dtype=np.float64))
    weights = getattr(dense, "areas", None)
    if weights is None:
        weights = np.ones(mat.shape[0])
    x = np.random.default_rng(seed).standard_normal(mat.shape[0])
    for _ in range(iterations):
        x /= math.sqrt(float(np.dot(weights * x, x)))
        y = mat @ x
        if not np.any(y):
            return 0.0
        rq = float(np.dot(weights * x, y))
        r = y - rq * x
        # self-adjoint: |rq - nearest eigenvalue| <= residual norm
        if math.sqrt(float(np.dot(weights * r, r))) <= tol * abs(rq):
            return abs(rq)
        x = y
    raise OracleError(f"power iteration did not converge in {iterations} iterations")


def euler_reference(dense: DenseOperator, u0, dt_small: float, n: int):
    """n forward-Euler steps u <- u + dt_small * M u; returns the same shape as ``u0``."""
    lam = dense.gershgorin()
    if lam > 0.0 and dt_small > 0.1 / lam * (1 + 1e-12):
        raise OracleError(f"dt_small={dt_small} exceeds 0.1/lambda_G={0.1 / lam}")
    u0 = np.asarray(u0, dtype=np.float64)
    shaped = u0.ndim == 2
    u = pack_unknowns(u0) if shaped else u0.copy()
    for _ in range(n):
        u = u + dt_small * (dense.matrix @ u)
    return unpack_unknowns(dense.nt, dense.np, u) if shaped else u


def rkl2_coefficients(s: int):
    """Stage coefficients evaluated in exact rational arithmetic, then rounded once.

    Returns (mu_tilde_1, mu, nu, mu_tilde, gamma_tilde) with the per-stage
    arrays indexed by stage j (entries 0 and 1 unused).
    """
    if s < 2:
        raise OracleError("RKL2 needs at least 2 stages")
    b = [Fraction(1, 3)] * 3 + [Fraction(j * j + j - 2, 2 * j * (j + 1)) for j in range(3, s + 1)]
    w1 = Fraction(4, s * s + s - 2)
    mu = [Fraction(0)] * (s + 1)
    nu = [Fraction(0)] * (s + 1)
    mt = [Fraction(0)] * (s + 1)
    gt = [Fraction(0)] * (s + 1)
    for j in range(2, s + 1):
        mu[j] = Fraction(2 * j - 1, j) * b[j] / b[j - 1]
        nu[j] = -Fraction(j - 1, j) * b[j] / b[j - 2]
        mt[j] = mu[j] * w1
        gt[j] = -(1 - b[j - 1]) * mt[j]
    as_float = lambda seq: np.array([float(x) for x in seq])
    return float(b[1] * w1), as_float(mu), as_float(nu), as_float(mt), as_float(gt)


def dense_rkl2_step(dense: DenseOperator, u, s: int, dt: float):
    """One RKL2 super-step with dense matrix-vector products, in the textbook form."""
    u = np.asarray(u, dtype=np.float64)
    shaped = u.ndim == 2
    y0 = pack_unknowns(u) if shaped else u.copy()
    mt1, mu, nu, mt, gt = rkl2_coefficients(s)
    m = dense.matrix
    my0 = m @ y0
    y_prev2, y_prev = y0, y0 + mt1 * dt * my0
    for j in range(2, s + 1):
        y = (mu[j] * y_prev + nu[j] * y_prev2 + (1.0 - mu[j] - nu[j]) * y0
             + mt[j] * dt * (m @ y_prev) + gt[j] * dt * my0)
        y_prev2, y_prev = y_prev, y
    return unpack_unknowns(dense.nt, dense.np, y_prev) if shaped else y_prev


def dense_rkl2_advance(dense: DenseOperator, u, s: int, dt: float, n_steps: int):
    for _ in range(n_steps):
        u = dense_rkl2_step(dense, u, s, dt)
    return u
