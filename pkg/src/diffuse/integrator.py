"""RKL2 super-time-stepping (second-order Runge-Kutta-Legendre).

An s-stage RKL2 step of size dt is stable for dt <= dt_expl * (s^2 + s - 2) / 4,
where dt_expl is the forward-Euler limit.  Stage recurrence::

    Y_0 = u
    Y_1 = Y_0 + mu~_1 dt M Y_0
    Y_j = mu_j Y_{j-1} + nu_j Y_{j-2} + (1 - mu_j - nu_j) Y_0
          + mu~_j dt M Y_{j-1} + gamma~_j dt M Y_0          j = 2..s
    u^{n+1} = Y_s

with b_0 = b_1 = b_2 = 1/3, b_j = (j^2 + j - 2) / (2j(j+1)), w1 = 4 / (s^2 + s - 2),
mu~_1 = b_1 w1, mu_j = (2j-1)/j * b_j/b_{j-1}, nu_j = -(j-1)/j * b_j/b_{j-2},
mu~_j = mu_j w1 and gamma~_j = -(1 - b_{j-1}) mu~_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, ShapeError
from .execution import ExecPlan
from .field import ScalarField
from .operator import StencilOperator, apply, gershgorin_bound


def stability_factor(s: int) -> float:
    """How many forward-Euler limits an s-stage RKL2 step covers."""
    return (s * s + s - 2) / 4.0


def _positive_finite(x, name: str) -> float:
    try:
        val = float(x)
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{name} must be a real number, got {x!r}") from None
    if not math.isfinite(val) or val <= 0.0:
        raise InvalidArgumentError(f"{name} must be positive and finite, got {x!r}")
    return val


def compute_stage_count(dt: float, dt_expl: float) -> int:
    """Smallest s >= 2 with (s^2 + s - 2) / 4 >= dt / dt_expl."""
    dt = _positive_finite(dt, "dt")
    dt_expl = _positive_finite(dt_expl, "dt_expl")
    ratio = dt / dt_expl
    if not math.isfinite(ratio):
        raise InvalidArgumentError("dt / dt_expl overflows")
    # root of s^2 + s - (2 + 4r) = 0, then fix up rounding in either direction
    s = max(2, math.ceil((-1.0 + math.sqrt(9.0 + 16.0 * ratio)) / 2.0))
    while s > 2 and stability_factor(s - 1) >= ratio:
        s -= 1
    while stability_factor(s) < ratio:
        s += 1
    return s


@dataclass(frozen=True)
class Rkl2Plan:
    s: int
    dt: float
    b: np.ndarray           # (s+1,)
    w1: float
    mu_tilde_1: float
    mu: np.ndarray          # (s+1,), entries 2..s used
    nu: np.ndarray
    mu_tilde: np.ndarray
    gamma_tilde: np.ndarray

    @property
    def max_stable_dt_factor(self) -> float:
        return stability_factor(self.s)


def build_rkl2_plan(s: int, dt: float) -> Rkl2Plan:
    if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < 2:
        raise InvalidArgumentError(f"stage count must be an integer >= 2, got {s!r}")
    s = int(s)
    dt = float(dt)
    if not math.isfinite(dt) or dt < 0.0:
        raise InvalidArgumentError(f"dt must be finite and non-negative, got {dt!r}")

    b = np.empty(s + 1)
    b[:3] = 1.0 / 3.0
    for j in range(3, s + 1):
        b[j] = (j * j + j - 2) / (2.0 * j * (j + 1))
    w1 = 4.0 / (s * s + s - 2)

    mu = np.zeros(s + 1)
    nu = np.zeros(s + 1)
    mu_tilde = np.zeros(s + 1)
    gamma_tilde = np.zeros(s + 1)
    mu_tilde[1] = b[1] * w1
    for j in range(2, s + 1):
        mu[j] = (2 * j - 1) / j * b[j] / b[j - 1]
        nu[j] = -(j - 1) / j * b[j] / b[j - 2]
        mu_tilde[j] = mu[j] * w1
        gamma_tilde[j] = -(1.0 - b[j - 1]) * mu_tilde[j]
    for arr in (b, mu, nu, mu_tilde, gamma_tilde):
        arr.setflags(write=False)
    return Rkl2Plan(s=s, dt=dt, b=b, w1=w1, mu_tilde_1=float(mu_tilde[1]), mu=mu, nu=nu,
                    mu_tilde=mu_tilde, gamma_tilde=gamma_tilde)


class Workspace:
    """The four scratch buffers an RKL2 step needs: two stage slots, M Y_0, M Y_{j-1}."""

    def __init__(self, grid):
        self.grid = grid
        self.buffers: List[ScalarField] = [ScalarField.zeros(grid) for _ in range(4)]

    def __len__(self) -> int:
        return len(self.buffers)

    def swap_in(self, taken: ScalarField, replacement: ScalarField) -> None:
        """Replace the buffer ``taken`` (a step result handed out) with ``replacement``."""
        for k, buf in enumerate(self.buffers):
            if buf is taken:
                self.buffers[k] = replacement
                return
        raise InvalidArgumentError("buffer is not part of this workspace")


def _check_workspace(u: ScalarField, workspace: Workspace) -> None:
    if len(workspace) != 4:
        raise InvalidArgumentError("workspace must hold exactly 4 buffers")
    arrays = [u.values] + [b.values for b in workspace.buffers]
    for a in arrays[1:]:
        if a.shape != u.values.shape:
            raise ShapeError("workspace buffers must match the field shape")
    for x in range(len(arrays)):
        for y in range(x + 1, len(arrays)):
            if np.shares_memory(arrays[x], arrays[y]):
                raise InvalidArgumentError("workspace buffers must be distinct from the field and each other")


def rkl2_step(op: StencilOperator, plan: Rkl2Plan, u: ScalarField, exec: Optional[ExecPlan] = None,
              workspace: Optional[Workspace] = None) -> ScalarField:
    """Advance ``u`` by one super-step; ``u`` itself is left untouched.

    The returned field is one of the workspace buffers.  Before reusing the
    workspace, copy the result or hand ``u`` back via ``Workspace.swap_in``
    (that is what :func:`advance` does).  Performs ``plan.s`` operator sweeps.
    """
    ex = exec if exec is not None else ExecPlan()
    ws = workspace if workspace is not None else Workspace(u.grid)
    _check_workspace(u, ws)
    ya, yb, my0, myj = ws.buffers
    nt = u.grid.nt
    dt = plan.dt

    apply(op, u, my0, ex)
    y0 = u.values
    a = plan.mu_tilde_1 * dt
    m0 = my0.values
    out = ya.values
    ex.parallel_sweep(range(nt), lambda i0, i1: kernels.axpy_rows(y0, a, m0, out, i0, i1))

    prev, prev2 = ya, u          # Y_{j-1}, Y_{j-2}
    for j in range(2, plan.s + 1):
        target = yb if j % 2 == 0 else ya
        apply(op, prev, myj, ex)
        mu, nu = float(plan.mu[j]), float(plan.nu[j])
        mt_dt = float(plan.mu_tilde[j]) * dt
        gt_dt = float(plan.gamma_tilde[j]) * dt
        yp, ypp, mj, dst = prev.values, prev2.values, myj.values, target.values

        def combine(i0, i1, yp=yp, ypp=ypp, mj=mj, dst=dst, mu=mu, nu=nu, mt_dt=mt_dt, gt_dt=gt_dt):
            kernels.combine_rows(y0, yp, ypp, m0, mj, mu, nu, mt_dt, gt_dt, dst, i0, i1)

        ex.parallel_sweep(range(nt), combine)
        prev2, prev = prev, target
    return prev


@dataclass
class AdvanceStats:
    """Bookkeeping from :func:`advance`.

    ``total_operator_applications`` follows the accounting convention of
    s + 1 applications per super-step.  ``stencil_sweeps`` is measured: the
    number of times ``apply`` actually ran, which is s per super-step because
    M Y_0 is computed once and reused by every stage.
    """

    steps_taken: int = 0
    total_operator_applications: int = 0
    elapsed_sim_time: float = 0.0
    stage_counts: List[int] = field(default_factory=list)
    stencil_sweeps: int = 0
    dt: float = 0.0
    dt_expl: float = math.inf
    gershgorin: float = 0.0
    mass_initial: float = 0.0
    mass_final: float = 0.0

    @property
    def mass_drift(self) -> float:
        return self.mass_final - self.mass_initial


def advance(op: StencilOperator, u: ScalarField, total_time: float, n_steps: int,
            exec: Optional[ExecPlan] = None) -> tuple[ScalarField, AdvanceStats]:
    """Take ``n_steps`` RKL2 super-steps of dt = total_time / n_steps.

    The stage count comes from the Gershgorin bound (dt_expl = 2 / lambda_G)
    and is the same for every step.  Returns a new field; ``u`` is unchanged.
    """
    ex = exec if exec is not None else ExecPlan()
    if isinstance(n_steps, bool) or not isinstance(n_steps, (int, np.integer)) or n_steps < 0:
        raise InvalidArgumentError(f"n_steps must be an integer >= 0, got {n_steps!r}")
    total_time = float(total_time)
    if not math.isfinite(total_time) or total_time < 0.0:
        raise InvalidArgumentError(f"total_time must be finite and >= 0, got {total_time!r}")
    if n_steps == 0 and total_time > 0.0:
        raise InvalidArgumentError("n_steps = 0 cannot cover a positive total_time")
    if not u.grid.same_as(op.grid):
        raise ShapeError("field is not on the operator's grid")

    lam = gershgorin_bound(op)
    stats = AdvanceStats(gershgorin=lam, dt_expl=(2.0 / lam) if lam > 0.0 else math.inf)
    stats.mass_initial = ex.reduce(u.values * u.grid.area)
    current = u.copy()
    if n_steps == 0 or total_time == 0.0:
        stats.mass_final = stats.mass_initial
        return current, stats

    dt = total_time / n_steps
    s = compute_stage_count(dt, stats.dt_expl) if lam > 0.0 else 2
    plan = build_rkl2_plan(s, dt)
    stats.dt = dt
    ws = Workspace(u.grid)
    sweeps_before = op.applications
    for _ in range(n_steps):
        result = rkl2_step(op, plan, current, ex, ws)
        ws.swap_in(result, current)
        current = result
        stats.steps_taken += 1
        stats.stage_counts.append(plan.s)
        stats.total_operator_applications += plan.s + 1
        stats.elapsed_sim_time += dt
    stats.stencil_sweeps = op.applications - sweeps_before
    stats.mass_final = ex.reduce(current.values * u.grid.area)
    return current, stats
