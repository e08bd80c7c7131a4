"""Fully discrete ETD1 and ETDRK2 steps with bound monitoring.

Each step freezes the stabilized operator at the current state,

    L = eps^2 Lambda_U D_h + Lambda_v A_v - kappa I,

and advances by the exponential integrator formulas. ETD1 is evaluated in
the one-phi form

    U^{n+1} = U^n + tau phi_1(tau L)(L U^n + Ntil(U^n)),

algebraically identical to phi_0(tau L) U^n + tau phi_1(tau L) Ntil(U^n) via
phi_0(s) = 1 + s phi_1(s) but costing a single Krylov action. ETDRK2 runs
that stage, then corrects with the operator averaged between the two stage
states:

    U^{n+1} = phi_0(tau Lbar) U^n + tau phi_1(tau Lbar) Ntil(U^n)
              + tau phi_2(tau Lbar)(Ntil(Uhat) - Ntil(U^n)).

Both schemes keep sup|U| <= beta for every tau > 0; the steppers never
project or clamp the iterate, they only verify the bound after the fact and
report (or refuse) violations, which would indicate a defect, not a
modeling outcome.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional, Sequence

import numpy as np

from .expmv import PhiActionRequest, phi_action
from .grid import DIRICHLET, PERIODIC, Field, Grid
from .operators import AveragedOperator, OperatorContext, VelocityField, make_context
from .physics import PhysicsSpec, eval_F, eval_M, eval_N_tilde

logger = logging.getLogger(__name__)


@dataclass
class SolverState:
    t: float
    U: Field
    spec: PhysicsSpec
    velocity: VelocityField
    step_index: int = 0

    @property
    def grid(self) -> Grid:
        return self.U.grid


@dataclass(frozen=True)
class StepControls:
    krylov_tol: float = 1e-12
    mbp_slack: float = 1e-12
    on_violation: str = "error"  # or "warn"
    max_krylov_dim: int = 100

    def __post_init__(self):
        if self.on_violation not in ("error", "warn"):
            raise ValueError("on_violation must be 'error' or 'warn'")


@dataclass(frozen=True)
class StepReport:
    sup_norm_after: float
    energy_after: float
    matvec_count: int
    krylov_dim_used: int
    mbp_violated: bool
    worst_node: tuple


class MBPViolationError(RuntimeError):
    """The iterate left [-beta, beta] by more than the slack."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class StepRecord:
    step: int
    t: float
    sup_norm: float
    energy: float
    matvecs: int
    mbp_ok: bool


@dataclass
class TimeSeries:
    records: list = dataclass_field(default_factory=list)
    error: Optional[str] = None

    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def sup_norms(self) -> np.ndarray:
        return np.array([r.sup_norm for r in self.records])

    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def max_sup_norm(self) -> float:
        return max(r.sup_norm for r in self.records)


class RunAborted(RuntimeError):
    """A step failed; carries the series accumulated so far."""

    def __init__(self, message, series):
        super().__init__(message)
        self.series = series


def state_context(state: SolverState, t: float, U: Field) -> OperatorContext:
    """Operator context frozen at (t, U): mobility from U, velocity at t."""
    grid = state.grid
    mob = eval_M(state.spec.mobility, grid.scatter(U.values))
    return make_context(grid, state.spec.eps, state.spec.kappa, mob, state.velocity, t)


def _full_lattice(state: SolverState, t: float, U: Field) -> np.ndarray:
    lat = state.grid.scatter(U.values)
    if state.grid.bc.kind == DIRICHLET:
        lat = lat + state.grid.boundary_lattice(t)
    return lat


def discrete_energy(state: SolverState) -> float:
    """E_h[U] = eps^2/2 sum_cells |grad_h U|^2 h^d + sum_nodes w F(U).

    Gradient cells are forward differences (wrapped on periodic axes,
    skipped where an endpoint is masked out); the potential term uses
    trapezoidal axis weights so constants integrate to exactly |Omega|.
    Diagnostic only: no step decision is based on it."""
    grid = state.grid
    spec = state.spec
    u = _full_lattice(state, state.t, state.U)
    active = (
        grid.active
        if grid.active is not None
        else np.ones(grid.lattice_shape, dtype=bool)
    )
    hd = float(np.prod(grid.h))
    grad = 0.0
    for axis, h in enumerate(grid.h):
        if grid.bc.kind == PERIODIC:
            diff = np.roll(u, -1, axis=axis) - u
            cells = np.ones_like(diff, dtype=bool)
        else:
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            diff = u[tuple(hi)] - u[tuple(lo)]
            cells = active[tuple(hi)] & active[tuple(lo)]
        grad += float(np.sum((diff * cells) ** 2)) / h**2
    grad *= 0.5 * spec.eps**2 * hd
    w = np.ones(grid.lattice_shape)
    if grid.bc.kind != PERIODIC:
        for axis in range(grid.dim):
            edge = [slice(None)] * grid.dim
            for end in (0, -1):
                edge[axis] = end
                w[tuple(edge)] *= 0.5
    uc = np.clip(u, -spec.beta, spec.beta)
    pot = hd * float(np.sum(w * eval_F(spec.potential, uc) * active))
    return grad + pot


def _sup_and_worst(grid: Grid, values: np.ndarray) -> tuple:
    i = int(np.argmax(np.abs(values)))
    if grid.bc.kind == DIRICHLET:
        flat = int(grid.interior_flat[i])
    else:
        flat = i
    return float(abs(values[i])), tuple(int(c) for c in np.unravel_index(flat, grid.lattice_shape))


def _finish_step(state, t_new, u_new, controls, matvecs, kdim):
    sup, worst = _sup_and_worst(state.grid, u_new)
    limit = max(state.spec.beta, float(np.max(np.abs(state.U.values)))) + controls.mbp_slack
    violated = sup > limit
    new_state = SolverState(
        t=t_new,
        U=Field(state.grid, u_new),
        spec=state.spec,
        velocity=state.velocity,
        step_index=state.step_index + 1,
    )
    report = StepReport(
        sup_norm_after=sup,
        energy_after=discrete_energy(new_state),
        matvec_count=matvecs,
        krylov_dim_used=kdim,
        mbp_violated=violated,
        worst_node=worst,
    )
    if violated:
        msg = (
            f"maximum bound violated at t={t_new:.6g}: sup|U| = {sup:.17g} "
            f"exceeds {limit:.17g} at node {worst}"
        )
        if controls.on_violation == "error":
            raise MBPViolationError(msg, report)
        logger.warning(msg)
    return new_state, report


def etd1_step(state: SolverState, tau: float, controls: StepControls = StepControls()):
    """One first-order exponential step. Returns (new_state, StepReport)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    ctx = state_context(state, state.t, state.U)
    ntil = eval_N_tilde(state.spec, ctx, state.U)
    r = ctx.apply_vec(state.U.values) + ntil
    res = phi_action(
        PhiActionRequest(
            k=1, tau=tau, operator=ctx, b=r,
            tol=controls.krylov_tol, max_krylov_dim=controls.max_krylov_dim,
        )
    )
    u_new = state.U.values + tau * res.y
    return _finish_step(
        state, state.t + tau, u_new, controls, res.matvec_count, res.krylov_dim_used
    )


def etdrk2_step(state: SolverState, tau: float, controls: StepControls = StepControls()):
    """One second-order exponential Runge-Kutta step.

    Stage one is the ETD1 update; stage two re-freezes the operator at the
    predicted state, averages it with the stage-one operator, and applies
    the phi_1/phi_2 correction. Three Krylov actions per step."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    t1 = state.t + tau
    ctx0 = state_context(state, state.t, state.U)
    n0 = eval_N_tilde(state.spec, ctx0, state.U)
    r = ctx0.apply_vec(state.U.values) + n0
    kw = dict(tol=controls.krylov_tol, max_krylov_dim=controls.max_krylov_dim)
    stage = phi_action(PhiActionRequest(k=1, tau=tau, operator=ctx0, b=r, **kw))
    uhat = Field(state.grid, state.U.values + tau * stage.y)

    ctx1 = state_context(state, t1, uhat)
    n1 = eval_N_tilde(state.spec, ctx1, uhat)
    lbar = AveragedOperator((ctx0, ctx1))
    r2 = lbar.apply_vec(state.U.values) + n0
    main = phi_action(PhiActionRequest(k=1, tau=tau, operator=lbar, b=r2, **kw))
    corr = phi_action(PhiActionRequest(k=2, tau=tau, operator=lbar, b=n1 - n0, **kw))
    u_new = state.U.values + tau * (main.y + corr.y)
    matvecs = stage.matvec_count + main.matvec_count + corr.matvec_count
    kdim = max(stage.krylov_dim_used, main.krylov_dim_used, corr.krylov_dim_used)
    return _finish_step(state, t1, u_new, controls, matvecs, kdim)


_STEPPERS = {"etd1": etd1_step, "etdrk2": etdrk2_step}


def _step_targets(t0: float, tau: float, T: float) -> list:
    """Step endpoint times: full tau steps, last one truncated to land on T."""
    span = T - t0
    if span < 0:
        raise ValueError("T must not precede the current time")
    if span == 0:
        return []
    n_full = int(math.floor(span / tau + 1e-9))
    targets = [t0 + (i + 1) * tau for i in range(n_full)]
    if not targets or T - targets[-1] > 1e-9 * tau:
        targets.append(T)
    else:
        targets[-1] = T
    return targets


def run(
    state: SolverState,
    tau: float,
    T: float,
    callbacks: Sequence[Callable] = (),
    controls: StepControls = StepControls(),
    scheme: str = "etd1",
) -> tuple:
    """Advance to T, recording one row per accepted step.

    Returns (final_state, TimeSeries). Callbacks run synchronously after
    each step as callback(state, report). A failing step raises RunAborted
    carrying the partial series (marked with the error)."""
    if scheme not in _STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    step_fn = _STEPPERS[scheme]
    sup0, _ = _sup_and_worst(state.grid, state.U.values)
    series = TimeSeries()
    series.records.append(
        StepRecord(
            step=state.step_index,
            t=state.t,
            sup_norm=sup0,
            energy=discrete_energy(state),
            matvecs=0,
            mbp_ok=sup0 <= state.spec.beta + controls.mbp_slack,
        )
    )
    for t_next in _step_targets(state.t, tau, T):
        try:
            state, report = step_fn(state, t_next - state.t, controls)
        except Exception as exc:
            series.error = f"{type(exc).__name__}: {exc}"
            raise RunAborted(str(exc), series) from exc
        series.records.append(
            StepRecord(
                step=state.step_index,
                t=state.t,
                sup_norm=report.sup_norm_after,
                energy=report.energy_after,
                matvecs=report.matvec_count,
                mbp_ok=not report.mbp_violated,
            )
        )
        for cb in callbacks:
            cb(state, report)
    return state, series
