"""Matrix-free spatial operators for the stabilized convective problem.

The stabilized operator applied to an unknown vector w is

    L w = eps^2 * Lambda_U * D_h w + Lambda_v * A_v w - kappa * w,

with D_h the 3-point (per axis) central Laplacian, A_v the upwind convection
stencil, Lambda_U the frozen mobility diagonal, and Lambda_v the frozen
|velocity| diagonal per axis. Boundary conditions enter through ghost
padding: wrap (periodic), mirror (Neumann, which reproduces the (-2, 2)
endpoint rows), or zero (Dirichlet; the boundary data itself enters through
the separate load vectors G_D and G_C).

An OperatorContext freezes everything at one state and time, so its action
is linear; that is what the Krylov phi evaluations require.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .grid import DIRICHLET, NEUMANN, PERIODIC, Field, Grid

_PAD_MODE = {PERIODIC: "wrap", NEUMANN: "reflect", DIRICHLET: "constant"}


def _pad(lattice: np.ndarray, kind: str) -> np.ndarray:
    return np.pad(lattice, 1, mode=_PAD_MODE[kind])


@dataclass(frozen=True)
class VelocityField:
    """Velocity sampled on lattice nodes; components given by ``func``.

    ``func(*coords, t)`` receives meshgrid coordinate arrays plus the time
    and returns one array (or scalar) per space dimension.
    """

    func: Callable
    label: str = "custom"

    def sample(self, grid: Grid, t: float) -> tuple:
        mesh = grid.lattice_coords()
        comps = self.func(*mesh, t)
        if len(comps) != grid.dim:
            raise ValueError(
                f"velocity returned {len(comps)} components for a {grid.dim}D grid"
            )
        out = []
        for c in comps:
            arr = np.broadcast_to(np.asarray(c, dtype=float), grid.lattice_shape)
            if not np.all(np.isfinite(arr)):
                raise ValueError("velocity evaluation returned non-finite values")
            out.append(np.ascontiguousarray(arr))
        return tuple(out)

    @staticmethod
    def zero() -> "VelocityField":
        return VelocityField(lambda *a: [np.zeros_like(c) for c in a[:-1]], "zero")

    @staticmethod
    def constant(components) -> "VelocityField":
        comps = tuple(float(c) for c in components)

        def f(*a):
            return [np.full_like(a[0], v) for v in comps]

        return VelocityField(f, "constant")

    @staticmethod
    def rotating() -> "VelocityField":
        """v = (y, -x), a rigid rotation about the origin (2D)."""
        return VelocityField(lambda x, y, t: (y, -x), "rotating")

    @staticmethod
    def decaying() -> "VelocityField":
        """v = e^(-t) (sin 2 pi x, -cos 2 pi y) (2D)."""

        def f(x, y, t):
            damp = np.exp(-t)
            return (
                damp * np.sin(2 * np.pi * x),
                -damp * np.cos(2 * np.pi * y) * np.ones_like(x),
            )

        return VelocityField(f, "decaying")


@dataclass(eq=False)
class OperatorContext:
    """The stabilized operator frozen at one state and time.

    ``mob`` is the mobility M(U) on the full lattice; ``vel`` holds one
    velocity component array per axis; ``t`` is the time used for the
    Dirichlet boundary data in the load vectors.
    """

    grid: Grid
    eps: float
    kappa: float
    mob: np.ndarray
    vel: tuple
    t: float = 0.0

    vp: tuple = field(init=False)
    vn: tuple = field(init=False)

    def __post_init__(self):
        g = self.grid
        self.mob = np.ascontiguousarray(np.asarray(self.mob, dtype=float))
        if self.mob.shape != g.lattice_shape:
            raise ValueError("mobility array does not match the lattice")
        if not np.all(np.isfinite(self.mob)):
            raise ValueError("non-finite mobility values")
        if float(self.mob.min()) < -1e-12:
            raise ValueError("mobility must be nonnegative")
        self.mob = np.maximum(self.mob, 0.0)
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        vel = tuple(np.ascontiguousarray(np.asarray(v, dtype=float)) for v in self.vel)
        if len(vel) != g.dim or any(v.shape != g.lattice_shape for v in vel):
            raise ValueError("velocity arrays do not match the lattice")
        self.vel = vel
        self.vp = tuple(np.ascontiguousarray(np.maximum(v, 0.0)) for v in vel)
        self.vn = tuple(np.ascontiguousarray(np.minimum(v, 0.0)) for v in vel)
        self._inv_h2 = tuple(1.0 / h**2 for h in g.h)
        self._inv_h = tuple(1.0 / h for h in g.h)

    @property
    def n_unknowns(self) -> int:
        return self.grid.n_unknowns

    def apply_vec(self, w: np.ndarray) -> np.ndarray:
        """Action of the stabilized operator on an unknown vector."""
        g = self.grid
        padded = _pad(g.scatter(w), g.bc.kind)
        out = kernels.stabilized_apply(
            padded, self.mob, self.vp, self.vn,
            self.eps**2, self.kappa, self._inv_h2, self._inv_h,
        )
        return g.gather(out)

    def with_kappa(self, kappa: float) -> "OperatorContext":
        return OperatorContext(self.grid, self.eps, kappa, self.mob, self.vel, self.t)

    def mob_unknowns(self) -> np.ndarray:
        """Frozen mobility values at the unknown nodes."""
        return self.grid.gather(self.mob)


def make_context(
    grid: Grid,
    eps: float,
    kappa: float,
    mob_lattice: np.ndarray,
    velocity: VelocityField,
    t: float = 0.0,
) -> OperatorContext:
    return OperatorContext(grid, eps, kappa, mob_lattice, velocity.sample(grid, t), t)


@dataclass(eq=False)
class AveragedOperator:
    """Arithmetic mean of stabilized operators on one grid (same kappa)."""

    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("no operators to average")
        g = self.parts[0].grid
        k = self.parts[0].kappa
        for p in self.parts[1:]:
            if p.grid is not g:
                raise ValueError("averaged operators must share a grid")
            if p.kappa != k:
                raise ValueError("averaged operators must share kappa")

    @property
    def grid(self):
        return self.parts[0].grid

    @property
    def kappa(self):
        return self.parts[0].kappa

    @property
    def n_unknowns(self):
        return self.parts[0].grid.n_unknowns

    def apply_vec(self, w: np.ndarray) -> np.ndarray:
        acc = self.parts[0].apply_vec(w)
        for p in self.parts[1:]:
            acc += p.apply_vec(w)
        return acc / len(self.parts)


@dataclass(frozen=True)
class BoundaryLoad:
    """Dirichlet boundary contributions, one entry per unknown node.

    ``gd`` holds the raw Laplacian load (sum over axes of g/h^2 from
    boundary neighbours); the eps^2 * M(U) scaling is applied where the
    nonlinear term is assembled. ``gc`` holds the full upwind convection
    load with the per-axis |v| factors already folded in.
    """

    gd: np.ndarray
    gc: np.ndarray


def boundary_load(ctx: OperatorContext) -> BoundaryLoad:
    """Load vectors carrying g(x, t) into boundary-adjacent stencil rows."""
    g = ctx.grid
    n = g.n_unknowns
    if g.bc.kind != DIRICHLET:
        return BoundaryLoad(np.zeros(n), np.zeros(n))
    glat = _pad(g.boundary_lattice(ctx.t), DIRICHLET)
    ndim = g.dim
    gd = np.zeros(g.lattice_shape)
    gc = np.zeros(g.lattice_shape)
    for ax in range(ndim):
        gm = _shifted_view(glat, ndim, ax, -1)
        gp = _shifted_view(glat, ndim, ax, +1)
        gd += (gm + gp) * ctx._inv_h2[ax]
        gc += (ctx.vp[ax] * gm - ctx.vn[ax] * gp) * ctx._inv_h[ax]
    return BoundaryLoad(g.gather(gd), g.gather(gc))


def _shifted_view(padded, ndim, axis, off):
    idx = [slice(1, -1)] * ndim
    idx[axis] = slice(1 + off, padded.shape[axis] - 1 + off)
    return padded[tuple(idx)]


def apply_laplacian(ctx: OperatorContext, w: Field) -> Field:
    """Plain central Laplacian D_h w (no mobility or eps^2 scaling)."""
    g = _check_field(ctx, w)
    padded = _pad(w.lattice(), g.bc.kind)
    out = kernels.laplacian_apply(padded, ctx._inv_h2)
    return Field(g, g.gather(out))


def apply_upwind(ctx: OperatorContext, w: Field) -> Field:
    """Upwind convection Lambda_v A_v w, which approximates -v . grad w."""
    g = _check_field(ctx, w)
    padded = _pad(w.lattice(), g.bc.kind)
    out = kernels.upwind_apply(padded, ctx.vp, ctx.vn, ctx._inv_h)
    return Field(g, g.gather(out))


def apply_stabilized(ctx: OperatorContext, w: Field) -> Field:
    """eps^2 Lambda_U D_h w + Lambda_v A_v w - kappa w."""
    g = _check_field(ctx, w)
    return Field(g, ctx.apply_vec(w.values))


def _check_field(ctx, w):
    if w.grid is not ctx.grid:
        raise ValueError("field and operator context live on different grids")
    return ctx.grid


def assemble_dense(op, cap: int = 4096) -> np.ndarray:
    """Dense matrix with the same action as ``op.apply_vec`` (test oracle)."""
    n = op.n_unknowns
    if n > cap:
        raise ValueError(f"dense assembly capped at {cap} unknowns, got {n}")
    A = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        A[:, j] = op.apply_vec(e)
        e[j] = 0.0
    return A


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    first_offending: Optional[int]
    message: str


def check_monotone_stencil(op, cap: int = 4096) -> MonotoneReport:
    """Verify the monotone stencil structure of the kappa=0 operator.

    Checks, on the dense assembly: off-diagonal entries >= 0, diagonal
    entries <= 0, row sums <= 0. ``op`` needs ``apply_vec``/``n_unknowns``
    and (optionally) a ``kappa`` attribute that is added back first.
    """
    kappa = float(getattr(op, "kappa", 0.0))
    A = assemble_dense(op, cap=cap)
    B = A + kappa * np.eye(A.shape[0])
    tol = 1e-10 * max(1.0, float(np.abs(B).max()))
    off = B - np.diag(np.diag(B))
    bad = np.argwhere(off < -tol)
    if bad.size:
        i = int(bad[0][0])
        return MonotoneReport(False, i, f"negative off-diagonal in row {i}")
    diag = np.diag(B)
    bad = np.flatnonzero(diag > tol)
    if bad.size:
        i = int(bad[0])
        return MonotoneReport(False, i, f"positive diagonal at row {i}")
    rows = B.sum(axis=1)
    bad = np.flatnonzero(rows > tol)
    if bad.size:
        i = int(bad[0])
        return MonotoneReport(False, i, f"positive row sum at row {i}")
    return MonotoneReport(True, None, "monotone stencil")
