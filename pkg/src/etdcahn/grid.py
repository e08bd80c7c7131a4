"""Uniform node lattices, boundary conditions, and nodal fields.

A grid covers a box with uniform spacing per axis. The set of unknowns
depends on the boundary condition:

* periodic: one node per cell, stored at ``a + h, ..., b`` (the left endpoint
  is identified with the right one),
* homogeneous Neumann: every lattice node ``a, ..., b``,
* Dirichlet: active interior nodes; boundary values are supplied by the
  boundary condition's data function and never stored in a field.

An optional boolean mask (Dirichlet only) deactivates part of the lattice,
which is how non-rectangular domains such as an L-shape are expressed. An
active node counts as boundary if it lies on the bounding box edge or if any
of its 3^d - 1 surrounding lattice neighbours (diagonals included) is
inactive; everything else active is interior.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

PERIODIC = "periodic"
NEUMANN = "neumann"
DIRICHLET = "dirichlet"

_KINDS = (PERIODIC, NEUMANN, DIRICHLET)


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary treatment for all faces of the box.

    ``boundary_data`` is only meaningful for Dirichlet conditions. It maps
    ``(x, t)`` to the prescribed value, where ``x`` is a length-``dim``
    coordinate array for a single node.
    """

    kind: str
    boundary_data: Optional[Callable[[np.ndarray, float], float]] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == DIRICHLET and self.boundary_data is None:
            object.__setattr__(self, "boundary_data", lambda x, t: 0.0)

    @staticmethod
    def periodic() -> "BoundaryCondition":
        return BoundaryCondition(PERIODIC)

    @staticmethod
    def neumann() -> "BoundaryCondition":
        return BoundaryCondition(NEUMANN)

    @staticmethod
    def dirichlet(boundary_data=None) -> "BoundaryCondition":
        return BoundaryCondition(DIRICHLET, boundary_data)


def _shifted(arr: np.ndarray, axis: int, offset: int, fill) -> np.ndarray:
    """arr shifted so result[i] = arr[i + offset] along axis, fill outside."""
    out = np.full_like(arr, fill)
    n = arr.shape[axis]
    if abs(offset) >= n:
        return out
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if offset >= 0:
        src[axis] = slice(offset, n)
        dst[axis] = slice(0, n - offset)
    else:
        src[axis] = slice(0, n + offset)
        dst[axis] = slice(-offset, n)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def _connected(active: np.ndarray) -> bool:
    """True if the active nodes form one face-connected component."""
    total = int(active.sum())
    if total == 0:
        return False
    region = np.zeros_like(active)
    region.flat[int(np.flatnonzero(active)[0])] = True
    while True:
        grown = region.copy()
        for ax in range(active.ndim):
            grown |= _shifted(region, ax, 1, False)
            grown |= _shifted(region, ax, -1, False)
        grown &= active
        if grown.sum() == region.sum():
            break
        region = grown
    return int(region.sum()) == total


@dataclass(eq=False)
class Grid:
    """Spatial discretization: box, resolution, boundary condition, mask.

    Built through :func:`build_grid`. Instances are treated as immutable.
    """

    box: tuple
    n_cells: tuple
    bc: BoundaryCondition
    mask: Optional[np.ndarray] = None

    # derived, filled in __post_init__
    dim: int = field(init=False)
    h: tuple = field(init=False)
    lattice_shape: tuple = field(init=False)
    axis_coords: tuple = field(init=False)
    n_unknowns: int = field(init=False)
    interior_flat: Optional[np.ndarray] = field(init=False, default=None)
    boundary_flat: Optional[np.ndarray] = field(init=False, default=None)
    active: Optional[np.ndarray] = field(init=False, default=None)

    def __post_init__(self):
        self.dim = len(self.n_cells)
        if self.dim not in (1, 2, 3):
            raise ValueError("grids support 1, 2, or 3 axes")
        if len(self.box) != self.dim:
            raise ValueError("box and n_cells disagree on dimension")
        for (a, b), n in zip(self.box, self.n_cells):
            if not b > a:
                raise ValueError(f"empty box interval ({a}, {b})")
            if n < 2:
                raise ValueError("need at least 2 cells per axis")
        self.h = tuple((b - a) / n for (a, b), n in zip(self.box, self.n_cells))

        kind = self.bc.kind
        if kind == PERIODIC:
            self.lattice_shape = tuple(self.n_cells)
            self.axis_coords = tuple(
                a + self.h[k] * np.arange(1, n + 1)
                for k, ((a, _), n) in enumerate(zip(self.box, self.n_cells))
            )
        else:
            self.lattice_shape = tuple(n + 1 for n in self.n_cells)
            self.axis_coords = tuple(
                a + self.h[k] * np.arange(n + 1)
                for k, ((a, _), n) in enumerate(zip(self.box, self.n_cells))
            )

        if self.mask is not None:
            if kind != DIRICHLET:
                raise ValueError("masks require Dirichlet boundary conditions")
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != self.lattice_shape:
                raise ValueError(
                    f"mask shape {m.shape} does not match lattice {self.lattice_shape}"
                )
            if not _connected(m):
                raise ValueError("mask must leave one connected active region")
            self.mask = m

        if kind == DIRICHLET:
            self._classify()
            self.n_unknowns = len(self.interior_flat)
            if self.n_unknowns == 0:
                raise ValueError("no interior nodes left")
        else:
            self.n_unknowns = int(np.prod(self.lattice_shape))

    def _classify(self):
        active = (
            self.mask.copy()
            if self.mask is not None
            else np.ones(self.lattice_shape, dtype=bool)
        )
        on_edge = np.zeros(self.lattice_shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            on_edge[tuple(idx)] = True
            idx[ax] = -1
            on_edge[tuple(idx)] = True
        surrounded = active.copy()
        for offset in itertools.product((-1, 0, 1), repeat=self.dim):
            if all(o == 0 for o in offset):
                continue
            shifted = active
            for ax, o in enumerate(offset):
                if o:
                    shifted = _shifted(shifted, ax, o, False)
            surrounded &= shifted
        interior = active & ~on_edge & surrounded
        boundary = active & ~interior
        self.active = active
        self.interior_flat = np.flatnonzero(interior.ravel())
        self.boundary_flat = np.flatnonzero(boundary.ravel())

    # -- field storage mapping -------------------------------------------

    def scatter(self, values: np.ndarray) -> np.ndarray:
        """Embed an unknown vector into a full lattice array (zeros elsewhere)."""
        if self.bc.kind == DIRICHLET:
            lat = np.zeros(self.lattice_shape)
            lat.ravel()[self.interior_flat] = values
            return lat
        return values.reshape(self.lattice_shape)

    def gather(self, lattice: np.ndarray) -> np.ndarray:
        """Extract the unknown vector from a full lattice array."""
        if self.bc.kind == DIRICHLET:
            return lattice.ravel()[self.interior_flat].copy()
        return lattice.reshape(-1).copy()

    def lattice_coords(self) -> tuple:
        """Coordinate arrays of the full lattice, meshgrid style (ij indexing)."""
        return tuple(np.meshgrid(*self.axis_coords, indexing="ij"))

    def node_coords(self) -> np.ndarray:
        """Coordinates of the unknown nodes, shape (n_unknowns, dim)."""
        mesh = self.lattice_coords()
        cols = [self.gather(m) for m in mesh]
        return np.stack(cols, axis=-1)

    def boundary_coords(self) -> np.ndarray:
        """Coordinates of Dirichlet boundary nodes, shape (n_boundary, dim)."""
        if self.bc.kind != DIRICHLET:
            return np.empty((0, self.dim))
        mesh = self.lattice_coords()
        cols = [m.ravel()[self.boundary_flat] for m in mesh]
        return np.stack(cols, axis=-1)

    def boundary_values(self, t: float) -> np.ndarray:
        """Dirichlet data at time t, one value per boundary node."""
        coords = self.boundary_coords()
        g = self.bc.boundary_data
        return np.array([float(g(x, t)) for x in coords])

    def boundary_lattice(self, t: float) -> np.ndarray:
        """Full lattice array holding g(x, t) at boundary nodes, zero elsewhere."""
        lat = np.zeros(self.lattice_shape)
        if self.bc.kind == DIRICHLET:
            lat.ravel()[self.boundary_flat] = self.boundary_values(t)
        return lat


def build_grid(box, n_cells, bc: BoundaryCondition, mask=None) -> Grid:
    """Construct a grid over ``box`` with ``n_cells`` cells per axis.

    ``box`` is a sequence of (lo, hi) pairs, one per axis; a single pair is
    accepted for 1D. ``mask`` is a boolean lattice array of active nodes and
    requires a Dirichlet boundary condition.
    """
    box = tuple(box)
    if box and np.isscalar(box[0]):
        box = (box,)
    if np.isscalar(n_cells):
        n_cells = (int(n_cells),)
    box = tuple((float(a), float(b)) for a, b in box)
    n_cells = tuple(int(n) for n in n_cells)
    return Grid(box=box, n_cells=n_cells, bc=bc, mask=mask)


def lshape_mask(n_cells) -> np.ndarray:
    """Active-node mask removing the open lower-left quadrant of a 2D box.

    Nodes strictly inside the lower-left quarter (both lattice indices below
    the midpoint) are deactivated; nodes on the interface lines stay active
    and classify as boundary. Each axis must have an even cell count so the
    midpoint lies on the lattice.
    """
    if len(n_cells) != 2:
        raise ValueError("L-shape masks are two-dimensional")
    nx, ny = n_cells
    if nx % 2 or ny % 2:
        raise ValueError("L-shape masks need even cell counts")
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    return ~((ii < nx // 2) & (jj < ny // 2))


@dataclass
class Field:
    """Nodal values over the unknown set of a grid, stored as a flat vector."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape != (self.grid.n_unknowns,):
            raise ValueError(
                f"expected {self.grid.n_unknowns} values, got {self.values.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def lattice(self) -> np.ndarray:
        """Values embedded in the full lattice (zeros at boundary/masked nodes)."""
        return self.grid.scatter(self.values)

    @staticmethod
    def from_lattice(grid: Grid, lattice: np.ndarray) -> "Field":
        return Field(grid, grid.gather(lattice))


def sample_function(grid: Grid, f) -> Field:
    """Evaluate ``f(x[, y[, z]])`` at the unknown nodes of ``grid``.

    ``f`` should accept coordinate arrays (vectorized); plain scalar
    functions are looped over as a fallback.
    """
    mesh = grid.lattice_coords()
    try:
        raw = np.asarray(f(*mesh), dtype=float)
        lat = np.broadcast_to(raw, grid.lattice_shape)
    except (TypeError, ValueError):
        lat = np.vectorize(f)(*mesh).astype(float)
    return Field(grid, grid.gather(lat))


def sup_norm(u: Field, boundary_time: Optional[float] = None) -> float:
    """Maximum absolute nodal value; optionally include Dirichlet data at t."""
    m = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    if boundary_time is not None and u.grid.bc.kind == DIRICHLET:
        bvals = u.grid.boundary_values(boundary_time)
        if bvals.size:
            m = max(m, float(np.max(np.abs(bvals))))
    return m
