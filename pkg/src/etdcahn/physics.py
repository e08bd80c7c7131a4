"""Potentials, mobilities, stabilization, and the nonlinear term.

The reaction is f = -F' for a double-well or Flory-Huggins potential F, the
mobility M is constant or degenerate (1 - u^2), and the modified reaction is
ftilde = M * f. The phase variable is bounded by beta (the positive root of
f for Flory-Huggins, 1 for the double well), and the stabilization constant
kappa must dominate max |ftilde'| on [-beta, beta]. With that choice,
N(u) = kappa*u + ftilde(u) is nondecreasing, bounded by kappa*beta, and
2*kappa-Lipschitz on the interval, which is what makes the exponential
steppers bound preserving.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .operators import OperatorContext, boundary_load

logger = logging.getLogger(__name__)

DOUBLE_WELL = "double_well"
FLORY_HUGGINS = "flory_huggins"
CONSTANT = "constant"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Potential:
    kind: str
    theta: float = 0.0
    theta_c: float = 0.0

    def __post_init__(self):
        if self.kind not in (DOUBLE_WELL, FLORY_HUGGINS):
            raise ValueError(f"unknown potential {self.kind!r}")
        if self.kind == FLORY_HUGGINS and not (self.theta_c > self.theta > 0):
            raise ValueError("Flory-Huggins requires theta_c > theta > 0")

    @staticmethod
    def double_well() -> "Potential":
        return Potential(DOUBLE_WELL)

    @staticmethod
    def flory_huggins(theta: float, theta_c: float) -> "Potential":
        return Potential(FLORY_HUGGINS, float(theta), float(theta_c))


@dataclass(frozen=True)
class Mobility:
    kind: str
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in (CONSTANT, DEGENERATE):
            raise ValueError(f"unknown mobility {self.kind!r}")
        if self.kind == CONSTANT and not self.value > 0:
            raise ValueError("constant mobility must be positive")

    @staticmethod
    def constant(value: float = 1.0) -> "Mobility":
        return Mobility(CONSTANT, float(value))

    @staticmethod
    def degenerate() -> "Mobility":
        return Mobility(DEGENERATE)


def _check_fh_domain(u):
    if np.any(np.abs(u) >= 1.0):
        raise ValueError("Flory-Huggins potential is defined only for |u| < 1")


def eval_f(potential: Potential, u):
    """Reaction f(u) = -F'(u)."""
    u = np.asarray(u, dtype=float)
    if potential.kind == DOUBLE_WELL:
        return u - u**3
    _check_fh_domain(u)
    return potential.theta_c * u - potential.theta * np.arctanh(u)


def eval_F(potential: Potential, u):
    """Potential F(u)."""
    u = np.asarray(u, dtype=float)
    if potential.kind == DOUBLE_WELL:
        return (u**2 - 1.0) ** 2 / 4.0
    _check_fh_domain(u)
    ent = (1.0 + u) * np.log1p(u) + (1.0 - u) * np.log1p(-u)
    return potential.theta / 2.0 * ent - potential.theta_c / 2.0 * u**2


def eval_fprime(potential: Potential, u):
    u = np.asarray(u, dtype=float)
    if potential.kind == DOUBLE_WELL:
        return 1.0 - 3.0 * u**2
    _check_fh_domain(u)
    return potential.theta_c - potential.theta / (1.0 - u**2)


def eval_M(mobility: Mobility, u):
    """Mobility M(u)."""
    u = np.asarray(u, dtype=float)
    if mobility.kind == CONSTANT:
        return np.full_like(u, mobility.value)
    return 1.0 - u**2


def eval_Mprime(mobility: Mobility, u):
    u = np.asarray(u, dtype=float)
    if mobility.kind == CONSTANT:
        return np.zeros_like(u)
    return -2.0 * u


def _ftilde_prime(potential, mobility, u):
    return eval_Mprime(mobility, u) * eval_f(potential, u) + eval_M(
        mobility, u
    ) * eval_fprime(potential, u)


def compute_beta(potential: Potential) -> float:
    """Smallest admissible bound: 1 for the double well, else the positive
    root of f by bisection on (0, 1 - 1e-15) to absolute tolerance 1e-12."""
    if potential.kind == DOUBLE_WELL:
        return 1.0
    th, thc = potential.theta, potential.theta_c

    def f(r):
        return thc * r - th * math.atanh(r)

    lo, hi = 1e-14, 1.0 - 1e-15
    if not (f(lo) > 0 > f(hi)):
        raise ValueError("failed to bracket the root of f")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compute_kappa(potential: Potential, mobility: Mobility, beta: float) -> float:
    """Stabilization bound: max of |ftilde'| over [-beta, beta].

    Sampled on a uniform 200001-point grid (endpoints included), then the
    best bracket is refined by golden-section search to relative tolerance
    1e-10. Derivatives are closed form, not finite differences.
    """
    xs = np.linspace(-beta, beta, 200001)
    vals = np.abs(_ftilde_prime(potential, mobility, xs))
    if not np.all(np.isfinite(vals)):
        raise ValueError("ftilde' is not finite on the sampling grid")
    i = int(np.argmax(vals))
    best = float(vals[i])
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]

    def phi(x):
        return float(np.abs(_ftilde_prime(potential, mobility, x)))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    tol = 1e-10 * max(1.0, beta)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = phi(d)
    return max(best, fc, fd)


@dataclass(frozen=True)
class PhysicsSpec:
    """Frozen problem data: potential, mobility, interface width, bound, kappa."""

    potential: Potential
    mobility: Mobility
    eps: float
    beta: float
    kappa: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("interface width eps must be positive")
        fb = float(eval_f(self.potential, self.beta * (1 - 1e-15)))
        fmb = float(eval_f(self.potential, -self.beta * (1 - 1e-15)))
        if not (fb <= 1e-9 and fmb >= -1e-9):
            raise ValueError("bound beta does not satisfy f(beta) <= 0 <= f(-beta)")


def make_physics(
    potential: Potential,
    mobility: Mobility,
    eps: float,
    kappa: Optional[float] = None,
) -> PhysicsSpec:
    """Build a PhysicsSpec, computing beta and kappa.

    ``kappa`` may override the computed stabilization bound upward (round
    values are common); overrides below the bound are rejected.
    """
    beta = compute_beta(potential)
    kappa_min = compute_kappa(potential, mobility, beta)
    if kappa is None:
        kappa = kappa_min
    elif kappa < kappa_min - 1e-9:
        raise ValueError(
            f"kappa override {kappa} is below the required bound {kappa_min:.6g}"
        )
    if mobility.kind == DEGENERATE and float(eval_M(mobility, beta)) <= 0.0:
        logger.warning(
            "mobility vanishes at |u| = beta = %g; bound preservation still "
            "holds but the strict positive-mobility hypothesis is relaxed",
            beta,
        )
    return PhysicsSpec(potential, mobility, float(eps), float(beta), float(kappa))


def eval_N(spec: PhysicsSpec, u):
    """Stabilized nonlinear term N(u) = kappa*u + M(u) f(u).

    Input is clamped to [-beta, beta] first; the bound-preserving steppers
    keep iterates inside the interval analytically, so clamping only guards
    round-off (and the Flory-Huggins logarithms)."""
    u = np.asarray(u, dtype=float)
    uc = np.clip(u, -spec.beta, spec.beta)
    return spec.kappa * uc + eval_M(spec.mobility, uc) * eval_f(spec.potential, uc)


def eval_N_tilde(spec: PhysicsSpec, ctx: OperatorContext, u):
    """N(u) plus Dirichlet boundary loads: N + eps^2 M(u) gd + gc.

    For periodic and Neumann grids this is elementwise eval_N. ``u`` may be a
    Field or a plain unknown vector; a plain vector is returned."""
    vals = u.values if hasattr(u, "values") else np.asarray(u, dtype=float)
    n = eval_N(spec, vals)
    if ctx.grid.bc.kind != "dirichlet":
        return n
    load = boundary_load(ctx)
    return n + spec.eps**2 * ctx.mob_unknowns() * load.gd + load.gc
