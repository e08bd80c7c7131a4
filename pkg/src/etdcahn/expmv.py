"""Actions of phi_0, phi_1, phi_2 of a scaled operator on a vector.

phi_0(s) = e^s, phi_1(s) = (e^s - 1)/s, phi_2(s) = (e^s - s - 1)/s^2, with
the recurrence phi_{k+1}(s) = (phi_k(s) - 1/k!)/s.

Production path: adaptive Arnoldi. The Krylov basis of tau*A is grown from
b/||b|| until the generalized residual estimate

    ||b|| * h_{m+1,m} * |last component of phi_k(H_m) e1|

drops below the tolerance; phi_k(H_m) e1 is read off the exponential of the
small augmented Hessenberg block [[H, E], [0, J]]. If the basis cap is hit,
the step is halved and the action is rebuilt by sub-stepping with the exact
recurrences (phi_0 composes; the phi_1/phi_2 actions solve the equivalent
linear ODEs with constant and linear-in-t sources).

Oracle path: dense scaling-and-squaring (truncated Taylor, scaling so
||A||_inf / 2^j <= 0.5) for e^A, and simultaneous doubling recurrences for
the dense phi_1/phi_2 matrices. Dense routines are capped at 4096 rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .grid import Field

_EPS = np.finfo(float).eps
_DENSE_CAP = 4096


def phi_scalar(k: int, s: float) -> float:
    """phi_k(s) for k in {0, 1, 2}; series near 0 to avoid cancellation."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1, or 2")
    s = float(s)
    if k == 0:
        return math.exp(s)
    if abs(s) < 1e-5:
        acc = 0.0
        for j in reversed(range(8)):  # sum_{j} s^j / (j+k)!
            acc = acc * s + 1.0 / math.factorial(j + k)
        return acc
    if k == 1:
        return (math.exp(s) - 1.0) / s
    return (math.exp(s) - s - 1.0) / s**2


def _check_dense(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] > _DENSE_CAP:
        raise ValueError(f"dense routines capped at {_DENSE_CAP} rows")
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite matrix entries")
    return A


def _scaling_exponent(norm: float) -> int:
    if norm <= 0.5:
        return 0
    return max(0, int(math.ceil(math.log2(norm / 0.5))))


def expm_dense(A) -> np.ndarray:
    """e^A by scaling-and-squaring with a truncated Taylor series."""
    A = _check_dense(A)
    n = A.shape[0]
    j = _scaling_exponent(float(np.linalg.norm(A, np.inf)))
    B = A / 2.0**j
    S = np.eye(n) + B
    T = B.copy()
    for m in range(2, 60):
        T = T @ B / m
        S += T
        if np.linalg.norm(T, np.inf) <= 1e-16 * np.linalg.norm(S, np.inf):
            break
    for _ in range(j):
        S = S @ S
    return S


def _phi012_dense(A):
    """Dense phi_0, phi_1, phi_2 by scaled Taylor plus doubling."""
    A = _check_dense(A)
    n = A.shape[0]
    j = _scaling_exponent(float(np.linalg.norm(A, np.inf)))
    B = A / 2.0**j
    eye = np.eye(n)
    f0 = eye.copy()
    f1 = eye.copy()
    f2 = eye / 2.0
    P = eye
    for m in range(1, 60):
        P = P @ B / m  # B^m / m!
        f0 += P
        f1 += P / (m + 1.0)
        f2 += P / ((m + 1.0) * (m + 2.0))
        if np.linalg.norm(P, np.inf) <= 1e-17 * np.linalg.norm(f0, np.inf):
            break
    # doubling: phi1(2A) = phi1 (phi0 + I)/2, phi2(2A) = (phi2 (phi0+I) + phi1)/4
    for _ in range(j):
        grow = f0 + eye
        f2 = (f2 @ grow + f1) / 4.0
        f1 = f1 @ grow / 2.0
        f0 = f0 @ f0
    return f0, f1, f2


def phi_dense(k: int, A) -> np.ndarray:
    """Dense phi_k(A); satisfies A phi_1(A) = e^A - I and
    A^2 phi_2(A) = e^A - A - I up to conditioning."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1, or 2")
    return _phi012_dense(A)[k]


def _phi_e1(H: np.ndarray, k: int) -> dict:
    """{j: phi_j(H) e1} for j <= k, via the augmented-block exponential.

    The (m+k)-sized block [[H, E], [0, J]] with E carrying e1 in its first
    column and J the nilpotent shift yields the phi_j(H) e1 columns of its
    exponential."""
    m = H.shape[0]
    if k == 0:
        return {0: expm_dense(H)[:, 0].copy()}
    htil = np.zeros((m + k, m + k))
    htil[:m, :m] = H
    htil[0, m] = 1.0
    for i in range(k - 1):
        htil[m + i, m + i + 1] = 1.0
    E = expm_dense(htil)
    out = {j: E[:m, m + j - 1].copy() for j in range(1, k + 1)}
    out[0] = E[:m, :m][:, 0].copy()
    return out


class PhiActionError(RuntimeError):
    """Krylov evaluation failed to converge; carries the last estimate."""

    def __init__(self, message, est_error):
        super().__init__(message)
        self.est_error = est_error


class _NotConverged(Exception):
    def __init__(self, est):
        self.est = est


@dataclass
class PhiActionRequest:
    k: int
    tau: float
    operator: Any
    b: Any
    tol: float = 1e-10
    max_krylov_dim: int = 100
    max_restarts: int = 20

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise ValueError("k must be 0, 1, or 2")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.tol <= 1e-2:
            raise ValueError("tol must lie in (0, 1e-2]")


@dataclass
class PhiActionResult:
    y: Any
    est_error: float
    krylov_dim_used: int
    matvec_count: int


def _as_matvec(operator):
    if callable(operator):
        return operator
    if hasattr(operator, "apply_vec"):
        return operator.apply_vec
    arr = np.asarray(operator)
    if arr.ndim == 2:
        return lambda w: arr @ w
    raise TypeError("operator must be callable, have apply_vec, or be a matrix")


def _defect_peaks(H, ks, levels=6):
    """max over dyadic theta in [2^-levels, 1] of theta^k |[phi_k(theta H) e1]_m|.

    The endpoint value alone (theta = 1) can collapse spuriously for stiff
    operators while the Krylov defect is still large at interior times, so
    the acceptance test scans the whole interval. Built from one scaled
    Taylor evaluation plus the phi doubling recurrences."""
    m = H.shape[0]
    f0, f1, f2 = _phi012_dense(H / 2.0**levels)
    eye = np.eye(m)
    theta = 2.0**-levels
    peaks = {k: theta**k * abs((f0, f1, f2)[k][m - 1, 0]) for k in ks}
    for _ in range(levels):
        grow = f0 + eye
        f2 = (f2 @ grow + f1) / 4.0
        f1 = f1 @ grow / 2.0
        f0 = f0 @ f0
        theta *= 2.0
        for k in ks:
            peaks[k] = max(peaks[k], theta**k * abs((f0, f1, f2)[k][m - 1, 0]))
    return peaks


class _Arnoldi:
    """One Krylov sweep for the (already sigma-scaled) matvec."""

    def __init__(self, matvec, max_dim):
        self.matvec = matvec
        self.max_dim = max_dim

    def run(self, b, ks, tol_abs):
        """Grow the basis until beta*h_{m+1,m}*peak_k <= tol_abs for every
        requested k. Returns ({k: y_k}, est, m)."""
        beta = float(np.linalg.norm(b))
        if beta == 0.0:
            return {k: np.zeros_like(b) for k in ks}, 0.0, 0
        kmax = max(ks)
        n = b.shape[0]
        mmax = min(self.max_dim, n)
        V = np.empty((n, mmax + 1))
        H = np.zeros((mmax + 1, mmax))
        V[:, 0] = b / beta
        for j in range(mmax):
            w = self.matvec(V[:, j])
            basis = V[:, : j + 1]
            hcol = basis.T @ w
            w = w - basis @ hcol
            # re-orthogonalize when the loss-of-orthogonality indicator trips
            c = basis.T @ w
            if np.linalg.norm(c) > 1e-8 * (np.linalg.norm(w) + _EPS):
                w = w - basis @ c
                hcol = hcol + c
            hn = float(np.linalg.norm(w))
            H[: j + 1, j] = hcol
            H[j + 1, j] = hn
            m = j + 1
            hscale = max(1.0, float(np.abs(H[: m + 1, :m]).max()))
            breakdown = hn <= 1e-13 * hscale
            check = m <= 12 or (m % 4 == 0) or m == mmax or breakdown
            if check:
                peaks = _defect_peaks(H[:m, :m], ks)
                est = beta * hn * max(peaks[k] for k in ks)
                if est <= tol_abs or breakdown:
                    phis = _phi_e1(H[:m, :m], kmax)
                    ys = {k: beta * (V[:, :m] @ phis[k]) for k in ks}
                    return ys, est, m
            V[:, m] = w / hn
        raise _NotConverged(est)


def _substepped(k, tau, matvec, b, S, tol_sub, max_dim):
    """phi_k(tau A) b via S equal sub-steps of the defining ODE."""
    sigma = tau / S
    smv = lambda w: sigma * matvec(w)
    arn = _Arnoldi(smv, max_dim)
    dim_used = 0
    if k == 0:
        y = b
        est = 0.0
        for _ in range(S):
            ys, e, m = arn.run(y, (0,), tol_sub * np.linalg.norm(y))
            y, est, dim_used = ys[0], est + e, max(dim_used, m)
        return y, est, dim_used
    nb = float(np.linalg.norm(b))
    if k == 1:
        # w' = A w + b, w(0) = 0, w(tau) = tau phi_1(tau A) b
        ys, e1, m = arn.run(b, (1,), tol_sub * nb)
        z = sigma * ys[1]
        dim_used = m
        w = z
        est = S * sigma * e1
        for _ in range(S - 1):
            ys, e0, m = arn.run(w, (0,), tol_sub * np.linalg.norm(w))
            w = ys[0] + z
            est += e0
            dim_used = max(dim_used, m)
        return w / tau, est / tau, dim_used
    # k == 2: w' = A w + t b, w(0) = 0, w(tau) = tau^2 phi_2(tau A) b
    ys, e12, m = arn.run(b, (1, 2), tol_sub * nb)
    p1 = sigma * ys[1]
    p2 = sigma**2 * ys[2]
    dim_used = m
    w = p2  # first sub-step from w(0) = 0
    est = S * (tau * sigma * e12 + sigma**2 * e12)
    for s in range(1, S):
        t_s = s * sigma
        ys, e0, m = arn.run(w, (0,), tol_sub * np.linalg.norm(w))
        w = ys[0] + t_s * p1 + p2
        est += e0
        dim_used = max(dim_used, m)
    return w / tau**2, est / tau**2, dim_used


def phi_action(req: PhiActionRequest) -> PhiActionResult:
    """Krylov evaluation of phi_k(tau A) b with adaptive sub-stepping."""
    is_field = isinstance(req.b, Field)
    b = req.b.values if is_field else np.asarray(req.b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("b must be finite")
    count = [0]
    base = _as_matvec(req.operator)

    def matvec(w):
        count[0] += 1
        return base(w)

    def wrap(y):
        return Field(req.b.grid, y) if is_field else y

    beta0 = float(np.linalg.norm(b))
    if beta0 == 0.0:
        return PhiActionResult(wrap(np.zeros_like(b)), 0.0, 0, 0)

    last_est = math.inf
    for attempt in range(req.max_restarts + 1):
        S = 2**attempt
        tol_eff = max(req.tol, S * 16 * _EPS)
        tol_sub = tol_eff / S
        try:
            y, est, m = _substepped(
                req.k, req.tau, matvec, b, S, tol_sub, req.max_krylov_dim
            )
        except _NotConverged as e:
            last_est = e.est
            continue
        if est <= tol_eff * beta0:
            return PhiActionResult(wrap(y), est, m, count[0])
        last_est = est
    raise PhiActionError(
        f"phi_action did not converge after {req.max_restarts} restarts "
        f"(last estimate {last_est:.3e})",
        last_est,
    )
