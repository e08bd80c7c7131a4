"""Scalar, dense, and Krylov phi evaluations against closed forms and
dense oracles."""

import decimal
import math

import numpy as np
import pytest

from etdcahn.expmv import (
    PhiActionError,
    PhiActionRequest,
    PhiActionResult,
    expm_dense,
    phi_action,
    phi_dense,
    phi_scalar,
)
from etdcahn.grid import BoundaryCondition, Field, build_grid
from etdcahn.operators import VelocityField, assemble_dense, make_context


# ---------------------------------------------------------------- phi_scalar


def test_phi_scalar_at_zero():
    assert phi_scalar(0, 0.0) == 1.0
    assert phi_scalar(1, 0.0) == 1.0
    assert phi_scalar(2, 0.0) == 0.5


def test_phi_scalar_closed_forms():
    assert phi_scalar(1, 1.0) == pytest.approx(math.e - 1.0, rel=1e-15)
    expected = (math.exp(-50.0) + 49.0) / 2500.0
    assert phi_scalar(2, -50.0) == pytest.approx(expected, rel=1e-15)
    assert phi_scalar(2, -50.0) == pytest.approx(0.0196, rel=1e-10)


def _phi_reference(k, s):
    # 60-digit evaluation of the closed form, immune to cancellation
    decimal.getcontext().prec = 60
    d = decimal.Decimal(s)
    e = d.exp()
    if k == 1:
        return float((e - 1) / d)
    return float((e - 1 - d) / (d * d))


def test_phi_scalar_branch_consistency():
    # inside the cutoff the Taylor branch must be accurate to rounding; just
    # outside, the closed form is only as good as its conditioning allows
    # (eps/s for phi_1, eps/s^2 for phi_2)
    for s in (9.9e-6, -9.9e-6):
        assert phi_scalar(1, s) == pytest.approx(_phi_reference(1, s), rel=1e-14)
        assert phi_scalar(2, s) == pytest.approx(_phi_reference(2, s), rel=1e-14)
    for s in (1.1e-5, -1.1e-5):
        assert phi_scalar(1, s) == pytest.approx(_phi_reference(1, s), rel=1e-10)
        assert phi_scalar(2, s) == pytest.approx(_phi_reference(2, s), rel=1e-4)


def test_phi_scalar_rejects_bad_k():
    with pytest.raises(ValueError):
        phi_scalar(3, 1.0)


def test_phi_recurrence_random_sweep():
    # phi_{k+1}(s) = (phi_k(s) - 1/k!)/s; draws avoid |s| < 1e-2 where the
    # recurrence itself loses digits to cancellation
    rng = np.random.default_rng(20240817)
    s = rng.uniform(-50.0, 50.0, size=10_000)
    s = s[np.abs(s) >= 1e-2]
    assert s.size > 9_000
    for k in (0, 1):
        for si in s:
            lhs = (phi_scalar(k, si) - 1.0 / math.factorial(k)) / si
            rhs = phi_scalar(k + 1, si)
            assert lhs == pytest.approx(rhs, rel=1e-12)


# ---------------------------------------------------------------- expm_dense


def test_expm_zero_matrix_is_identity():
    np.testing.assert_array_equal(expm_dense(np.zeros((4, 4))), np.eye(4))


def test_expm_diagonal():
    E = expm_dense(np.diag([-1.0, -2.0]))
    np.testing.assert_allclose(
        E, np.diag([math.exp(-1.0), math.exp(-2.0)]), rtol=5e-15, atol=0.0
    )
    assert E[0, 1] == 0.0 and E[1, 0] == 0.0


def test_expm_nilpotent_exact():
    # strictly upper 3x3 with dyadic-friendly entries: series terminates,
    # scaling and squaring must reproduce I + A + A^2/2 without rounding
    A = np.array([[0.0, 2.0, 4.0], [0.0, 0.0, 6.0], [0.0, 0.0, 0.0]])
    expected = np.eye(3) + A + A @ A / 2.0
    np.testing.assert_array_equal(expm_dense(A), expected)


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        expm_dense(np.array([[0.0, np.nan], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        expm_dense(np.zeros((2, 3)))
    too_big = np.broadcast_to(0.0, (4097, 4097))
    with pytest.raises(ValueError):
        expm_dense(too_big)


# ----------------------------------------------------------------- phi_dense


def test_phi1_of_zero_matrix():
    np.testing.assert_array_equal(phi_dense(1, np.zeros((3, 3))), np.eye(3))


def test_phi_dense_diagonal_matches_scalar():
    s = np.array([-50.0, -1.0, -1e-7, 0.0, 1e-7, 1.0, 10.0])
    for k in (0, 1, 2):
        P = phi_dense(k, np.diag(s))
        expected = np.diag([phi_scalar(k, si) for si in s])
        np.testing.assert_allclose(P, expected, rtol=1e-12, atol=1e-300)


def test_phi_dense_identity_residuals():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((16, 16))
    A *= 5.0 / np.linalg.norm(A, np.inf)
    E = expm_dense(A)
    scale = np.linalg.norm(E, np.inf)
    r1 = np.linalg.norm(A @ phi_dense(1, A) - (E - np.eye(16)), np.inf)
    r2 = np.linalg.norm(A @ A @ phi_dense(2, A) - (E - A - np.eye(16)), np.inf)
    assert r1 <= 1e-11 * scale
    assert r2 <= 1e-11 * scale


def test_phi_dense_k0_is_expm():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((12, 12))
    np.testing.assert_allclose(phi_dense(0, A), expm_dense(A), rtol=1e-13)


def test_phi_dense_rejects_bad_k():
    with pytest.raises(ValueError):
        phi_dense(3, np.zeros((2, 2)))


# ---------------------------------------------------------------- phi_action


def test_zero_vector_short_circuits():
    calls = [0]

    def matvec(w):
        calls[0] += 1
        return w

    res = phi_action(PhiActionRequest(k=1, tau=0.5, operator=matvec, b=np.zeros(5)))
    np.testing.assert_array_equal(res.y, np.zeros(5))
    assert res.matvec_count == 0
    assert calls[0] == 0
    assert res.est_error == 0.0


def test_request_validation():
    b = np.ones(3)
    with pytest.raises(ValueError):
        PhiActionRequest(k=3, tau=0.1, operator=np.eye(3), b=b)
    with pytest.raises(ValueError):
        PhiActionRequest(k=0, tau=0.0, operator=np.eye(3), b=b)
    with pytest.raises(ValueError):
        PhiActionRequest(k=0, tau=0.1, operator=np.eye(3), b=b, tol=0.1)
    with pytest.raises(ValueError):
        phi_action(PhiActionRequest(k=0, tau=0.1, operator=np.eye(3), b=np.array([1.0, np.inf, 0.0])))


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("tau", [1e-3, 0.1, 1.0])
def test_dense_oracle_comparison(k, tau):
    rng = np.random.default_rng(64 + k)
    A = rng.standard_normal((64, 64))
    A *= 20.0 / np.linalg.norm(A, np.inf)
    b = rng.standard_normal(64)
    res = phi_action(PhiActionRequest(k=k, tau=tau, operator=A, b=b))
    expected = phi_dense(k, tau * A) @ b
    err = np.linalg.norm(res.y - expected, np.inf)
    assert err <= 1e-8 * np.linalg.norm(b, np.inf)
    assert res.est_error <= 1e-10 * np.linalg.norm(b)
    assert 1 <= res.krylov_dim_used <= 100
    assert res.matvec_count >= res.krylov_dim_used


def test_operator_forms_agree():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((10, 10))
    b = rng.standard_normal(10)

    class Wrapped:
        def apply_vec(self, w):
            return A @ w

    y_mat = phi_action(PhiActionRequest(k=1, tau=0.3, operator=A, b=b)).y
    y_fun = phi_action(PhiActionRequest(k=1, tau=0.3, operator=lambda w: A @ w, b=b)).y
    y_obj = phi_action(PhiActionRequest(k=1, tau=0.3, operator=Wrapped(), b=b)).y
    np.testing.assert_allclose(y_fun, y_mat, rtol=1e-13)
    np.testing.assert_allclose(y_obj, y_mat, rtol=1e-13)


def test_matvec_count_is_only_operator_access():
    # the operator is a bare counting closure: any access beyond calling it
    # would blow up, and the reported count must match the actual calls
    rng = np.random.default_rng(12)
    A = rng.standard_normal((24, 24))
    A *= 3.0 / np.linalg.norm(A, np.inf)
    b = rng.standard_normal(24)
    calls = [0]

    def counting(w):
        calls[0] += 1
        return A @ w

    res = phi_action(PhiActionRequest(k=2, tau=0.5, operator=counting, b=b))
    assert res.matvec_count == calls[0] > 0


def test_substepping_restart_converges():
    # a basis cap far below what one sweep needs forces the halving path
    rng = np.random.default_rng(13)
    A = rng.standard_normal((40, 40))
    A *= 6.0 / np.linalg.norm(A, np.inf)
    b = rng.standard_normal(40)
    res = phi_action(
        PhiActionRequest(k=1, tau=1.0, operator=A, b=b, max_krylov_dim=8)
    )
    expected = phi_dense(1, A) @ b
    assert np.linalg.norm(res.y - expected, np.inf) <= 1e-8 * np.linalg.norm(b, np.inf)
    assert res.krylov_dim_used <= 8
    assert res.matvec_count > 9  # more than a single capped sweep


def test_nonconvergence_raises_with_estimate():
    rng = np.random.default_rng(14)
    A = rng.standard_normal((30, 30))
    A *= 20.0 / np.linalg.norm(A, np.inf)
    b = rng.standard_normal(30)
    req = PhiActionRequest(
        k=1, tau=1.0, operator=A, b=b, max_krylov_dim=4, max_restarts=0
    )
    with pytest.raises(PhiActionError) as excinfo:
        phi_action(req)
    assert excinfo.value.est_error > 0.0


# ------------------------------------------- actions on discrete operators


def _periodic_ctx(kappa=2.0):
    grid = build_grid((0.0, 1.0), 32, BoundaryCondition.periodic())
    mob = 1.0 + 0.5 * np.sin(2.0 * np.pi * grid.axis_coords[0])
    return make_context(
        grid, eps=0.1, kappa=kappa, mob_lattice=mob,
        velocity=VelocityField.constant((1.5,)), t=0.0,
    )


def test_heat_semigroup_sup_contraction():
    # kappa = 0, zero velocity, unit mobility: phi_0 of pure diffusion
    grid = build_grid((0.0, 1.0), 32, BoundaryCondition.periodic())
    ctx = make_context(
        grid, eps=0.2, kappa=0.0, mob_lattice=np.ones(32),
        velocity=VelocityField.zero(), t=0.0,
    )
    rng = np.random.default_rng(15)
    b = rng.uniform(-1.0, 1.0, size=32)
    res = phi_action(PhiActionRequest(k=0, tau=0.5, operator=ctx, b=b, tol=1e-12))
    assert np.linalg.norm(res.y, np.inf) <= np.linalg.norm(b, np.inf) * (1.0 + 1e-10)


def test_stabilized_contraction_factor():
    ctx = _periodic_ctx(kappa=2.0)
    tau = 0.05
    bound = math.exp(-ctx.kappa * tau)
    rng = np.random.default_rng(16)
    for _ in range(50):
        w = rng.uniform(-1.0, 1.0, size=ctx.n_unknowns)
        res = phi_action(PhiActionRequest(k=0, tau=tau, operator=ctx, b=w, tol=1e-12))
        assert np.linalg.norm(res.y, np.inf) <= bound * np.linalg.norm(w, np.inf) + 1e-10


@pytest.mark.parametrize("tau", [1e-3, 0.1, 1.0])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_oracle_equivalence_on_grid_operators(k, tau):
    rng = np.random.default_rng(17)
    grid2 = build_grid(((0.0, 1.0), (0.0, 1.0)), (8, 8), BoundaryCondition.dirichlet())
    ctx2 = make_context(
        grid2, eps=0.15, kappa=1.2,
        mob_lattice=rng.uniform(0.5, 1.5, size=grid2.lattice_shape),
        velocity=VelocityField.constant((0.7, -0.4)), t=0.0,
    )
    for ctx in (_periodic_ctx(), ctx2):
        A = assemble_dense(ctx)
        b = Field(ctx.grid, rng.uniform(-1.0, 1.0, size=ctx.n_unknowns))
        res = phi_action(PhiActionRequest(k=k, tau=tau, operator=ctx, b=b))
        assert isinstance(res.y, Field)
        expected = phi_dense(k, tau * A) @ b.values
        err = np.linalg.norm(res.y.values - expected, np.inf)
        assert err <= 1e-8 * np.linalg.norm(b.values, np.inf)


def test_result_reports_success_estimate():
    rng = np.random.default_rng(18)
    A = rng.standard_normal((20, 20))
    b = rng.standard_normal(20)
    res = phi_action(PhiActionRequest(k=0, tau=0.2, operator=A, b=b, tol=1e-9))
    assert isinstance(res, PhiActionResult)
    assert res.est_error <= 1e-9 * np.linalg.norm(b)
