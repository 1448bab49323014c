import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from ccbounds import manifold as mf
from ccbounds.errors import (
    AlignmentError,
    ConstraintRedundancyError,
    DimensionError,
    FeasibilityError,
    SingularChartError,
)

from conftest import random_problem

phi1s = st.floats(-np.pi, np.pi)
phi2s = st.floats(0.05 * np.pi, 0.95 * np.pi)
rhos = st.floats(0.1, 50.0)


def assert_orthonormal_null(cs, theta, U, tol=1e-12):
    F = cs.jac(theta)
    scale = 1 + np.abs(F).max()
    assert np.abs(F @ U).max() <= tol * scale
    assert np.abs(U.T @ U - np.eye(U.shape[1])).max() <= tol


@settings(max_examples=60, deadline=None)
@given(rho=rhos, phi1=phi1s, phi2=phi2s)
def test_sphere_basis_is_orthonormal_null_space(rho, phi1, phi2):
    cs = mf.sphere(rho)
    theta = mf.sphere_point(rho, phi1, phi2)
    nb = mf.null_space_basis(cs, theta)
    assert_orthonormal_null(cs, theta, nb.U)
    assert nb.residuals(cs)[1] <= 1e-12


@settings(max_examples=60, deadline=None)
@given(c=st.floats(0.05, 10.0), ang=phi1s, omega=phi1s)
def test_amplitude_basis_is_orthonormal_null_space(c, ang, omega):
    cs = mf.amplitude(c)
    theta = np.array([c * np.cos(ang), c * np.sin(ang), omega])
    assert_orthonormal_null(cs, theta, mf.null_space_basis(cs, theta).U)


def test_numeric_basis_spans_scipy_null_space(rng):
    for _ in range(20):
        theta, cs, _, _ = random_problem(rng)
        U = mf.null_space_basis(cs, theta).U
        assert_orthonormal_null(cs, theta, U, tol=1e-10)
        N = null_space(cs.jac(theta))
        # same subspace: projectors agree
        np.testing.assert_allclose(U @ U.T, N @ N.T, atol=1e-10)


def test_sphere_point_is_feasible():
    ok, resid = mf.validate_feasible(mf.sphere(2.0), mf.sphere_point(2.0, 0.3, 1.1))
    assert ok and resid < 1e-14


def test_infeasible_point_rejected():
    cs = mf.sphere(1.0)
    ok, resid = mf.validate_feasible(cs, np.array([1.0, 1.0, 0.0]))
    assert not ok and resid == pytest.approx(1.0)
    with pytest.raises(FeasibilityError):
        mf.null_space_basis(cs, np.array([1.0, 1.0, 0.0]))


def test_sphere_chart_singular_on_pole():
    with pytest.raises(SingularChartError):
        mf.null_space_basis(mf.sphere(1.0), np.array([0.0, 0.0, 1.0]))
    # the numeric provider has no such chart problem
    nb = mf.null_space_basis(mf.sphere(1.0, dim=4), np.array([0.0, 0.0, 0.0, 1.0]))
    assert nb.U.shape == (4, 3)


def test_redundant_constraints():
    A = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(ConstraintRedundancyError):
        mf.linear(A, np.zeros(2))


def test_dimension_checks():
    cs = mf.sphere(1.0)
    with pytest.raises(DimensionError):
        cs.residual(np.zeros(4))
    with pytest.raises(DimensionError):
        mf.ConstraintSet(3, 3, f=lambda t: t, jacobian=lambda t: np.eye(3))


def test_unconstrained_basis_is_identity():
    cs = mf.unconstrained(4)
    nb = mf.null_space_basis(cs, np.ones(4))
    np.testing.assert_array_equal(nb.U, np.eye(4))
    assert np.all(mf.basis_derivatives(cs, np.ones(4), nb).V == 0)


def test_align_basis_recovers_rotation(rng):
    U = np.linalg.qr(rng.standard_normal((5, 3)))[0]
    Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    np.testing.assert_allclose(mf.align_basis(U, U @ Q), U, atol=1e-12)


def test_align_basis_rejects_distant_subspace():
    U_ref = np.eye(4)[:, :2]
    U_raw = np.eye(4)[:, 2:]
    with pytest.raises(AlignmentError):
        mf.align_basis(U_ref, U_raw)


def test_alignment_to_reference():
    cs = mf.sphere(1.0, dim=4)
    theta = np.array([0.5, 0.5, 0.5, 0.5])
    ref = mf.null_space_basis(cs, theta).U
    theta2 = theta + 1e-3 * np.array([1, -1, 0.5, -0.5])
    theta2 /= np.linalg.norm(theta2)
    U2 = mf.null_space_basis(cs, theta2, reference=ref).U
    assert np.abs(U2 - ref).max() < 1e-2


@settings(max_examples=40, deadline=None)
@given(rho=rhos, phi1=phi1s, phi2=phi2s)
def test_sphere_gradients_match_finite_differences(rho, phi1, phi2):
    cs = mf.sphere(rho)
    theta = mf.sphere_point(rho, phi1, phi2)
    nb = mf.null_space_basis(cs, theta)
    Va = mf.basis_derivatives(cs, theta, nb, method="analytic").V
    Vf = mf.basis_derivatives(cs, theta, nb, method="field").V
    scale = 1 + np.abs(Va).max()
    assert np.abs(Va - Vf).max() <= 1e-6 * scale


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.1, 5.0), ang=phi1s, omega=phi1s)
def test_amplitude_gradients_match_finite_differences(c, ang, omega):
    cs = mf.amplitude(c)
    theta = np.array([c * np.cos(ang), c * np.sin(ang), omega])
    nb = mf.null_space_basis(cs, theta)
    Va = mf.basis_derivatives(cs, theta, nb, method="analytic").V
    Vf = mf.basis_derivatives(cs, theta, nb, method="field").V
    assert np.abs(Va - Vf).max() <= 1e-6 * (1 + np.abs(Va).max())


def test_gradients_satisfy_differentiated_constraints(rng):
    # d/dtheta_j (F U) = 0 and d/dtheta_j (U^T U) = 0 for the aligned numeric field
    for _ in range(10):
        theta, cs, _, _ = random_problem(rng)
        nb = mf.null_space_basis(cs, theta)
        V = mf.basis_derivatives(cs, theta, nb, method="nullspace").V
        M, D = nb.U.shape
        h = 1e-6
        for j in range(M):
            e = np.zeros(M)
            e[j] = h
            dF = (cs.jac(theta + e) - cs.jac(theta - e)) / (2 * h)
            dU = V[:, :, j].T
            np.testing.assert_allclose(dF @ nb.U + cs.jac(theta) @ dU, 0, atol=1e-6)
            sym = nb.U.T @ dU + dU.T @ nb.U
            np.testing.assert_allclose(sym, 0, atol=1e-6)


def test_linear_gradients_vanish(rng):
    A = rng.standard_normal((2, 5))
    theta = rng.standard_normal(5)
    cs = mf.linear(A, -A @ theta)
    nb = mf.null_space_basis(cs, theta)
    for method in ("analytic", "field", "nullspace"):
        assert np.abs(mf.basis_derivatives(cs, theta, nb, method=method).V).max() < 1e-9


def test_basis_derivatives_checks_anchor():
    cs = mf.sphere(1.0)
    nb = mf.null_space_basis(cs, mf.sphere_point(1.0, 0.1, 1.0))
    with pytest.raises(DimensionError):
        mf.basis_derivatives(cs, mf.sphere_point(1.0, 0.2, 1.0), nb)
