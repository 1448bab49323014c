"""Constraint sets, tangent (null-space) bases and their parameter gradients.

A constraint set is ``{theta in R^M : f(theta) = 0}`` with ``f: R^M -> R^K``.
At a feasible point the columns of ``U(theta)`` form an orthonormal basis of
the null space of the Jacobian ``F(theta)``; ``V[m]`` is the Jacobian of the
m-th column, ``V[m][i, j] = d U[i, m] / d theta_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    AlignmentError,
    ConstraintRedundancyError,
    DimensionError,
    FeasibilityError,
    SingularChartError,
)

FEAS_TOL = 1e-10
RANK_RTOL = 1e-10
FD_STEP = np.cbrt(np.finfo(float).eps)
MAX_ALIGN_ANGLE = np.pi / 4


@dataclass(frozen=True)
class ConstraintSet:
    """Equality-constrained parameter set.

    Parameters
    ----------
    dim_param, dim_constraint : int
        ``M`` and ``K`` with ``0 <= K < M``.
    f : callable
        ``theta -> (K,)`` constraint residual.
    jacobian : callable
        ``theta -> (K, M)`` Jacobian ``F(theta)``.
    basis : callable, optional
        Analytic null-space basis field ``theta -> (M, M-K)``. When omitted
        the basis is extracted numerically from ``F(theta)``.
    basis_grad : callable, optional
        Analytic gradients of ``basis``, ``theta -> (M-K, M, M)``.
    """

    dim_param: int
    dim_constraint: int
    f: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    basis: Optional[Callable[[np.ndarray], np.ndarray]] = None
    basis_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    feas_tol: float = FEAS_TOL
    name: str = "custom"

    def __post_init__(self):
        if self.dim_param < 1 or not 0 <= self.dim_constraint < self.dim_param:
            raise DimensionError(
                f"need M >= 1 and 0 <= K < M, got M={self.dim_param}, K={self.dim_constraint}")

    @property
    def provider(self) -> str:
        return "analytic" if self.basis is not None else "numeric"

    @property
    def dim_tangent(self) -> int:
        return self.dim_param - self.dim_constraint

    def residual(self, theta) -> np.ndarray:
        theta = self._check(theta)
        if self.dim_constraint == 0:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.f(theta), dtype=float))

    def jac(self, theta) -> np.ndarray:
        theta = self._check(theta)
        if self.dim_constraint == 0:
            return np.zeros((0, self.dim_param))
        return np.asarray(self.jacobian(theta), dtype=float).reshape(
            self.dim_constraint, self.dim_param)

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim_param,):
            raise DimensionError(
                f"theta must have shape ({self.dim_param},), got {theta.shape}")
        return theta


@dataclass(frozen=True)
class NullSpaceBasis:
    anchor: np.ndarray
    U: np.ndarray

    def residuals(self, cs: ConstraintSet) -> tuple[float, float]:
        """Return ``(max|F U|, max|U^T U - I|)``."""
        FU = cs.jac(self.anchor) @ self.U
        gram = self.U.T @ self.U - np.eye(self.U.shape[1])
        fu = float(np.max(np.abs(FU))) if FU.size else 0.0
        return fu, float(np.max(np.abs(gram))) if gram.size else 0.0


@dataclass(frozen=True)
class BasisDerivatives:
    """Stack of ``V_m`` matrices, shape ``(M-K, M, M)``."""

    V: np.ndarray
    method: str

    def __len__(self):
        return self.V.shape[0]

    def __getitem__(self, m):
        return self.V[m]

    def __iter__(self):
        return iter(self.V)


def validate_feasible(cs: ConstraintSet, theta) -> tuple[bool, float]:
    """Check ``||f(theta)||_inf <= feas_tol * (1 + ||theta||)``.

    Returns the verdict and the infinity-norm residual.
    """
    theta = cs._check(theta)
    r = cs.residual(theta)
    resid = float(np.max(np.abs(r))) if r.size else 0.0
    return resid <= cs.feas_tol * (1.0 + np.linalg.norm(theta)), resid


def _nullspace_of(F: np.ndarray, M: int) -> np.ndarray:
    K = F.shape[0]
    if K == 0:
        return np.eye(M)
    _, s, Vt = np.linalg.svd(F, full_matrices=True)
    if s[0] == 0.0 or s[-1] <= RANK_RTOL * s[0]:
        raise ConstraintRedundancyError(
            f"constraint Jacobian has rank < {K} (singular values {s})")
    return Vt[K:].T.copy()


def _raw_basis(cs: ConstraintSet, theta: np.ndarray) -> np.ndarray:
    # no feasibility check: finite differences evaluate off the manifold
    if cs.dim_constraint == 0:
        return np.eye(cs.dim_param)
    if cs.basis is not None:
        U = np.asarray(cs.basis(theta), dtype=float)
        if U.shape != (cs.dim_param, cs.dim_tangent):
            raise DimensionError(f"basis returned shape {U.shape}")
        return U
    return _nullspace_of(cs.jac(theta), cs.dim_param)


def null_space_basis(cs: ConstraintSet, theta, reference=None) -> NullSpaceBasis:
    """Orthonormal basis ``U(theta)`` of the null space of ``F(theta)``.

    Parameters
    ----------
    cs : ConstraintSet
    theta : array_like, shape (M,)
        Feasible point.
    reference : ndarray, optional
        Only used by the numeric provider: the extracted basis is rotated to
        be as close as possible to ``reference`` (see :func:`align_basis`).

    Raises
    ------
    FeasibilityError
        ``theta`` is not on the constraint set.
    ConstraintRedundancyError
        ``F(theta)`` does not have full row rank.
    SingularChartError
        The analytic basis formula is undefined at ``theta``.
    """
    theta = cs._check(theta)
    ok, resid = validate_feasible(cs, theta)
    if not ok:
        raise FeasibilityError(f"theta is infeasible, ||f(theta)||_inf = {resid:.3g}")
    if cs.dim_constraint > 0:
        _nullspace_of(cs.jac(theta), cs.dim_param)  # rank check for every provider
    U = _raw_basis(cs, theta)
    if cs.basis is None and reference is not None:
        U = align_basis(np.asarray(reference, dtype=float), U)
    return NullSpaceBasis(anchor=theta.copy(), U=U)


def align_basis(U_ref: np.ndarray, U_raw: np.ndarray) -> np.ndarray:
    """Rotate ``U_raw`` onto ``U_ref`` by orthogonal Procrustes.

    Returns ``U_raw @ Q`` with ``Q`` the orthogonal matrix minimizing
    ``||U_raw Q - U_ref||_F``. Raises :class:`AlignmentError` when the largest
    principal angle between the two column spaces exceeds pi/4.
    """
    U_ref = np.asarray(U_ref, dtype=float)
    U_raw = np.asarray(U_raw, dtype=float)
    if U_ref.shape != U_raw.shape:
        raise DimensionError(f"shape mismatch {U_ref.shape} vs {U_raw.shape}")
    if U_raw.shape[1] == 0:
        return U_raw.copy()
    P, s, Qt = np.linalg.svd(U_raw.T @ U_ref)
    # singular values are the cosines of the principal angles
    if s[-1] < np.cos(MAX_ALIGN_ANGLE):
        angle = float(np.arccos(np.clip(s[-1], -1.0, 1.0)))
        raise AlignmentError(f"subspace angle {angle:.3f} rad exceeds pi/4")
    return U_raw @ (P @ Qt)


def basis_derivatives(cs: ConstraintSet, theta, basis: NullSpaceBasis,
                      method: str = "auto") -> BasisDerivatives:
    """Gradients ``V_m = d u_m / d theta`` of the basis field at ``theta``.

    ``method`` selects the route:

    ``"analytic"``
        the user's ``basis_grad`` (default when it exists);
    ``"field"``
        central differences of the user's analytic basis field, no alignment;
    ``"nullspace"``
        central differences of the SVD null-space basis of ``F``, each
        evaluation Procrustes-aligned to ``basis.U`` (default when no analytic
        basis is available).

    ``"auto"`` picks the first available of the three. Step size is
    ``cbrt(eps) * (1 + |theta_j|)`` per coordinate.
    """
    theta = cs._check(theta)
    M, D = cs.dim_param, cs.dim_tangent
    if not np.allclose(basis.anchor, theta, rtol=0, atol=1e-14 * (1 + np.linalg.norm(theta))):
        raise DimensionError("basis is anchored at a different point")
    if method == "auto":
        if cs.basis_grad is not None:
            method = "analytic"
        elif cs.basis is not None:
            method = "field"
        else:
            method = "nullspace"

    if cs.dim_constraint == 0:
        return BasisDerivatives(np.zeros((D, M, M)), method)

    if method == "analytic":
        if cs.basis_grad is None:
            raise ValueError("constraint set has no analytic basis gradient")
        V = np.asarray(cs.basis_grad(theta), dtype=float)
        if V.shape != (D, M, M):
            raise DimensionError(f"basis_grad returned shape {V.shape}")
        return BasisDerivatives(V, method)

    if method == "field":
        if cs.basis is None:
            raise ValueError("constraint set has no analytic basis field")
        evaluate = lambda t: _raw_basis(cs, t)  # noqa: E731
    elif method == "nullspace":
        evaluate = lambda t: align_basis(  # noqa: E731
            basis.U, _nullspace_of(cs.jac(t), M))
    else:
        raise ValueError(f"unknown method {method!r}")

    V = np.empty((D, M, M))
    for j in range(M):
        h = FD_STEP * (1.0 + abs(theta[j]))
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        dU = (evaluate(tp) - evaluate(tm)) / (tp[j] - tm[j])
        V[:, :, j] = dU.T
    return BasisDerivatives(V, method)


# ---------------------------------------------------------------------------
# builtin constraint sets


def sphere(rho: float = 1.0, dim: int = 3) -> ConstraintSet:
    """Norm constraint ``||theta||^2 - rho^2 = 0``.

    For ``dim == 3`` the analytic basis is
    ``u_1 = [t2, -t1, 0] / r`` and ``u_2 = [t1 t3, t2 t3, -r^2] / (r ||t||)``
    with ``r = sqrt(t1^2 + t2^2)``; it is undefined on the t3 axis.
    Other dimensions use the numeric provider.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")

    def f(t):
        return np.array([t @ t - rho**2])

    def jac(t):
        return 2.0 * t[None, :]

    if dim != 3:
        return ConstraintSet(dim, 1, f, jac, name="sphere")
    return ConstraintSet(3, 1, f, jac, basis=_sphere3_basis,
                         basis_grad=_sphere3_basis_grad, name="sphere")


def _polar_radius(t):
    r = np.hypot(t[0], t[1])
    if r <= 1e-12 * max(1.0, abs(t[2])):
        raise SingularChartError("sphere basis is undefined where theta_1 = theta_2 = 0")
    return r


def _sphere3_basis(t):
    r = _polar_radius(t)
    n = np.linalg.norm(t)
    u1 = np.array([t[1], -t[0], 0.0]) / r
    u2 = np.array([t[0] * t[2], t[1] * t[2], -r**2]) / (r * n)
    return np.column_stack([u1, u2])


def _sphere3_basis_grad(t):
    t1, t2, t3 = t
    r = _polar_radius(t)
    n = np.linalg.norm(t)
    V1 = np.array([[-t1 * t2, t1**2, 0.0],
                   [-t2**2, t1 * t2, 0.0],
                   [0.0, 0.0, 0.0]]) / r**3
    g = np.array([t1 * t3, t2 * t3, -r**2])
    dg = np.array([[t3, 0.0, t1],
                   [0.0, t3, t2],
                   [-2 * t1, -2 * t2, 0.0]])
    s = r * n
    ds = np.array([t1 * n / r + r * t1 / n,
                   t2 * n / r + r * t2 / n,
                   r * t3 / n])
    V2 = dg / s - np.outer(g, ds) / s**2
    return np.stack([V1, V2])


def amplitude(c: float) -> ConstraintSet:
    """Amplitude constraint ``theta_1^2 + theta_2^2 - c^2 = 0`` on ``[Re A, Im A, omega]``."""
    if c <= 0:
        raise ValueError("c must be positive")

    def f(t):
        return np.array([t[0]**2 + t[1]**2 - c**2])

    def jac(t):
        return 2.0 * np.array([[t[0], t[1], 0.0]])

    return ConstraintSet(3, 1, f, jac, basis=_amplitude_basis,
                         basis_grad=_amplitude_basis_grad, name="amplitude")


def _amplitude_basis(t):
    r = np.hypot(t[0], t[1])
    if r == 0.0:
        raise SingularChartError("amplitude basis is undefined at A = 0")
    return np.array([[t[1] / r, 0.0],
                     [-t[0] / r, 0.0],
                     [0.0, 1.0]])


def _amplitude_basis_grad(t):
    t1, t2 = t[0], t[1]
    r = np.hypot(t1, t2)
    if r == 0.0:
        raise SingularChartError("amplitude basis is undefined at A = 0")
    V1 = np.array([[-t1 * t2, t1**2, 0.0],
                   [-t2**2, t1 * t2, 0.0],
                   [0.0, 0.0, 0.0]]) / r**3
    return np.stack([V1, np.zeros((3, 3))])


def linear(A, b) -> ConstraintSet:
    """Affine constraints ``A theta + b = 0``; the basis is constant so every ``V_m = 0``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    K, M = A.shape
    if b.shape != (K,):
        raise DimensionError(f"b must have shape ({K},)")
    U = _nullspace_of(A, M)

    return ConstraintSet(
        M, K,
        f=lambda t: A @ t + b,
        jacobian=lambda t: A,
        basis=lambda t: U,
        basis_grad=lambda t: np.zeros((M - K, M, M)),
        name="linear",
    )


def unconstrained(dim: int) -> ConstraintSet:
    return ConstraintSet(dim, 0, f=lambda t: np.zeros(0),
                         jacobian=lambda t: np.zeros((0, dim)), name="unconstrained")


def sphere_point(rho: float, phi1: float, phi2: float) -> np.ndarray:
    """``rho * [cos phi1 sin phi2, sin phi1 sin phi2, cos phi2]``."""
    return rho * np.array([np.cos(phi1) * np.sin(phi2),
                           np.sin(phi1) * np.sin(phi2),
                           np.cos(phi2)])
