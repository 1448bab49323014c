"""CCRB and Lehmann-unbiased CCRB (LU-CCRB) on the weighted MSE.

Conventions: ``vec`` stacks columns, and the Kronecker product
``np.kron(A, B)`` has ``A[m, k] * B`` as its (m, k) block, so the
coefficient vector ``c = [c_1; ...; c_{M-K}]`` pairs block m with ``u_m``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, NotPSDError

REGULARITY_TOL = 1e-8


class RegularityWarning(UserWarning):
    """``R(U^T) ⊄ R(U^T J U)``: the CCRB regularity assumption fails."""


def pinv(A, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``rel_tol * sigma_max`` are treated as zero. The
    default ``rel_tol`` is ``64 * max(rows, cols) * eps``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return np.zeros(A.shape[::-1])
    if rel_tol is None:
        rel_tol = 64 * max(A.shape) * np.finfo(float).eps
    return np.linalg.pinv(A, rcond=rel_tol)


def psd_pinv(A, rel_tol: float | None = None) -> np.ndarray:
    """Pseudo-inverse of a symmetric PSD matrix via ``eigh``.

    Eigenvalues at or below ``rel_tol * lambda_max`` (default
    ``64 * n * eps``) are treated as zero. For ill-conditioned PSD matrices
    this is markedly more accurate than the SVD route, whose left and right
    singular vectors for tiny singular values need not agree.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if rel_tol is None:
        rel_tol = 64 * n * np.finfo(float).eps
    lam, Q = np.linalg.eigh(0.5 * (A + A.T))
    lam_max = float(np.max(np.abs(lam)))
    keep = lam > rel_tol * lam_max if lam_max > 0 else np.zeros(n, bool)
    return (Q[:, keep] / lam[keep]) @ Q[:, keep].T


@dataclass(frozen=True)
class WeightMatrix:
    """PSD weighting matrix with cached square root and pseudo-inverse."""

    W: np.ndarray
    sqrt: np.ndarray
    pinv: np.ndarray

    @property
    def dim(self) -> int:
        return self.W.shape[0]


def psd_sqrt_and_pinv(W, rel_tol: float | None = None) -> WeightMatrix:
    """Build a :class:`WeightMatrix` from a symmetric PSD ``W``.

    Eigenvalues in ``[-1e-10 lambda_max, 0)`` are clipped to zero; eigenvalues
    below ``rel_tol * lambda_max`` are ignored by the pseudo-inverse.

    Raises
    ------
    NotPSDError
        An eigenvalue is below ``-1e-10 * lambda_max``.
    """
    if isinstance(W, WeightMatrix):
        return W
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n = W.shape[0]
    if W.shape != (n, n):
        raise DimensionError("W must be square")
    if not np.all(np.isfinite(W)):
        raise InvalidInputError("W has non-finite entries")
    if np.max(np.abs(W - W.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(W), initial=0.0)):
        raise NotPSDError("W is not symmetric")
    W = 0.5 * (W + W.T)
    lam, Q = np.linalg.eigh(W)
    lam_max = max(float(np.max(np.abs(lam), initial=0.0)), 0.0)
    if lam_max > 0 and lam.min() < -1e-10 * lam_max:
        raise NotPSDError(f"W has eigenvalue {lam.min():.3g} < 0")
    lam = np.clip(lam, 0.0, None)
    if rel_tol is None:
        rel_tol = 64 * n * np.finfo(float).eps
    keep = lam > rel_tol * lam_max if lam_max > 0 else np.zeros(n, bool)
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    sqrt = (Q * np.sqrt(lam)) @ Q.T
    return WeightMatrix(W=W, sqrt=0.5 * (sqrt + sqrt.T), pinv=(Q * inv) @ Q.T)


def _check_inputs(J, U, W):
    J = np.asarray(J, dtype=float)
    U = np.asarray(U, dtype=float)
    W = psd_sqrt_and_pinv(W)
    M = U.shape[0]
    if J.shape != (M, M) or W.dim != M:
        raise DimensionError(f"J {J.shape}, U {U.shape} and W ({W.dim}) disagree")
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(U))):
        raise InvalidInputError("J or U has non-finite entries")
    return J, U, W


def regularity_residual(J, U) -> float:
    """Residual of ``R(U^T) ⊆ R(U^T J U)``: ``||(I - P_{U^T J U}) U^T||_max``."""
    UJU = U.T @ J @ U
    P = UJU @ psd_pinv(UJU)
    R = U.T - P @ U.T
    return float(np.max(np.abs(R), initial=0.0))


def ccrb(J, U, W) -> tuple[np.ndarray, float]:
    """Constrained CRB.

    Returns
    -------
    B : ndarray, shape (M, M)
        ``U (U^T J U)^+ U^T``.
    wmse : float
        ``Tr((U^T J U)^+ (U^T W U))``.
    """
    J, U, W = _check_inputs(J, U, W)
    if regularity_residual(J, U) > REGULARITY_TOL:
        warnings.warn("R(U^T) is not contained in R(U^T J U); the CCRB may not be a bound",
                      RegularityWarning, stacklevel=2)
    UJU_pinv = psd_pinv(U.T @ J @ U)
    B = U @ UJU_pinv @ U.T
    return 0.5 * (B + B.T), float(np.trace(UJU_pinv @ (U.T @ W.W @ U)))


@dataclass(frozen=True)
class LUBound:
    value: float
    S: np.ndarray        # (M-K, M, M-K), S[m] = S^(m)_W
    C: np.ndarray        # ((M-K)^2, (M-K)^2)
    Gamma: np.ndarray    # ((M-K)^2, (M-K)^2)
    psi: np.ndarray      # vec(U^T W U)
    coef: np.ndarray     # Gamma^+ psi, blocks of length M-K


def lu_ccrb(J, U, V: Sequence[np.ndarray], W) -> LUBound:
    """Lehmann-unbiased CCRB ``psi^T Gamma^+ psi`` and its intermediates.

    Parameters
    ----------
    J : (M, M) Fisher information.
    U : (M, D) orthonormal null-space basis, ``D = M - K``.
    V : sequence of D arrays (M, M), the column gradients of ``U``.
    W : PSD weighting matrix or :class:`WeightMatrix`.
    """
    J, U, W = _check_inputs(J, U, W)
    M, D = U.shape
    V = np.asarray([np.asarray(v, dtype=float) for v in V]).reshape(-1, M, M)
    if V.shape[0] != D:
        raise DimensionError(f"expected {D} gradient matrices, got {V.shape[0]}")
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("V has non-finite entries")

    A = W.sqrt @ U
    P_perp = np.eye(M) - A @ pinv(A)
    lead = W.pinv @ W.sqrt @ P_perp @ W.sqrt
    S = np.einsum("ij,mjk,kl->mil", lead, V, U)
    S_all = np.concatenate(list(S), axis=1) if D else np.zeros((M, 0))
    C = S_all.T @ W.W @ S_all
    UWU = U.T @ W.W @ U
    UJU = U.T @ J @ U
    Gamma = C + np.kron(UWU, UJU)
    Gamma = 0.5 * (Gamma + Gamma.T)
    psi = UWU.flatten(order="F")
    coef = psd_pinv(Gamma) @ psi
    value = float(psi @ coef)
    if not np.isfinite(value):
        raise InvalidInputError("LU-CCRB evaluated to a non-finite value")
    return LUBound(value=max(value, 0.0), S=S, C=C, Gamma=Gamma, psi=psi, coef=coef)


@dataclass(frozen=True)
class BoundReport:
    ccrb_matrix: np.ndarray
    ccrb_wmse: float
    lu_ccrb: float
    U: np.ndarray
    V: np.ndarray
    S: np.ndarray
    C: np.ndarray
    Gamma: np.ndarray
    psi: np.ndarray
    coef: np.ndarray

    def as_dict(self) -> dict:
        return {
            "ccrb_wmse": self.ccrb_wmse,
            "lu_ccrb": self.lu_ccrb,
            "ratio": self.lu_ccrb / self.ccrb_wmse if self.ccrb_wmse > 0 else None,
            "ccrb_matrix": self.ccrb_matrix.tolist(),
            "U": self.U.tolist(),
            "Gamma": self.Gamma.tolist(),
            "psi": self.psi.tolist(),
        }


def bound_report(J, U, V, W) -> BoundReport:
    """Evaluate both bounds at one point."""
    B, wmse = ccrb(J, U, W)
    lu = lu_ccrb(J, U, V, W)
    return BoundReport(ccrb_matrix=B, ccrb_wmse=wmse, lu_ccrb=lu.value,
                       U=np.asarray(U, dtype=float),
                       V=np.asarray([np.asarray(v, dtype=float) for v in V]),
                       S=lu.S, C=lu.C, Gamma=lu.Gamma, psi=lu.psi, coef=lu.coef)


# ---------------------------------------------------------------------------
# closed forms for the two worked examples


def ccrb_sphere_trace(H, sigma2, U) -> float:
    """``sigma2 * Tr((U^T H^T H U)^-1)``."""
    H = np.asarray(H, dtype=float)
    G = U.T @ H.T @ H @ U
    try:
        return float(sigma2 * np.trace(np.linalg.inv(G)))
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("U^T H^T H U is singular") from exc


def lu_ccrb_sphere_closed_form(H, sigma2, rho, U) -> float:
    """LU-CCRB on the MSE trace under a norm constraint, ``(1/rho^2 + 1/Tr B)^-1``."""
    return 1.0 / (1.0 / rho**2 + 1.0 / ccrb_sphere_trace(H, sigma2, U))


def ccrb_sinusoid_closed_form(l1, L, sigma2) -> float:
    """CCRB on the amplitude WMSE for the constrained complex sinusoid."""
    return sigma2 * (6 * l1**2 + 6 * (L - 1) * l1 + (2 * L - 1) * (L - 1)) / (L * (L - 1) * (L + 1))


def lu_ccrb_sinusoid_closed_form(l1, L, sigma2, c) -> float:
    if L < 2 or c <= 0:
        raise ValueError("need L >= 2 and c > 0")
    return 1.0 / (1.0 / c**2 + 1.0 / ccrb_sinusoid_closed_form(l1, L, sigma2))
