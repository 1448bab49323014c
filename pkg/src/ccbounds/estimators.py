"""Constrained-ML and bound-attaining estimators for the builtin examples.

Each ``make_*`` factory binds the model context and returns an
:class:`Estimator`, a named callable ``x -> theta_hat``. The plain functions
take every argument explicitly and are what the factories wrap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds as bd
from .errors import ConvergenceError, DegenerateObservationError, DimensionError
from .manifold import ConstraintSet, basis_derivatives, null_space_basis
from .models import ComplexSinusoidModel, ParametricModel, as_complex

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Estimator:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x) -> np.ndarray:
        return self.fn(x)


def _orthogonal_beta(H, atol=1e-10) -> float:
    G = H.T @ H
    beta = float(np.mean(np.diag(G)))
    if np.max(np.abs(G - beta * np.eye(G.shape[0]))) > atol * max(1.0, beta):
        raise ValueError("H^T H is not a multiple of the identity")
    return beta


# ---------------------------------------------------------------------------
# linear model with norm constraint


def ml_linear_unconstrained(x, H, beta) -> np.ndarray:
    """Unconstrained ML ``H^T x / beta`` for ``H^T H = beta I``."""
    return np.asarray(H).T @ np.asarray(x) / beta


def cml_sphere_orthogonal(x, H, beta, rho) -> np.ndarray:
    """CML under ``||theta|| = rho`` when ``H^T H = beta I``: ``rho H^T x / ||H^T x||``."""
    g = np.asarray(H).T @ np.asarray(x)
    n = np.linalg.norm(g)
    if n == 0.0:
        raise DegenerateObservationError("H^T x = 0")
    return rho * g / n


def cml_sphere_general(x, H, rho, *, tol=1e-10, max_iter=200) -> np.ndarray:
    """CML ``argmin ||x - H theta||^2`` s.t. ``||theta|| = rho`` for general ``H``.

    Solves the boundary trust-region subproblem through the secular equation
    ``||(H^T H + mu I)^-1 H^T x|| = rho`` on ``mu > -lambda_min(H^T H)``, using
    Newton steps on ``1/||theta(mu)|| - 1/rho`` safeguarded by bisection.
    The hard case (gradient orthogonal to the lowest eigenspace) is completed
    with a component along that eigenspace.

    Raises
    ------
    ConvergenceError
        No root within ``max_iter`` iterations.
    """
    H = np.asarray(H, dtype=float)
    g = H.T @ np.asarray(x, dtype=float)
    lam, Q = np.linalg.eigh(H.T @ H)
    gt = Q.T @ g
    lam1 = lam[0]
    crit = np.abs(lam - lam1) <= 1e-12 * max(1.0, abs(lam[-1]))
    g_crit = float(np.linalg.norm(gt[crit]))
    g_norm = float(np.linalg.norm(g))

    if g_crit <= 1e-14 * max(g_norm, 1e-300):
        rest = ~crit
        y = np.zeros_like(gt)
        y[rest] = gt[rest] / (lam[rest] - lam1)
        n_rest = np.linalg.norm(y)
        if n_rest <= rho:
            y[np.flatnonzero(crit)[0]] = np.sqrt(rho**2 - n_rest**2)
            return Q @ y

    def norm_at(mu):
        return np.linalg.norm(gt / (lam + mu))

    lo = g_crit / rho - lam1
    hi = g_norm / rho - lam1
    mu = hi
    for _ in range(max_iter):
        d = lam + mu
        y = gt / d
        n = np.linalg.norm(y)
        if abs(n - rho) <= tol * rho:
            return rho * (Q @ y) / n
        if n > rho:
            lo = mu
        else:
            hi = mu
        phi = 1.0 / n - 1.0 / rho
        dphi = np.sum(gt**2 / d**3) / n**3
        step = mu - phi / dphi if dphi > 0 else np.nan
        mu = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mu)):
            n = norm_at(mu)
            if abs(n - rho) <= 1e3 * tol * rho:
                return rho * (Q @ (gt / (lam + mu))) / n
    raise ConvergenceError(f"secular equation did not converge in {max_iter} iterations")


def make_ml_linear(H) -> Estimator:
    H = np.asarray(H, dtype=float)
    beta = _orthogonal_beta(H)
    return Estimator("ml_linear", lambda x: H.T @ x / beta)


def make_cml_sphere(H, rho) -> Estimator:
    """Closed form when ``H^T H = beta I``, secular-equation solver otherwise."""
    H = np.asarray(H, dtype=float)
    try:
        beta = _orthogonal_beta(H)
    except ValueError:
        return Estimator("cml_sphere_general", lambda x: cml_sphere_general(x, H, rho))
    return Estimator("cml_sphere_orthogonal", lambda x: cml_sphere_orthogonal(x, H, beta, rho))


# ---------------------------------------------------------------------------
# complex sinusoid with amplitude constraint


def _dtft(z, index, omega):
    return np.mean(z * np.exp(-1j * index * omega))


def _golden_max(fun, a, b, tol):
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fun(x2)
    return 0.5 * (a + b)


def wrap_angle(w):
    """Map to ``[-pi, pi)``."""
    return (np.asarray(w) + np.pi) % (2 * np.pi) - np.pi


def periodogram_peak(x, l1, grid=2**14, tol=1e-10) -> float:
    """Frequency maximizing ``|Y(x, omega)|^2`` over the circle.

    A zero-padded FFT on ``grid`` points locates the peak, then golden-section
    search refines it inside one grid cell on either side.
    """
    z = as_complex(x)
    index = l1 + np.arange(z.size)
    spec = np.abs(np.fft.fft(z, grid)) ** 2
    k = int(np.argmax(spec))
    w0 = 2 * np.pi * k / grid
    cell = 2 * np.pi / grid
    w = _golden_max(lambda w: abs(_dtft(z, index, w)) ** 2, w0 - cell, w0 + cell, tol)
    return float(wrap_angle(w))


def cml_complex_sinusoid(x, l1, L, c, grid=2**14, tol=1e-10) -> np.ndarray:
    """CML of ``[Re A, Im A, omega]`` under ``|A| = c``.

    ``omega`` is the periodogram peak and the amplitude is ``c Y / |Y|`` at it.
    """
    z = as_complex(x)
    if z.size != L:
        raise DimensionError(f"expected {L} complex samples, got {z.size}")
    w = periodogram_peak(x, l1, grid=grid, tol=tol)
    Y = _dtft(z, l1 + np.arange(L), w)
    if abs(Y) == 0.0:
        raise DegenerateObservationError("Y(x, omega) = 0 at the periodogram peak")
    return np.array([c * Y.real / abs(Y), c * Y.imag / abs(Y), w])


def make_cml_sinusoid(model: ComplexSinusoidModel, c, grid=2**14) -> Estimator:
    return Estimator("cml_sinusoid",
                     lambda x: cml_complex_sinusoid(x, model.l1, model.L, c, grid=grid))


# ---------------------------------------------------------------------------
# locally defined, bound-attaining estimators


def make_ccrb_efficient(theta0, model: ParametricModel, cs: ConstraintSet) -> Estimator:
    """``theta0 + U (U^T J U)^+ U^T score(x, theta0)``, everything evaluated at ``theta0``."""
    theta0 = np.asarray(theta0, dtype=float)
    U = null_space_basis(cs, theta0).U
    gain = U @ bd.psd_pinv(U.T @ model.fim(theta0) @ U) @ U.T
    return Estimator("ccrb_efficient", lambda x: theta0 + gain @ model.score(x, theta0))


def make_lu_efficient(theta0, model: ParametricModel, cs: ConstraintSet, W) -> Estimator:
    """Estimator meeting the LU-CCRB equality condition at ``theta0``.

    ``theta0 + sum_m (S_m + T_m(x)) c_m`` with ``c = Gamma^+ vec(U^T W U)``
    and ``T_m = W^+ W u_m score^T U``. For singular ``W`` only the weighted
    part of the error is pinned down; this is the representative given by
    the sum itself.
    """
    theta0 = np.asarray(theta0, dtype=float)
    W = bd.psd_sqrt_and_pinv(W)
    nb = null_space_basis(cs, theta0)
    V = basis_derivatives(cs, theta0, nb)
    lu = bd.lu_ccrb(model.fim(theta0), nb.U, V.V, W)
    D = nb.U.shape[1]
    coef = lu.coef.reshape(D, D)           # row m is c_m
    offset = np.einsum("mij,mj->i", lu.S, coef)
    gain = W.pinv @ W.W @ nb.U @ coef @ nb.U.T
    return Estimator("lu_efficient", lambda x: theta0 + offset + gain @ model.score(x, theta0))


def ccrb_efficient_estimator(x, theta0, model, cs) -> np.ndarray:
    return make_ccrb_efficient(theta0, model, cs)(x)


def lu_efficient_estimator(x, theta0, model, cs, W) -> np.ndarray:
    return make_lu_efficient(theta0, model, cs, W)(x)


def constant(theta0) -> Estimator:
    """Oracle estimator that ignores the data."""
    theta0 = np.asarray(theta0, dtype=float)
    return Estimator("constant", lambda x: theta0.copy())


__all__ = [
    "Estimator",
    "ml_linear_unconstrained", "cml_sphere_orthogonal", "cml_sphere_general",
    "cml_complex_sinusoid", "periodogram_peak", "wrap_angle",
    "make_ml_linear", "make_cml_sphere", "make_cml_sinusoid",
    "make_ccrb_efficient", "make_lu_efficient",
    "ccrb_efficient_estimator", "lu_efficient_estimator", "constant",
]
