"""Empirical bias, bias gradient and unbiasedness checks.

The bias gradient uses the score identity
``D(theta0) = E[(theta_hat - theta0) score(x, theta0)^T] - I``, so every
residual below is the sample mean of a per-trial quantity and has an exact
per-entry Monte-Carlo standard error. A condition passes when each entry
satisfies ``|value| <= k * stderr + atol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import psd_sqrt_and_pinv
from .errors import DimensionError
from .montecarlo import TrialBatch, TrialConfig, _stderr, run_trials

DEFAULT_K = 4.0
ATOL = 1e-12


def _mean_se(samples):
    return samples.mean(axis=0), _stderr(samples)


@dataclass(frozen=True)
class BiasReport:
    """Bias-related estimates at one point, each with matching std errors.

    ``c_cond2[m]`` is ``b^T W V_m U + u_m^T W D U`` (length ``M-K``).
    """

    trials: int
    failures: int
    bias: np.ndarray
    bias_se: np.ndarray
    bias_gradient: np.ndarray
    bias_gradient_se: np.ndarray
    DU: np.ndarray
    DU_se: np.ndarray
    c_bias: np.ndarray
    c_bias_se: np.ndarray
    c_cond2: np.ndarray | None = None
    c_cond2_se: np.ndarray | None = None

    @property
    def x_cond1_residual(self) -> float:
        return float(np.linalg.norm(self.bias))

    @property
    def x_cond2_residual(self) -> float:
        return float(np.max(np.abs(self.DU), initial=0.0))

    @property
    def c_cond1_residual(self) -> float:
        return float(np.linalg.norm(self.c_bias))

    @property
    def c_cond2_residuals(self) -> np.ndarray:
        if self.c_cond2 is None:
            raise ValueError("report was built without basis gradients")
        return np.linalg.norm(self.c_cond2, axis=1)


def bias_report(batch: TrialBatch, U, V=None, W=None) -> BiasReport:
    """Build a :class:`BiasReport` from stored trials.

    Parameters
    ----------
    batch : TrialBatch
    U : (M, D) null-space basis at ``batch.theta``.
    V : (D, M, M), optional
        Basis gradients, needed for the second C-unbiasedness condition.
    W : weighting matrix, defaults to ``batch.W``.
    """
    U = np.asarray(U, dtype=float)
    M, D = U.shape
    if batch.theta.size != M:
        raise DimensionError("U does not match the parameter dimension")
    W = batch.W if W is None else psd_sqrt_and_pinv(W).W
    e, s = batch.errors, batch.scores
    if e.shape[0] < 2:
        raise ValueError("need at least two successful trials")

    bias, bias_se = _mean_se(e)
    outer = e[:, :, None] * s[:, None, :]
    G, G_se = _mean_se(outer)
    sU = s @ U
    DU, DU_se = _mean_se(e[:, :, None] * sU[:, None, :])
    cb, cb_se = _mean_se(e @ W @ U)

    c2 = c2_se = None
    if V is not None:
        V = np.asarray(V, dtype=float).reshape(D, M, M)
        WU = W @ U
        # per trial: e^T W V_m U + (u_m^T W e) (s^T U) - u_m^T W U
        first = np.einsum("ni,ij,mjk,kl->nml", e, W, V, U)
        second = (e @ WU)[:, :, None] * sU[:, None, :]
        c2, c2_se = _mean_se(first + second - (U.T @ WU)[None])

    return BiasReport(trials=batch.trials, failures=batch.failures,
                      bias=bias, bias_se=bias_se,
                      bias_gradient=G - np.eye(M), bias_gradient_se=G_se,
                      DU=DU - U, DU_se=DU_se, c_bias=cb, c_bias_se=cb_se,
                      c_cond2=c2, c_cond2_se=c2_se)


def _within(value, se, k) -> bool:
    return bool(np.all(np.abs(value) <= k * se + ATOL))


def _max_z(value, se) -> float:
    value, se = np.abs(np.asarray(value)), np.asarray(se)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(value <= ATOL, 0.0, value / se)
    return float(np.max(z, initial=0.0))


@dataclass(frozen=True)
class ConditionCheck:
    cond1: bool
    cond2: bool
    z1: float          # largest |value| / stderr over the entries
    z2: float

    @property
    def passed(self) -> bool:
        return self.cond1 and self.cond2


def check_x_unbiasedness(report: BiasReport, U=None, k: float = DEFAULT_K) -> ConditionCheck:
    """Zero bias and zero ``D U`` within ``k`` standard errors.

    ``U`` is accepted for symmetry with :func:`check_c_unbiasedness`; the
    report already carries ``D U``.
    """
    if U is not None and np.asarray(U).shape != report.DU.shape:
        raise DimensionError("U does not match the report")
    return ConditionCheck(cond1=_within(report.bias, report.bias_se, k),
                          cond2=_within(report.DU, report.DU_se, k),
                          z1=_max_z(report.bias, report.bias_se),
                          z2=_max_z(report.DU, report.DU_se))


def check_c_unbiasedness(report: BiasReport, U=None, V=None, W=None,
                         k: float = DEFAULT_K) -> ConditionCheck:
    """Zero C-bias ``U^T W b`` and the first-order condition for every ``m``.

    The report must have been built with the same ``U``, ``V`` and ``W``.
    """
    if report.c_cond2 is None:
        raise ValueError("report was built without basis gradients")
    return ConditionCheck(cond1=_within(report.c_bias, report.c_bias_se, k),
                          cond2=_within(report.c_cond2, report.c_cond2_se, k),
                          z1=_max_z(report.c_bias, report.c_bias_se),
                          z2=_max_z(report.c_cond2, report.c_cond2_se))


def empirical_bias(estimator, model, theta0, trials: int, seed: int = 0, workers: int = 1):
    """Sample mean of ``theta_hat - theta0`` and its per-coordinate std errors."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    batch = run_trials(model, theta0, estimator, cfg=TrialConfig(seed, trials, workers))
    return batch.bias, batch.bias_stderr


def empirical_bias_gradient(estimator, model, theta0, trials: int, seed: int = 0,
                            workers: int = 1):
    """``mean((theta_hat - theta0) score^T) - I`` and per-entry std errors."""
    if trials < 2:
        raise ValueError("trials must be >= 2")
    batch = run_trials(model, theta0, estimator, cfg=TrialConfig(seed, trials, workers))
    outer = batch.errors[:, :, None] * batch.scores[:, None, :]
    G, se = _mean_se(outer)
    return G - np.eye(batch.theta.size), se
