"""Reproducible Monte-Carlo trials and risk estimates.

Trial ``i`` draws its observation from a Philox stream keyed by ``seed`` with
counter offset ``i``, so any trial can be regenerated on its own. Per-trial
errors and scores are stored in trial order and reduced in that order, which
makes every result bit-identical for a given ``(seed, trials)`` whatever the
number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import psd_sqrt_and_pinv
from .errors import CCBoundsError, DiagnosticError
from .models import ParametricModel

MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class TrialConfig:
    seed: int = 0
    trials: int = 10_000
    workers: int = 1

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial (stream id = trial index)."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(trial)]))


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial errors ``theta_hat - theta`` and scores at ``theta``.

    Failed trials are dropped from ``errors``/``scores`` and counted in
    ``failures``.
    """

    theta: np.ndarray
    W: np.ndarray
    errors: np.ndarray
    scores: np.ndarray
    trials: int
    failures: int
    seed: int
    wse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = self.errors
        object.__setattr__(self, "wse", np.einsum("ni,ij,nj->n", e, self.W, e))

    @property
    def n(self) -> int:
        return self.errors.shape[0]

    @property
    def mse_matrix(self) -> np.ndarray:
        return self.errors.T @ self.errors / self.n

    @property
    def wmse(self) -> float:
        """``Tr(W mse_matrix)``."""
        return float(np.sum(self.W * self.mse_matrix))

    @property
    def wmse_stderr(self) -> float:
        if self.n < 2:
            return float("nan")
        return float(np.std(self.wse, ddof=1) / np.sqrt(self.n))

    @property
    def mse_trace(self) -> float:
        return float(np.trace(self.mse_matrix))

    @property
    def mse_trace_stderr(self) -> float:
        if self.n < 2:
            return float("nan")
        return float(np.std(np.sum(self.errors**2, axis=1), ddof=1) / np.sqrt(self.n))

    @property
    def bias(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def bias_stderr(self) -> np.ndarray:
        return _stderr(self.errors)


def _stderr(samples) -> np.ndarray:
    n = samples.shape[0]
    if n < 2:
        return np.full(samples.shape[1:], np.nan)
    return np.std(samples, axis=0, ddof=1) / np.sqrt(n)


def run_trials(model: ParametricModel, theta, estimator, W=None,
               cfg: TrialConfig = TrialConfig()) -> TrialBatch:
    """Run ``cfg.trials`` independent trials of ``estimator`` at ``theta``.

    Parameters
    ----------
    model : ParametricModel
    theta : array_like, shape (M,)
        True parameter.
    estimator : callable
        ``x -> theta_hat``. Raising a package error or ``ArithmeticError``
        marks the trial as failed.
    W : array_like, optional
        PSD weighting matrix, identity by default.
    cfg : TrialConfig

    Raises
    ------
    DiagnosticError
        More than 1% of the trials failed.
    """
    theta = model._theta(theta)
    M = theta.size
    W = np.eye(M) if W is None else psd_sqrt_and_pinv(W).W
    n = int(cfg.trials)
    errors = np.empty((n, M))
    scores = np.empty((n, M))
    ok = np.ones(n, dtype=bool)

    def work(indices):
        for i in indices:
            x = model.sample(theta, trial_rng(cfg.seed, i))
            scores[i] = model.score(x, theta)
            try:
                est = np.asarray(estimator(x), dtype=float)
            except (CCBoundsError, ArithmeticError):
                ok[i] = False
                continue
            if est.shape != (M,) or not np.all(np.isfinite(est)):
                ok[i] = False
                continue
            errors[i] = est - theta

    workers = min(int(cfg.workers), n)
    if workers == 1:
        work(range(n))
    else:
        chunks = np.array_split(np.arange(n), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))

    failures = int(n - ok.sum())
    if failures > MAX_FAILURE_RATE * n:
        raise DiagnosticError(f"{failures} of {n} trials failed")
    return TrialBatch(theta=theta, W=W, errors=errors[ok], scores=scores[ok],
                      trials=n, failures=failures, seed=int(cfg.seed))
