"""Parametric observation models: sampling, score and Fisher information.

Observations are real arrays. Complex observations are interleaved as
``[Re x_0, Im x_0, Re x_1, Im x_1, ...]`` so that ``x.view(complex)`` recovers
them without copying. Every method accepts a leading batch axis on ``x``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


class ParametricModel:
    """Interface for a parametric family ``f_x(x; theta)``.

    Subclasses provide ``sample``, ``log_pdf``, ``score`` and ``fim``.
    """

    dim_param: int
    dim_obs: int

    def sample(self, theta, rng: np.random.Generator, size=None) -> np.ndarray:
        raise NotImplementedError

    def log_pdf(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def score(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def fim(self, theta) -> np.ndarray:
        raise NotImplementedError

    def _theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim_param,):
            raise DimensionError(
                f"theta must have shape ({self.dim_param},), got {theta.shape}")
        return theta

    def _obs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim_obs:
            raise DimensionError(
                f"observation must have trailing size {self.dim_obs}, got {x.shape}")
        return x


class LinearGaussianModel(ParametricModel):
    """``x = H theta + n`` with ``n ~ N(0, sigma2 I)``."""

    def __init__(self, H, sigma2: float):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        N, M = H.shape
        if N < M or np.linalg.matrix_rank(H) < M:
            raise ValueError("H must have full column rank with N >= M")
        self.H = H
        self.sigma2 = float(sigma2)
        self.dim_param = M
        self.dim_obs = N

    def __repr__(self):
        return f"LinearGaussianModel(N={self.dim_obs}, M={self.dim_param}, sigma2={self.sigma2})"

    def stacked(self, copies: int) -> "LinearGaussianModel":
        """Model for ``copies`` i.i.d. observation vectors, ``H -> [H; ...; H]``."""
        return LinearGaussianModel(np.tile(self.H, (int(copies), 1)), self.sigma2)

    def sample(self, theta, rng, size=None):
        mean = self.H @ self._theta(theta)
        shape = (self.dim_obs,) if size is None else (size, self.dim_obs)
        return mean + np.sqrt(self.sigma2) * rng.standard_normal(shape)

    def log_pdf(self, x, theta):
        r = self._obs(x) - self.H @ self._theta(theta)
        return (-0.5 * np.sum(r * r, axis=-1) / self.sigma2
                - 0.5 * self.dim_obs * np.log(2 * np.pi * self.sigma2))

    def score(self, x, theta):
        r = self._obs(x) - self.H @ self._theta(theta)
        return r @ self.H / self.sigma2

    def fim(self, theta=None):
        return self.H.T @ self.H / self.sigma2


class ComplexSinusoidModel(ParametricModel):
    """``x_l = A exp(j l omega) + n_l`` for ``l = l1, ..., l1 + L - 1``.

    ``theta = [Re A, Im A, omega]`` and ``n_l`` is circular complex Gaussian
    with variance ``sigma2`` (``sigma2 / 2`` per real component).
    """

    dim_param = 3

    def __init__(self, l1: int, L: int, sigma2: float):
        if L < 2:
            raise ValueError("L must be at least 2")
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        self.l1 = int(l1)
        self.L = int(L)
        self.sigma2 = float(sigma2)
        self.index = np.arange(self.l1, self.l1 + self.L, dtype=float)
        self.dim_obs = 2 * self.L

    def __repr__(self):
        return f"ComplexSinusoidModel(l1={self.l1}, L={self.L}, sigma2={self.sigma2})"

    def signal(self, theta) -> np.ndarray:
        t = self._theta(theta)
        return (t[0] + 1j * t[1]) * np.exp(1j * self.index * t[2])

    def sample(self, theta, rng, size=None):
        s = self.signal(theta)
        shape = (self.dim_obs,) if size is None else (size, self.dim_obs)
        noise = np.sqrt(self.sigma2 / 2) * rng.standard_normal(shape)
        return interleave(s) + noise

    def _residual(self, x, theta):
        z = as_complex(self._obs(x))
        return z - self.signal(theta)

    def log_pdf(self, x, theta):
        r = self._residual(x, theta)
        return -np.sum(np.abs(r) ** 2, axis=-1) / self.sigma2 - self.L * np.log(np.pi * self.sigma2)

    def score(self, x, theta):
        t = self._theta(theta)
        r = self._residual(x, theta)
        e = np.exp(-1j * self.index * t[2])
        rz = r * e
        A = t[0] + 1j * t[1]
        k = 2.0 / self.sigma2
        s1 = k * np.sum(rz.real, axis=-1)
        s2 = k * np.sum(rz.imag, axis=-1)
        # Re{conj(r) * j l A e^{j l w}} = Re{conj(r e^{-j l w}) * j l A}
        s3 = k * np.sum((np.conj(rz) * (1j * self.index * A)).real, axis=-1)
        return np.stack([s1, s2, s3], axis=-1)

    def fim(self, theta):
        t = self._theta(theta)
        L, l1 = self.L, self.l1
        half = (2 * l1 + L - 1) / 2.0
        c2 = t[0] ** 2 + t[1] ** 2
        sum_l2 = float(np.sum(self.index ** 2))
        J = np.array([[1.0, 0.0, -t[1] * half],
                      [0.0, 1.0, t[0] * half],
                      [-t[1] * half, t[0] * half, c2 * sum_l2 / L]])
        return (2.0 * L / self.sigma2) * J


def interleave(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def as_complex(x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    return x.view(complex)


def fim_monte_carlo(model: ParametricModel, theta, trials: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Sample mean of ``score score^T`` over ``trials`` draws."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = model.sample(theta, rng, size=trials)
    s = model.score(x, theta)
    return s.T @ s / trials
