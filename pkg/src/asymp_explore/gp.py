"""Sliding-window Gaussian-process regressor for information gain.

Features are raw ``(n_free, n_occupied, n_unknown)`` counts, rescaled per
dimension into the unit cube spanned by the current window. The prior mean is
the window's empirical mean gain; only the posterior mean is used.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass(frozen=True)
class GpHyperparams:
    sigma_f2: float = 1.0
    length_scale: float = 0.3
    sigma_n2: float = 0.01
    window: int = 200

    def __post_init__(self):
        if min(self.sigma_f2, self.length_scale, self.sigma_n2) <= 0 or self.window < 1:
            raise ValueError("GP hyperparameters must be positive and window >= 1")


def normalize(x, x_min, x_max) -> np.ndarray:
    """Element-wise ``(x - min) / (max - min)``; flat dimensions map to 0.5."""
    x = np.asarray(x, dtype=np.float64)
    lo = np.asarray(x_min, dtype=np.float64)
    span = np.asarray(x_max, dtype=np.float64) - lo
    flat = span <= 0
    safe = np.where(flat, 1.0, span)
    return np.where(flat, 0.5, (x - lo) / safe)


def kernel(a, b, hp: GpHyperparams) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(hp.sigma_f2 * np.exp(-np.dot(d, d) / (2.0 * hp.length_scale ** 2)))


def kernel_matrix(A, B, hp: GpHyperparams) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
    return hp.sigma_f2 * np.exp(-d2 / (2.0 * hp.length_scale ** 2))


class GpWindow:
    """FIFO window of (features, gain) samples with a cached Cholesky solve."""

    def __init__(self, hp: GpHyperparams = GpHyperparams()):
        self.hp = hp
        self._X: deque = deque(maxlen=hp.window)
        self._y: deque = deque(maxlen=hp.window)
        self.x_min = np.zeros(3)
        self.x_max = np.zeros(3)
        self.mu = 0.0
        self.X_norm = np.zeros((0, 3))
        self.K = np.zeros((0, 0))
        self.factor = None
        self.alpha = np.zeros(0)

    def __len__(self) -> int:
        return len(self._y)

    @property
    def X(self) -> np.ndarray:
        return np.array(self._X, dtype=np.float64).reshape(-1, 3)

    @property
    def y(self) -> np.ndarray:
        return np.array(self._y, dtype=np.float64)

    def observe(self, x, gain: float) -> "GpWindow":
        gain = float(gain)
        if not np.isfinite(gain):
            raise ValueError("observed gain must be finite")
        self._X.append(np.asarray(x, dtype=np.float64).reshape(3))
        self._y.append(gain)
        self._refit()
        return self

    def _refit(self) -> None:
        X, y = self.X, self.y
        self.x_min = X.min(axis=0)
        self.x_max = X.max(axis=0)
        self.mu = float(y.mean())
        self.X_norm = normalize(X, self.x_min, self.x_max)
        self.K = kernel_matrix(self.X_norm, self.X_norm, self.hp)
        A = self.K + self.hp.sigma_n2 * np.eye(len(y))
        try:
            self.factor = cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            self.factor = cho_factor(A + 1e-10 * np.eye(len(y)), lower=True)
        self.alpha = cho_solve(self.factor, y - self.mu)

    def predict(self, x_c) -> float:
        """Posterior predictive mean; the prior mean 0 for an empty window."""
        if len(self) == 0:
            return 0.0
        xn = normalize(x_c, self.x_min, self.x_max)
        k_c = kernel_matrix(xn, self.X_norm, self.hp)[0]
        return self.mu + float(k_c @ self.alpha)

    def predict_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64).reshape(-1, 3)
        if len(self) == 0:
            return np.zeros(xs.shape[0])
        xn = normalize(xs, self.x_min, self.x_max)
        return self.mu + kernel_matrix(xn, self.X_norm, self.hp) @ self.alpha
