"""Spatial and random grids and the moment field living on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SpatialGrid", "RandomGrid", "MomentField"]

BOUNDARIES = ("free", "periodic")


@dataclass(frozen=True)
class SpatialGrid:
    x_lo: float
    x_hi: float
    n_x: int
    boundary: str = "free"

    def __post_init__(self):
        if self.n_x < 3:
            raise ValueError(f"need at least 3 spatial cells, got {self.n_x}")
        if not self.x_hi > self.x_lo:
            raise ValueError("x_hi must exceed x_lo")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_x

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def ghost_centers(self) -> np.ndarray:
        """Centers of the cells ``0..n_x+1`` including one ghost per side."""
        x = self.centers
        if self.boundary == "periodic":
            return np.concatenate([x[-1:], x, x[:1]])
        return np.concatenate([[x[0] - self.dx], x, [x[-1] + self.dx]])

    def pad(self, values: np.ndarray) -> np.ndarray:
        """Append ghost cells along axis 1."""
        if self.boundary == "periodic":
            left, right = values[:, -1:], values[:, :1]
        else:
            left, right = values[:, :1], values[:, -1:]
        return np.concatenate([left, values, right], axis=1)


@dataclass(frozen=True)
class RandomGrid:
    xi_lo: float
    xi_hi: float
    n_xi: int

    def __post_init__(self):
        if self.n_xi < 1:
            raise ValueError(f"need at least one random cell, got {self.n_xi}")
        if not self.xi_hi > self.xi_lo:
            raise ValueError("xi_hi must exceed xi_lo")

    @property
    def dxi(self) -> float:
        return (self.xi_hi - self.xi_lo) / self.n_xi

    @property
    def centers(self) -> np.ndarray:
        return self.xi_lo + (np.arange(self.n_xi) + 0.5) * self.dxi

    @property
    def p0(self) -> float:
        """Uniform density of xi."""
        return 1.0 / (self.xi_hi - self.xi_lo)


@dataclass
class MomentField:
    """Conditional means, shape ``(n_xi, n_x, n)``."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[..., None]
        if self.values.ndim != 3:
            raise ValueError(f"moment field must be 3-d, got shape {self.values.shape}")

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    def copy(self) -> "MomentField":
        return MomentField(self.values.copy(), self.time)
