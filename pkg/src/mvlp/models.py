"""Conservation laws: flux, entropy, wave speed and phase-space box.

All callables are vectorized over a trailing state axis of length ``n``:
``flux(u, x)`` takes ``u`` of shape ``(..., n)`` and positions broadcastable
to ``u.shape[:-1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Entropy",
    "ModelSpec",
    "burgers_model",
    "euler_model",
    "discontinuous_flux_model",
    "quadratic_entropy",
    "kinetic_euler_entropy",
    "shifted_abs_entropy",
    "unit_entropy",
    "parse_entropy",
]


@dataclass(frozen=True)
class Entropy:
    """An entropy choice; ``c`` is only used by the shifted absolute value."""

    kind: str
    c: Optional[float] = None
    gamma: float = 1.5
    kappa: float = 1.0

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            if u.shape[-1] != 1:
                raise ValueError("quadratic entropy is scalar only")
            return 0.5 * u[..., 0] ** 2
        if self.kind == "shifted-abs":
            return np.abs(u[..., 0] - self.c)
        if self.kind == "unit":
            return np.ones(u.shape[:-1])
        if self.kind == "kinetic-euler":
            rho, q = u[..., 0], u[..., 1]
            return 0.5 * q**2 / rho + self.kappa * rho**self.gamma / (self.gamma - 1.0)
        raise ValueError(f"unknown entropy kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "shifted-abs":
            return f"abs:{self.c:g}"
        return self.kind

    def check_box(self, lo, hi) -> None:
        if self.kind == "shifted-abs" and not (lo[0] <= self.c <= hi[0]):
            raise ValueError(f"shift c={self.c} outside phase box [{lo[0]}, {hi[0]}]")


def quadratic_entropy() -> Entropy:
    return Entropy("quadratic")


def kinetic_euler_entropy(gamma: float = 1.5, kappa: float = 1.0) -> Entropy:
    return Entropy("kinetic-euler", gamma=gamma, kappa=kappa)


def shifted_abs_entropy(c: float) -> Entropy:
    return Entropy("shifted-abs", c=float(c))


def unit_entropy() -> Entropy:
    return Entropy("unit")


def parse_entropy(name: str, gamma: float = 1.5, kappa: float = 1.0) -> Entropy:
    """Entropy from a config name: ``quadratic``, ``kinetic-euler``, ``unit`` or ``abs:<c>``."""
    name = name.strip().lower()
    if name in ("quadratic", "kinetic-euler", "unit"):
        if name == "kinetic-euler":
            return kinetic_euler_entropy(gamma, kappa)
        return Entropy(name)
    if name.startswith("abs:"):
        return shifted_abs_entropy(float(name[4:]))
    raise ValueError(f"unknown entropy {name!r}")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    n: int
    flux: Callable
    spectral_radius: Callable
    phase_lo: tuple
    phase_hi: tuple
    default_entropy: Entropy
    x_dependent: bool = False

    def with_box(self, lo, hi) -> "ModelSpec":
        return ModelSpec(
            self.name, self.n, self.flux, self.spectral_radius,
            tuple(float(v) for v in np.atleast_1d(lo)),
            tuple(float(v) for v in np.atleast_1d(hi)),
            self.default_entropy, self.x_dependent,
        )


def _burgers_flux(u, x=None):
    return 0.5 * np.asarray(u, dtype=float) ** 2


def _burgers_speed(u):
    return np.abs(np.asarray(u, dtype=float)[..., 0])


def burgers_model(lo: float = -5.0, hi: float = 5.0) -> ModelSpec:
    return ModelSpec(
        "burgers", 1, _burgers_flux, _burgers_speed, (lo,), (hi,), quadratic_entropy()
    )


def euler_model(gamma: float = 1.5, kappa: float = 1.0,
                lo=(0.05, -1.0), hi=(2.5, 1.5)) -> ModelSpec:
    """Isentropic Euler in ``(rho, q)`` with pressure ``kappa * rho**gamma``."""
    if not gamma > 1.0 or not kappa > 0.0:
        raise ValueError("need gamma > 1 and kappa > 0")

    def flux(u, x=None):
        u = np.asarray(u, dtype=float)
        rho, q = u[..., 0], u[..., 1]
        assert np.all(rho > 0), "Euler flux evaluated at non-positive density"
        return np.stack([q, q**2 / rho + kappa * rho**gamma], axis=-1)

    def speed(u):
        u = np.asarray(u, dtype=float)
        rho, q = u[..., 0], u[..., 1]
        assert np.all(rho > 0), "Euler wave speed evaluated at non-positive density"
        c = np.sqrt(kappa * gamma * rho ** (gamma - 1.0))
        v = q / rho
        return np.maximum(np.abs(v + c), np.abs(v - c))

    return ModelSpec(
        "euler", 2, flux, speed, tuple(lo), tuple(hi), kinetic_euler_entropy(gamma, kappa)
    )


def _dflux(u, x):
    u = np.asarray(u, dtype=float)
    g = u * (1.0 - u)
    # Heaviside with H(0) = 1
    right = np.asarray(x, dtype=float)[..., None] >= 0.0
    return np.where(right, 1.1 * g, g)


def _dflux_speed(u):
    return 1.1 * np.abs(1.0 - 2.0 * np.asarray(u, dtype=float)[..., 0])


def discontinuous_flux_model(lo: float = -1.0, hi: float = 1.0) -> ModelSpec:
    """``u(1-u)`` left of ``x = 0`` and ``1.1 u(1-u)`` right of it."""
    return ModelSpec(
        "dflux", 1, _dflux, _dflux_speed, (lo,), (hi,), quadratic_entropy(), x_dependent=True
    )
