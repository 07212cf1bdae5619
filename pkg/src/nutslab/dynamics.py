"""Hamiltonian dynamics: generic leapfrog, the closed-form Gaussian leapfrog,
the exact Gaussian flow, and energy-error accounting.

For the canonical Gaussian target U(x) = |x|^2/2 a leapfrog step of size
h < 2 is an elliptical rotation at angular rate beta_h = arccos(1 - h^2/2)/h,
which gives a closed form for arbitrary iterates.  The generic integrator is
kept alongside as an oracle and for targets without a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "PhasePoint",
    "TargetModel",
    "LeapfrogConfig",
    "IntegrationError",
    "standard_gaussian",
    "hamiltonian",
    "leapfrog_step",
    "gaussian_leapfrog",
    "exact_gaussian_flow",
    "energy_error",
]

# rounding slack tolerated when clamping the arccos argument to [-1, 1]
_ARCCOS_SLACK = 1e-15


class IntegrationError(RuntimeError):
    """Non-finite state or gradient produced during leapfrog integration."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


def _vector(x) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("expected a one-dimensional vector of length >= 1")
    return v


@dataclass(frozen=True)
class PhasePoint:
    """A position/velocity pair in 2d-dimensional phase space."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vector(self.position))
        object.__setattr__(self, "velocity", _vector(self.velocity))
        if self.position.shape != self.velocity.shape:
            raise ValueError(
                "position and velocity must have equal length, got "
                f"{self.position.size} and {self.velocity.size}"
            )
        if not (np.isfinite(self.position).all() and np.isfinite(self.velocity).all()):
            raise ValueError("phase-space coordinates must be finite")

    @property
    def dimension(self) -> int:
        return self.position.size


@dataclass(frozen=True)
class TargetModel:
    """Target distribution exp(-U(x)) described by its potential and gradient."""

    dimension: int
    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    closed_form_flow_available: bool = False


def standard_gaussian(dimension: int) -> TargetModel:
    """The canonical Gaussian target, U(x) = |x|^2 / 2."""
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    return TargetModel(
        dimension=int(dimension),
        potential=lambda x: 0.5 * float(np.dot(x, x)),
        gradient=lambda x: x,
        closed_form_flow_available=True,
    )


def _clamped_arccos(value: float) -> float:
    if value > 1.0:
        if value - 1.0 > _ARCCOS_SLACK:
            raise ValueError(f"arccos argument {value} outside [-1, 1]")
        value = 1.0
    elif value < -1.0:
        if -1.0 - value > _ARCCOS_SLACK:
            raise ValueError(f"arccos argument {value} outside [-1, 1]")
        value = -1.0
    return math.acos(value)


@dataclass(frozen=True)
class LeapfrogConfig:
    """Leapfrog step size together with the derived rotation rate beta_h.

    The closed-form Gaussian leapfrog requires 0 < h < 2 (stability limit of
    the integrator for the unit-frequency oscillator), so the config rejects
    anything outside that range.
    """

    step_size: float

    def __post_init__(self):
        h = float(self.step_size)
        if not (0.0 < h < 2.0):
            raise ValueError(f"step size must lie in (0, 2), got {h}")
        object.__setattr__(self, "step_size", h)

    @property
    def beta_h(self) -> float:
        """Angular rate of the elliptical rotation; >= 1 and -> 1 as h -> 0."""
        h = self.step_size
        return _clamped_arccos(1.0 - 0.5 * h * h) / h

    @property
    def axis_scale(self) -> float:
        """The ellipse axis factor sqrt(1 - h^2/4)."""
        h = self.step_size
        return math.sqrt(1.0 - 0.25 * h * h)


def hamiltonian(point: PhasePoint, target: TargetModel) -> float:
    """Total energy H(x, v) = U(x) + |v|^2 / 2."""
    if point.dimension != target.dimension:
        raise ValueError(
            f"dimension mismatch: state has d={point.dimension}, "
            f"target expects d={target.dimension}"
        )
    return float(target.potential(point.position)) + 0.5 * float(
        np.dot(point.velocity, point.velocity)
    )


def _leapfrog_raw(
    x: np.ndarray, v: np.ndarray, h: float, target: TargetModel
) -> tuple[np.ndarray, np.ndarray]:
    """One velocity-half / position / velocity-half step; signed h allowed."""
    g = np.asarray(target.gradient(x), dtype=np.float64)
    if not np.isfinite(g).all():
        raise IntegrationError("non-finite gradient at step start")
    v_half = v - 0.5 * h * g
    x_new = x + h * v_half
    g_new = np.asarray(target.gradient(x_new), dtype=np.float64)
    if not np.isfinite(g_new).all():
        raise IntegrationError("non-finite gradient after position update")
    v_new = v_half - 0.5 * h * g_new
    return x_new, v_new


def leapfrog_step(point: PhasePoint, cfg: LeapfrogConfig, target: TargetModel) -> PhasePoint:
    """One generic leapfrog step of size cfg.step_size."""
    if point.dimension != target.dimension:
        raise ValueError("dimension mismatch between state and target")
    x, v = _leapfrog_raw(point.position, point.velocity, cfg.step_size, target)
    return PhasePoint(x, v)


def gaussian_leapfrog(point: PhasePoint, cfg: LeapfrogConfig, steps: int) -> PhasePoint:
    """Closed-form leapfrog iterate for the canonical Gaussian target.

    With t = steps * h the iterate is the elliptical rotation

        x_t = cos(beta_h t) x + sin(beta_h t) (1 - h^2/4)^(-1/2) v
        v_t = -sin(beta_h t) (1 - h^2/4)^(1/2) x + cos(beta_h t) v

    Negative ``steps`` runs time in reverse.
    """
    t = float(steps) * cfg.step_size
    angle = cfg.beta_h * t
    c, s = math.cos(angle), math.sin(angle)
    b = cfg.axis_scale
    x = c * point.position + (s / b) * point.velocity
    v = (-s * b) * point.position + c * point.velocity
    return PhasePoint(x, v)


def exact_gaussian_flow(point: PhasePoint, t: float) -> PhasePoint:
    """Exact Hamiltonian flow of the canonical Gaussian: rotation by angle t."""
    c, s = math.cos(t), math.sin(t)
    return PhasePoint(
        c * point.position + s * point.velocity,
        -s * point.position + c * point.velocity,
    )


def energy_error(point: PhasePoint, cfg: LeapfrogConfig, i: int) -> float:
    """Leapfrog energy error (H o Phi_h^i - H)(x, v) for the Gaussian target.

    The leapfrog preserves the modified Hamiltonian
    H_h(x, v) = H(x, v) - h^2 |x|^2 / 8, so the error equals
    (h^2/8) (|x_i|^2 - |x_0|^2) exactly.
    """
    h = cfg.step_size
    x0 = point.position
    xi = gaussian_leapfrog(point, cfg, i).position
    return 0.125 * h * h * float(np.dot(xi, xi) - np.dot(x0, x0))
