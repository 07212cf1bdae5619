"""Shell geometry, concentration events, step-size admissibility, stability
experiments, chi-squared statistics, and the mixing-bound calculator.

The canonical Gaussian concentrates in shells D_alpha = {| |x|^2 - d | <=
alpha}.  Within such a shell the U-turn dot products deviate from a sine by
at most (2/pi) * delta with delta = (pi/2)(5 max(alpha, r)/d + h^2), which
makes orbit selection state-independent whenever the step size keeps the
doubling times clear of the forbidden zones around 0 and pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .streams import chain_rng

__all__ = [
    "ShellParams",
    "MixingBoundParams",
    "StepsizeReport",
    "ExitStats",
    "in_shell",
    "concentration_event",
    "delta_bound",
    "k_star",
    "stepsize_condition_check",
    "exit_time_experiment",
    "mixing_bound",
    "chi_squared_stats",
    "default_shell",
    "typical_shell",
]


def delta_bound(alpha: float, r: float, dimension: int, h: float) -> float:
    """The sine-deviation scale delta = (pi/2)(5 max(alpha, r)/d + h^2)."""
    return 0.5 * math.pi * (5.0 * max(alpha, r) / dimension + h * h)


def k_star(h: float, delta: float) -> int | None:
    """The unique k with h(2^k - 1) in (pi + delta, 2pi - delta), if any.

    Returns None when no power-of-two orbit time lands in the open interval
    (the looping regime).  Uniqueness holds because consecutive orbit times
    more than double while the interval's endpoints do not.  This is pure
    interval arithmetic, so any positive h is accepted; the integrator's
    stability limit h < 2 is enforced where integration actually happens.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    if delta < 0.0 or math.pi - delta <= delta:
        raise ValueError("delta must satisfy 0 <= delta < pi - delta")
    lo, hi = math.pi + delta, 2.0 * math.pi - delta
    for k in range(1, 64):
        t = h * ((1 << k) - 1)
        if lo < t < hi:
            return k
        if t >= hi:
            return None
    return None


@dataclass(frozen=True)
class ShellParams:
    """Shell geometry (alpha, r) for a given dimension and step size."""

    alpha: float
    r: float
    dimension: int
    step_size: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= self.dimension and 0.0 <= self.r <= self.dimension):
            raise ValueError("alpha and r must lie in [0, d]")

    @property
    def delta(self) -> float:
        return delta_bound(self.alpha, self.r, self.dimension, self.step_size)

    @property
    def k_star(self) -> int | None:
        return k_star(self.step_size, self.delta)


def default_shell(dimension: int, h: float) -> ShellParams:
    """Shell with alpha = 2 sqrt(d log d), r = 3 sqrt(d log d), capped at d.

    Wide enough that the concentration event holds with overwhelming
    probability; use :func:`typical_shell` for the sharper delta that governs
    which orbit length NUTS actually selects.
    """
    scale = math.sqrt(dimension * math.log(max(dimension, 2)))
    return ShellParams(
        alpha=min(2.0 * scale, float(dimension)),
        r=min(3.0 * scale, float(dimension)),
        dimension=dimension,
        step_size=h,
    )


def typical_shell(dimension: int, h: float) -> ShellParams:
    """Shell at the one-standard-deviation scale alpha = r = sqrt(d).

    Its delta tracks the size of typical U-turn deviations, so its k_star is
    the orbit exponent NUTS selects in practice; the reduced kernels default
    to it.
    """
    scale = min(math.sqrt(dimension), float(dimension))
    return ShellParams(alpha=scale, r=scale, dimension=dimension, step_size=h)


def in_shell(x: np.ndarray, alpha: float) -> bool:
    """Whether | |x|^2 - d | <= alpha."""
    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    return bool(abs(float(np.dot(x, x)) - x.size) <= alpha)


def concentration_event(x: np.ndarray, v: np.ndarray, alpha: float, r: float) -> bool:
    """Per-sample velocity concentration: | |v|^2 - d | <= r and |x.v| <= r.

    This checks the event at the realized x rather than as a supremum over
    the whole shell D_alpha; alpha only delimits the regime the bound is
    stated for.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = v.size
    if not (0.0 <= alpha <= d and 0.0 <= r <= d):
        raise ValueError("alpha and r must lie in [0, d]")
    if abs(float(np.dot(v, v)) - d) > r:
        return False
    return bool(abs(float(np.dot(x, v))) <= r)


@dataclass(frozen=True)
class StepsizeReport:
    h: float
    delta: float
    k_max: int
    offending_k: tuple[int, ...]
    k_star: int | None
    passes: bool

    def to_json_dict(self) -> dict:
        return {
            "h": self.h,
            "delta": self.delta,
            "k_max": self.k_max,
            "offending_k": list(self.offending_k),
            "k_star": self.k_star,
            "pass": self.passes,
        }


def stepsize_condition_check(h: float, delta: float, k_max: int) -> StepsizeReport:
    """Flag every k <= k_max whose orbit time lands in the forbidden zones.

    The forbidden set is (0, delta) union (pi - delta, pi + delta]; times in
    it leave the U-turn property at the mercy of local effects.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    offending = []
    for k in range(1, k_max + 1):
        t = h * ((1 << k) - 1)
        if 0.0 < t < delta or math.pi - delta < t <= math.pi + delta:
            offending.append(k)
    return StepsizeReport(
        h=h,
        delta=delta,
        k_max=k_max,
        offending_k=tuple(offending),
        k_star=k_star(h, delta),
        passes=not offending,
    )


@dataclass(frozen=True)
class MixingBoundParams:
    """Inputs to the accept/reject mixing-time bound.

    The absolute constants of the underlying theorem are not pinned down, so
    contraction rate, regularization constants, epoch length, and domain
    diameter are all supplied by the caller.
    """

    rho: float
    c_reg: float
    c: float
    b: float
    epoch: int
    epsilon: float
    diameter: float

    def __post_init__(self):
        if min(self.rho, self.c_reg, self.c, self.b, self.diameter) <= 0.0:
            raise ValueError("rho, c_reg, c, b, diameter must be positive")
        if self.epoch < 1:
            raise ValueError("epoch must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")


def mixing_bound(params: MixingBoundParams, p_reject: float) -> tuple[bool, int]:
    """Check the epoch condition and return the transition-step horizon.

    Feasibility requires 2 E p_rej + C_reg diam e^(-rho(E-1)) + b <= 1 - c;
    the horizon is E * ceil(b^-1 log(2/epsilon)) transitions.
    """
    if p_reject < 0.0:
        raise ValueError("p_reject must be non-negative")
    lhs = (
        2.0 * params.epoch * p_reject
        + params.c_reg * params.diameter * math.exp(-params.rho * (params.epoch - 1))
        + params.b
    )
    feasible = bool(lhs <= 1.0 - params.c)
    horizon = params.epoch * math.ceil(math.log(2.0 / params.epsilon) / params.b)
    return feasible, horizon


def chi_squared_stats(samples, dimension: int) -> tuple[float, float, float]:
    """Kolmogorov-Smirnov distance of a sample of |x|^2 values to chi^2(d).

    The chi^2 CDF is the regularized lower incomplete gamma function
    P(d/2, s/2).  Also returns the sample mean and variance (chi^2(d) has
    mean d and variance 2d).
    """
    s = np.sort(np.asarray(samples, dtype=np.float64))
    if s.size == 0:
        raise ValueError("samples must be non-empty")
    n = s.size
    cdf = special.gammainc(0.5 * dimension, 0.5 * np.clip(s, 0.0, None))
    upper = np.max(cdf - np.arange(n) / n)
    lower = np.max(np.arange(1, n + 1) / n - cdf)
    ks = float(max(upper, lower))
    return ks, float(s.mean()), float(s.var())


@dataclass(frozen=True)
class ExitStats:
    n_chains: int
    n_steps: int
    shell_bound: float
    exit_frequency: float
    bound: float


def exit_time_experiment(
    x0_law: str,
    alpha0: float,
    r: float,
    n_steps: int,
    cfg,
    dimension: int,
    n_chains: int = 200,
    target=None,
    seed: int | None = None,
) -> ExitStats:
    """Monte Carlo exit frequency from the n-step grown shell.

    Runs ``n_chains`` chains for ``n_steps`` transitions and reports the
    frequency of leaving D_{max(alpha0, r) + n (r + h^2 d)}, together with
    the union bound 4 n e^(-r^2 / 8d).  x0_law is 'PointMass' (a point on the
    sphere |x|^2 = d) or 'Gaussian'.
    """
    from .samplers import transition  # local import to avoid a cycle

    h = cfg.h
    base_level = max(alpha0, r)
    growth = r + h * h * dimension
    if base_level + (n_steps - 1) * growth > dimension:
        raise ValueError(
            "precondition violated: max(alpha0, r) + (n-1)(r + h^2 d) must not exceed d"
        )
    shell_bound = base_level + n_steps * growth
    seed = cfg.seed if seed is None else seed
    exits = 0
    for chain_idx in range(n_chains):
        rng = chain_rng(seed, chain_idx)
        if x0_law == "PointMass":
            x = np.zeros(dimension)
            x[0] = math.sqrt(dimension)
        elif x0_law == "Gaussian":
            x = rng.standard_normal(dimension)
        else:
            raise ValueError("x0_law must be 'PointMass' or 'Gaussian'")
        for _ in range(n_steps):
            rec = transition(x, cfg, rng, target)
            x = rec.end_position
            if abs(float(np.dot(x, x)) - dimension) > shell_bound:
                exits += 1
                break
    bound = 4.0 * n_steps * math.exp(-r * r / (8.0 * dimension))
    return ExitStats(n_chains, n_steps, shell_bound, exits / n_chains, bound)
