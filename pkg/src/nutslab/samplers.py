"""Transition kernels: NUTS, Multinoulli HMC, and Uniform HMC, plus the chain
runner and step-size jitter modes.

All kernels refresh the velocity from the standard Gaussian, pick an index
orbit, pick an index, and return the projected leapfrog iterate.  Index
selection for NUTS and Multinoulli HMC is Boltzmann-weighted and is realized
through its maximal-uniform split: the acceptance uniform decides whether the
index comes from the uniform part (shared with Uniform HMC) or from the
excess weights.  This keeps the kernels' laws intact while making the
reduction to Uniform HMC hold transition by transition on shared randomness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dynamics import LeapfrogConfig, PhasePoint, TargetModel, standard_gaussian
from .orbits import (
    IndexOrbit,
    OrbitStates,
    OrbitWorkspace,
    StopReason,
    select_orbit,
)
from .streams import TransitionDraws, as_draws, chain_rng

__all__ = [
    "KernelKind",
    "JitterMode",
    "SamplerConfig",
    "TransitionRecord",
    "TRANSITION_CSV_HEADER",
    "transition_csv_row",
    "multinoulli_sample",
    "a_index_event",
    "nuts_transition",
    "multinoulli_hmc_transition",
    "uniform_hmc_transition",
    "transition",
    "run_chain",
    "triangular_path_pmf",
]


class KernelKind(enum.Enum):
    NUTS = "NUTS"
    MULTINOULLI_HMC = "MultinoulliHMC"
    UNIFORM_HMC = "UniformHMC"


class JitterMode(enum.Enum):
    NONE = "None"
    PER_TRANSITION = "PerTransition"
    PER_LEAPFROG_STEP = "PerLeapfrogStep"


@dataclass
class SamplerConfig:
    """Configuration shared by all kernels.

    ``fixed_k`` is the orbit exponent used by the reduced kernels; when left
    unset it defaults to the admissible exponent k* of the typical-fluctuation
    shell for the given dimension.
    """

    h: float
    k_max: int = 10
    kernel: KernelKind = KernelKind.NUTS
    fixed_k: int | None = None
    jitter: JitterMode = JitterMode.NONE
    jitter_width: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.h < 2.0):
            raise ValueError(f"h must lie in (0, 2), got {self.h}")
        if not (1 <= self.k_max <= 30):
            raise ValueError(f"k_max must lie in [1, 30], got {self.k_max}")
        if not (0.0 <= self.jitter_width < 0.5):
            raise ValueError(f"jitter_width must lie in [0, 0.5), got {self.jitter_width}")


@dataclass(frozen=True)
class TransitionRecord:
    """Full audit of one sampler transition."""

    start_position: np.ndarray
    velocity: np.ndarray
    orbit: IndexOrbit
    stop_reason: StopReason
    index: int
    path_length_time: float
    end_position: np.ndarray
    max_abs_energy_error: float
    a_index_accept: bool
    gradient_evals: int


TRANSITION_CSV_HEADER = (
    "iter,stop_reason,orbit_min,orbit_k,L,path_time,norm_sq,max_abs_dH,a_index,grad_evals"
)


def transition_csv_row(iteration: int, record: TransitionRecord) -> str:
    norm_sq = float(np.dot(record.end_position, record.end_position))
    return ",".join(
        [
            str(iteration),
            record.stop_reason.value,
            str(record.orbit.min_index),
            str(record.orbit.log2_length),
            str(record.index),
            repr(float(record.path_length_time)),
            repr(norm_sq),
            repr(float(record.max_abs_energy_error)),
            "1" if record.a_index_accept else "0",
            str(record.gradient_evals),
        ]
    )


def multinoulli_sample(weights_log: Sequence[float], u: float) -> int:
    """Draw an index with probability exp(w_i) / sum_j exp(w_j).

    Uses max-shifted exponentials and a single cumulative scan from the lowest
    index against the supplied uniform, so identical log weights up to an
    additive constant select identically for identical u.
    """
    w = np.asarray(weights_log, dtype=np.float64)
    if w.size == 0:
        raise ValueError("weights must be non-empty")
    if not np.isfinite(w).all():
        raise ValueError("log weights must be finite")
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    p = np.exp(w - w.max())
    cum = np.cumsum(p)
    j = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(j, w.size - 1)


def _a_index_threshold(delta_energies: np.ndarray) -> float:
    """|I| min_i w_i / sum_i w_i for Boltzmann weights w_i = exp(-dH_i)."""
    shifted = delta_energies - delta_energies.min()
    w = np.exp(-shifted)  # in (0, 1], underflow means certain rejection
    return float(w.size * w.min() / w.sum())


def a_index_event(
    energies: Mapping[int, float] | Sequence[float], base_energy: float, u: float
) -> bool:
    """The maximal-uniform-part acceptance event of the Boltzmann index draw.

    True iff u <= |I| min_i w_i / sum_i w_i with w_i = exp(-(H_i - H_base)).
    """
    if isinstance(energies, Mapping):
        values = np.asarray([energies[i] for i in sorted(energies)], dtype=np.float64)
    else:
        values = np.asarray(energies, dtype=np.float64)
    if values.size == 0:
        raise ValueError("energies must cover the selected orbit")
    return bool(u <= _a_index_threshold(values - float(base_energy)))


def _effective_step(cfg: SamplerConfig, draws: TransitionDraws):
    """Resolve the transition's step size and optional per-step jitter.

    Per-transition jitter draws one uniform before the velocity refreshment;
    per-leapfrog-step jitter redraws before every step, keyed by the index
    being materialized.  Both laws are uniform on [h(1-w), h(1+w)].
    """
    if cfg.jitter is JitterMode.PER_TRANSITION:
        u = draws.uniform("jitter")
        return cfg.h * (1.0 + cfg.jitter_width * (2.0 * u - 1.0)), None
    if cfg.jitter is JitterMode.PER_LEAPFROG_STEP:
        width = cfg.jitter_width

        def step_size(index: int) -> float:
            return cfg.h * (1.0 + width * (2.0 * draws.step_uniform(index) - 1.0))

        return cfg.h, step_size
    return cfg.h, None


def _select_index(
    states: OrbitStates, orbit: IndexOrbit, draws: TransitionDraws
) -> tuple[int, bool, float]:
    """Boltzmann index selection via the maximal-uniform split.

    Returns (selected index, a_index acceptance, max abs energy error over
    the orbit).  On acceptance the index is the uniform part evaluated at the
    shared index uniform; otherwise it comes from a cumulative scan over the
    excess weights with the same uniform.
    """
    energies = states.energy_slice(orbit.min_index, orbit.max_index)
    delta = energies - states.energy(0)
    u_index = draws.uniform("index")
    u_accept = draws.uniform("accept")
    accept = bool(u_accept <= _a_index_threshold(delta))
    n = orbit.length
    if accept:
        offset = min(int(u_index * n), n - 1)
    else:
        w = np.exp(-(delta - delta.min()))
        excess = w - w.min()
        total = float(excess.sum())
        if total > 0.0:
            offset = int(np.searchsorted(np.cumsum(excess), u_index * total, side="right"))
            offset = min(offset, n - 1)
        else:
            # all weights equal: the uniform part carries full mass
            offset = min(int(u_index * n), n - 1)
    return orbit.min_index + offset, accept, float(np.abs(delta).max())


def _uniform_orbit(k: int, draws: TransitionDraws) -> IndexOrbit:
    """Uniform draw from the length-2^k index orbits containing 0."""
    n = 1 << k
    u = draws.uniform("orbit")
    return IndexOrbit(-min(int(u * n), n - 1), k)


def _record(
    base: PhasePoint,
    orbit: IndexOrbit,
    reason: StopReason,
    index: int,
    h: float,
    states: OrbitStates,
    accept: bool,
    max_err: float,
) -> TransitionRecord:
    return TransitionRecord(
        start_position=base.position,
        velocity=base.velocity,
        orbit=orbit,
        stop_reason=reason,
        index=index,
        path_length_time=h * index,
        end_position=states.position(index).copy(),
        max_abs_energy_error=max_err,
        a_index_accept=accept,
        gradient_evals=states.steps_taken,
    )


def nuts_transition(
    x: np.ndarray,
    cfg: SamplerConfig,
    rng,
    target: TargetModel | None = None,
    workspace: OrbitWorkspace | None = None,
) -> TransitionRecord:
    """One NUTS transition: velocity refreshment, doubling orbit selection,
    Boltzmann index selection."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    target = target if target is not None else standard_gaussian(x.size)
    draws = as_draws(rng, target.dimension)
    h_eff, step_fn = _effective_step(cfg, draws)
    base = PhasePoint(x, draws.velocity())
    lf = LeapfrogConfig(h_eff)
    sel = select_orbit(
        base, lf, cfg.k_max, draws, target=target, step_size_fn=step_fn, workspace=workspace
    )
    index, accept, max_err = _select_index(sel.states, sel.orbit, draws)
    return _record(base, sel.orbit, sel.stop_reason, index, h_eff, sel.states, accept, max_err)


def _reduced_transition(
    x: np.ndarray,
    k: int,
    cfg: SamplerConfig,
    rng,
    target: TargetModel | None,
    boltzmann: bool,
    workspace: OrbitWorkspace | None = None,
) -> TransitionRecord:
    if k < 0:
        raise ValueError("orbit exponent k must be non-negative")
    x = np.ascontiguousarray(x, dtype=np.float64)
    target = target if target is not None else standard_gaussian(x.size)
    draws = as_draws(rng, target.dimension)
    h_eff, step_fn = _effective_step(cfg, draws)
    base = PhasePoint(x, draws.velocity())
    lf = LeapfrogConfig(h_eff)
    orbit = _uniform_orbit(k, draws)
    states = OrbitStates(base, lf, target, step_size_fn=step_fn, workspace=workspace)
    states.ensure(orbit.min_index, orbit.max_index)
    if boltzmann:
        index, accept, max_err = _select_index(states, orbit, draws)
    else:
        energies = states.energy_slice(orbit.min_index, orbit.max_index)
        delta = energies - states.energy(0)
        u_index = draws.uniform("index")
        accept = bool(draws.uniform("accept") <= _a_index_threshold(delta))
        index = orbit.min_index + min(int(u_index * orbit.length), orbit.length - 1)
        max_err = float(np.abs(delta).max())
    return _record(base, orbit, StopReason.FIXED_ORBIT, index, h_eff, states, accept, max_err)


def multinoulli_hmc_transition(
    x: np.ndarray,
    k: int,
    cfg: SamplerConfig,
    rng,
    target: TargetModel | None = None,
    workspace: OrbitWorkspace | None = None,
) -> TransitionRecord:
    """Reduced kernel: orbit uniform over the length-2^k orbits containing 0,
    Boltzmann index selection."""
    return _reduced_transition(x, k, cfg, rng, target, boltzmann=True, workspace=workspace)


def uniform_hmc_transition(
    x: np.ndarray,
    k: int,
    cfg: SamplerConfig,
    rng,
    target: TargetModel | None = None,
    workspace: OrbitWorkspace | None = None,
) -> TransitionRecord:
    """Reduced kernel with uniform orbit and uniform index selection; the path
    length h*L then follows the triangular law."""
    return _reduced_transition(x, k, cfg, rng, target, boltzmann=False, workspace=workspace)


def _resolve_fixed_k(cfg: SamplerConfig, dimension: int) -> int:
    if cfg.fixed_k is not None:
        return cfg.fixed_k
    from .geometry import typical_shell

    k = typical_shell(dimension, cfg.h).k_star
    if k is None:
        raise ValueError(
            "no admissible orbit length for this step size (looping regime); "
            "set fixed_k explicitly"
        )
    return k


def transition(
    x: np.ndarray,
    cfg: SamplerConfig,
    rng,
    target: TargetModel | None = None,
    workspace: OrbitWorkspace | None = None,
) -> TransitionRecord:
    """Dispatch one transition of the configured kernel."""
    if cfg.kernel is KernelKind.NUTS:
        return nuts_transition(x, cfg, rng, target, workspace=workspace)
    k = _resolve_fixed_k(cfg, len(x))
    if cfg.kernel is KernelKind.MULTINOULLI_HMC:
        return multinoulli_hmc_transition(x, k, cfg, rng, target, workspace=workspace)
    return uniform_hmc_transition(x, k, cfg, rng, target, workspace=workspace)


def run_chain(
    x0: np.ndarray,
    n: int,
    cfg: SamplerConfig,
    rng: np.random.Generator | None = None,
    target: TargetModel | None = None,
) -> list[TransitionRecord]:
    """Iterate the configured kernel n times from x0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if rng is None:
        rng = chain_rng(cfg.seed, 0)
    x = np.ascontiguousarray(x0, dtype=np.float64)
    records: list[TransitionRecord] = []
    workspace = _chain_workspace(cfg, x.size)
    for _ in range(n):
        rec = transition(x, cfg, rng, target, workspace=workspace)
        records.append(rec)
        x = rec.end_position
    return records


def _chain_workspace(cfg: SamplerConfig, dimension: int) -> OrbitWorkspace | None:
    """One reusable iterate store per chain; None for tiny dimensions where
    allocation cost is irrelevant."""
    if dimension < 512:
        return None
    if cfg.kernel is KernelKind.NUTS:
        return OrbitWorkspace(dimension, cfg.k_max)
    return OrbitWorkspace(dimension, _resolve_fixed_k(cfg, dimension))


def triangular_path_pmf(k: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Support (physical times) and PMF of the Uniform HMC path-length law.

    tau_k({t}) = (2^k - |t/h|) / (2^k)^2 on t = h*j, |j| <= 2^k - 1: the
    numerator counts orbits of the family covering index j, the denominator
    normalizes over all 2^k orbits of 2^k indices each.
    """
    n = 1 << k
    j = np.arange(-(n - 1), n)
    pmf = (n - np.abs(j)) / float(n * n)
    return h * j.astype(np.float64), pmf
