"""Couplings of two chains: synchronous coupling on shared randomness, the
one-shot (reflection-maximal) coupling of velocity refreshments for Uniform
HMC, and the contraction/mixing diagnostics built on them.

On the Gaussian target the leapfrog map is linear, so whenever two
synchronously coupled copies use the same path length T their distance
contracts by exactly |cos(beta_h T)|.  The one-shot coupling shifts the
second chain's velocity so both copies land on the same point, accepting the
shift with the maximal probability allowed by the Gaussian marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .dynamics import LeapfrogConfig, gaussian_leapfrog, PhasePoint
from .samplers import (
    SamplerConfig,
    TransitionRecord,
    transition,
    triangular_path_pmf,
)
from .streams import TransitionDraws, chain_rng

__all__ = [
    "CoupledPair",
    "CoupleTrace",
    "synchronous_step",
    "contraction_factor",
    "one_shot_step",
    "couple_velocities",
    "coupled_experiment",
    "COUPLE_TRACE_CSV_HEADER",
    "COUPLE_HIST_CSV_HEADER",
]

COUPLE_TRACE_CSV_HEADER = "iter,mean_distance,mean_cum_leapfrog,met_fraction"
COUPLE_HIST_CSV_HEADER = "path_time,count"


@dataclass
class CoupledPair:
    """Two chain states advanced on one shared random stream.

    Once ``met`` is set the states are kept identical forever (faithful
    coupling); meeting is declared only by an exact one-shot success, never by
    small distance.
    """

    state_a: np.ndarray
    state_b: np.ndarray
    shared_stream: np.random.Generator
    met: bool = False

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.state_a - self.state_b))


def _synchronous_records(
    pair: CoupledPair, cfg: SamplerConfig, target=None, workspace=None
) -> tuple[CoupledPair, TransitionRecord, TransitionRecord]:
    draws = TransitionDraws(pair.shared_stream, len(pair.state_a))
    rec_a = transition(pair.state_a, cfg, draws, target, workspace=workspace)
    if pair.met:
        rec_b = rec_a
        new_b = rec_a.end_position
    else:
        # records copy what they keep, so both chains may share the workspace
        rec_b = transition(pair.state_b, cfg, draws, target, workspace=workspace)
        new_b = rec_b.end_position
    new_pair = CoupledPair(rec_a.end_position, new_b, pair.shared_stream, met=pair.met)
    return new_pair, rec_a, rec_b


def synchronous_step(pair: CoupledPair, cfg: SamplerConfig, target=None) -> CoupledPair:
    """Advance both chains one transition on shared randomness.

    Both copies receive the same velocity, the same direction bits, and the
    same index/acceptance uniforms, per the samplers' randomness budget.
    """
    new_pair, _, _ = _synchronous_records(pair, cfg, target)
    return new_pair


def contraction_factor(cfg: SamplerConfig, k: int) -> float:
    """Exact synchronous contraction rate sum_t |cos(beta_h t)| tau_k({t})."""
    if k < 0:
        raise ValueError("k must be non-negative")
    lf = LeapfrogConfig(cfg.h)
    times, pmf = triangular_path_pmf(k, cfg.h)
    return float(np.sum(np.abs(np.cos(lf.beta_h * times)) * pmf))


def couple_velocities(rng, m: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Reflection-maximal coupling of two standard Gaussians with mean shift m.

    Draws v ~ N(0, I) and accepts the candidate v + m with probability
    min(1, phi(v+m)/phi(v)); on rejection v + m is reflected across the
    hyperplane through m/2 orthogonal to m, which restores the standard
    Gaussian marginal.  Returns (v, v_tilde, coupled); the meeting
    probability is 1 - TV(N(0,I), N(m,I)) = 2 Phi(-|m|/2).
    """
    m = np.asarray(m, dtype=np.float64)
    draws = rng if isinstance(rng, TransitionDraws) else TransitionDraws(rng, m.size)
    v = draws.velocity()
    u = draws.uniform("couple")
    # log phi(v+m) - log phi(v) = -m.v - |m|^2 / 2
    norm_m_sq = float(np.dot(m, m))
    log_ratio = -float(np.dot(m, v)) - 0.5 * norm_m_sq
    accept = True if u <= 0.0 else math.log(u) < log_ratio
    if accept:
        return v, v + m, True
    e = m / math.sqrt(norm_m_sq)
    z = v + m
    reflected = z - 2.0 * float(np.dot(z - 0.5 * m, e)) * e
    return v, reflected, False


def _default_exclusion_indices(cfg: SamplerConfig, k: int, sine_cutoff: float = 0.05):
    """Path indices whose |sin(beta_h t)| is below the cutoff (cot blow-up)."""
    lf = LeapfrogConfig(cfg.h)
    n = 1 << k
    j = np.arange(-(n - 1), n)
    angles = lf.beta_h * cfg.h * j
    return set(int(i) for i in j[np.abs(np.sin(angles)) < sine_cutoff])


def one_shot_step(
    pair: CoupledPair, k: int, cfg: SamplerConfig, B=None
) -> CoupledPair:
    """One-shot coupling of one Uniform HMC transition.

    Both chains share the path length T ~ tau_k.  Off the exclusion set B the
    second chain's velocity is coupled to v + cot(beta_h T) (1-h^2/4)^(1/2)
    (x - x_tilde) with maximal probability, which makes the chains meet
    exactly; on T in B (near the cot singularities) the velocities are
    synchronized instead.  B defaults to {t : |sin(beta_h t)| < 0.05}.
    """
    d = len(pair.state_a)
    draws = TransitionDraws(pair.shared_stream, d)
    lf = LeapfrogConfig(cfg.h)
    n = 1 << k
    u_orbit = draws.uniform("orbit")
    min_index = -min(int(u_orbit * n), n - 1)
    u_index = draws.uniform("index")
    index = min_index + min(int(u_index * n), n - 1)
    excluded = (
        _default_exclusion_indices(cfg, k)
        if B is None
        else set(int(round(t / cfg.h)) for t in B)
    )
    v = draws.velocity()
    met = pair.met
    if pair.met or index in excluded:
        v_b, coupled = v, pair.met
    else:
        angle = lf.beta_h * cfg.h * index
        shift = (math.cos(angle) / math.sin(angle)) * lf.axis_scale * (
            pair.state_a - pair.state_b
        )
        # couple_velocities reuses the cached velocity draw of this transition
        _, v_b, coupled = couple_velocities(draws, shift)
    new_a = gaussian_leapfrog(PhasePoint(pair.state_a, v), lf, index).position
    if coupled and not pair.met:
        # exact meeting by construction; enforce it bitwise for faithfulness
        new_b = new_a.copy()
        met = True
    elif pair.met:
        new_b = new_a.copy()
    else:
        new_b = gaussian_leapfrog(PhasePoint(pair.state_b, v_b), lf, index).position
    return CoupledPair(new_a, new_b, pair.shared_stream, met=met)


@dataclass
class CoupleTrace:
    """Per-iteration aggregates of a synchronous coupling experiment."""

    mean_distance: list[float] = field(default_factory=list)
    mean_cum_leapfrog: list[float] = field(default_factory=list)
    met_fraction: list[float] = field(default_factory=list)
    path_time_counts: dict[float, int] = field(default_factory=dict)

    def trace_rows(self) -> list[str]:
        rows = []
        for i, (dist, cum, met) in enumerate(
            zip(self.mean_distance, self.mean_cum_leapfrog, self.met_fraction), start=1
        ):
            rows.append(f"{i},{dist!r},{cum!r},{met!r}")
        return rows

    def hist_rows(self) -> list[str]:
        return [
            f"{t!r},{c}" for t, c in sorted(self.path_time_counts.items())
        ]


def _pair_worker(seed: int, pair_index: int, cfg: SamplerConfig, dimension: int, n_iters: int):
    from .samplers import _chain_workspace

    rng = chain_rng(seed, pair_index)
    x_a = rng.standard_normal(dimension)
    x_b = rng.standard_normal(dimension)
    pair = CoupledPair(x_a, x_b, rng)
    workspace = _chain_workspace(cfg, dimension)
    distances = np.empty(n_iters)
    cum_evals = np.empty(n_iters)
    met = np.zeros(n_iters)
    path_counts: dict[float, int] = {}
    total_evals = 0.0
    for it in range(n_iters):
        pair, rec_a, rec_b = _synchronous_records(pair, cfg, workspace=workspace)
        total_evals += 0.5 * (rec_a.gradient_evals + rec_b.gradient_evals)
        distances[it] = pair.distance
        cum_evals[it] = total_evals
        met[it] = 1.0 if pair.met else 0.0
        for rec in (rec_a, rec_b):
            t = float(rec.path_length_time)
            path_counts[t] = path_counts.get(t, 0) + 1
    return distances, cum_evals, met, path_counts


def coupled_experiment(
    n_pairs: int,
    n_iters: int,
    cfg: SamplerConfig,
    dimension: int,
    n_jobs: int = 1,
) -> CoupleTrace:
    """Synchronously couple ``n_pairs`` chains started from independent
    Gaussian draws and aggregate the per-iteration mean distance, mean
    cumulative leapfrog count, met fraction, and the path-length histogram.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    results = Parallel(n_jobs=n_jobs)(
        delayed(_pair_worker)(cfg.seed, p, cfg, dimension, n_iters)
        for p in range(n_pairs)
    )
    trace = CoupleTrace()
    if n_iters == 0:
        return trace
    distances = np.stack([res[0] for res in results])
    cum_evals = np.stack([res[1] for res in results])
    met = np.stack([res[2] for res in results])
    trace.mean_distance = [float(v) for v in distances.mean(axis=0)]
    trace.mean_cum_leapfrog = [float(v) for v in cum_evals.mean(axis=0)]
    trace.met_fraction = [float(v) for v in met.mean(axis=0)]
    for res in results:
        for t, c in res[3].items():
            trace.path_time_counts[t] = trace.path_time_counts.get(t, 0) + c
    return trace
