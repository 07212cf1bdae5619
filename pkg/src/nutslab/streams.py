"""Deterministic random streams and the per-transition draw contract.

Every transition consumes randomness in a fixed, purpose-keyed order:
(1) d standard Gaussians for the velocity refreshment, (2) one uniform per
attempted orbit doubling (or a single uniform for the fixed-length orbit of
the reduced kernels), (3) one uniform for the index selection, (4) one
uniform for the index-acceptance event.  Synchronous couplings replay one
:class:`TransitionDraws` instance for both chains, so the copies receive
identical values for identical purposes even when one chain consumes fewer
direction bits than the other.
"""

from __future__ import annotations

import numpy as np

__all__ = ["chain_rng", "TransitionDraws", "as_draws"]

_SEED_MASK = (1 << 64) - 1


def chain_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for realization ``index`` of a run seeded by ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) & _SEED_MASK, spawn_key=(int(index),))
    return np.random.default_rng(ss)


class TransitionDraws:
    """Lazily drawn, purpose-keyed random inputs for one transition.

    Values are pulled from the underlying generator on first request and
    cached, which fixes the shared-randomness contract used by the coupling
    module.
    """

    def __init__(self, rng: np.random.Generator, dimension: int):
        self._rng = rng
        self._dimension = int(dimension)
        self._velocity: np.ndarray | None = None
        self._bits: list[bool] = []
        self._uniforms: dict[str, float] = {}
        self._step_uniforms: dict[int, float] = {}

    def velocity(self) -> np.ndarray:
        """The refreshed velocity, d i.i.d. standard Gaussians."""
        if self._velocity is None:
            self._velocity = self._rng.standard_normal(self._dimension)
        return self._velocity

    def direction_bit(self, attempt: int) -> bool:
        """Direction of the ``attempt``-th doubling; True = extend forward."""
        while len(self._bits) <= attempt:
            self._bits.append(bool(self._rng.random() < 0.5))
        return self._bits[attempt]

    def uniform(self, purpose: str) -> float:
        """A single uniform on [0, 1) tied to a named purpose."""
        if purpose not in self._uniforms:
            self._uniforms[purpose] = float(self._rng.random())
        return self._uniforms[purpose]

    def step_uniform(self, index: int) -> float:
        """Per-leapfrog-step jitter uniform, keyed by the index being materialized."""
        if index not in self._step_uniforms:
            self._step_uniforms[index] = float(self._rng.random())
        return self._step_uniforms[index]


def as_draws(rng, dimension: int) -> TransitionDraws:
    """Wrap a numpy Generator as TransitionDraws; pass TransitionDraws through."""
    if isinstance(rng, TransitionDraws):
        return rng
    return TransitionDraws(rng, dimension)
