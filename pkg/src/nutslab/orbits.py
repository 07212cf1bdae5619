"""Index orbits, U-turn and sub-U-turn checks, the doubling orbit-selection
procedure, and the sine-deviation scan.

An index orbit is a contiguous set of integers of power-of-two length that
indexes leapfrog iterates.  Orbit selection doubles the orbit forward or
backward in time with equal probability until an extension exhibits a
sub-U-turn, the doubled orbit exhibits a U-turn, or the maximal length is
reached.  All iterates of the materialized span are cached explicitly so the
halving-family checks are literal dot products on stored states.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .dynamics import (
    IntegrationError,
    LeapfrogConfig,
    PhasePoint,
    TargetModel,
    _leapfrog_raw,
    hamiltonian,
    standard_gaussian,
)
from .streams import as_draws

__all__ = [
    "IndexOrbit",
    "OrbitStates",
    "OrbitWorkspace",
    "StopReason",
    "OrbitSelectionResult",
    "SineScanRow",
    "uturn_check",
    "sub_uturn_check",
    "select_orbit",
    "uturn_sine_scan",
    "SINE_SCAN_CSV_HEADER",
]


@dataclass(frozen=True)
class IndexOrbit:
    """Contiguous integer interval of power-of-two length 2**log2_length."""

    min_index: int
    log2_length: int

    def __post_init__(self):
        if self.log2_length < 0:
            raise ValueError("log2_length must be non-negative")

    @property
    def length(self) -> int:
        return 1 << self.log2_length

    @property
    def max_index(self) -> int:
        return self.min_index + self.length - 1

    def contains(self, index: int) -> bool:
        return self.min_index <= index <= self.max_index

    def indices(self) -> range:
        return range(self.min_index, self.max_index + 1)

    def halving_family(self) -> Iterator["IndexOrbit"]:
        """All sub-orbits obtained by iterated halving, the orbit itself first.

        Level j splits the orbit into 2**j pieces of length 2**(k-j); members
        are yielded level by level, left to right.
        """
        for level in range(self.log2_length + 1):
            size = self.length >> level
            for m in range(1 << level):
                yield IndexOrbit(self.min_index + m * size, self.log2_length - level)


class StopReason(enum.Enum):
    EXTENSION_SUB_UTURN = "ExtensionSubUTurn"
    DOUBLED_ORBIT_UTURN = "DoubledOrbitUTurn"
    MAX_DEPTH = "MaxDepth"
    # reduced kernels draw the orbit uniformly instead of running the doubling
    # loop; select_orbit itself never returns this value
    FIXED_ORBIT = "FixedOrbit"


class OrbitWorkspace:
    """Reusable storage for the iterates of one chain's transitions.

    Allocating and faulting in ~100 MB of fresh pages per transition dominates
    the runtime at d ~ 10^4, so a chain can own one workspace sized for its
    maximal span and hand it to every transition.  Reusing a workspace
    invalidates the states of earlier results built on it.
    """

    def __init__(self, dimension: int, max_log2_length: int):
        self.dimension = int(dimension)
        self.capacity = 1 << (max_log2_length + 1)
        self.positions = np.empty((self.capacity, self.dimension))
        self.velocities = np.empty((self.capacity, self.dimension))
        self.energies = np.empty(self.capacity)


class OrbitStates:
    """Cache of leapfrog iterates and their energies over a contiguous span.

    The span always contains index 0 (the base state) and grows outward.  For
    the canonical Gaussian without per-step jitter new indices come from the
    closed-form rotation in one vectorized block; otherwise they are stepped
    sequentially with the generic integrator.  Rows are stored contiguously so
    the halving-family checks can batch their dot products on strided views.
    """

    def __init__(
        self,
        base: PhasePoint,
        cfg: LeapfrogConfig,
        target: TargetModel | None = None,
        step_size_fn: Callable[[int], float] | None = None,
        workspace: OrbitWorkspace | None = None,
    ):
        self.base = base
        self.cfg = cfg
        self.target = target if target is not None else standard_gaussian(base.dimension)
        if base.dimension != self.target.dimension:
            raise ValueError("dimension mismatch between base state and target")
        self._step_size_fn = step_size_fn
        self._closed_form = (
            self.target.closed_form_flow_available and step_size_fn is None
        )
        d = base.dimension
        if workspace is not None and workspace.dimension == d:
            self._capacity = workspace.capacity
            self._positions = workspace.positions
            self._velocities = workspace.velocities
            self._energies = workspace.energies
            self._row0 = self._capacity // 2
        else:
            self._capacity = 4
            self._positions = np.empty((self._capacity, d))
            self._velocities = np.empty((self._capacity, d))
            self._energies = np.empty(self._capacity)
            self._row0 = 1  # storage row holding orbit index 0
        self._positions[self._row0] = base.position
        self._velocities[self._row0] = base.velocity
        self._energies[self._row0] = hamiltonian(base, self.target)
        # base-state inner products, reused by the closed-form energy identity
        self._base_xx = float(np.dot(base.position, base.position))
        self._base_vv = float(np.dot(base.velocity, base.velocity))
        self._base_xv = float(np.dot(base.position, base.velocity))
        # (2, d) matrix of the base state; closed-form blocks are coefficient
        # matrices times this, which BLAS writes in a single pass
        self._base_matrix = np.stack([base.position, base.velocity])
        self._min = 0
        self._max = 0
        self.steps_taken = 0

    @classmethod
    def from_iterates(
        cls,
        min_index: int,
        iterates: list[PhasePoint],
        cfg: LeapfrogConfig,
        target: TargetModel | None = None,
    ) -> "OrbitStates":
        """Build a cache from an explicit state sequence.

        The span must contain index 0, whose state becomes the base.  The
        sequence need not come from the integrator; this exists so handcrafted
        sequences can exercise the U-turn machinery directly.
        """
        if not iterates:
            raise ValueError("iterates must be non-empty")
        max_index = min_index + len(iterates) - 1
        if not min_index <= 0 <= max_index:
            raise ValueError("the state span must contain index 0")
        states = cls(iterates[-min_index], cfg, target)
        states._positions = np.stack([p.position for p in iterates])
        states._velocities = np.stack([p.velocity for p in iterates])
        states._energies = np.array([hamiltonian(p, states.target) for p in iterates])
        states._capacity = len(iterates)
        states._row0 = -min_index
        states._min = min_index
        states._max = max_index
        return states

    # -- span bookkeeping ---------------------------------------------------

    @property
    def min_index(self) -> int:
        return self._min

    @property
    def max_index(self) -> int:
        return self._max

    def indices(self) -> range:
        """All materialized indices (the contiguous span)."""
        return range(self._min, self._max + 1)

    def __contains__(self, index: int) -> bool:
        return self._min <= index <= self._max

    @property
    def states(self) -> dict[int, PhasePoint]:
        """Materialized iterates as an index -> PhasePoint map."""
        return {i: self.state(i) for i in self.indices()}

    def _row(self, index: int) -> int:
        if not self._min <= index <= self._max:
            raise KeyError(f"index {index} not materialized (span {self._min}..{self._max})")
        return self._row0 + index

    def position(self, index: int) -> np.ndarray:
        return self._positions[self._row(index)]

    def velocity(self, index: int) -> np.ndarray:
        return self._velocities[self._row(index)]

    def state(self, index: int) -> PhasePoint:
        return PhasePoint(self.position(index), self.velocity(index))

    def energy(self, index: int) -> float:
        return float(self._energies[self._row(index)])

    def energy_slice(self, lo: int, hi: int) -> np.ndarray:
        """Energies over the inclusive index range [lo, hi]."""
        return self._energies[self._row(lo) : self._row(hi) + 1]

    # -- materialization ----------------------------------------------------

    def ensure(self, lo: int, hi: int) -> None:
        """Materialize every index of the inclusive range [lo, hi]."""
        lo, hi = min(lo, self._min), max(hi, self._max)
        self._reserve(lo, hi)
        if hi > self._max:
            self._extend(self._max + 1, hi, forward=True)
        if lo < self._min:
            self._extend(lo, self._min - 1, forward=False)

    def _reserve(self, lo: int, hi: int) -> None:
        """Grow storage so rows for [lo, hi] fit; geometric growth keeps the
        total copy work linear in the final span."""
        if self._row0 + lo >= 0 and self._row0 + hi < self._capacity:
            return
        span = hi - lo + 1
        new_capacity = max(4 * span, 8)
        new_row0 = -lo + (new_capacity - span) // 2
        pos = np.empty((new_capacity, self.base.dimension))
        vel = np.empty((new_capacity, self.base.dimension))
        en = np.empty(new_capacity)
        old = slice(self._row0 + self._min, self._row0 + self._max + 1)
        new = slice(new_row0 + self._min, new_row0 + self._max + 1)
        pos[new] = self._positions[old]
        vel[new] = self._velocities[old]
        en[new] = self._energies[old]
        self._positions, self._velocities, self._energies = pos, vel, en
        self._capacity, self._row0 = new_capacity, new_row0

    def _extend(self, lo: int, hi: int, forward: bool) -> None:
        if forward and lo != self._max + 1:
            raise ValueError("forward extension must be adjacent to the span")
        if not forward and hi != self._min - 1:
            raise ValueError("backward extension must be adjacent to the span")
        rows = slice(self._row0 + lo, self._row0 + hi + 1)
        if self._closed_form:
            self._closed_form_block(lo, hi, rows)
        else:
            self._stepped_block(lo, hi, forward)
        if forward:
            self._max = hi
        else:
            self._min = lo
        self.steps_taken += hi - lo + 1

    def _closed_form_block(self, lo: int, hi: int, rows: slice) -> None:
        cfg = self.cfg
        idx = np.arange(lo, hi + 1, dtype=np.float64)
        angles = cfg.beta_h * cfg.step_size * idx
        c = np.cos(angles)
        s = np.sin(angles)
        b = cfg.axis_scale
        s_over_b = s / b
        s_times_b = s * b
        np.dot(np.stack([c, s_over_b], axis=1), self._base_matrix, out=self._positions[rows])
        np.dot(np.stack([-s_times_b, c], axis=1), self._base_matrix, out=self._velocities[rows])
        # |x_i|^2 and |v_i|^2 follow from the base inner products; this is the
        # same rotation algebra that conserves the modified Hamiltonian
        xx, vv, xv = self._base_xx, self._base_vv, self._base_xv
        x_norm_sq = c * c * xx + s_over_b * s_over_b * vv + 2.0 * c * s_over_b * xv
        v_norm_sq = s_times_b * s_times_b * xx + c * c * vv - 2.0 * c * s_times_b * xv
        self._energies[rows] = 0.5 * (x_norm_sq + v_norm_sq)

    def _stepped_block(self, lo: int, hi: int, forward: bool) -> None:
        if forward:
            x = self.position(lo - 1)
            v = self.velocity(lo - 1)
            new_indices = range(lo, hi + 1)
        else:
            x = self.position(hi + 1)
            v = self.velocity(hi + 1)
            new_indices = range(hi, lo - 1, -1)
        for index in new_indices:
            h = self.cfg.step_size if self._step_size_fn is None else self._step_size_fn(index)
            try:
                x, v = _leapfrog_raw(x, v, h if forward else -h, self.target)
            except IntegrationError as err:
                raise IntegrationError(str(err), index=index) from None
            if not (np.isfinite(x).all() and np.isfinite(v).all()):
                raise IntegrationError("non-finite state during integration", index=index)
            row = self._row0 + index
            self._positions[row] = x
            self._velocities[row] = v
            self._energies[row] = float(self.target.potential(x)) + 0.5 * float(np.dot(v, v))

    # -- strided views for the batched family checks -------------------------

    def _endpoint_views(self, orbit: IndexOrbit, level: int):
        size = orbit.length >> level
        count = 1 << level
        start = self._row(orbit.min_index)
        self._row(orbit.max_index)  # validates the whole orbit is materialized
        stop = start + count * size
        return (
            self._positions[start:stop:size],
            self._positions[start + size - 1 : stop : size],
            self._velocities[start:stop:size],
            self._velocities[start + size - 1 : stop : size],
        )


def uturn_check(states: OrbitStates, orbit: IndexOrbit) -> bool:
    """U-turn property of an orbit: v+.(x+ - x-) < 0 or v-.(x+ - x-) < 0.

    The inequalities are strict, so a zero dot product is not a U-turn; in
    particular singleton orbits, whose endpoints coincide, never have it.
    """
    if orbit.length == 1:
        return False
    x_minus = states.position(orbit.min_index)
    x_plus = states.position(orbit.max_index)
    diff = x_plus - x_minus
    if float(np.dot(states.velocity(orbit.max_index), diff)) < 0.0:
        return True
    return float(np.dot(states.velocity(orbit.min_index), diff)) < 0.0


def _level_has_uturn(states: OrbitStates, orbit: IndexOrbit, level: int) -> bool:
    if orbit.length >> level == 1:
        # singleton members: endpoints coincide, dot products are exactly zero
        return False
    x_minus, x_plus, v_minus, v_plus = states._endpoint_views(orbit, level)
    diff = x_plus - x_minus
    if bool((np.einsum("ij,ij->i", v_plus, diff) < 0.0).any()):
        return True
    return bool((np.einsum("ij,ij->i", v_minus, diff) < 0.0).any())


def sub_uturn_check(
    states: OrbitStates,
    orbit: IndexOrbit,
    uturn_test: Callable[[OrbitStates, IndexOrbit], bool] | None = None,
) -> bool:
    """Whether any member of the halving family of ``orbit`` has a U-turn.

    Levels are scanned from the whole orbit (level 0) down to singletons,
    short-circuiting on the first hit.  A custom ``uturn_test`` replaces the
    endpoint check on every family member (used by the length-only oracles).
    """
    if uturn_test is not None:
        for member in orbit.halving_family():
            if uturn_test(states, member):
                return True
        return False
    for level in range(orbit.log2_length + 1):
        if _level_has_uturn(states, orbit, level):
            return True
    return False


@dataclass(frozen=True)
class OrbitSelectionResult:
    orbit: IndexOrbit
    stop_reason: StopReason
    direction_bits: tuple[bool, ...]
    gradient_evals: int
    states: OrbitStates


def select_orbit(
    base: PhasePoint,
    cfg: LeapfrogConfig,
    k_max: int,
    rng,
    target: TargetModel | None = None,
    uturn_test: Callable[[OrbitStates, IndexOrbit], bool] | None = None,
    step_size_fn: Callable[[int], float] | None = None,
    workspace: OrbitWorkspace | None = None,
) -> OrbitSelectionResult:
    """Run the doubling orbit-selection loop from the base state.

    Starting with I0 = {0}, each round draws a direction bit (True = extend
    forward in time), materializes the same-length adjacent extension, and
    stops with the current orbit if the extension has the sub-U-turn
    property; otherwise the doubled orbit is selected if it has the U-turn
    property or has reached length 2**k_max.  Exactly one direction bit is
    consumed per attempted doubling.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    draws = as_draws(rng, base.dimension)
    states = OrbitStates(base, cfg, target, step_size_fn=step_size_fn, workspace=workspace)
    current = IndexOrbit(0, 0)
    bits: list[bool] = []
    while True:
        forward = draws.direction_bit(len(bits))
        bits.append(forward)
        if forward:
            extension = IndexOrbit(current.max_index + 1, current.log2_length)
        else:
            extension = IndexOrbit(current.min_index - current.length, current.log2_length)
        states.ensure(extension.min_index, extension.max_index)
        if sub_uturn_check(states, extension, uturn_test):
            chosen, reason = current, StopReason.EXTENSION_SUB_UTURN
            break
        doubled = IndexOrbit(
            min(current.min_index, extension.min_index), current.log2_length + 1
        )
        has_uturn = (
            uturn_test(states, doubled) if uturn_test is not None else uturn_check(states, doubled)
        )
        if has_uturn:
            chosen, reason = doubled, StopReason.DOUBLED_ORBIT_UTURN
            break
        if doubled.log2_length == k_max:
            chosen, reason = doubled, StopReason.MAX_DEPTH
            break
        current = doubled
    return OrbitSelectionResult(chosen, reason, tuple(bits), states.steps_taken, states)


SINE_SCAN_CSV_HEADER = "k,time,dot_plus_over_d,dot_minus_over_d,sine,deviation"


@dataclass(frozen=True)
class SineScanRow:
    k: int
    time: float
    dot_plus_over_d: float
    dot_minus_over_d: float
    sine: float
    deviation: float

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.k),
                repr(self.time),
                repr(self.dot_plus_over_d),
                repr(self.dot_minus_over_d),
                repr(self.sine),
                repr(self.deviation),
            ]
        )


def uturn_sine_scan(
    base: PhasePoint,
    cfg: LeapfrogConfig,
    k_range: range,
    target: TargetModel | None = None,
) -> list[SineScanRow]:
    """Scan the U-turn dot products of the forward orbits {0, ..., 2^k - 1}.

    For each k the endpoint dot products are scaled by 1/d and compared
    against sin(h (2^k - 1)); the deviation column is the larger of the two
    absolute deviations.  Singleton orbits contribute an all-zero row.
    """
    ks = sorted(k_range)
    if not ks or ks[0] < 0:
        raise ValueError("k_range must be a non-empty range of non-negative integers")
    d = base.dimension
    states = OrbitStates(base, cfg, target)
    states.ensure(0, (1 << ks[-1]) - 1)
    rows = []
    for k in ks:
        orbit = IndexOrbit(0, k)
        time = cfg.step_size * (orbit.length - 1)
        sine = math.sin(time)
        if orbit.length == 1:
            dot_plus = dot_minus = 0.0
        else:
            diff = states.position(orbit.max_index) - states.position(orbit.min_index)
            dot_plus = float(np.dot(states.velocity(orbit.max_index), diff)) / d
            dot_minus = float(np.dot(states.velocity(orbit.min_index), diff)) / d
        deviation = max(abs(dot_plus - sine), abs(dot_minus - sine))
        rows.append(SineScanRow(k, time, dot_plus, dot_minus, sine, deviation))
    return rows
