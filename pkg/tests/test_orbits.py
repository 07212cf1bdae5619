import math

import numpy as np
import pytest
from scipy import stats

from nutslab import (
    IndexOrbit,
    LeapfrogConfig,
    OrbitStates,
    PhasePoint,
    StopReason,
    exact_gaussian_flow,
    gaussian_leapfrog,
    select_orbit,
    standard_gaussian,
    sub_uturn_check,
    uturn_check,
    uturn_sine_scan,
)
from nutslab.streams import TransitionDraws


def length_only_oracle(h, delta=0.05):
    """U-turn iff the orbit's physical time lies in (pi + delta, 2pi - delta)."""

    def oracle(states, orbit):
        t = h * (orbit.length - 1)
        return math.pi + delta < t < 2.0 * math.pi - delta

    return oracle


class ScriptedBits(TransitionDraws):
    """TransitionDraws with a forced direction-bit sequence."""

    def __init__(self, rng, dimension, bits):
        super().__init__(rng, dimension)
        self._script = list(bits)

    def direction_bit(self, attempt):
        return self._script[attempt]


def states_from_points(points, min_index=0, h=0.1):
    return OrbitStates.from_iterates(min_index, points, LeapfrogConfig(h))


def flow_states(total_time, n, d=16):
    """Iterates of the exact flow from a sphere point with tangential velocity."""
    x = np.zeros(d)
    x[0] = math.sqrt(d)
    v = np.zeros(d)
    v[1] = math.sqrt(d)
    start = PhasePoint(x, v)
    dt = total_time / (n - 1)
    return [exact_gaussian_flow(start, i * dt) for i in range(n)]


class TestIndexOrbit:
    def test_basic_geometry(self):
        orbit = IndexOrbit(-3, 3)
        assert orbit.length == 8
        assert orbit.max_index == 4
        assert orbit.contains(0) and not orbit.contains(5)

    def test_negative_log_length_rejected(self):
        with pytest.raises(ValueError):
            IndexOrbit(0, -1)

    def test_halving_family_enumeration(self):
        family = list(IndexOrbit(2, 2).halving_family())
        expected = [
            IndexOrbit(2, 2),
            IndexOrbit(2, 1),
            IndexOrbit(4, 1),
            IndexOrbit(2, 0),
            IndexOrbit(3, 0),
            IndexOrbit(4, 0),
            IndexOrbit(5, 0),
        ]
        assert family == expected


class TestUturnCheck:
    def test_hand_case_no_uturn(self):
        points = [
            PhasePoint(np.array([1.0, 0.0]), np.array([0.0, 1.0])),
            PhasePoint(np.array([0.0, 1.0]), np.array([-1.0, 0.0])),
        ]
        states = states_from_points(points)
        assert uturn_check(states, IndexOrbit(0, 1)) is False

    def test_hand_case_uturn(self):
        points = [
            PhasePoint(np.array([1.0, 0.0]), np.array([0.0, 1.0])),
            PhasePoint(np.array([0.0, 1.0]), np.array([1.0, -1.0])),
        ]
        states = states_from_points(points)
        assert uturn_check(states, IndexOrbit(0, 1)) is True

    def test_exact_flow_time_ranges(self):
        # past pi the sphere orbit turns back; before pi it does not
        for total, expect in ((0.9 * math.pi, False), (1.5 * math.pi, True)):
            states = states_from_points(flow_states(total, 16))
            assert uturn_check(states, IndexOrbit(0, 4)) is expect

    def test_zero_dot_product_is_not_a_uturn(self):
        points = [
            PhasePoint(np.array([0.0, 0.0]), np.array([0.0, 1.0])),
            PhasePoint(np.array([1.0, 0.0]), np.array([0.0, 1.0])),
        ]
        states = states_from_points(points)
        assert uturn_check(states, IndexOrbit(0, 1)) is False

    def test_missing_endpoint_raises(self):
        states = states_from_points(flow_states(1.0, 4))
        with pytest.raises(KeyError):
            uturn_check(states, IndexOrbit(0, 3))


class TestSubUturnCheck:
    def test_singleton_never(self):
        states = states_from_points(flow_states(1.0, 4))
        assert sub_uturn_check(states, IndexOrbit(1, 0)) is False

    def test_left_half_only(self):
        # handcrafted so only the first half (indices 0..1) has a U-turn
        points = [
            PhasePoint(np.array([0.0, 0.0]), np.array([1.0, 0.0])),
            PhasePoint(np.array([-1.0, 0.0]), np.array([1.0, 0.0])),
            PhasePoint(np.array([5.0, 0.0]), np.array([1.0, 0.0])),
            PhasePoint(np.array([6.0, 0.0]), np.array([1.0, 0.0])),
        ]
        states = states_from_points(points)
        orbit = IndexOrbit(0, 2)
        assert uturn_check(states, orbit) is False
        assert sub_uturn_check(states, orbit) is True
        # brute-force oracle over the enumerated family agrees
        brute = any(uturn_check(states, member) for member in orbit.halving_family())
        assert brute is True

    def test_no_uturn_at_any_level(self):
        states = states_from_points(flow_states(0.9 * math.pi, 16))
        orbit = IndexOrbit(0, 4)
        assert sub_uturn_check(states, orbit) is False
        assert not any(uturn_check(states, member) for member in orbit.halving_family())

    def test_fast_path_matches_family_enumeration(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            points = [
                PhasePoint(rng.standard_normal(3), rng.standard_normal(3)) for _ in range(8)
            ]
            states = states_from_points(points, min_index=-3)
            orbit = IndexOrbit(-3, 3)
            brute = any(uturn_check(states, member) for member in orbit.halving_family())
            assert sub_uturn_check(states, orbit) is brute

    def test_monotone_in_whole_orbit(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            points = [
                PhasePoint(rng.standard_normal(3), rng.standard_normal(3)) for _ in range(4)
            ]
            states = states_from_points(points)
            orbit = IndexOrbit(0, 2)
            if uturn_check(states, orbit):
                assert sub_uturn_check(states, orbit) is True


class TestSelectOrbit:
    def test_oracle_h009_stops_at_64(self):
        rng = np.random.default_rng(30)
        base = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        for _ in range(20):
            res = select_orbit(base, LeapfrogConfig(0.09), 10, rng, uturn_test=length_only_oracle(0.09))
            assert res.stop_reason is StopReason.DOUBLED_ORBIT_UTURN
            assert res.orbit.length == 64  # physical time 0.09 * 63 = 5.67

    def test_oracle_h011_stops_at_32(self):
        rng = np.random.default_rng(31)
        base = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        for _ in range(20):
            res = select_orbit(base, LeapfrogConfig(0.11), 10, rng, uturn_test=length_only_oracle(0.11))
            assert res.stop_reason is StopReason.DOUBLED_ORBIT_UTURN
            assert res.orbit.length == 32  # physical time 0.11 * 31 = 3.41

    def test_never_uturn_hits_max_depth_uniformly(self):
        # enumerate all 2^3 direction sequences: each yields a distinct member
        # of the length-8 orbits containing 0
        rng = np.random.default_rng(32)
        base = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        never = lambda states, orbit: False
        seen = {}
        for bits in range(8):
            script = [(bits >> j) & 1 == 1 for j in range(3)]
            draws = ScriptedBits(np.random.default_rng(0), 2, script)
            res = select_orbit(base, LeapfrogConfig(0.3), 3, draws, uturn_test=never)
            assert res.stop_reason is StopReason.MAX_DEPTH
            assert res.orbit.length == 8
            assert res.orbit.contains(0)
            seen[res.orbit.min_index] = seen.get(res.orbit.min_index, 0) + 1
        assert len(seen) == 8
        assert all(c == 1 for c in seen.values())

    def test_extension_sub_uturn_stop_and_memory_contract(self):
        # oracle keyed on orbit position: fires only for the forward extension
        def oracle(states, orbit):
            return orbit.length == 2 and orbit.min_index >= 2

        rng = np.random.default_rng(33)
        base = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        draws = ScriptedBits(np.random.default_rng(0), 2, [True, True])
        res = select_orbit(base, LeapfrogConfig(0.3), 5, draws, uturn_test=oracle)
        assert res.stop_reason is StopReason.EXTENSION_SUB_UTURN
        assert res.orbit == IndexOrbit(0, 1)
        # the rejected extension stays materialized, one leapfrog step per new index
        assert list(res.states.indices()) == [0, 1, 2, 3]
        assert res.gradient_evals == 3
        assert res.states.steps_taken == 3

    def test_direction_bits_recorded_one_per_attempt(self):
        rng = np.random.default_rng(34)
        base = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        res = select_orbit(base, LeapfrogConfig(0.11), 10, rng, uturn_test=length_only_oracle(0.11))
        assert len(res.direction_bits) == 5  # five doublings to reach length 32

    def test_states_consistent_with_integrator(self):
        rng = np.random.default_rng(35)
        d = 6
        base = PhasePoint(rng.standard_normal(d), rng.standard_normal(d))
        cfg = LeapfrogConfig(0.11)
        res = select_orbit(base, cfg, 6, rng)
        for i in res.states.indices():
            ref = gaussian_leapfrog(base, cfg, i)
            np.testing.assert_allclose(res.states.position(i), ref.position, atol=1e-9)
        assert np.array_equal(res.states.position(0), base.position)

    def test_uniform_over_orbits_at_k_star(self):
        # with a state-independent admissible oracle the selection never stops
        # on an extension and the final orbit is uniform over the 32 candidates
        rng = np.random.default_rng(36)
        base = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
        oracle = length_only_oracle(0.11)
        counts = np.zeros(32)
        runs = 10_000
        for _ in range(runs):
            res = select_orbit(base, LeapfrogConfig(0.11), 10, rng, uturn_test=oracle)
            assert res.stop_reason is StopReason.DOUBLED_ORBIT_UTURN
            counts[-res.orbit.min_index] += 1
        assert stats.chisquare(counts).pvalue > 0.001


class TestSineScan:
    def test_singleton_row_is_zero(self):
        rng = np.random.default_rng(40)
        base = PhasePoint(rng.standard_normal(8), rng.standard_normal(8))
        row = uturn_sine_scan(base, LeapfrogConfig(0.11), range(0, 1))[0]
        assert row.time == 0.0
        assert row.dot_plus_over_d == 0.0
        assert row.dot_minus_over_d == 0.0
        assert row.deviation == 0.0

    def test_small_step_matches_sine(self):
        rng = np.random.default_rng(41)
        d = 10_000
        base = PhasePoint(rng.standard_normal(d), rng.standard_normal(d))
        rows = uturn_sine_scan(base, LeapfrogConfig(0.001), range(0, 6))
        assert all(abs(row.deviation) <= 1e-3 for row in rows)

    def test_deviation_bounded_in_concentration_event(self):
        from nutslab import concentration_event, in_shell
        from nutslab.geometry import delta_bound

        d = 10_000
        h = 0.11
        alpha = 2.0 * math.sqrt(d * math.log(d))
        r = 3.0 * math.sqrt(d * math.log(d))
        delta = delta_bound(alpha, r, d, h)
        bound = (2.0 / math.pi) * delta
        checked = 0
        for seed in range(12):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal(d)
            v = rng.standard_normal(d)
            if not (in_shell(x, alpha) and concentration_event(x, v, alpha, r)):
                continue
            checked += 1
            # the bound is proven for orbit times up to 2*pi: k <= 5 at h=0.11
            rows = uturn_sine_scan(PhasePoint(x, v), LeapfrogConfig(h), range(0, 6))
            assert all(abs(row.deviation) <= bound for row in rows)
        assert checked >= 10

    def test_moderate_k_deviations_small(self):
        d = 10_000
        rng = np.random.default_rng(2)
        base = PhasePoint(rng.standard_normal(d), rng.standard_normal(d))
        rows = uturn_sine_scan(base, LeapfrogConfig(0.11), range(0, 9))
        assert all(abs(row.deviation) < 0.05 for row in rows)

    def test_reproducible(self):
        rng1 = np.random.default_rng(43)
        rng2 = np.random.default_rng(43)
        d = 50
        b1 = PhasePoint(rng1.standard_normal(d), rng1.standard_normal(d))
        b2 = PhasePoint(rng2.standard_normal(d), rng2.standard_normal(d))
        r1 = uturn_sine_scan(b1, LeapfrogConfig(0.2), range(0, 5))
        r2 = uturn_sine_scan(b2, LeapfrogConfig(0.2), range(0, 5))
        assert r1 == r2
