import math

import numpy as np
import pytest
from scipy import stats

from nutslab import (
    CoupledPair,
    KernelKind,
    LeapfrogConfig,
    SamplerConfig,
    chain_rng,
    contraction_factor,
    couple_velocities,
    coupled_experiment,
    one_shot_step,
    synchronous_step,
)
from nutslab.coupling import _synchronous_records
from nutslab.streams import TransitionDraws


def uniform_cfg(h=0.11, k=5, seed=0):
    return SamplerConfig(h=h, kernel=KernelKind.UNIFORM_HMC, fixed_k=k, seed=seed)


class TestSynchronousStep:
    def test_equal_states_stay_identical(self):
        cfg = SamplerConfig(h=0.11, k_max=6, seed=3)
        rng = chain_rng(3, 0)
        x = rng.standard_normal(64)
        pair = CoupledPair(x.copy(), x.copy(), rng)
        for _ in range(5):
            pair = synchronous_step(pair, cfg)
            assert np.array_equal(pair.state_a, pair.state_b)

    def test_uniform_hmc_distance_ratio_is_exact_cosine(self):
        cfg = uniform_cfg(seed=4)
        lf = LeapfrogConfig(cfg.h)
        rng = chain_rng(4, 0)
        d = 128
        pair = CoupledPair(rng.standard_normal(d), rng.standard_normal(d), rng)
        for _ in range(50):
            before = pair.distance
            pair, rec_a, rec_b = _synchronous_records(pair, cfg)
            assert rec_a.index == rec_b.index  # state-independent selections
            expected = abs(math.cos(lf.beta_h * cfg.h * rec_a.index))
            assert pair.distance == pytest.approx(expected * before, rel=1e-12, abs=1e-12)

    def test_mean_ratio_matches_contraction_factor(self):
        # Monte Carlo mean of the per-step ratio against the exact sum,
        # 3 standard errors
        cfg = uniform_cfg(seed=5)
        lf = LeapfrogConfig(cfg.h)
        rng = chain_rng(5, 0)
        d = 16
        pair = CoupledPair(rng.standard_normal(d), rng.standard_normal(d), rng)
        ratios = []
        for _ in range(10_000):
            before = pair.distance
            pair, rec_a, _ = _synchronous_records(pair, cfg)
            ratios.append(abs(math.cos(lf.beta_h * cfg.h * rec_a.index)))
            if pair.distance < 1e-280:  # restart before underflow
                pair = CoupledPair(rng.standard_normal(d), rng.standard_normal(d), rng)
        ratios = np.array(ratios)
        factor = contraction_factor(cfg, 5)
        se = ratios.std() / math.sqrt(len(ratios))
        assert abs(ratios.mean() - factor) <= 3 * se


class TestContractionFactor:
    def test_singleton_orbit_no_motion(self):
        assert contraction_factor(SamplerConfig(h=0.11), 0) == 1.0

    def test_matches_double_loop_oracle(self):
        # independent summation over all (orbit, index) pairs of the family
        cfg = SamplerConfig(h=0.11)
        lf = LeapfrogConfig(cfg.h)
        k = 5
        n = 1 << k
        total = 0.0
        for min_index in range(-(n - 1), 1):
            for index in range(min_index, min_index + n):
                total += abs(math.cos(lf.beta_h * cfg.h * index)) / (n * n)
        assert contraction_factor(cfg, k) == pytest.approx(total, abs=1e-12)

    def test_contractive_once_orbit_time_passes_half_period(self):
        for h in (0.05, 0.11, 0.2, 0.4):
            cfg = SamplerConfig(h=h)
            k = 1
            while h * ((1 << k) - 1) < math.pi / 2.0:
                k += 1
            assert contraction_factor(cfg, k) < 1.0 - 1e-3


class TestCoupleVelocities:
    def test_zero_shift_always_meets(self):
        rng = chain_rng(6, 0)
        for _ in range(20):
            v, v_b, coupled = couple_velocities(rng, np.zeros(4))
            assert coupled
            assert np.array_equal(v, v_b)

    def test_meeting_probability_matches_gaussian_tv(self):
        # oracle: P(meet) = 1 - TV(N(0,I), N(m,I)) = 2 Phi(-|m|/2)
        rng = chain_rng(7, 0)
        n = 20_000
        for shift in (0.5, 2.0):
            m = np.zeros(6)
            m[0] = shift
            met = sum(couple_velocities(rng, m)[2] for _ in range(n))
            expected = 2.0 * stats.norm.cdf(-shift / 2.0)
            assert abs(met / n - expected) < 0.02

    def test_both_marginals_standard_gaussian(self):
        rng = chain_rng(8, 0)
        m = np.zeros(3)
        m[0] = 1.2
        first, second, rejected = [], [], []
        for _ in range(4000):
            v, v_b, coupled = couple_velocities(rng, m)
            first.extend(v)
            second.extend(v_b)
            if not coupled:
                rejected.extend(v_b)
        assert stats.kstest(first, stats.norm.cdf).pvalue > 0.001
        assert stats.kstest(second, stats.norm.cdf).pvalue > 0.001
        # conditioned on rejection the output follows the residual law, not
        # the Gaussian; only the pooled marginal above is Gaussian
        assert len(rejected) > 100
        assert np.isfinite(rejected).all()

    def test_reflection_map_preserves_gaussianity(self):
        # the rejection-branch reflection sends N(m, I) to N(0, I): applied
        # to unconditioned shifted draws, the output passes a Gaussian KS test
        rng = chain_rng(12, 0)
        m = np.zeros(3)
        m[0] = 1.2
        e = m / np.linalg.norm(m)
        pooled = []
        for _ in range(4000):
            z = rng.standard_normal(3) + m
            reflected = z - 2.0 * float(np.dot(z - 0.5 * m, e)) * e
            pooled.extend(reflected)
        assert stats.kstest(pooled, stats.norm.cdf).pvalue > 0.001


class TestOneShotStep:
    def test_meets_exactly_and_stays_met(self):
        cfg = uniform_cfg(seed=9)
        rng = chain_rng(9, 0)
        d = 32
        x = rng.standard_normal(d)
        pair = CoupledPair(x, x + 1e-3 * rng.standard_normal(d), rng)
        met_at = None
        for it in range(200):
            pair = one_shot_step(pair, 5, cfg)
            if pair.met:
                met_at = it
                break
        assert met_at is not None
        assert np.array_equal(pair.state_a, pair.state_b)
        # faithful from now on, through both coupling styles
        pair = one_shot_step(pair, 5, cfg)
        assert pair.met and np.array_equal(pair.state_a, pair.state_b)
        pair = synchronous_step(pair, cfg)
        assert np.array_equal(pair.state_a, pair.state_b)

    def test_never_met_by_distance_alone(self):
        cfg = uniform_cfg(seed=10)
        rng = chain_rng(10, 0)
        d = 8
        pair = CoupledPair(rng.standard_normal(d), rng.standard_normal(d), rng)
        for _ in range(100):
            pair = synchronous_step(pair, cfg)
        assert not pair.met  # synchronous coupling contracts but never meets

    def test_excluded_path_lengths_fall_back_to_synchronous(self):
        cfg = uniform_cfg(seed=11)
        rng = chain_rng(11, 0)
        d = 8
        pair = CoupledPair(rng.standard_normal(d), rng.standard_normal(d), rng)
        # excluding every path length forces the synchronous fallback forever
        times = [cfg.h * j for j in range(-31, 32)]
        for _ in range(30):
            pair = one_shot_step(pair, 5, cfg, B=times)
        assert not pair.met


class TestOneShotFailureBound:
    def test_failure_probability_within_paper_bound(self):
        # P(no meet) <= sum_{t not in B} |cot(beta_h t)| tau({t}) |x - x~| + tau(B)
        cfg = uniform_cfg(seed=15)
        lf = LeapfrogConfig(cfg.h)
        k = 5
        d = 8
        rng = chain_rng(15, 0)
        x_a = rng.standard_normal(d)
        gap = 0.01 * rng.standard_normal(d)
        from nutslab import triangular_path_pmf
        from nutslab.coupling import _default_exclusion_indices

        times, pmf = triangular_path_pmf(k, cfg.h)
        excluded = _default_exclusion_indices(cfg, k)
        js = np.rint(times / cfg.h).astype(int)
        tau_b = sum(p for j, p in zip(js, pmf) if int(j) in excluded)
        cot_term = sum(
            abs(math.cos(lf.beta_h * t) / math.sin(lf.beta_h * t)) * p
            for j, t, p in zip(js, times, pmf)
            if int(j) not in excluded
        )
        bound = cot_term * float(np.linalg.norm(gap)) + tau_b
        failures = 0
        n = 4000
        for trial in range(n):
            pair = CoupledPair(x_a.copy(), x_a + gap, chain_rng(16, trial))
            pair = one_shot_step(pair, k, cfg)
            failures += not pair.met
        assert failures / n <= bound


class TestCoupledExperiment:
    def test_trace_shapes_and_histogram_mass(self):
        cfg = SamplerConfig(h=0.11, k_max=6, seed=12)
        trace = coupled_experiment(4, 6, cfg, dimension=64)
        assert len(trace.mean_distance) == 6
        assert len(trace.mean_cum_leapfrog) == 6
        assert len(trace.met_fraction) == 6
        assert sum(trace.path_time_counts.values()) == 4 * 6 * 2
        assert all(f == 0.0 for f in trace.met_fraction)
        rows = trace.trace_rows()
        assert rows[0].startswith("1,")

    def test_coupled_nuts_contracts(self):
        cfg = SamplerConfig(h=0.11, k_max=10, seed=13)
        trace = coupled_experiment(12, 25, cfg, dimension=2500)
        assert trace.mean_distance[-1] < trace.mean_distance[0] / 5.0

    def test_deterministic_across_worker_counts(self):
        cfg = SamplerConfig(h=0.11, k_max=6, seed=14)
        t1 = coupled_experiment(6, 5, cfg, dimension=32, n_jobs=1)
        t2 = coupled_experiment(6, 5, cfg, dimension=32, n_jobs=2)
        assert t1.mean_distance == t2.mean_distance
        assert t1.path_time_counts == t2.path_time_counts

    def test_looping_regime_costs_maximal_orbits(self):
        # at h=0.1 nearly every transition runs to the 2^10-state orbit
        cfg = SamplerConfig(h=0.1, k_max=10, seed=16)
        trace = coupled_experiment(4, 3, cfg, dimension=10_000, n_jobs=2)
        per_transition = trace.mean_cum_leapfrog[-1] / 3
        assert per_transition > 800  # approaching 2^10 - 1 steps

    def test_admissible_step_beats_smaller_one_per_gradient(self):
        # h=0.11 (orbit 2^5) contracts faster per leapfrog step than h=0.09
        # (orbit 2^6): compare distances at matched cumulative gradient budget
        d = 10_000
        slow = coupled_experiment(
            10, 20, SamplerConfig(h=0.09, k_max=10, seed=17), dimension=d, n_jobs=2
        )
        fast = coupled_experiment(
            10, 40, SamplerConfig(h=0.11, k_max=10, seed=17), dimension=d, n_jobs=2
        )
        budget = min(slow.mean_cum_leapfrog[-1], fast.mean_cum_leapfrog[-1])

        def distance_at(trace, target):
            for dist, cum in zip(trace.mean_distance, trace.mean_cum_leapfrog):
                if cum >= target:
                    return dist
            return trace.mean_distance[-1]

        assert distance_at(fast, budget) < distance_at(slow, budget)

    def test_path_length_histogram_matches_triangular_law(self):
        # the Figure-3 inset: pooled NUTS path lengths at h=0.11 against the
        # triangular law of the admissible exponent
        from nutslab import triangular_path_pmf

        cfg = SamplerConfig(h=0.11, k_max=10, seed=18)
        trace = coupled_experiment(100, 50, cfg, dimension=10_000, n_jobs=2)
        times, pmf = triangular_path_pmf(5, cfg.h)
        n = sum(trace.path_time_counts.values())
        empirical = np.array(
            [trace.path_time_counts.get(float(t), 0) / n for t in times]
        )
        leftover = 1.0 - empirical.sum()  # mass outside the tau_5 support
        tv = 0.5 * (float(np.abs(empirical - pmf).sum()) + leftover)
        assert tv < 0.05
