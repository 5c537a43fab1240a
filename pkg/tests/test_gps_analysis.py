import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from conftest import rng_scenarios
from edgeaoi import gps_analysis as gps
from edgeaoi import sync_analysis as sync
from edgeaoi.policy_analysis import StateSpaceCapError, batch_gap, batch_index_after
from edgeaoi.scenario import Policy, validate
from edgeaoi.simulator import SimulationConfig, run


def make(n, mu, tau, sizes, tail):
    return validate(dict(n_clients=n, service_rate=mu, period=tau,
                         batch_sizes=sizes, offsets_from_2=tail))


@pytest.fixture(scope="module")
def mixed():
    return make(5, 6.0, 1.0, [2, 3], [0.4])


@pytest.fixture(scope="module")
def mixed_analysis(mixed):
    return gps.analyze(mixed)


class TestStateSpace:
    def test_counts(self):
        states, _ = gps.enumerate_states(make(3, 1.0, 1.0, [3], []))
        assert len(states) == 4
        states, _ = gps.enumerate_states(make(4, 1.0, 1.0, [2, 2], [0.5]))
        assert len(states) == 18
        states, _ = gps.enumerate_states(make(8, 1.0, 1.0, [1] * 8, [1 / 8] * 7))
        assert len(states) == 8 * 2 ** 8

    def test_index_is_bijection(self):
        states, index = gps.enumerate_states(make(4, 1.0, 1.0, [2, 2], [0.5]))
        assert len(index) == len(states)
        assert all(states[i] == st for st, i in index.items())

    def test_cap_refusal(self):
        with pytest.raises(StateSpaceCapError):
            gps.enumerate_states(make(8, 1.0, 1.0, [1] * 8, [1 / 8] * 7), cap=100)


class TestTransitionMatrix:
    def test_single_client_half_load(self):
        scn = make(1, math.log(2), 1.0, [1], [])
        P = gps.transition_matrix(scn)
        states, index = gps.enumerate_states(scn)
        i = index[(1, 0)]
        assert P[i, index[(1, 0)]] == pytest.approx(0.5, abs=1e-12)
        assert P[i, index[(1, 1)]] == pytest.approx(0.5, abs=1e-12)

    def test_rows_sum_to_one(self, mixed):
        P = gps.transition_matrix(mixed)
        assert P.sum(axis=1) == pytest.approx(np.ones(P.shape[0]), abs=1e-9)

    @pytest.mark.parametrize("sizes,tail", [([1, 1], [0.45]), ([2, 1], [0.3])])
    def test_scipy_oracle(self, sizes, tail):
        # completed-count PMF via scipy poisson/gamma and the frame selection
        # via scipy's multivariate hypergeometric, assembled independently
        scn = make(sum(sizes), 4.0, 1.0, sizes, tail)
        states, index = gps.enumerate_states(scn)
        P = gps.transition_matrix(scn)
        B = len(sizes)
        for i, st in enumerate(states):
            b = st[0]
            groups = list(st[1:])
            groups[b - 1] = sizes[b - 1]
            active = sum(groups)
            gap = scn.gap_after(b)
            for j, st2 in enumerate(states):
                if st2[0] != b % B + 1:
                    assert P[i, j] == 0.0
                    continue
                survivors = list(st2[1:])
                if any(s > g for s, g in zip(survivors, groups)):
                    assert P[i, j] == 0.0
                    continue
                done = active - sum(survivors)
                if done < active:
                    p_count = stats.poisson.pmf(done, scn.service_rate * gap)
                else:
                    p_count = stats.gamma.cdf(gap, a=active, scale=1 / scn.service_rate)
                removed = [g - s for g, s in zip(groups, survivors)]
                if done == 0:
                    p_pick = 1.0
                else:
                    p_pick = stats.multivariate_hypergeom.pmf(
                        x=removed, m=groups, n=done)
                assert P[i, j] == pytest.approx(p_count * p_pick, abs=1e-12)

    def test_pairwise_selection_is_uniform(self):
        # two active frames, one completion: each is removed with chance 1/2
        scn = make(2, 3.0, 1.0, [1, 1], [0.5])
        states, index = gps.enumerate_states(scn)
        P = gps.transition_matrix(scn)
        i = index[(1, 0, 1)]  # batch 1 regenerates alongside one old batch-2 frame
        one_done = stats.poisson.pmf(1, 3.0 * 0.5)
        assert P[i, index[(2, 1, 0)]] == pytest.approx(one_done / 2, abs=1e-12)
        assert P[i, index[(2, 0, 1)]] == pytest.approx(one_done / 2, abs=1e-12)


class TestBatchTiming:
    def test_zero_time(self, mixed):
        assert batch_index_after(mixed, 1, 0.0) == 1
        assert batch_gap(mixed, 1, 1) == 0.0

    def test_quarter_cycle_walk(self):
        scn = make(4, 4.0, 1.0, [1] * 4, [0.25] * 3)
        assert batch_index_after(scn, 1, 0.3) == 2

    def test_wrap_around_gap(self):
        scn = make(2, 4.0, 1.0, [1, 1], [0.7])
        # from batch 2 the next batch 1 arrives after the cycle-closing gap
        assert batch_gap(scn, 2, 1) == pytest.approx(0.3, abs=1e-12)

    def test_full_cycle_edges(self, mixed):
        assert batch_index_after(mixed, 1, mixed.period) == 2
        assert batch_gap(mixed, 1, 2) == pytest.approx(0.4)


class TestSuccessProbabilities:
    def test_single_batch_reduces_to_sync(self):
        for n in (1, 3, 8):
            scn = make(n, 5.0, 1.0, [n], [])
            _, sigma_batch, _ = gps.success_probabilities(scn)
            assert sigma_batch[0] == pytest.approx(
                sync.success_probability(n, 5.0, 1.0), abs=1e-9)

    def test_class_mass_is_uniform(self, mixed_analysis):
        B = mixed_analysis.scenario.n_batches
        for rows in mixed_analysis.class_rows:
            assert mixed_analysis.pi[rows].sum() == pytest.approx(1 / B, abs=1e-9)

    def test_sigma_bounds(self, mixed_analysis):
        assert np.all(mixed_analysis.sigma_state > 0)
        assert np.all(mixed_analysis.sigma_state <= 1)

    def test_monte_carlo_agreement(self, mixed, mixed_analysis):
        rep = run(SimulationConfig(scenario=mixed, policy=Policy.GPS,
                                   periods=120_000, warmup_periods=1000,
                                   seed=21, replications=8))
        for b in (1, 2):
            rates = rep.rep_success_rates_of_batch(b)
            se = rates.std(ddof=1) / math.sqrt(rates.size)
            assert abs(rates.mean() - mixed_analysis.sigma_batch[b - 1]) <= 4 * se

    def test_monotone_in_rate(self):
        prev = None
        for mu in (3.0, 5.0, 8.0, 12.0):
            scn = make(4, mu, 1.0, [2, 2], [0.5])
            _, sigma_batch, _ = gps.success_probabilities(scn)
            if prev is not None:
                assert np.all(sigma_batch >= prev - 1e-12)
            prev = sigma_batch


class TestLatencyCdf:
    def test_zero_at_origin(self, mixed_analysis):
        assert mixed_analysis.latency_cdf(1, 0.0) == 0.0

    def test_one_at_period(self, mixed_analysis):
        for b in (1, 2):
            assert mixed_analysis.latency_cdf(b, 1.0) == pytest.approx(1.0, abs=1e-8)

    def test_single_batch_reduces_to_sync(self):
        scn = make(6, 5.0, 1.0, [6], [])
        an = gps.analyze(scn)
        grid = np.linspace(0, 1, 257)
        assert an.latency_cdf(1, grid) == pytest.approx(
            sync.latency_cdf(6, 5.0, 1.0, grid), abs=1e-9)

    def test_nondecreasing(self, mixed_analysis):
        grid = np.linspace(0, 1, 400)
        for b in (1, 2):
            assert np.all(np.diff(mixed_analysis.latency_cdf(b, grid)) >= -1e-12)


class TestConditionalMatrices:
    def test_success_rows_sum_to_one(self, mixed_analysis):
        for mat in mixed_analysis.cond_success:
            assert mat.sum(axis=1) == pytest.approx(np.ones(mat.shape[0]), abs=1e-9)

    def test_failure_rows_sum_to_failure_probability(self, mixed_analysis):
        for b, mat in enumerate(mixed_analysis.cond_failure, start=1):
            rows = mixed_analysis.class_rows[b - 1]
            sigma = mixed_analysis.sigma_state[rows]
            assert mat.sum(axis=1) == pytest.approx(1 - sigma, abs=1e-9)

    def test_total_probability_reconstruction(self, mixed, mixed_analysis):
        cycle = mixed_analysis.powers[mixed.n_batches]
        for b in (1, 2):
            rows = mixed_analysis.class_rows[b - 1]
            sigma = mixed_analysis.sigma_state[rows]
            block = cycle[np.ix_(rows, rows)]
            recon = (sigma[:, None] * mixed_analysis.cond_success[b - 1]
                     + mixed_analysis.cond_failure[b - 1])
            assert recon == pytest.approx(block, abs=1e-10)

    def test_module_level_triple(self, mixed):
        success, failure, failure_cond = gps.conditional_matrices(mixed, 1)
        assert success.shape == failure.shape == failure_cond.shape


class TestPaoiCdf:
    def test_zero_below_period(self, mixed_analysis):
        assert mixed_analysis.paoi_cdf(1, 0.5) == 0.0

    def test_single_batch_reduces_to_sync(self):
        scn = make(5, 5.0, 1.0, [5], [])
        an = gps.analyze(scn)
        grid = np.linspace(0, 8, 173)
        assert an.paoi_cdf(1, grid) == pytest.approx(
            sync.paoi_cdf(5, 5.0, 1.0, grid), abs=1e-8)

    def test_monotone_and_saturates(self, mixed_analysis):
        curve = mixed_analysis.paoi_curve(1, points_per_period=200)
        assert np.all(np.diff(curve.probability) >= -1e-12)
        assert curve.probability[-1] >= 1 - 1e-8

    def test_truncation_horizon_bounds_tail(self, mixed_analysis):
        horizon = mixed_analysis.paoi_horizon(tail=1e-9)
        worst = np.max(1 - mixed_analysis.sigma_state)
        assert worst ** horizon <= 1e-9


class TestExpectedLatencyGivenState:
    def test_single_client_matches_sync(self):
        scn = make(1, 2.0, 1.0, [1], [])
        an = gps.analyze(scn)
        expected = sync.expected_latency(1, 2.0, 1.0)
        for st in an.states:
            assert gps.expected_latency_given_state(scn, st) == pytest.approx(
                expected, abs=1e-10)

    def test_quadrature_oracle_all_states(self):
        scn = make(4, 5.0, 1.0, [2, 2], [0.45])
        an = gps.analyze(scn)
        for b in (1, 2):
            rows = an.class_rows[b - 1]
            for local, gi in enumerate(rows):
                oracle, _ = quad(
                    lambda t: 1 - float(an.latency_cdf_by_state(b, t)[local, 0]),
                    0, 1.0, limit=200)
                assert an.expected_latency_state[gi] == pytest.approx(oracle, abs=1e-6)

    def test_bounds(self, mixed_analysis):
        vals = mixed_analysis.expected_latency_state
        assert np.all(vals > 0)
        assert np.all(vals < mixed_analysis.scenario.period)


class TestChainInvariants:
    def test_power_rows_stay_stochastic(self):
        for scn in rng_scenarios(seed=5, count=8, max_clients=6):
            an = gps.analyze(scn)
            B = scn.n_batches
            for m in (1, B, 2 * B):
                power = np.linalg.matrix_power(an.transition, m)
                assert power.sum(axis=1) == pytest.approx(
                    np.ones(power.shape[0]), abs=1e-8)

    def test_latency_curves_monotone_on_random_scenarios(self):
        for scn in rng_scenarios(seed=6, count=6, max_clients=6):
            an = gps.analyze(scn)
            curve = an.latency_curve(1, points=100)
            assert np.all(np.diff(curve.probability) >= -1e-12)
            assert curve.probability[-1] == pytest.approx(1.0, abs=1e-8)
