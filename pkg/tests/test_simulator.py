import math

import numpy as np
import pytest
from scipy import stats

from edgeaoi import sync_analysis as sync
from edgeaoi.scenario import Policy, validate
from edgeaoi.simulator import (
    SimulationConfig,
    derive_seeds,
    dkw_band,
    empirical_cdf,
    ks_distance,
    run,
)


def make(n, mu, tau, sizes, tail):
    return validate(dict(n_clients=n, service_rate=mu, period=tau,
                         batch_sizes=sizes, offsets_from_2=tail))


@pytest.fixture(scope="module")
def small_run():
    scn = make(4, 5.0, 1.0, [2, 2], [0.5])
    cfg = SimulationConfig(scenario=scn, policy=Policy.GPS, periods=30_000,
                           warmup_periods=500, seed=123)
    return cfg, run(cfg)


class TestDeterminism:
    def test_identical_seed_identical_report(self, small_run):
        cfg, first = small_run
        second = run(cfg)
        assert np.array_equal(first.rep_successes, second.rep_successes)
        assert np.array_equal(first.latency_values, second.latency_values)
        assert np.array_equal(first.paoi_values, second.paoi_values)
        assert np.array_equal(first.rep_aoi_area, second.rep_aoi_area)

    def test_different_seed_differs(self, small_run):
        cfg, first = small_run
        other = run(SimulationConfig(scenario=cfg.scenario, policy=cfg.policy,
                                     periods=cfg.periods,
                                     warmup_periods=cfg.warmup_periods, seed=124))
        assert not np.array_equal(first.latency_values, other.latency_values)

    def test_seed_derivation_is_stable(self):
        assert derive_seeds(7, 3) == derive_seeds(7, 3)
        assert len(set(derive_seeds(7, 16))) == 16


class TestClosedFormChecks:
    def test_single_client_success_probability(self):
        scn = make(1, math.log(2), 1.0, [1], [])
        rep = run(SimulationConfig(scenario=scn, policy=Policy.GPS,
                                   periods=100_000, warmup_periods=500, seed=42))
        se = math.sqrt(0.25 / rep.attempts_per_client)
        assert abs(rep.success_rate[0] - 0.5) <= 4 * se

    def test_latency_matches_sync_cdf(self):
        scn = make(5, 5.0, 1.0, [5], [])
        rep = run(SimulationConfig(scenario=scn, policy=Policy.FIFO,
                                   periods=80_000, warmup_periods=500, seed=9))
        samples = rep.latency_samples(batch=1)
        dist = ks_distance(lambda t: sync.latency_cdf(5, 5.0, 1.0, t), samples)
        assert dist <= dkw_band(rep.attempts_per_client, 0.999)

    def test_two_client_success_against_closed_form(self):
        scn = make(2, 5.0, 1.0, [2], [])
        rep = run(SimulationConfig(scenario=scn, policy=Policy.GPS,
                                   periods=150_000, warmup_periods=1000,
                                   seed=17, replications=4))
        theory = sync.success_probability(2, 5.0, 1.0)
        rates = rep.rep_success_rates_of_batch(1)
        se = rates.std(ddof=1) / math.sqrt(rates.size)
        assert abs(rates.mean() - theory) <= 4 * se

    def test_unit_load_drop_rate_range(self):
        scn = make(10, 10.0, 1.0, [10], [])
        rep = run(SimulationConfig(scenario=scn, policy=Policy.FIFO,
                                   periods=25_000, warmup_periods=500, seed=4))
        drop = 1.0 - rep.success_rate_of_batch(1)
        assert 0.10 <= drop <= 0.20

    def test_policies_coincide_when_synchronized(self):
        scn = make(4, 6.0, 1.0, [4], [])
        reps = {}
        for policy in (Policy.GPS, Policy.FIFO):
            reps[policy] = run(SimulationConfig(
                scenario=scn, policy=policy, periods=50_000,
                warmup_periods=500, seed=10 if policy is Policy.GPS else 11))
        stat = stats.ks_2samp(reps[Policy.GPS].latency_samples(),
                              reps[Policy.FIFO].latency_samples())
        assert stat.pvalue > 0.01


class TestReportInvariants:
    def test_sample_domains(self, small_run):
        cfg, rep = small_run
        assert np.all(rep.latency_values >= 0)
        assert np.all(rep.latency_values <= cfg.scenario.period * (1 + 1e-9))
        assert np.all(rep.paoi_values >= cfg.scenario.period * (1 - 1e-9))
        assert np.all(rep.aoi_mean >= cfg.scenario.period / 2)

    def test_same_batch_clients_exchangeable(self, small_run):
        cfg, rep = small_run
        for b in (1, 2):
            clients = list(cfg.scenario.batch_clients(b))
            rates = rep.success_rate[clients]
            p = rates.mean()
            se = math.sqrt(p * (1 - p) / rep.attempts_per_client)
            assert np.ptp(rates) <= 5 * se * math.sqrt(2)

    def test_sawtooth_area_matches_renewal_sum(self, small_run):
        # age integral between deliveries == sum of peak/latency trapezoids
        cfg, rep = small_run
        for client in range(cfg.scenario.n_clients):
            lat = rep.latency_samples(client=client)
            pa = rep.paoi_samples(client=client)
            # peaks skip the first delivery and pair with the latency of the
            # delivery before them; both sequences are chronological
            assert pa.size == lat.size - 1
            heads = lat[: pa.size]
            area = float(np.sum(0.5 * (pa ** 2 - heads ** 2)))
            kernel_area = rep.rep_aoi_area[0, client]
            assert area == pytest.approx(kernel_area, rel=1e-9)

    def test_attempt_accounting(self, small_run):
        cfg, rep = small_run
        assert rep.attempts_per_client == cfg.periods - 1 - cfg.warmup_periods
        assert np.all(rep.successes <= rep.attempts_per_client)

    def test_histograms_cover_samples(self, small_run):
        cfg, rep = small_run
        assert rep.latency_hist.sum() == rep.latency_values.size
        assert rep.paoi_hist.sum() == rep.paoi_values.size


class TestReplications:
    def test_merge_counts(self):
        scn = make(2, 4.0, 1.0, [2], [])
        rep = run(SimulationConfig(scenario=scn, policy=Policy.GPS,
                                   periods=5_000, warmup_periods=100,
                                   seed=3, replications=3))
        assert rep.rep_successes.shape == (3, 2)
        assert len(rep.seeds) == 3
        assert rep.latency_values.size == rep.latency_hist.sum()

    def test_histogram_fallback(self):
        scn = make(2, 4.0, 1.0, [2], [])
        cfg = SimulationConfig(scenario=scn, policy=Policy.GPS, periods=5_000,
                               warmup_periods=100, seed=3, max_raw_samples=100)
        rep = run(cfg)
        assert not rep.raw_samples
        with pytest.raises(ValueError):
            rep.latency_samples()
        assert rep.latency_hist.sum() > 0


class TestHarness:
    def test_dkw_band_reference_value(self):
        assert dkw_band(10 ** 6, 0.99) == pytest.approx(0.001629, abs=2e-6)

    def test_dkw_band_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            dkw_band(0)
        with pytest.raises(ValueError):
            dkw_band(10, 1.5)

    def test_empirical_cdf_steps(self):
        curve = empirical_cdf([3.0, 1.0, 1.0, 2.0])
        assert list(curve.x) == [1.0, 2.0, 3.0]
        assert list(curve.probability) == [0.5, 0.75, 1.0]

    def test_single_sample_step(self):
        curve = empirical_cdf([2.5])
        assert list(curve.x) == [2.5]
        assert list(curve.probability) == [1.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_cdf([])

    def test_ks_distance_zero_for_own_cdf(self):
        samples = np.linspace(0.01, 0.99, 99)
        dist = ks_distance(lambda t: np.asarray(t), samples)
        assert dist <= 0.011


class TestConfigValidation:
    def test_warmup_must_be_shorter(self):
        scn = make(2, 4.0, 1.0, [2], [])
        with pytest.raises(ValueError):
            SimulationConfig(scenario=scn, policy=Policy.GPS, periods=100,
                             warmup_periods=100)

    def test_policy_parsing(self):
        scn = make(2, 4.0, 1.0, [2], [])
        cfg = SimulationConfig(scenario=scn, policy="fifo", periods=100,
                       warmup_periods=10)
        assert cfg.policy is Policy.FIFO
