"""Discrete-event Monte Carlo reference for the shared-server system.

The simulator reproduces the physical dynamics directly: batches generate on
their deterministic epochs, a generating batch preempts its own outstanding
frames, and while work remains completions arrive as a rate-``mu`` Poisson
stream (memorylessness makes per-frame sharing equivalent to that stream,
with processor sharing striking a uniformly random unfinished frame and FIFO
the head of the queue).  Ages are integrated exactly as sawtooth areas.

It shares no code with the analytical modules apart from the scenario type,
so agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _sim_kernel
from .metrics import DistributionCurve
from .scenario import Policy, Scenario, parse_policy, validate

DEFAULT_WARMUP = 1000
MAX_RAW_SAMPLES = 10_000_000
HISTOGRAM_BINS = 10_000
PAOI_HISTOGRAM_PERIODS = 50.0


@dataclass(frozen=True)
class SimulationConfig:
    scenario: Scenario
    policy: Policy
    periods: int
    warmup_periods: int = DEFAULT_WARMUP
    seed: int = 0
    replications: int = 1
    max_raw_samples: int = MAX_RAW_SAMPLES

    def __post_init__(self):
        object.__setattr__(self, "scenario", validate(self.scenario))
        object.__setattr__(self, "policy", parse_policy(self.policy))
        if self.periods < 2:
            raise ValueError("need at least two periods")
        if not 0 <= self.warmup_periods < self.periods:
            raise ValueError("warmup must be shorter than the run")
        if self.replications < 1:
            raise ValueError("need at least one replication")


@dataclass
class SimulationReport:
    """Empirical per-client and per-replication statistics.

    Raw latency and peak-age samples are kept when the run is small enough
    (``max_raw_samples``); fixed-bin histograms are always filled.
    """

    config: SimulationConfig
    seeds: tuple
    attempts_per_client: int
    rep_successes: np.ndarray        # (replications, clients)
    rep_aoi_area: np.ndarray         # (replications, clients)
    rep_aoi_span: np.ndarray         # (replications, clients)
    latency_values: "np.ndarray | None"
    latency_clients: "np.ndarray | None"
    paoi_values: "np.ndarray | None"
    paoi_clients: "np.ndarray | None"
    latency_hist: np.ndarray         # (clients, bins) over [0, period]
    paoi_hist: np.ndarray            # (clients, bins) over [0, horizon]
    latency_bin_edges: np.ndarray = field(repr=False, default=None)
    paoi_bin_edges: np.ndarray = field(repr=False, default=None)

    @property
    def raw_samples(self) -> bool:
        return self.latency_values is not None

    @property
    def successes(self) -> np.ndarray:
        return self.rep_successes.sum(axis=0)

    @property
    def success_rate(self) -> np.ndarray:
        return self.successes / (self.attempts_per_client * self.config.replications)

    def success_rate_of_batch(self, batch: int) -> float:
        clients = self.config.scenario.batch_clients(batch)
        total = self.successes[list(clients)].sum()
        return float(total / (self.attempts_per_client * self.config.replications * len(clients)))

    def rep_success_rates_of_batch(self, batch: int) -> np.ndarray:
        clients = list(self.config.scenario.batch_clients(batch))
        per_rep = self.rep_successes[:, clients].sum(axis=1)
        return per_rep / (self.attempts_per_client * len(clients))

    @property
    def aoi_mean(self) -> np.ndarray:
        """Per-client time-average age, pooled over replications."""
        area = self.rep_aoi_area.sum(axis=0)
        span = self.rep_aoi_span.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(span > 0, area / span, np.nan)

    def aoi_mean_of_batch(self, batch: int) -> float:
        clients = list(self.config.scenario.batch_clients(batch))
        return float(self.rep_aoi_area[:, clients].sum()
                     / self.rep_aoi_span[:, clients].sum())

    def rep_aoi_means_of_batch(self, batch: int) -> np.ndarray:
        clients = list(self.config.scenario.batch_clients(batch))
        return (self.rep_aoi_area[:, clients].sum(axis=1)
                / self.rep_aoi_span[:, clients].sum(axis=1))

    def _select(self, values, clients, batch, client):
        if values is None:
            raise ValueError("raw samples were not retained for this run size")
        if client is not None:
            return values[clients == client]
        if batch is not None:
            wanted = np.array(list(self.config.scenario.batch_clients(batch)))
            return values[np.isin(clients, wanted)]
        return values

    def latency_samples(self, batch: int = None, client: int = None) -> np.ndarray:
        return self._select(self.latency_values, self.latency_clients, batch, client)

    def paoi_samples(self, batch: int = None, client: int = None) -> np.ndarray:
        return self._select(self.paoi_values, self.paoi_clients, batch, client)


def derive_seeds(seed: int, replications: int) -> tuple:
    """Replication seeds spawned from one master seed.

    Uses ``numpy.random.SeedSequence`` spawning, so replications are
    reproducibly independent and the whole run is determined by the master
    seed alone.
    """
    children = np.random.SeedSequence(seed).spawn(replications)
    return tuple(int(c.generate_state(1, np.uint32)[0]) for c in children)


def run(config: SimulationConfig) -> SimulationReport:
    """Simulate all replications and merge their statistics."""
    scenario = config.scenario
    n = scenario.n_clients
    n_batches = scenario.n_batches

    batch_start = np.zeros(n_batches + 1, dtype=np.int64)
    for b, size in enumerate(scenario.batch_sizes, start=1):
        batch_start[b] = batch_start[b - 1] + size
    start_off = np.array(scenario.batch_start_times())
    gap_after = np.array([scenario.gap_after(b) for b in range(1, n_batches + 1)])
    batch_of = np.array([b - 1 for b in scenario.batch_of_clients()], dtype=np.int64)

    per_rep_samples = (config.periods - config.warmup_periods + 2) * n
    raw = per_rep_samples * config.replications <= config.max_raw_samples
    raw_cap = per_rep_samples if raw else 0

    seeds = derive_seeds(config.seed, config.replications)
    rep_successes = np.zeros((config.replications, n), dtype=np.int64)
    rep_area = np.zeros((config.replications, n))
    rep_span = np.zeros((config.replications, n))
    lat_vals, lat_cli, paoi_vals, paoi_cli = [], [], [], []
    lat_hist = np.zeros((n, HISTOGRAM_BINS), dtype=np.int64)
    paoi_hist = np.zeros((n, HISTOGRAM_BINS), dtype=np.int64)
    paoi_hi = PAOI_HISTOGRAM_PERIODS * scenario.period

    for r, rep_seed in enumerate(seeds):
        out = _sim_kernel.simulate(
            config.policy is Policy.FIFO, n, scenario.service_rate, scenario.period,
            batch_start, start_off, gap_after, batch_of,
            config.periods, config.warmup_periods, rep_seed,
            raw_cap, HISTOGRAM_BINS, HISTOGRAM_BINS, paoi_hi,
        )
        (successes, lv, lc, pv, pc, lh, ph, area, a_start, a_end) = out
        rep_successes[r] = successes
        rep_area[r] = area
        rep_span[r] = np.where(a_start >= 0, a_end - a_start, 0.0)
        lat_hist += lh
        paoi_hist += ph
        if raw:
            lat_vals.append(lv)
            lat_cli.append(lc)
            paoi_vals.append(pv)
            paoi_cli.append(pc)

    attempts = config.periods - 1 - config.warmup_periods
    return SimulationReport(
        config=config,
        seeds=seeds,
        attempts_per_client=attempts,
        rep_successes=rep_successes,
        rep_aoi_area=rep_area,
        rep_aoi_span=rep_span,
        latency_values=np.concatenate(lat_vals) if raw else None,
        latency_clients=np.concatenate(lat_cli) if raw else None,
        paoi_values=np.concatenate(paoi_vals) if raw else None,
        paoi_clients=np.concatenate(paoi_cli) if raw else None,
        latency_hist=lat_hist,
        paoi_hist=paoi_hist,
        latency_bin_edges=np.linspace(0.0, scenario.period, HISTOGRAM_BINS + 1),
        paoi_bin_edges=np.linspace(0.0, paoi_hi, HISTOGRAM_BINS + 1),
    )


def empirical_cdf(samples) -> DistributionCurve:
    """Step CDF of raw samples."""
    data = np.sort(np.asarray(samples, dtype=float))
    if data.size == 0:
        raise ValueError("cannot build an empirical CDF from no samples")
    xs, counts = np.unique(data, return_counts=True)
    return DistributionCurve(xs, np.cumsum(counts) / data.size)


def dkw_band(n: int, confidence: float = 0.99) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz envelope around an
    empirical CDF of ``n`` samples."""
    if n < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def ks_distance(cdf, samples) -> float:
    """Sup distance between a reference CDF callable and the empirical CDF."""
    data = np.sort(np.asarray(samples, dtype=float))
    if data.size == 0:
        raise ValueError("no samples")
    ref = np.asarray(cdf(data), dtype=float)
    steps = np.arange(1, data.size + 1) / data.size
    return float(max(np.max(steps - ref), np.max(ref - (steps - 1.0 / data.size))))
