"""Markov-chain analysis of the batch system under processor sharing.

The chain state records, just before a batch generates, the id of that batch
and how many frames of every batch are still unfinished.  Processor sharing
with exponential service makes the completion stream a plain rate-``mu``
Poisson process while work remains, with each completion striking a uniformly
random unfinished frame; the per-step transition therefore factors into a
completion-count PMF and a multivariate hypergeometric choice of which frames
the completions removed.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import special as _sp

from .numerics import check_stochastic, erlang_cdf
from .policy_analysis import (
    DEFAULT_STATE_CAP,
    PolicyAnalysis,
    StateSpaceCapError,
    batch_gap,
    batch_index_after,
    build_analysis,
    completion_count_pmf,
    wrap_batch,
)
from .scenario import Policy, Scenario, validate
from .sync_analysis import tagged_service_cdf

__all__ = [
    "analyze",
    "enumerate_states",
    "transition_matrix",
    "success_probabilities",
    "conditional_matrices",
    "latency_cdf",
    "paoi_cdf",
    "expected_latency_given_state",
    "batch_gap",
    "batch_index_after",
]


def enumerate_states(scenario: Scenario, cap: int = DEFAULT_STATE_CAP):
    """Full product state space and its index map.

    States are ``(next_batch, residual_1, ..., residual_B)`` with residuals
    bounded by the batch sizes, enumerated lexicographically (next batch as
    the major key, then the residual vector row-major).
    """
    scenario = validate(scenario)
    B = scenario.n_batches
    size = B
    for nb in scenario.batch_sizes:
        size *= nb + 1
    if size > cap:
        raise StateSpaceCapError(
            f"scenario needs {size} states, above the cap of {cap}"
        )
    ranges = [range(nb + 1) for nb in scenario.batch_sizes]
    states = tuple(
        (b,) + resid
        for b in range(1, B + 1)
        for resid in itertools.product(*ranges)
    )
    index = {st: i for i, st in enumerate(states)}
    return states, index


def transition_matrix(scenario: Scenario, states=None, index=None) -> np.ndarray:
    """One-step (batch to next batch) transition matrix."""
    scenario = validate(scenario)
    if states is None or index is None:
        states, index = enumerate_states(scenario)
    B = scenario.n_batches
    mu = scenario.service_rate
    n = len(states)
    lgf = _sp.gammaln(np.arange(scenario.n_clients + 2) + 1.0)  # log k!

    def log_choose(total: int, take: int) -> float:
        return float(lgf[total] - lgf[take] - lgf[total - take])

    P = np.zeros((n, n))
    pmf_cache: dict = {}
    for i, st in enumerate(states):
        b = st[0]
        groups = list(st[1:])
        groups[b - 1] = scenario.batch_sizes[b - 1]  # batch b regenerates in full
        active = sum(groups)
        key = (b, active)
        if key not in pmf_cache:
            pmf_cache[key] = completion_count_pmf(active, mu, scenario.gap_after(b))
        pmf = pmf_cache[key]
        next_b = wrap_batch(b + 1, B)
        for survivors in itertools.product(*(range(g + 1) for g in groups)):
            done = active - sum(survivors)
            logfac = -log_choose(active, done)
            for g, s in zip(groups, survivors):
                logfac += log_choose(g, g - s)
            j = index[(next_b,) + survivors]
            P[i, j] = pmf[done] * math.exp(logfac)
    return check_stochastic(P)


class _GpsModel:
    """Adapter feeding the shared batch machinery."""

    def __init__(self, scenario: Scenario, cap: int = DEFAULT_STATE_CAP):
        self.scenario = scenario
        self.states, self.index = enumerate_states(scenario, cap)
        self.root_index = self.index[(1,) + (0,) * scenario.n_batches]

    def transition_matrix(self) -> np.ndarray:
        return transition_matrix(self.scenario, self.states, self.index)

    def _class_states(self, batch: int):
        return [st for st in self.states if st[0] == batch]

    def success_fraction(self, batch: int) -> np.ndarray:
        """Per arrival state of the same class, the fraction of the tagged
        batch delivered over the full cycle."""
        nb = self.scenario.batch_sizes[batch - 1]
        return np.array([(nb - st[batch]) / nb for st in self._class_states(batch)])

    def _active_after(self, st) -> int:
        b = st[0]
        return self.scenario.batch_sizes[b - 1] + sum(
            st[k] for k in range(1, self.scenario.n_batches + 1) if k != b
        )

    def window_profile(self, batch: int, j: int, u) -> np.ndarray:
        """Unconditioned service CDF of a tagged batch-``batch`` frame inside
        window ``j``, per state entered at the window's start."""
        scn = self.scenario
        other = wrap_batch(batch + j, scn.n_batches)
        nb = scn.batch_sizes[batch - 1]
        u = np.asarray(u, dtype=float)
        rows = self._class_states(other)
        out = np.empty((len(rows), u.size))
        cache: dict = {}
        for r, st in enumerate(rows):
            residual = nb if j == 0 else st[batch]
            active = self._active_after(st)
            key = (residual, active)
            if key not in cache:
                if residual == 0:
                    cache[key] = np.ones_like(u)
                else:
                    share = np.asarray(tagged_service_cdf(active, scn.service_rate, u))
                    cache[key] = ((nb - residual) + residual * share) / nb
            out[r] = cache[key]
        return out

    def window_survival_integral(self, batch: int, j: int) -> np.ndarray:
        """Integral over window ``j`` of the tagged frame's survival
        probability, per state entering the window."""
        scn = self.scenario
        other = wrap_batch(batch + j, scn.n_batches)
        gap = scn.gap_after(other)
        nb = scn.batch_sizes[batch - 1]
        rows = self._class_states(other)
        out = np.empty(len(rows))
        cache: dict = {}
        for r, st in enumerate(rows):
            residual = nb if j == 0 else st[batch]
            active = self._active_after(st)
            key = (residual, active)
            if key not in cache:
                cache[key] = residual / nb * _survival_integral(active, scn.service_rate, gap)
            out[r] = cache[key]
        return out


def _survival_integral(active: int, rate: float, gap: float) -> float:
    # integral over [0, gap] of 1 - tagged_service_cdf(active, rate, t)
    acc = 0.0
    for k in range(active):
        acc += (active - k) * erlang_cdf(k + 1, rate, gap)
    return acc / (rate * active)


def analyze(scenario: Scenario, cap: int = DEFAULT_STATE_CAP) -> PolicyAnalysis:
    """Build the full processor-sharing analysis for a scenario."""
    scenario = validate(scenario)
    return build_analysis(scenario, Policy.GPS, _GpsModel(scenario, cap))


def success_probabilities(scenario: Scenario, transition=None):
    """Per-state success probabilities, per-batch averages, and the
    stationary vector (in state enumeration order)."""
    analysis = analyze(scenario)
    return analysis.sigma_state, analysis.sigma_batch, analysis.pi


def conditional_matrices(scenario: Scenario, batch: int):
    """Cycle-step matrices over the batch's class: conditioned on delivery,
    the joint failure matrix, and conditioned on failure."""
    analysis = analyze(scenario)
    success = analysis.cond_success[batch - 1]
    failure = analysis.cond_failure[batch - 1]
    rows = analysis.class_rows[batch - 1]
    sigma = analysis.sigma_state[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        failure_cond = np.where((1.0 - sigma)[:, None] > 0,
                                failure / (1.0 - sigma)[:, None], 0.0)
    return success, failure, failure_cond


def latency_cdf(scenario: Scenario, batch: int, t):
    return analyze(scenario).latency_cdf(batch, t)


def paoi_cdf(scenario: Scenario, batch: int, psi):
    return analyze(scenario).paoi_cdf(batch, psi)


def expected_latency_given_state(scenario: Scenario, state) -> float:
    """Mean latency of a successful frame generated while in ``state``."""
    analysis = analyze(scenario)
    return float(analysis.expected_latency_state[analysis.index[tuple(state)]])
