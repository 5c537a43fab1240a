"""Reduced-state Markov analysis of the batch system under FIFO queueing.

Strict service order makes the queue composition a function of its length:
survivors are always the newest frames, so the state only needs the id of the
next batch and the total number of unfinished frames.  Stale frames of a
generating batch sit at the head of the queue and are discarded on its epoch,
which caps the queue at the client count.
"""

from __future__ import annotations

import numpy as np

from .numerics import check_stochastic, erlang_cdf, poisson_pmf
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

__all__ = [
    "analyze",
    "enumerate_states",
    "transition_matrix",
    "queue_behind",
    "success_probabilities",
    "service_cdf_within_gap",
    "latency_cdf",
    "conditional_matrices",
    "paoi_cdf",
    "expected_latency_given_state",
]


def enumerate_states(scenario: Scenario, cap: int = DEFAULT_STATE_CAP):
    """States ``(next_batch, queued)`` with ``queued`` in 0..N; size B(N+1)."""
    scenario = validate(scenario)
    size = scenario.n_batches * (scenario.n_clients + 1)
    if size > cap:
        raise StateSpaceCapError(f"scenario needs {size} states, above the cap of {cap}")
    states = tuple(
        (b, k)
        for b in range(1, scenario.n_batches + 1)
        for k in range(scenario.n_clients + 1)
    )
    index = {st: i for i, st in enumerate(states)}
    return states, index


def queue_behind(scenario: Scenario, batch: int, latest: int) -> int:
    """Frames queued behind ``batch``'s generation once ``latest`` is the most
    recently generated batch (0 when they coincide; wraps cyclically)."""
    B = scenario.n_batches
    steps = (latest - batch) % B
    return sum(scenario.batch_size(batch + k) for k in range(1, steps + 1))


def _queue_after(scenario: Scenario, state) -> int:
    """Queue length right after the state's batch generates; preemption of
    that batch's stale frames keeps it at or below the client count."""
    b, queued = state
    return min(queued + scenario.batch_sizes[b - 1], scenario.n_clients)


def transition_matrix(scenario: Scenario, states=None, index=None) -> np.ndarray:
    scenario = validate(scenario)
    if states is None or index is None:
        states, index = enumerate_states(scenario)
    B = scenario.n_batches
    P = np.zeros((len(states), len(states)))
    for i, st in enumerate(states):
        b = st[0]
        active = _queue_after(scenario, st)
        pmf = completion_count_pmf(active, scenario.service_rate, scenario.gap_after(b))
        next_b = wrap_batch(b + 1, B)
        for remaining in range(active + 1):
            P[i, index[(next_b, remaining)]] = pmf[active - remaining]
    return check_stochastic(P)


def service_cdf_within_gap(scenario: Scenario, batch: int, state, t):
    """CDF of the in-window service time of a tagged ``batch`` frame that is
    still queued when ``state``'s batch generates (no arrivals before ``t``).

    Zero when the queue no longer holds any frames of the tagged batch.
    """
    scenario = validate(scenario)
    state = tuple(state)
    t_arr = np.asarray(t, dtype=float)
    active = _queue_after(scenario, state)
    behind = queue_behind(scenario, batch, state[0])
    ahead_or_own = active - behind
    if ahead_or_own <= 0:
        out = np.zeros_like(t_arr, dtype=float)
        return float(out) if np.ndim(t) == 0 else out
    nb = scenario.batch_size(batch)
    present = min(nb, ahead_or_own)
    older = ahead_or_own - present
    lam = scenario.service_rate * t_arr
    out = np.array(erlang_cdf(ahead_or_own, scenario.service_rate, t_arr),
                   dtype=float, copy=True)
    for c in range(older + 1, ahead_or_own):
        out += poisson_pmf(c, lam) * (c - older) / present
    if np.ndim(t) == 0:
        return float(out)
    return out


class _FifoModel:
    """Adapter feeding the shared batch machinery."""

    def __init__(self, scenario: Scenario, cap: int = DEFAULT_STATE_CAP):
        self.scenario = scenario
        self.states, self.index = enumerate_states(scenario, cap)
        self.root_index = self.index[(1, 0)]

    def transition_matrix(self) -> np.ndarray:
        return transition_matrix(self.scenario, self.states, self.index)

    def _class_states(self, batch: int):
        return [st for st in self.states if st[0] == batch]

    def success_fraction(self, batch: int) -> np.ndarray:
        """Fraction of the tagged batch delivered over a cycle, per queue
        length found at the next epoch of the same batch: lengths at or below
        the other batches' total mean everything was served."""
        scn = self.scenario
        n, nb = scn.n_clients, scn.batch_sizes[batch - 1]
        out = np.empty(n + 1)
        for queued in range(n + 1):
            if queued <= n - nb:
                out[queued] = 1.0
            else:
                out[queued] = (n - queued) / nb
        return out

    def window_profile(self, batch: int, j: int, u) -> np.ndarray:
        scn = self.scenario
        other = wrap_batch(batch + j, scn.n_batches)
        nb = scn.batch_sizes[batch - 1]
        behind = queue_behind(scn, batch, other)
        u = np.asarray(u, dtype=float)
        rows = self._class_states(other)
        out = np.empty((len(rows), u.size))
        for r, st in enumerate(rows):
            active = _queue_after(scn, st)
            alive = min(max(active - behind, 0), nb)
            if alive == 0:
                out[r] = 1.0
            else:
                inner = np.asarray(service_cdf_within_gap(scn, batch, st, u))
                out[r] = (nb - alive + alive * inner) / nb
        return out

    def window_survival_integral(self, batch: int, j: int) -> np.ndarray:
        scn = self.scenario
        mu = scn.service_rate
        other = wrap_batch(batch + j, scn.n_batches)
        gap = scn.gap_after(other)
        nb = scn.batch_sizes[batch - 1]
        behind = queue_behind(scn, batch, other)
        rows = self._class_states(other)
        out = np.zeros(len(rows))
        for r, st in enumerate(rows):
            ahead_or_own = _queue_after(scn, st) - behind
            if ahead_or_own <= 0:
                continue
            acc = 0.0
            for k in range(ahead_or_own):
                acc += min(1.0, (ahead_or_own - k) / nb) * erlang_cdf(k + 1, mu, gap)
            out[r] = acc / mu
        return out


def analyze(scenario: Scenario, cap: int = DEFAULT_STATE_CAP) -> PolicyAnalysis:
    """Build the full FIFO analysis for a scenario."""
    scenario = validate(scenario)
    return build_analysis(scenario, Policy.FIFO, _FifoModel(scenario, cap))


def success_probabilities(scenario: Scenario, transition=None):
    analysis = analyze(scenario)
    return analysis.sigma_state, analysis.sigma_batch, analysis.pi


def conditional_matrices(scenario: Scenario, batch: int):
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
    analysis = analyze(scenario)
    return float(analysis.expected_latency_state[analysis.index[tuple(state)]])
