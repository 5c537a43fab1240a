"""Shared machinery for the batch-arrival Markov analyses.

Both scheduling disciplines observe the system immediately before each batch
generates, giving a Markov chain that advances one batch per step.  A policy
module supplies the state space, the one-step transition matrix, the per-state
fraction of a batch that survives a full cycle, and the service profile of a
tagged frame inside each inter-batch window; everything else is assembled
here: stationary weighting, success-conditioned and failure transition
matrices, latency and peak-age CDFs, and per-state expected latencies.

States are tuples whose first entry is the 1-indexed id of the batch about to
generate; enumeration is lexicographic with that id as the major key, so
matrix indices are reproducible across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .metrics import DistributionCurve
from .numerics import (
    NumericsError,
    check_stochastic,
    clamp_probability,
    erlang_cdf,
    poisson_pmf,
    stationary_distribution,
)
from .scenario import Policy, Scenario

DEFAULT_STATE_CAP = 200_000
_TIME_TOL = 1e-12


class StateSpaceCapError(RuntimeError):
    """The requested scenario needs more Markov states than the configured cap."""


def wrap_batch(batch: int, n_batches: int) -> int:
    """Reduce a possibly out-of-range 1-indexed batch id into 1..B."""
    return (batch - 1) % n_batches + 1


def batch_gap(scenario: Scenario, batch: int, other: int) -> float:
    """Time from the generation of ``batch`` to the first following
    generation of ``other`` (0 when they coincide; wraps cyclically)."""
    B = scenario.n_batches
    steps = (other - batch) % B
    total = 0.0
    for k in range(1, steps + 1):
        total += scenario.gap_after(wrap_batch(batch + k - 1, B))
    return total


def batch_index_after(scenario: Scenario, batch: int, t: float) -> int:
    """Last batch generated within ``t`` time units of ``batch``'s epoch.

    Returned ids run from ``batch`` to ``batch + B - 1`` without wrapping, so
    the caller can tell apart the tagged batch's own epoch from the next
    cycle.  Requires ``0 <= t <= period``.
    """
    period = scenario.period
    if t < -_TIME_TOL * period or t > period * (1 + _TIME_TOL):
        raise ValueError(f"time {t!r} outside [0, period]")
    B = scenario.n_batches
    cumulative = 0.0
    for i in range(batch, batch + B):
        cumulative += scenario.gap_after(wrap_batch(i, B))
        if cumulative >= t - _TIME_TOL * period:
            return i
    return batch + B - 1


def completion_count_pmf(active: int, rate: float, gap: float) -> np.ndarray:
    """PMF of how many of ``active`` frames finish within ``gap`` when no new
    frames arrive; the top cell absorbs the everything-finished event."""
    if active < 1:
        raise ValueError("need at least one active frame")
    lam = rate * gap
    pmf = np.empty(active + 1)
    for c in range(active):
        pmf[c] = poisson_pmf(c, lam)
    pmf[active] = erlang_cdf(active, rate, gap)
    return pmf


def reachable_support(transition: np.ndarray, root: int) -> np.ndarray:
    """Indices reachable from ``root`` along positive-probability edges."""
    n = transition.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    stack = [root]
    while stack:
        i = stack.pop()
        for j in np.nonzero(transition[i] > 0.0)[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return np.nonzero(seen)[0]


@dataclass
class PolicyAnalysis:
    """Steady-state description of one policy on one scenario.

    Holds the state space with its index map, the stationary vector, per-state
    and per-batch success probabilities, the cycle-step matrices conditioned
    on delivery or failure of a tagged frame, per-state expected latencies,
    and evaluators for the latency and peak-age CDFs.
    """

    scenario: Scenario
    policy: Policy
    states: tuple
    index: dict
    class_rows: tuple              # per batch: global state indices, in order
    transition: np.ndarray
    powers: list                   # transition powers 0..B
    pi: np.ndarray
    sigma_state: np.ndarray
    sigma_batch: np.ndarray
    weights: list                  # per batch: success-biased stationary weights
    cond_success: list             # per batch: cycle-step matrix given delivery
    cond_failure: list             # per batch: joint failure matrix (rows sum 1-sigma)
    expected_latency_state: np.ndarray
    _profile: Callable = field(repr=False)
    _psi_cache: dict = field(default_factory=dict, repr=False)

    # -- latency ----------------------------------------------------------

    def _window_edges(self, batch: int) -> np.ndarray:
        B = self.scenario.n_batches
        edges = np.empty(B + 1)
        edges[0] = 0.0
        for j in range(1, B):
            edges[j] = batch_gap(self.scenario, batch, batch + j)
        edges[B] = self.scenario.period
        return edges

    def latency_cdf_by_state(self, batch: int, times) -> np.ndarray:
        """Success-conditioned latency CDF per starting state of the tagged
        batch's class; shape (class size, len(times))."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        period = self.scenario.period
        if np.any(t < -_TIME_TOL * period) or np.any(t > period * (1 + _TIME_TOL)):
            raise ValueError("latency argument outside [0, period]")
        t = np.clip(t, 0.0, period)
        B = self.scenario.n_batches
        rows = self.class_rows[batch - 1]
        edges = self._window_edges(batch)
        window = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, B - 1)
        sigma_rows = self.sigma_state[rows][:, None]
        out = np.empty((rows.size, t.size))
        for j in np.unique(window):
            sel = window == j
            u = t[sel] - edges[j]
            other = wrap_batch(batch + int(j), B)
            profile = self._profile(batch, int(j), u)
            block = self.powers[int(j)][np.ix_(rows, self.class_rows[other - 1])]
            out[:, sel] = (block @ profile) / sigma_rows
        return clamp_probability(out)

    def latency_cdf(self, batch: int, times):
        """Latency CDF of a successful frame generated with ``batch``."""
        per_state = self.latency_cdf_by_state(batch, times)
        out = clamp_probability(self.weights[batch - 1] @ per_state)
        if np.ndim(times) == 0:
            return float(out[0])
        return out

    def latency_curve(self, batch: int, points: int = 1000) -> DistributionCurve:
        grid = np.linspace(0.0, self.scenario.period, points + 1)
        return DistributionCurve(grid, self.latency_cdf(batch, grid))

    def expected_latency(self, batch: int) -> float:
        rows = self.class_rows[batch - 1]
        return float(self.weights[batch - 1] @ self.expected_latency_state[rows])

    # -- peak age ----------------------------------------------------------

    def _psi_vector(self, batch: int, m: int) -> np.ndarray:
        """Row vector: success-weighted start, one delivery-conditioned step,
        then ``m - 1`` failure steps."""
        cache = self._psi_cache.setdefault(batch, [])
        if not cache:
            cache.append(self.weights[batch - 1] @ self.cond_success[batch - 1])
        while len(cache) < m:
            cache.append(cache[-1] @ self.cond_failure[batch - 1])
        return cache[m - 1]

    def paoi_cdf(self, batch: int, psi):
        """CDF of the peak age of deliveries to clients of ``batch``."""
        psi_arr = np.atleast_1d(np.asarray(psi, dtype=float))
        period = self.scenario.period
        q = np.floor(psi_arr / period + 1e-12).astype(int)
        resid = np.clip(psi_arr - q * period, 0.0, period)
        out = np.zeros_like(psi_arr)
        mask = q >= 1
        if np.any(mask):
            rows = self.class_rows[batch - 1]
            sigma_cls = self.sigma_state[rows]
            per_state = self.latency_cdf_by_state(batch, resid[mask])
            gap = 1.0 - sigma_cls[:, None] * per_state
            positions = np.nonzero(mask)[0]
            for col, pos in enumerate(positions):
                v = self._psi_vector(batch, int(q[pos]))
                out[pos] = 1.0 - float(v @ gap[:, col])
        out = clamp_probability(out)
        if np.ndim(psi) == 0:
            return float(out[0])
        return out

    def paoi_horizon(self, tail: float = 1e-9, max_periods: int = 100_000) -> int:
        """Number of periods after which the residual peak-age mass is below
        ``tail`` from every state."""
        worst = float(np.max(1.0 - self.sigma_state))
        if worst <= 0.0:
            return 2
        return min(max_periods, max(2, math.ceil(math.log(tail) / math.log(worst))))

    def paoi_curve(self, batch: int, points_per_period: int = 1000,
                   tail: float = 1e-9, max_periods: int = 100_000) -> DistributionCurve:
        period = self.scenario.period
        horizon = self.paoi_horizon(tail, max_periods)
        step = period / points_per_period
        rows = self.class_rows[batch - 1]
        sigma_cls = self.sigma_state[rows]
        r_grid = np.arange(points_per_period) * step
        gap = 1.0 - sigma_cls[:, None] * self.latency_cdf_by_state(batch, r_grid)
        xs = np.arange(horizon * points_per_period + 1) * step
        vals = np.zeros_like(xs)
        for q in range(1, horizon + 1):
            block = 1.0 - self._psi_vector(batch, q) @ gap
            lo = q * points_per_period
            hi = min(lo + points_per_period, xs.size)
            vals[lo:hi] = block[: hi - lo]
        return DistributionCurve(xs, clamp_probability(vals))

    def paoi_percentile(self, batch: int, p: float,
                        points_per_period: int = 1000,
                        max_periods: int = 1_000_000) -> float:
        """Smallest grid abscissa whose peak-age CDF reaches ``p`` percent."""
        if not 0.0 < p < 100.0:
            raise ValueError(f"percentile must lie in (0, 100), got {p!r}")
        target = p / 100.0
        period = self.scenario.period
        step = period / points_per_period
        rows = self.class_rows[batch - 1]
        sigma_cls = self.sigma_state[rows]
        r_grid = np.arange(points_per_period) * step
        gap = 1.0 - sigma_cls[:, None] * self.latency_cdf_by_state(batch, r_grid)
        for q in range(1, max_periods + 1):
            block = 1.0 - self._psi_vector(batch, q) @ gap
            if block[-1] >= target:
                j = int(np.searchsorted(block, target, side="left"))
                return q * period + j * step
        raise NumericsError(f"peak-age CDF did not reach {target!r} within {max_periods} periods")


def build_analysis(scenario: Scenario, policy: Policy, model) -> PolicyAnalysis:
    """Assemble a :class:`PolicyAnalysis` from a policy adapter.

    The adapter must expose ``states``, ``index``, ``root_index``,
    ``transition_matrix()``, ``success_fraction(batch)``,
    ``window_profile(batch, j, u)`` and ``window_survival_integral(batch, j)``.
    """
    B = scenario.n_batches
    states = model.states
    n = len(states)
    class_rows = tuple(
        np.array([i for i, st in enumerate(states) if st[0] == b], dtype=int)
        for b in range(1, B + 1)
    )

    P = model.transition_matrix()
    powers = [np.eye(n)]
    for _ in range(B):
        powers.append(check_stochastic(powers[-1] @ P))
    cycle = powers[B]

    support = reachable_support(P, model.root_index)
    pi = stationary_distribution(P, support=support)

    sigma_state = np.empty(n)
    success_fractions = []
    for b in range(1, B + 1):
        rows = class_rows[b - 1]
        fraction = np.asarray(model.success_fraction(b), dtype=float)
        success_fractions.append(fraction)
        sigma_state[rows] = cycle[np.ix_(rows, rows)] @ fraction

    sigma_batch = np.empty(B)
    weights = []
    cond_success = []
    cond_failure = []
    for b in range(1, B + 1):
        rows = class_rows[b - 1]
        pi_cls = pi[rows]
        mass = pi_cls.sum()
        if abs(mass - 1.0 / B) > 1e-9:
            raise NumericsError(
                f"stationary mass of batch {b} class is {mass!r}, expected 1/{B}"
            )
        sig_cls = sigma_state[rows]
        weighted = pi_cls * sig_cls
        sigma_batch[b - 1] = weighted.sum() / mass
        weights.append(weighted / weighted.sum())

        block = cycle[np.ix_(rows, rows)]
        fraction = success_fractions[b - 1]
        usable = sig_cls > 1e-15
        if not np.all(usable):
            dead_mass = pi_cls[~usable].sum()
            if dead_mass > 1e-12:
                raise NumericsError(
                    f"states with zero success carry stationary mass {dead_mass!r}"
                )
        safe_sigma = np.where(usable, sig_cls, 1.0)
        success = block * fraction[None, :] / safe_sigma[:, None]
        success[~usable, :] = 0.0
        failure = block * (1.0 - fraction)[None, :]
        recon = sig_cls[:, None] * success + failure
        if np.max(np.abs(recon[usable] - block[usable])) > 1e-10:
            raise NumericsError("conditioned matrices do not reconstruct the cycle step")
        cond_success.append(check_stochastic(success)
                            if np.all(usable) else success)
        cond_failure.append(check_stochastic(failure, substochastic=True))

    tau = scenario.period
    expected_latency_state = np.full(n, np.nan)
    for b in range(1, B + 1):
        rows = class_rows[b - 1]
        sig_cls = sigma_state[rows]
        acc = np.zeros(rows.size)
        for j in range(B):
            other = wrap_batch(b + j, B)
            coeff = np.asarray(model.window_survival_integral(b, j), dtype=float)
            block = powers[j][np.ix_(rows, class_rows[other - 1])]
            acc += block @ coeff
        expected_latency_state[rows] = (-(1.0 - sig_cls) * tau + acc) / sig_cls

    return PolicyAnalysis(
        scenario=scenario,
        policy=policy,
        states=tuple(states),
        index=dict(model.index),
        class_rows=class_rows,
        transition=P,
        powers=powers,
        pi=pi,
        sigma_state=sigma_state,
        sigma_batch=sigma_batch,
        weights=weights,
        cond_success=cond_success,
        cond_failure=cond_failure,
        expected_latency_state=expected_latency_state,
        _profile=model.window_profile,
    )
