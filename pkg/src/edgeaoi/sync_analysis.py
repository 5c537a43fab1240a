"""Closed-form timeliness metrics for the synchronized single-batch system.

With every client generating at the same instant, the server always restarts
fully loaded and both scheduling disciplines behave identically: completions
form a rate-``mu`` Poisson stream and each completion is equally likely to
belong to any unfinished client.  Everything below follows from that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import DistributionCurve
from .numerics import clamp_probability, erlang_cdf, poisson_pmf
from .scenario import Scenario, ScenarioError, validate


@dataclass(frozen=True)
class SyncMetrics:
    success_probability: float
    expected_latency: float
    expected_aoi: float


def tagged_service_cdf(active: int, rate: float, t):
    """P(one designated frame out of ``active`` finishes within ``t``),
    with no arrivals in between.

    Equals ``sum_k P(k completions) * k/active``: by symmetry the designated
    frame is among ``k`` uniformly chosen completions with probability
    ``k/active``.
    """
    if active < 1:
        raise ValueError("need at least one active frame")
    t = np.asarray(t, dtype=float)
    lam = rate * t
    out = np.array(erlang_cdf(active, rate, t), dtype=float, copy=True)
    for k in range(1, active):
        out += k * poisson_pmf(k, lam) / active
    out = clamp_probability(out)
    if np.ndim(t) == 0:
        return float(out)
    return out


def residual_pmf(n_clients: int, service_rate: float, period: float) -> np.ndarray:
    """PMF of the number of frames still unfinished just before the next
    generation instant; index k = unfinished count in 0..N."""
    _check_args(n_clients, service_rate, period)
    lam = service_rate * period
    pmf = np.empty(n_clients + 1)
    pmf[0] = erlang_cdf(n_clients, service_rate, period)
    for k in range(1, n_clients + 1):
        pmf[k] = poisson_pmf(n_clients - k, lam)
    return pmf


def success_probability(n_clients: int, service_rate: float, period: float) -> float:
    """Probability that a given client's frame finishes before its successor
    is generated."""
    pmf = residual_pmf(n_clients, service_rate, period)
    ks = np.arange(n_clients)
    return float(np.dot((n_clients - ks) / n_clients, pmf[:-1]))


def latency_cdf(n_clients: int, service_rate: float, period: float, t):
    """CDF of the service latency of a successful frame, for t in [0, period].

    The unconditioned completion probability is normalized by the success
    probability so the curve reaches exactly 1 at the period boundary.
    """
    _check_args(n_clients, service_rate, period)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-12) or np.any(t_arr > period * (1 + 1e-12)):
        raise ValueError("latency argument outside [0, period]")
    t_arr = np.clip(t_arr, 0.0, period)
    sigma = success_probability(n_clients, service_rate, period)
    out = clamp_probability(tagged_service_cdf(n_clients, service_rate, t_arr) / sigma)
    if np.ndim(t) == 0:
        return float(out)
    return out


def paoi_cdf(n_clients: int, service_rate: float, period: float, psi):
    """CDF of the peak age just before a delivery resets it.

    A peak equals ``m`` whole periods plus the latency of the delivering
    frame, with ``m`` geometric in the per-frame success probability.
    """
    _check_args(n_clients, service_rate, period)
    sigma = success_probability(n_clients, service_rate, period)
    psi_arr = np.atleast_1d(np.asarray(psi, dtype=float))
    out = np.zeros_like(psi_arr)
    mask = psi_arr >= period * (1 - 1e-12)
    if np.any(mask):
        ratio = psi_arr[mask] / period
        m = np.floor(ratio - 1.0 + 1e-12).astype(int)
        m = np.maximum(m, 0)
        resid = np.clip(psi_arr[mask] - (m + 1) * period, 0.0, period)
        tail = latency_cdf(n_clients, service_rate, period, resid)
        out[mask] = 1.0 - (1.0 - sigma) ** m * (1.0 - sigma * np.asarray(tail))
    out = clamp_probability(out)
    if np.ndim(psi) == 0:
        return float(out[0])
    return out


def expected_latency(n_clients: int, service_rate: float, period: float) -> float:
    """Mean latency of successful frames, from integrating the survival
    function of the latency CDF in closed form."""
    _check_args(n_clients, service_rate, period)
    sigma = success_probability(n_clients, service_rate, period)
    total = _latency_survival_integral(n_clients, service_rate, period)
    return -(1.0 - sigma) * period / sigma + total / sigma


def expected_aoi(n_clients: int, service_rate: float, period: float) -> float:
    """Long-run time-average age for one client."""
    _check_args(n_clients, service_rate, period)
    return period / 2.0 + _latency_survival_integral(
        n_clients, service_rate, period
    ) / success_probability(n_clients, service_rate, period)


def _latency_survival_integral(n_clients: int, service_rate: float, period: float) -> float:
    # sum_k (N-k)/N * Gamma_reg(k+1, mu*tau) / mu == integral of the
    # unconditioned survival probability over one period
    acc = 0.0
    for k in range(n_clients):
        acc += (n_clients - k) * erlang_cdf(k + 1, service_rate, period)
    return acc / (service_rate * n_clients)


def metrics(scenario: Scenario) -> SyncMetrics:
    scenario = validate(scenario)
    if not scenario.is_synchronized:
        raise ScenarioError("closed-form synchronized metrics need a single batch")
    n, mu, tau = scenario.n_clients, scenario.service_rate, scenario.period
    return SyncMetrics(
        success_probability=success_probability(n, mu, tau),
        expected_latency=expected_latency(n, mu, tau),
        expected_aoi=expected_aoi(n, mu, tau),
    )


def latency_curve(n_clients: int, service_rate: float, period: float,
                  points: int = 1000) -> DistributionCurve:
    grid = np.linspace(0.0, period, points + 1)
    return DistributionCurve(grid, latency_cdf(n_clients, service_rate, period, grid))


def paoi_curve(n_clients: int, service_rate: float, period: float,
               points_per_period: int = 1000, tail: float = 1e-9,
               max_periods: int = 100_000) -> DistributionCurve:
    """Sampled peak-age CDF out to where the residual tail mass drops below
    ``tail``."""
    sigma = success_probability(n_clients, service_rate, period)
    horizon = min(max_periods, max(2, math.ceil(math.log(tail) / math.log(1.0 - sigma))))
    grid = np.arange(horizon * points_per_period + 1) * (period / points_per_period)
    return DistributionCurve(grid, paoi_cdf(n_clients, service_rate, period, grid))


def _check_args(n_clients: int, service_rate: float, period: float) -> None:
    if not isinstance(n_clients, (int, np.integer)) or n_clients < 1:
        raise ValueError(f"n_clients must be a positive integer, got {n_clients!r}")
    if service_rate <= 0 or period <= 0:
        raise ValueError("service_rate and period must be positive")
