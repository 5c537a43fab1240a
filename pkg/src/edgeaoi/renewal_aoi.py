"""Expected age of information assembled from inter-delivery renewals.

For a tagged client, consecutive deliveries are separated by a whole number of
periods; runs of failed frames are walks of the failure matrix.  The age over
a renewal is a trapezoid determined by the gap and the delivering frame's
latency, so the time-average age follows from the first two moments of the
gap and the gap-latency cross moment, each an exact Neumann series of the
failure matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import NumericsError, neumann_first_moment, neumann_second_moment
from .policy_analysis import PolicyAnalysis


@dataclass(frozen=True)
class RenewalMoments:
    """Per-batch renewal moments and the resulting time-average age."""

    inter_success_mean: float      # E[Y]
    inter_success_second: float    # E[Y^2]
    latency_cross: float           # E[T Y]
    expected_aoi: float

    def __post_init__(self):
        if self.inter_success_second < self.inter_success_mean ** 2 * (1 - 1e-12):
            raise NumericsError("second moment below squared mean")


def inter_success_pmf(analysis: PolicyAnalysis, batch: int, m: int) -> float:
    """Probability that the next delivered frame comes ``m`` periods after the
    previous delivery, for clients of ``batch``."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"gap must be a positive integer number of periods, got {m!r}")
    rows = analysis.class_rows[batch - 1]
    sigma = analysis.sigma_state[rows]
    return float(analysis._psi_vector(batch, int(m)) @ sigma)


def moments(analysis: PolicyAnalysis, batch: int, *, self_check: bool = False,
            check_terms: int = 500, check_tol: float = 1e-7) -> RenewalMoments:
    """Renewal moments for ``batch`` via the exact closed-form series.

    With ``self_check`` the closed forms are compared against direct truncated
    summation of the series.
    """
    rows = analysis.class_rows[batch - 1]
    sigma = analysis.sigma_state[rows]
    latency = analysis.expected_latency_state[rows]
    head = analysis.weights[batch - 1] @ analysis.cond_success[batch - 1]
    failure = analysis.cond_failure[batch - 1]
    tau = analysis.scenario.period

    first = neumann_first_moment(failure)
    second = neumann_second_moment(failure)
    ey = tau * float(head @ first @ sigma)
    ey2 = tau * tau * float(head @ second @ sigma)
    ety = tau * float(head @ first @ (sigma * latency))

    if self_check:
        t1, t2, tc = _truncated_moments(head, failure, sigma, latency, tau, check_terms)
        for exact, approx, name in ((ey, t1, "E[Y]"), (ey2, t2, "E[Y^2]"), (ety, tc, "E[TY]")):
            if abs(exact - approx) > check_tol * max(1.0, abs(exact)):
                raise NumericsError(
                    f"{name} closed form {exact!r} disagrees with truncated sum {approx!r}"
                )

    aoi = ey2 / (2.0 * ey) + ety / ey
    return RenewalMoments(
        inter_success_mean=ey,
        inter_success_second=ey2,
        latency_cross=ety,
        expected_aoi=aoi,
    )


def _truncated_moments(head, failure, sigma, latency, tau, terms):
    v = head.copy()
    acc1 = acc2 = accc = 0.0
    for m in range(1, terms + 1):
        hit = float(v @ sigma)
        acc1 += m * hit
        acc2 += m * m * hit
        accc += m * float(v @ (sigma * latency))
        v = v @ failure
    tail = float(v.sum())
    if tail > 1e-10:
        raise NumericsError(f"truncated series left {tail!r} mass after {terms} terms")
    return tau * acc1, tau * tau * acc2, tau * accc


def expected_aoi(analysis: PolicyAnalysis, batch: int) -> float:
    return moments(analysis, batch).expected_aoi


def aggregate_expected_aoi(analysis: PolicyAnalysis) -> float:
    """Client-weighted average age across batches."""
    sizes = analysis.scenario.batch_sizes
    total = 0.0
    for b, size in enumerate(sizes, start=1):
        total += size * moments(analysis, b).expected_aoi
    return total / analysis.scenario.n_clients
