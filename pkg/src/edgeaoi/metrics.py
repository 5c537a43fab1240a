"""Metric post-processing: sampled CDF curves, percentiles, Jain's index."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import NumericsError

_MONOTONE_TOL = 1e-10


@dataclass
class DistributionCurve:
    """A CDF sampled on a strictly increasing abscissa grid."""

    x: np.ndarray
    probability: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.probability = np.asarray(self.probability, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.probability.shape or self.x.size == 0:
            raise ValueError("curve needs matching nonempty 1-d abscissas and probabilities")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("abscissas must be strictly increasing")
        if np.any(self.probability < -_MONOTONE_TOL) or np.any(self.probability > 1 + _MONOTONE_TOL):
            raise NumericsError("curve probabilities outside [0, 1]")
        if np.any(np.diff(self.probability) < -_MONOTONE_TOL):
            raise NumericsError("curve probabilities decrease beyond tolerance")
        # tame sub-tolerance float dips so downstream consumers see a true CDF
        self.probability = np.maximum.accumulate(np.clip(self.probability, 0.0, 1.0))

    def __len__(self) -> int:
        return self.x.size

    def percentile(self, p: float) -> float:
        """Smallest abscissa whose probability reaches ``p`` percent."""
        if not 0.0 < p < 100.0:
            raise ValueError(f"percentile must lie in (0, 100), got {p!r}")
        target = p / 100.0
        pos = np.searchsorted(self.probability, target, side="left")
        if pos >= len(self.probability):
            raise ValueError(
                f"curve tops out at {self.probability[-1]!r} < requested {target!r}"
            )
        return float(self.x[pos])

    def evaluate(self, t) -> np.ndarray:
        """Right-continuous step interpolation of the sampled CDF."""
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.x, t, side="right") - 1
        vals = np.where(pos >= 0, self.probability[np.clip(pos, 0, None)], 0.0)
        return vals if vals.ndim else float(vals)


def percentile(data, p: float) -> float:
    """Left-continuous inverse CDF of a curve or of raw samples."""
    if isinstance(data, DistributionCurve):
        return data.percentile(p)
    samples = np.sort(np.asarray(data, dtype=float))
    if samples.size == 0:
        raise ValueError("cannot take a percentile of no samples")
    if not 0.0 < p < 100.0:
        raise ValueError(f"percentile must lie in (0, 100), got {p!r}")
    rank = math.ceil(samples.size * p / 100.0)
    return float(samples[max(rank, 1) - 1])


def jain_index(values) -> float:
    """Fairness of an allocation: (sum x)^2 / (n sum x^2), 1 when all equal."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("jain_index needs at least one value")
    if np.any(x <= 0):
        raise ValueError("jain_index is defined for strictly positive values")
    total = x.sum()
    return float(total * total / (x.size * np.dot(x, x)))
