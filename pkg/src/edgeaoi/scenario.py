"""System configuration shared by the analytical models and the simulator.

A scenario describes ``n_clients`` periodic clients that offload one frame per
period to a single server with exponential service times.  Clients are grouped
into batches that generate simultaneously; batch ``b`` is preceded by a gap
``offsets[b-1]`` since the previous batch, and the first gap closes the cycle
so that all gaps sum to the period.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

# Absolute tolerance on the gap-sum identity after normalization.
OFFSET_SUM_TOL = 1e-12
# Relative tolerance accepted when a caller supplies a redundant first gap.
_REDUNDANT_GAP_TOL = 1e-9


class Policy(Enum):
    """Server scheduling discipline."""

    GPS = "gps"
    FIFO = "fifo"


class ScenarioError(ValueError):
    """A configuration violates a model invariant."""


@dataclass(frozen=True)
class Scenario:
    """Validated, normalized system configuration.

    Attributes:
        n_clients: total number of clients (N).
        service_rate: frames the server completes per time unit (mu).
        period: frame generation period shared by all clients (tau).
        batch_sizes: clients per batch, one entry per batch.
        offsets: gap preceding each batch; ``offsets[0]`` closes the cycle and
            is always derived as ``period - sum(offsets[1:])``.
    """

    n_clients: int
    service_rate: float
    period: float
    batch_sizes: tuple[int, ...]
    offsets: tuple[float, ...]

    @property
    def n_batches(self) -> int:
        return len(self.batch_sizes)

    @property
    def is_synchronized(self) -> bool:
        return self.n_batches == 1

    @property
    def load(self) -> float:
        """Offered load: mean service demand per period over capacity."""
        return self.n_clients / (self.service_rate * self.period)

    def batch_size(self, batch: int) -> int:
        """Size of 1-indexed ``batch``, accepting wrapped indices."""
        return self.batch_sizes[(batch - 1) % self.n_batches]

    def gap_after(self, batch: int) -> float:
        """Time from the generation of ``batch`` to the next batch."""
        return self.offsets[batch % self.n_batches]

    def batch_start_times(self) -> tuple[float, ...]:
        """Generation offset of each batch within a period (batch 1 at 0)."""
        starts = [0.0]
        for gap in self.offsets[1:]:
            starts.append(starts[-1] + gap)
        return tuple(starts)

    def batch_clients(self, batch: int) -> range:
        """0-indexed client ids belonging to 1-indexed ``batch``."""
        lo = sum(self.batch_sizes[: batch - 1])
        return range(lo, lo + self.batch_sizes[batch - 1])

    def batch_of_clients(self) -> tuple[int, ...]:
        """1-indexed batch id of every client."""
        out = []
        for b, size in enumerate(self.batch_sizes, start=1):
            out.extend([b] * size)
        return tuple(out)

    def to_dict(self) -> dict:
        """Serializable form using the scenario-file keys."""
        return {
            "n_clients": self.n_clients,
            "service_rate": self.service_rate,
            "period": self.period,
            "batch_sizes": list(self.batch_sizes),
            "offsets_from_2": list(self.offsets[1:]),
        }


def _as_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{name} must be a positive integer, got {value!r}")
    if isinstance(value, float):
        if not value.is_integer():
            raise ScenarioError(f"{name} must be a positive integer, got {value!r}")
        value = int(value)
    if value < 1:
        raise ScenarioError(f"{name} must be a positive integer, got {value!r}")
    return value


def _as_positive_real(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{name} must be a positive real, got {value!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise ScenarioError(f"{name} must be a positive real, got {value!r}")
    return value


def validate(raw: "Scenario | Mapping") -> Scenario:
    """Check and normalize a scenario-like record.

    The gap preceding batch 1 is always recomputed as the remainder of the
    period, so the gap-sum identity holds by construction.  Violations raise
    :class:`ScenarioError` naming the offending invariant.  Idempotent:
    validating an already valid scenario returns an equal scenario.
    """
    if isinstance(raw, Scenario):
        record: Mapping = {
            "n_clients": raw.n_clients,
            "service_rate": raw.service_rate,
            "period": raw.period,
            "batch_sizes": raw.batch_sizes,
            "offsets": raw.offsets,
        }
    elif isinstance(raw, Mapping):
        record = raw
    else:
        raise ScenarioError(f"expected a Scenario or mapping, got {type(raw).__name__}")

    for key in ("n_clients", "service_rate", "period", "batch_sizes"):
        if key not in record:
            raise ScenarioError(f"missing required field {key!r}")

    n_clients = _as_positive_int(record["n_clients"], "n_clients")
    service_rate = _as_positive_real(record["service_rate"], "service_rate")
    period = _as_positive_real(record["period"], "period")

    sizes_raw = record["batch_sizes"]
    if not isinstance(sizes_raw, Sequence) or isinstance(sizes_raw, (str, bytes)) or len(sizes_raw) == 0:
        raise ScenarioError("batch_sizes must be a nonempty sequence of positive integers")
    batch_sizes = tuple(_as_positive_int(v, "batch size") for v in sizes_raw)
    if sum(batch_sizes) != n_clients:
        raise ScenarioError(
            f"batch sizes must sum to n_clients: sum={sum(batch_sizes)} != {n_clients}"
        )
    n_batches = len(batch_sizes)

    if "offsets_from_2" in record:
        tail = record["offsets_from_2"]
        if not isinstance(tail, Sequence) or len(tail) != n_batches - 1:
            raise ScenarioError(
                f"offsets_from_2 must list {n_batches - 1} gaps (batches 2..B)"
            )
        tail = tuple(float(v) for v in tail)
    elif "offsets" in record:
        full = record["offsets"]
        if not isinstance(full, Sequence) or len(full) != n_batches:
            raise ScenarioError(f"offsets must list {n_batches} gaps (one per batch)")
        full = tuple(float(v) for v in full)
        tail = full[1:]
        implied = period - math.fsum(tail)
        if abs(full[0] - implied) > _REDUNDANT_GAP_TOL * max(1.0, period):
            raise ScenarioError(
                "offsets[0] is derived from the period and the remaining gaps; "
                f"got {full[0]!r}, implied {implied!r}"
            )
    else:
        raise ScenarioError("missing offsets: provide offsets_from_2 (or a full offsets list)")

    for i, gap in enumerate(tail, start=2):
        if not math.isfinite(gap) or gap <= 0.0:
            raise ScenarioError(
                f"offset before batch {i} must be strictly positive, got {gap!r} "
                "(merge simultaneous batches instead of using a zero gap)"
            )
    first_gap = period - math.fsum(tail)
    if first_gap <= 0.0:
        raise ScenarioError(
            f"offsets of batches 2..B leave a nonpositive closing gap {first_gap!r}; "
            "they must sum to strictly less than the period"
        )
    offsets = (first_gap,) + tail
    if abs(math.fsum(offsets) - period) > OFFSET_SUM_TOL * max(1.0, period):
        raise ScenarioError("normalized offsets do not sum to the period")

    return Scenario(
        n_clients=n_clients,
        service_rate=service_rate,
        period=period,
        batch_sizes=batch_sizes,
        offsets=offsets,
    )


def load_scenario(path: "str | Path") -> Scenario:
    """Read a scenario file (JSON object with the keys of :meth:`Scenario.to_dict`)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ScenarioError(f"scenario file {path} must contain a JSON object")
    return validate(record)


def save_scenario(scenario: Scenario, path: "str | Path") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)
        fh.write("\n")


def parse_policy(name: "str | Policy") -> Policy:
    if isinstance(name, Policy):
        return name
    try:
        return Policy(str(name).lower())
    except ValueError:
        raise ScenarioError(f"unknown policy {name!r} (expected 'gps' or 'fifo')") from None
