import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from edgeaoi.scenario import Scenario, validate

settings.register_profile(
    "edgeaoi",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("edgeaoi")


@st.composite
def scenarios(draw, max_clients: int = 8, max_batches: int = None):
    """Random valid scenarios with per-client load in a sane range."""
    n = draw(st.integers(1, max_clients))
    b_cap = min(n, max_batches) if max_batches else n
    n_batches = draw(st.integers(1, b_cap))
    # random composition of n into n_batches positive parts
    cuts = sorted(draw(st.lists(st.integers(1, n - 1), min_size=n_batches - 1,
                                max_size=n_batches - 1, unique=True))) if n_batches > 1 else []
    sizes = [b - a for a, b in zip([0] + cuts, cuts + [n])]
    period = draw(st.floats(0.5, 3.0))
    load_per_client = draw(st.floats(0.2, 3.0))
    service_rate = n / (load_per_client * period)
    if n_batches == 1:
        tail = []
    else:
        weights = draw(st.lists(st.floats(0.05, 1.0), min_size=n_batches,
                                max_size=n_batches))
        total = sum(weights)
        tail = [period * w / total for w in weights[1:]]
    return validate(dict(n_clients=n, service_rate=service_rate, period=period,
                         batch_sizes=sizes, offsets_from_2=tail))


@pytest.fixture
def sync_scenario() -> Scenario:
    return validate(dict(n_clients=5, service_rate=5.0, period=1.0,
                         batch_sizes=[5], offsets_from_2=[]))


@pytest.fixture
def two_batch_scenario() -> Scenario:
    return validate(dict(n_clients=5, service_rate=6.0, period=1.0,
                         batch_sizes=[2, 3], offsets_from_2=[0.4]))


def rng_scenarios(seed: int, count: int, max_clients: int = 8):
    """Deterministic random scenarios for grid-style invariant tests."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, max_clients + 1))
        n_batches = int(rng.integers(1, n + 1))
        sizes = np.ones(n_batches, dtype=int)
        for _ in range(n - n_batches):
            sizes[rng.integers(0, n_batches)] += 1
        period = float(rng.uniform(0.5, 2.5))
        load = float(rng.uniform(0.2, 3.0))
        service_rate = n / (load * period)
        weights = rng.uniform(0.1, 1.0, size=n_batches)
        tail = list(period * weights[1:] / weights.sum())
        out.append(validate(dict(n_clients=n, service_rate=service_rate,
                                 period=period, batch_sizes=list(map(int, sizes)),
                                 offsets_from_2=tail)))
    return out
