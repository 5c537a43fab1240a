import json
import math

import pytest
from hypothesis import given

from conftest import scenarios
from edgeaoi.scenario import (
    Policy,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_policy,
    save_scenario,
    validate,
)


def test_sync_family_baseline_configuration():
    scn = validate(dict(n_clients=10, service_rate=5.0, period=1.0,
                        batch_sizes=[10], offsets_from_2=[]))
    assert scn.offsets == (1.0,)
    assert scn.is_synchronized
    assert scn.load == pytest.approx(2.0)


def test_full_offsets_form_accepted_when_consistent():
    scn = validate(dict(n_clients=10, service_rate=5.0, period=1.0,
                        batch_sizes=[10], offsets=[1.0]))
    assert scn.offsets == (1.0,)


def test_first_gap_is_derived():
    scn = validate(dict(n_clients=6, service_rate=4.0, period=1.0,
                        batch_sizes=[1] * 6, offsets_from_2=[1 / 6] * 5))
    assert scn.offsets[0] == pytest.approx(1 / 6, abs=1e-15)
    assert math.fsum(scn.offsets) == pytest.approx(1.0, abs=1e-12)


def test_batch_size_sum_mismatch_rejected():
    with pytest.raises(ScenarioError, match="sum"):
        validate(dict(n_clients=4, service_rate=1.0, period=1.0,
                      batch_sizes=[2, 3], offsets_from_2=[0.5]))


@pytest.mark.parametrize("field,value", [
    ("service_rate", 0.0), ("service_rate", -1.0), ("period", 0.0),
])
def test_nonpositive_rates_rejected(field, value):
    record = dict(n_clients=2, service_rate=1.0, period=1.0,
                  batch_sizes=[2], offsets_from_2=[])
    record[field] = value
    with pytest.raises(ScenarioError, match=field):
        validate(record)


def test_zero_offset_rejected():
    with pytest.raises(ScenarioError, match="positive"):
        validate(dict(n_clients=2, service_rate=1.0, period=1.0,
                      batch_sizes=[1, 1], offsets_from_2=[0.0]))


def test_overlong_offsets_leave_no_closing_gap():
    with pytest.raises(ScenarioError, match="closing gap"):
        validate(dict(n_clients=2, service_rate=1.0, period=1.0,
                      batch_sizes=[1, 1], offsets_from_2=[1.0]))


def test_inconsistent_redundant_first_gap_rejected():
    with pytest.raises(ScenarioError, match="derived"):
        validate(dict(n_clients=2, service_rate=1.0, period=1.0,
                      batch_sizes=[1, 1], offsets=[0.7, 0.5]))


@given(scenarios())
def test_validate_is_idempotent(scn: Scenario):
    again = validate(scn)
    assert again == scn


@given(scenarios())
def test_gap_sum_identity(scn: Scenario):
    assert abs(math.fsum(scn.offsets) - scn.period) <= 1e-12 * max(1.0, scn.period)
    assert all(g > 0 for g in scn.offsets)


def test_single_batch_offsets_equal_period():
    scn = validate(dict(n_clients=3, service_rate=2.0, period=1.7,
                        batch_sizes=[3], offsets_from_2=[]))
    assert scn.offsets == (1.7,)


def test_client_partition_helpers():
    scn = validate(dict(n_clients=5, service_rate=6.0, period=1.0,
                        batch_sizes=[2, 3], offsets_from_2=[0.4]))
    assert list(scn.batch_clients(1)) == [0, 1]
    assert list(scn.batch_clients(2)) == [2, 3, 4]
    assert scn.batch_of_clients() == (1, 1, 2, 2, 2)
    assert scn.batch_start_times() == (0.0, 0.4)
    assert scn.gap_after(1) == pytest.approx(0.4)
    assert scn.gap_after(2) == pytest.approx(0.6)


def test_file_round_trip(tmp_path):
    scn = validate(dict(n_clients=5, service_rate=6.0, period=1.0,
                        batch_sizes=[2, 3], offsets_from_2=[0.4]))
    path = tmp_path / "scenario.json"
    save_scenario(scn, path)
    assert load_scenario(path) == scn
    raw = json.loads(path.read_text())
    assert set(raw) == {"n_clients", "service_rate", "period",
                        "batch_sizes", "offsets_from_2"}


def test_policy_parsing():
    assert parse_policy("gps") is Policy.GPS
    assert parse_policy("FIFO") is Policy.FIFO
    with pytest.raises(ScenarioError):
        parse_policy("lifo")
