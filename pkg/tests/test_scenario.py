import dataclasses
import math

import pytest
from hypothesis import given, settings, strategies as st

from rhosi.scenario import (
    SchemaError, ScenarioConfig, ValidationError, db_to_linear, default_scenario, dump_scenario, load_scenario,
    validate_scenario,
)


def test_defaults_match_reference_setup():
    cfg = default_scenario()
    assert (cfg.num_antennas, cfg.num_users, cfg.num_elements) == (6, 3, 20)
    assert cfg.v_max == 15.0 and cfg.a_max == 5.0 and cfg.uav_altitude == 40.0
    assert cfg.horizon_slots == 60 and cfg.slot_duration == 1.0 and cfg.total_time == 60.0
    assert math.isclose(cfg.noise_power, 1e-12, rel_tol=1e-12)
    assert math.isclose(cfg.path_gain_ref, 0.01)
    assert math.isclose(cfg.bs_power_max, 10.0) and math.isclose(cfg.jam_power, 1.0)
    assert math.isclose(cfg.echo_sinr_min, db_to_linear(3.0))
    assert cfg.rate_min == 1.0
    assert len(cfg.user_pos) == 3


def test_default_passes_validation():
    assert validate_scenario(default_scenario()) == []


def test_empty_document_gives_defaults():
    assert load_scenario("") == default_scenario()


def test_single_override():
    cfg = load_scenario("num_antennas: 8\n")
    assert cfg == default_scenario().replace(num_antennas=8)


def test_eta_below_one_is_rejected():
    with pytest.raises(ValidationError, match="pa_inefficiency must exceed 1"):
        load_scenario("eta: 0.9\n")


def test_db_keys_are_converted():
    cfg = load_scenario("noise_power_dbm: -90\njam_power_dbm: 30\n")
    assert math.isclose(cfg.noise_power, 1e-12) and math.isclose(cfg.jam_power, 1.0)


def test_unknown_key_is_a_schema_error():
    with pytest.raises(SchemaError):
        load_scenario("antennas: 3\n")


def test_time_grid_violation_reported():
    bad = validate_scenario(default_scenario().replace(total_time=59.0))
    assert len(bad) == 1 and "time grid" in bad[0]


def test_negative_noise_reported():
    bad = validate_scenario(default_scenario().replace(noise_power=-1.0))
    assert bad == ["noise_power must be strictly positive"]


def test_env_seed_override(monkeypatch):
    monkeypatch.setenv("RHOSI_SEED", "11")
    assert load_scenario("").seed == 11


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), nt=st.integers(1, 9), k=st.integers(1, 4), rmin=st.floats(0.0, 4.0))
def test_dump_load_round_trip(seed, nt, k, rmin):
    cfg = default_scenario(seed, num_antennas=nt, num_users=k, rate_min=rmin)
    assert load_scenario(dump_scenario(cfg)) == cfg


def test_config_is_immutable():
    with pytest.raises(dataclasses.FrozenInstanceError):
        default_scenario().num_antennas = 3
    assert isinstance(default_scenario(), ScenarioConfig)
