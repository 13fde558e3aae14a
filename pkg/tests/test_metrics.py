import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhosi.channel import assemble_channels
from rhosi.metrics import (
    Solution, aero_power, aero_terms, beampattern_gain, check_feasibility, comm_sinr, comm_sinrs, echo_sinr,
    sum_rate, total_power,
)
from rhosi.scenario import AeroParams, default_scenario


def _toy_channels(cfg, hb_direct, hj_direct):
    """Channel set whose surface links vanish, leaving the given direct links."""
    chs = assemble_channels(cfg, [0.0, 0.0], 0)
    return chs.__class__(**{**chs.__dict__, "bs_user": np.conj(np.atleast_2d(hb_direct)),
                            "jam_user": np.atleast_1d(hj_direct).astype(complex),
                            "bs_rhs": np.zeros_like(chs.bs_rhs), "jam_rhs": np.zeros_like(chs.jam_rhs)})


def test_sinr_examples():
    cfg = default_scenario(num_users=1, num_antennas=1, jam_power=1.0, noise_power=1.0)
    chs = _toy_channels(cfg, [2.0], [0.0])
    theta = np.ones(cfg.num_elements)
    assert math.isclose(comm_sinr(chs, theta, [[1.0]], 0, cfg), 4.0)
    chs = _toy_channels(cfg, [2.0], [1.0])
    assert math.isclose(comm_sinr(chs, theta, [[1.0]], 0, cfg), 2.0)


def test_sinr_scalar_oracle(rng):
    cfg = default_scenario(5, num_users=2, num_antennas=3, num_elements=4)
    chs = assemble_channels(cfg, [20.0, -30.0], 0)
    th = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    w = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    got = comm_sinrs(chs, th, w, cfg)
    for k in range(2):
        h = [np.conj(chs.bs_user[k, t]) + sum(np.conj(chs.rhs_user[k, m]) * th[m] * chs.bs_rhs[m, t] for m in range(4))
             for t in range(3)]
        hj = chs.jam_user[k] + sum(np.conj(chs.rhs_user[k, m]) * th[m] * chs.jam_rhs[m] for m in range(4))
        y = [abs(sum(h[t] * w[i, t] for t in range(3))) ** 2 for i in range(2)]
        want = y[k] / (y[1 - k] + cfg.jam_power * abs(hj) ** 2 + cfg.noise_power)
        assert math.isclose(got[k], want, rel_tol=1e-10)


def test_sum_rate_examples():
    assert sum_rate([1, 1, 1]) == 3.0
    assert sum_rate([0]) == 0.0
    assert sum_rate([3, 1]) == 3.0
    with pytest.raises(ValueError):
        sum_rate([-0.1])


def test_beampattern_and_echo(rng):
    cfg = default_scenario(1)
    chs = assemble_channels(cfg, [10.0, 10.0], 0)
    th = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.num_elements))
    zero = np.zeros((cfg.num_users, cfg.num_antennas))
    assert beampattern_gain(chs, th, zero) == 0.0
    assert echo_sinr(chs, th, zero, cfg) == 0.0
    w = rng.normal(size=zero.shape) + 1j * rng.normal(size=zero.shape)
    a = chs.rhs_target_steer
    want = sum(abs(a.conj() @ np.diag(th) @ chs.bs_rhs @ w[k]) ** 2 for k in range(cfg.num_users))
    assert math.isclose(beampattern_gain(chs, th, w), want, rel_tol=1e-10)
    jam = chs.jam_target + a.conj() @ np.diag(th) @ chs.jam_rhs
    assert math.isclose(echo_sinr(chs, th, w, cfg), want / (cfg.jam_power * abs(jam) ** 2 + cfg.noise_power),
                        rel_tol=1e-10)
    quiet = cfg.replace(jam_power=0.0)
    assert math.isclose(echo_sinr(chs, th, w, quiet), want / cfg.noise_power, rel_tol=1e-10)


def test_beampattern_identity_example():
    cfg = default_scenario(num_antennas=2, num_elements=2)
    chs = assemble_channels(cfg, [0.0, 0.0], 0)
    chs = chs.__class__(**{**chs.__dict__, "bs_rhs": np.eye(2, dtype=complex)})
    a = chs.rhs_target_steer
    assert math.isclose(beampattern_gain(chs, np.ones(2), [[1.0, 0.0]]), abs(a[0]) ** 2)


def test_aero_identities():
    aero = AeroParams()
    assert aero_power([0.0, 0.0], aero) == aero.blade_power + aero.induced_power
    _, p1, _ = aero_terms([3.0, 4.0], aero)
    _, p2, _ = aero_terms([6.0, 8.0], aero)
    assert math.isclose(p2 / p1, 8.0, rel_tol=1e-12)


def test_aero_independent_formula():
    a = AeroParams()
    V = 10.0
    U = a.blade_angular_speed * a.rotor_radius
    want = (a.blade_power * (1 + 3 * V**2 / U**2)
            + 0.5 * a.fuselage_drag_ratio * a.air_density * a.rotor_solidity * a.disc_area * V**3
            + a.induced_power * math.sqrt(math.sqrt(1 + V**4 / (4 * a.mean_induced_velocity**4))
                                          - V**2 / (2 * a.mean_induced_velocity**2)))
    assert math.isclose(aero_power([6.0, 8.0], a), want, rel_tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(vx=st.floats(-15, 15), vy=st.floats(-15, 15), phi=st.floats(0, 6.3))
def test_aero_depends_on_speed_only(vx, vy, phi):
    s = math.hypot(vx, vy)
    a = AeroParams()
    assert math.isclose(aero_power([vx, vy], a), aero_power([s * math.cos(phi), s * math.sin(phi)], a),
                        rel_tol=1e-12)


def test_total_power_examples(rng):
    cfg = default_scenario()
    zero = np.zeros((3, 6))
    base = cfg.aero.blade_power + cfg.aero.induced_power + 7 * cfg.circuit_power + cfg.jam_power
    assert math.isclose(total_power(zero, [0, 0], cfg), base)
    w = rng.normal(size=(3, 6)) + 1j * rng.normal(size=(3, 6))
    lam = 1.7
    diff = total_power(lam * w, [1, 2], cfg) - total_power(w, [1, 2], cfg)
    assert math.isclose(diff, cfg.pa_inefficiency * (lam**2 - 1) * np.sum(np.abs(w) ** 2), rel_tol=1e-12)
    assert math.isclose(total_power(2 * w, [0, 0], cfg) - base, 4 * (total_power(w, [0, 0], cfg) - base))


def test_sinr_monotone_in_jamming(rng):
    cfg = default_scenario(3)
    chs = assemble_channels(cfg, [0.0, 0.0], 0)
    th = np.ones(cfg.num_elements)
    w = rng.normal(size=(3, 6)) + 1j * rng.normal(size=(3, 6))
    s = [comm_sinrs(chs, th, w, cfg.replace(jam_power=g)) for g in (0.5, 1.0, 2.0)]
    assert np.all(s[0] > s[1]) and np.all(s[1] > s[2])


def _solution(cfg, beams):
    N = cfg.horizon_slots
    return Solution(np.repeat(beams[None], N, 0), np.ones((N, cfg.num_elements), complex), np.zeros((N, 2)),
                    np.zeros((N, 2)))


def test_feasibility_examples():
    cfg = default_scenario(horizon_slots=2, total_time=2.0)
    rep = check_feasibility(_solution(cfg, np.zeros((3, 6), complex)), cfg)
    assert not rep.feasible and ("rate", 0) in rep.binding()
    for name in ("radius", "motion", "accel", "speed", "unit_modulus"):
        assert np.all(rep.slacks[name] >= 0)
