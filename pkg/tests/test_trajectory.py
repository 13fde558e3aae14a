import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import tiny_config
from rhosi.ao import initial_solution
from rhosi.channel import DegenerateGeometryError, assemble_channels
from rhosi.conic import solve_conic
from rhosi.metrics import Solution, aero_power, check_feasibility, comm_sinrs
from rhosi.scenario import default_scenario
from rhosi.trajectory import (
    SILENT_SINR, TrajectoryOptions, aleph_exact, amplitudes, anchor_iterate, best_cruise_speed, build_trajectory_subproblem,
    f_bound, f_value, lambda_upsilon_coefficients, product_bound_lower, product_bound_upper, solve_trajectory_sca,
    surrogate_sinrs,
)


def _coefs(cfg, sol, chs):
    return [lambda_upsilon_coefficients(chs[n], sol.thetas[n], sol.beams[n], cfg) for n in range(len(chs))]


def test_variable_count_single_slot_single_user():
    cfg = tiny_config()
    sol, chs = initial_solution(cfg)
    co = _coefs(cfg, sol, chs)
    p = build_trajectory_subproblem(anchor_iterate(sol.positions, sol.velocities, co, cfg), co, cfg)
    assert p.decision_size() == 11


def test_f_at_zero_velocity_anchor():
    rng = np.random.default_rng(3)
    for _ in range(50):
        al, at = rng.uniform(0.05, 1.0, 2)
        v = rng.uniform(-10, 10, 2)
        assert f_bound(al, v, at, [0.0, 0.0], 4.03) == pytest.approx(2 * at * (al - at) + at * at, rel=1e-14)


@settings(max_examples=300, deadline=None)
@given(al=st.floats(1e-3, 2.0), alt=st.floats(1e-3, 2.0), v=st.tuples(st.floats(-20, 20), st.floats(-20, 20)),
       vt=st.tuples(st.floats(-20, 20), st.floats(-20, 20)), v0=st.floats(1.0, 10.0))
def test_f_underestimates(al, alt, v, vt, v0):
    val = f_value(al, v, v0)
    assert f_bound(al, v, alt, vt, v0) <= val + 1e-9 * max(val, 1.0)


def test_aleph_exact_solves_induced_equation():
    for v in ([0, 0], [3, 4], [10, 0], [0.1, 0.0]):
        al = aleph_exact(v, 4.03)
        assert 1 / al**2 == pytest.approx(al**2 + np.dot(v, v) / 4.03**2, rel=1e-12)
    assert aleph_exact([0, 0], 4.03) == 1.0


def _pts(draw_xy):
    return st.tuples(st.floats(-draw_xy, draw_xy), st.floats(-draw_xy, draw_xy))


@settings(max_examples=300, deadline=None)
@given(Q=_pts(200), Qt=_pts(200), pa=_pts(400), pb=_pts(400), L=st.floats(1.0, 150.0))
def test_product_bounds_sandwich(Q, Qt, pa, pb, L):
    sa = math.hypot(math.hypot(Q[0] - pa[0], Q[1] - pa[1]), L)
    sb = math.hypot(math.hypot(Q[0] - pb[0], Q[1] - pb[1]), L)
    prod = sa * sb
    assert product_bound_upper(Q, Qt, (pa, pb), L) >= prod * (1 - 1e-9)
    assert product_bound_lower(Q, Qt, (pa, pb), L) <= prod * (1 + 1e-9)


def test_product_bounds_exact_at_anchor():
    rng = np.random.default_rng(0)
    for _ in range(100):
        Qt, pa, pb = rng.uniform(-200, 200, (3, 2))
        L = rng.uniform(1, 100)
        prod = math.sqrt(np.sum((Qt - pa) ** 2) + L * L) * math.sqrt(np.sum((Qt - pb) ** 2) + L * L)
        assert product_bound_upper(Qt, Qt, (pa, pb), L) == pytest.approx(prod, rel=1e-12)
        assert product_bound_lower(Qt, Qt, (pa, pb), L) == pytest.approx(prod, rel=1e-12)


def test_upper_bound_finite_over_endpoint():
    v = product_bound_upper([5.0, 0.0], [0.0, 0.0], ([0.0, 0.0], [30.0, 0.0]), 100.0)
    assert np.isfinite(v)


def test_lower_bound_degenerate_geometry():
    with pytest.raises(DegenerateGeometryError):
        product_bound_lower([1.0, 1.0], [0.0, 0.0], ([0.0, 0.0], [30.0, 0.0]), 0.0)


def test_symmetric_endpoints_gradient_on_axis():
    pair = ([-50.0, 0.0], [50.0, 0.0])
    anchor = [0.0, 20.0]
    for e in (1.0, 7.5, 30.0):
        assert product_bound_lower([e, 25.0], anchor, pair, 100.0) == pytest.approx(
            product_bound_lower([-e, 25.0], anchor, pair, 100.0), rel=1e-13)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_coefficients_rebuild_comm_sinrs(seed):
    cfg = default_scenario(seed, num_users=3, num_antennas=4, num_elements=5)
    rng = np.random.default_rng(seed)
    chs = assemble_channels(cfg, rng.uniform(-50, 50, 2), 3)
    th = np.exp(1j * rng.uniform(0, 2 * np.pi, cfg.num_elements))
    w = (rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))) * 0.3
    co = lambda_upsilon_coefficients(chs, th, w, cfg)
    amp = amplitudes(chs.geom.uav_xy, cfg)
    assert np.allclose(surrogate_sinrs(co, amp["a"], amp["b"]), comm_sinrs(chs, th, w, cfg), rtol=1e-9)
    assert np.all(co.lam_B >= 0) and np.all(co.lam_J >= 0) and co.lam_RT >= 0 and co.lam_JT >= 0


def test_zero_beams_and_no_jamming():
    cfg = default_scenario(0, jam_power=0.0)
    chs = assemble_channels(cfg, [0.0, 0.0], 0)
    th = np.ones(cfg.num_elements, complex)
    co = lambda_upsilon_coefficients(chs, th, np.zeros((cfg.num_users, cfg.num_antennas)), cfg)
    assert np.all(co.lam_B == 0) and co.lam_RT == 0
    assert np.all(co.lam_J == 0) and np.all(co.ups_J == 0) and co.lam_JT == 0 and co.ups_JT == 0
    assert np.allclose(co.varpi_J, cfg.noise_power) and co.varpi_JT == cfg.noise_power


def test_coefficient_shape_errors():
    cfg = default_scenario(0)
    chs = assemble_channels(cfg, [0.0, 0.0], 0)
    with pytest.raises(ValueError):
        lambda_upsilon_coefficients(chs, np.ones(3), np.zeros((cfg.num_users, cfg.num_antennas)), cfg)
    with pytest.raises(ValueError):
        lambda_upsilon_coefficients(chs, np.ones(cfg.num_elements), np.zeros((1, 7)), cfg)


def _anchor_distance(p, it, N):
    """Replace the objective by the squared distance of the declared variables to the anchor."""
    H = p.handles
    dev = []
    for n in range(N):
        for j in range(2):
            dev.append(H["Q"][n][j] - it.positions[n, j] / H["ell"])
            dev.append(H["v"][n][j] - it.velocities[n, j])
        # slacks are carried in units of their anchor values
        for key in ("a", "b", "chi", "c", "d"):
            dev.extend(H[key][n][k] - 1.0 for k in range(len(H[key][n])))
        # silent users are carried with kappa = 0
        dev.extend(H["kappa"][n][k] - float(it.kappa[n, k] > SILENT_SINR) for k in range(len(H["kappa"][n])))
        dev.append(H["aleph"][n][0] - it.aleph[n])
    q = p._aux("dist")
    p.add_sum_squares_le(dev, q, "dist")
    p.minimize(q)


@pytest.mark.parametrize("seed", [0, 3, 5])
def test_anchor_satisfies_built_constraints(seed):
    # random feasible anchor: hover point, shared cruise velocity over two slots
    cfg = default_scenario(seed, horizon_slots=2, total_time=2.0)
    rng = np.random.default_rng(seed)
    sol, chs = initial_solution(cfg)
    v = rng.uniform(-6, 6, 2)
    V = np.tile(v, (2, 1))
    co = _coefs(cfg, sol, chs)
    it = anchor_iterate(sol.positions, V, co, cfg)
    opts = TrajectoryOptions(elastic_weight=0.0, anchor_weight=0.0)
    p = build_trajectory_subproblem(it, co, cfg, opts)
    _anchor_distance(p, it, 2)
    # the projection of a feasible anchor onto the built feasible set is the anchor itself
    res = solve_conic(p, tol=1e-7, accept_tol=1e-5)
    assert res.optimal, res.status
    assert res.objective <= 1e-6


def test_hover_stays_without_escape():
    cfg = tiny_config()
    sol, chs = initial_solution(cfg)
    res = solve_trajectory_sca(chs, sol.thetas, sol.beams, cfg, TrajectoryOptions(escape=False))
    assert np.allclose(res.velocities, 0.0, atol=1e-6)
    assert res.objective == pytest.approx(cfg.aero.blade_power + cfg.aero.induced_power, rel=1e-9)


@pytest.fixture(scope="module")
def seeded_run():
    cfg = default_scenario(2, horizon_slots=3, total_time=3.0)
    sol, chs = initial_solution(cfg)
    return cfg, sol, solve_trajectory_sca(chs, sol.thetas, sol.beams, cfg)


def test_aero_trace_non_increasing(seeded_run):
    _, _, res = seeded_run
    tr = np.array(res.objective_trace)
    assert np.all(np.diff(tr) <= 1e-7 * tr[0])


def test_returned_trajectory_feasible(seeded_run):
    cfg, sol, res = seeded_run
    out = Solution(sol.beams, sol.thetas, res.positions, res.velocities)
    assert check_feasibility(out, cfg, 1e-6).feasible


def test_induced_slack_tight(seeded_run):
    cfg, _, res = seeded_run
    v0 = cfg.aero.mean_induced_velocity
    if res.aleph is None:
        pytest.skip("last step was shortened; no subproblem slack to compare")
    for al, v in zip(res.aleph, res.aleph_velocities):
        lhs, rhs = 1 / al**2, al**2 + float(v @ v) / v0**2
        assert abs(lhs - rhs) <= 1e-4 * rhs


def test_tiny_matches_position_grid():
    cfg = tiny_config(5)
    sol, chs = initial_solution(cfg)
    res = solve_trajectory_sca(chs, sol.thetas, sol.beams, cfg)
    # oracle: 41 x 41 positions in the disk, velocity scanned over speeds (direction is free for one slot)
    r0 = cfg.service_radius
    speeds = np.linspace(0.0, cfg.v_max, 201)
    s_best = best_cruise_speed(cfg.aero, cfg.v_max)
    speeds = np.append(speeds, s_best)
    aero = np.array([aero_power([s, 0.0], cfg.aero) for s in speeds])
    best = np.inf
    for x in np.linspace(-r0, r0, 41):
        for y in np.linspace(-r0, r0, 41):
            if x * x + y * y > r0 * r0:
                continue
            c = [assemble_channels(cfg, [x, y], 0)]
            for s, pw in sorted(zip(speeds, aero), key=lambda t: t[1]):
                if pw >= best:
                    break
                cand = Solution(sol.beams, sol.thetas, np.array([[x, y]]), np.array([[s, 0.0]]))
                if check_feasibility(cand, cfg, 1e-6, channels=c).feasible:
                    best = pw
                    break
    assert np.isfinite(best)
    assert res.objective <= best * 1.05
