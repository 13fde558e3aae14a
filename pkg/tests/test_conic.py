import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhosi.conic import Affine, BuildError, ConicProblem, embed_hermitian, extract_rank_one, solve_conic

KKT = 1e-7


def _check(sol, want):
    assert sol.optimal, sol.solver_status
    assert abs(sol.objective - want) <= 1e-6 * (1 + abs(want))
    assert sol.kkt <= KKT
    assert sol.objective >= sol.dual_objective - 1e-8


@pytest.mark.parametrize("backend", ["clarabel", "auto"])
def test_lp(backend):
    p = ConicProblem()
    x = p.variable("x").x
    p.minimize(x)
    p.add_ge(x, 1.0)
    sol = solve_conic(p, backend=backend)
    _check(sol, 1.0)
    assert math.isclose(sol.value(x), 1.0, abs_tol=1e-7)


def test_soc():
    p = ConicProblem()
    t = p.variable("t").x
    p.minimize(t)
    p.add_soc(t, [Affine.lift(3.0), Affine.lift(4.0)])
    _check(solve_conic(p), 5.0)


@pytest.mark.parametrize("backend", ["clarabel", "lmi"])
@pytest.mark.parametrize("complex_", [False, True])
def test_sdp_trace(backend, complex_):
    p = ConicProblem()
    X = p.psd("X", 2, complex=complex_)
    p.minimize(X.trace())
    p.add_eq(X.trace_with(np.array([[0, 0.5], [0.5, 0]])), 1.0)
    sol = solve_conic(p, backend=backend)
    _check(sol, 2.0)
    assert np.allclose(sol.value(X), [[1, 1], [1, 1]], atol=1e-6)


@pytest.mark.parametrize("backend", ["clarabel", "lmi"])
def test_complex_sdp_known_optimum(backend):
    # min Tr X  s.t.  Re X12 = 1, Im X12 = 1/2  ->  Tr* = 2|X12| = sqrt(5)
    p = ConicProblem()
    X = p.psd("X", 2)
    p.minimize(X.trace())
    p.add_eq(X.trace_with(np.array([[0, 0.5], [0.5, 0]])), 1.0)
    p.add_eq(X.trace_with(np.array([[0, -0.5j], [0.5j, 0]])), 0.5)
    _check(solve_conic(p, backend=backend), math.sqrt(5.0))


def test_power_and_geo_mean():
    # max geo-mean(x, y) with x + y <= 2 -> 1
    p = ConicProblem()
    x, y, t = p.variable("x").x, p.variable("y").x, p.variable("t").x
    p.minimize(-t)
    p.add_le(x + y, 2.0)
    p.add_geo_mean_ge([x, y], t)
    _check(solve_conic(p), -1.0)


def test_infeasible_and_unbounded():
    p = ConicProblem()
    x = p.variable("x").x
    p.minimize(x)
    p.add_ge(x, 2.0)
    p.add_le(x, 1.0)
    assert solve_conic(p).status == "infeasible"
    q = ConicProblem()
    y = q.variable("y").x
    q.minimize(y)
    q.add_le(y, 1.0)
    assert solve_conic(q).status == "unbounded"


def test_build_errors():
    p = ConicProblem()
    X = p.psd("X", 2)
    with pytest.raises(BuildError):
        X.trace_with(np.eye(3))
    with pytest.raises(BuildError):
        solve_conic(p)  # no objective


def test_dump_lists_standard_form():
    p = ConicProblem("demo")
    x = p.variable("x").x
    p.minimize(x)
    p.add_ge(x, 1.0, "floor")
    text = p.dump()
    assert "demo" in text and "floor" in text


def test_rank_one_examples(rng):
    th = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
    v, r = extract_rank_one(np.outer(th, th.conj()))
    assert r == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(np.outer(v, v.conj()), np.outer(th, th.conj()), atol=1e-12)
    assert abs(v[0].imag) < 1e-12 and v[0].real > 0
    assert extract_rank_one(np.eye(2))[1] == pytest.approx(1.0)
    v, r = extract_rank_one(np.zeros((3, 3)))
    assert r == 0.0 and not np.any(v)
    G = rng.normal(size=(5, 5))
    X = G @ G.T
    lam = np.sort(np.linalg.eigvalsh(X))
    assert extract_rank_one(X)[1] == pytest.approx(lam[-2] / lam[-1], rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6))
def test_embedding_doubles_spectrum(seed, n):
    r = np.random.default_rng(seed)
    G = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    H = G + G.conj().T
    lam = np.linalg.eigvalsh(H)
    big = np.linalg.eigvalsh(embed_hermitian(H))
    assert np.allclose(np.sort(np.repeat(lam, 2)), big, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 5))
def test_random_sdp_backends_agree(seed, n):
    """min Tr(C X) s.t. Tr X = 1 has optimum lambda_min(C)."""
    r = np.random.default_rng(seed)
    G = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    C = G + G.conj().T
    want = float(np.linalg.eigvalsh(C)[0])
    for backend in ("clarabel", "lmi"):
        p = ConicProblem()
        X = p.psd("X", n)
        p.minimize(X.trace_with(C))
        p.add_eq(X.trace(), 1.0)
        _check(solve_conic(p, backend=backend), want)
