"""Randomised checks that every convex surrogate bounds its target on the right side."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamform import amgm_bound
from .channel import assemble_channels
from .phaseshift import augment, dc_b, dc_bound_B, lift_channels
from .scenario import default_scenario
from .trajectory import (
    d1_bound, d1_value, d2_bound, d2_value, e_bound, e_value, f_bound, f_value, power_tangent,
    product_bound_lower, product_bound_upper,
)

__all__ = ["BoundCheck", "SUITES", "run_all", "check_amgm", "check_b_tangent", "check_product_upper",
           "check_product_lower", "check_d1", "check_d2", "check_e", "check_f", "check_power_tangent"]


@dataclass
class BoundCheck:
    name: str
    samples: int
    violations: int
    max_excess: float  # worst relative amount by which the bound is on the wrong side
    tol: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def __str__(self) -> str:
        state = "ok" if self.passed else "FAIL"
        return f"{self.name}: {state} samples={self.samples} violations={self.violations} max_excess={self.max_excess:.3g}"


def _tally(name, wrong_side, scale, tol) -> BoundCheck:
    """``wrong_side`` > 0 means the bound crossed its target."""
    rel = np.asarray(wrong_side, float) / np.maximum(np.abs(np.asarray(scale, float)), 1.0)
    return BoundCheck(name, rel.size, int(np.sum(rel > tol)), float(max(rel.max(initial=-np.inf), 0.0)), tol)


def _logu(rng, lo, hi, size=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def check_amgm(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    rng = np.random.default_rng([seed, 1])
    e, v, et, vt = (_logu(rng, 1e-6, 1e6, n) for _ in range(4))
    val = e * v
    return _tally("amgm majorant", val - amgm_bound(e, v, et, vt), val, tol)


def check_power_tangent(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    rng = np.random.default_rng([seed, 2])
    x, xt = _logu(rng, 1e-3, 1e3, n), _logu(rng, 1e-3, 1e3, n)
    p = rng.uniform(0.2, 3.0, n)
    val = x ** (-p)
    return _tally("power tangent", power_tangent(x, xt, p) - val, val, tol)


def _disk(rng, n, r):
    rad = r * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0, 2 * np.pi, n)
    return np.stack([rad * np.cos(phi), rad * np.sin(phi)], axis=1)


def _product_samples(n, seed, tag):
    rng = np.random.default_rng([seed, tag])
    Q, Qt = _disk(rng, n, 200.0), _disk(rng, n, 200.0)
    pa, pb = rng.uniform(-200, 400, (n, 2)), rng.uniform(-200, 400, (n, 2))
    L = rng.uniform(1.0, 120.0, n)
    return Q, Qt, pa, pb, L


def _prod(Q, p, q, L):
    return np.sqrt(np.sum((Q - p) ** 2) + L * L) * np.sqrt(np.sum((Q - q) ** 2) + L * L)


def check_product_upper(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    Q, Qt, pa, pb, L = _product_samples(n, seed, 3)
    val = np.array([_prod(Q[i], pa[i], pb[i], L[i]) for i in range(n)])
    bnd = np.array([product_bound_upper(Q[i], Qt[i], (pa[i], pb[i]), L[i]) for i in range(n)])
    return _tally("distance-product upper bound", val - bnd, val, tol)


def check_product_lower(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    Q, Qt, pa, pb, L = _product_samples(n, seed, 4)
    val = np.array([_prod(Q[i], pa[i], pb[i], L[i]) for i in range(n)])
    bnd = np.array([product_bound_lower(Q[i], Qt[i], (pa[i], pb[i]), L[i]) for i in range(n)])
    return _tally("distance-product lower bound", bnd - val, val, tol)


def _quad_coefs(rng, n):
    lam = _logu(rng, 1e-6, 1e2, n)
    ups = rng.normal(0, 1, n) * np.sqrt(lam) * _logu(rng, 1e-3, 1e1, n)
    return lam, ups


def check_d1(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    rng = np.random.default_rng([seed, 5])
    lam, ups = _quad_coefs(rng, n)
    direct = _logu(rng, 1e-6, 1.0, n)
    a, at = _logu(rng, 1e-4, 1e2, n), _logu(rng, 1e-4, 1e2, n)
    val = d1_value(a, lam, ups, direct)
    return _tally("D1 minorant", d1_bound(a, at, lam, ups, direct) - val, val, tol)


def check_d2(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    rng = np.random.default_rng([seed, 6])
    wrong, scale = np.empty(n), np.empty(n)
    for i in range(n):
        k = int(rng.integers(1, 5))
        lam, ups = _quad_coefs(rng, k)
        iota, varpi = float(_logu(rng, 1e-9, 1.0)), float(_logu(rng, 1e-12, 1.0))
        a, at = float(_logu(rng, 1e-4, 1e2)), float(_logu(rng, 1e-4, 1e2))
        val = d2_value(a, lam, ups, iota, varpi)
        wrong[i], scale[i] = d2_bound(a, at, lam, ups, iota, varpi) - val, val
    return _tally("D2 minorant", wrong, scale, tol)


def check_e(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    rng = np.random.default_rng([seed, 7])
    lam_rt = _logu(rng, 1e-6, 1e2, n)
    lam_jt, ups_jt = _quad_coefs(rng, n)
    varpi = _logu(rng, 1e-12, 1.0, n)
    gamma = _logu(rng, 1e-2, 1e2, n)
    c, ct, d = (_logu(rng, 1e-4, 1e2, n) for _ in range(3))
    val = e_value(c, d, lam_rt, lam_jt, ups_jt, varpi, gamma)
    bnd = e_bound(c, d, ct, lam_rt, lam_jt, ups_jt, varpi, gamma)
    scale = c * c * lam_rt + gamma * (d * d * lam_jt + np.abs(d * ups_jt) + varpi)
    return _tally("E minorant", bnd - val, scale, tol)


def check_f(n=10_000, seed=0, tol=1e-9) -> BoundCheck:
    rng = np.random.default_rng([seed, 8])
    v0 = rng.uniform(1.0, 10.0, n)
    al, alt = _logu(rng, 1e-3, 1.0, n), _logu(rng, 1e-3, 1.0, n)
    v, vt = rng.uniform(-15, 15, (n, 2)), rng.uniform(-15, 15, (n, 2))
    val = np.array([f_value(al[i], v[i], v0[i]) for i in range(n)])
    bnd = np.array([f_bound(al[i], v[i], alt[i], vt[i], v0[i]) for i in range(n)])
    return _tally("F minorant", bnd - val, val, tol)


def _random_psd(rng, n):
    r = int(rng.integers(1, n + 1))
    G = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    X = G @ G.conj().T
    return X * (n / np.real(np.trace(X)))


def check_b_tangent(n=10_000, seed=0, tol=1e-9, channel_draws=50) -> BoundCheck:
    """Tangent of the convex part of the rate split, over random PSD lifted matrices."""
    rng = np.random.default_rng([seed, 9])
    per = -(-n // channel_draws)
    wrong, scale = [], []
    for j in range(channel_draws):
        cfg = default_scenario(int(rng.integers(0, 2**31)), num_elements=int(rng.integers(2, 9)))
        chs = assemble_channels(cfg, _disk(rng, 1, cfg.service_radius)[0], int(rng.integers(0, 60)))
        K, Nt = cfg.num_users, cfg.num_antennas
        w = (rng.normal(size=(K, Nt)) + 1j * rng.normal(size=(K, Nt))) * np.sqrt(_logu(rng, 1e-4, 1.0) / (2 * Nt))
        lifted = lift_channels(chs, w, cfg)
        M1 = cfg.num_elements + 1
        theta = np.exp(1j * rng.uniform(0, 2 * np.pi, M1 - 1))
        anchors = [augment(theta), _random_psd(rng, M1)]
        for i in range(min(per, n - j * per)):
            om = _random_psd(rng, M1)
            an = anchors[i % 2]
            val = dc_b(om, lifted)
            wrong.append(dc_bound_B(om, an, lifted) - val)
            scale.append(val)
    return _tally("rate-split tangent", np.array(wrong), np.array(scale), tol)


SUITES = {
    "amgm": check_amgm,
    "b_tangent": check_b_tangent,
    "product_upper": check_product_upper,
    "product_lower": check_product_lower,
    "power_tangent": check_power_tangent,
    "d1": check_d1,
    "d2": check_d2,
    "e": check_e,
    "f": check_f,
}


def run_all(n=10_000, seed=0, tol=1e-9) -> list[BoundCheck]:
    return [fn(n=n, seed=seed, tol=tol) for fn in SUITES.values()]
