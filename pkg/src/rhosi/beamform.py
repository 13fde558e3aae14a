"""Transmit beamforming for fixed phases and UAV position.

Power minimisation over lifted covariances W_k = w_k w_k^H with the SINR
constraints split through auxiliaries (eps_k, nu_k):

    eps_k * nu_k <= Tr(H_k W_k),    nu_k >= interference_k + noise_k,

and the bilinear left side replaced by its convex AM-GM majorant around the
previous iterate.  The rank-one constraint is dropped and beams are recovered
from the dominant eigenvector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .conic import Affine, ConicProblem, extract_rank_one, solve_conic
from .metrics import beampattern_gain, comm_sinrs, composite_channels, echo_jamming, echo_sinr, sum_rate
from .scenario import ScenarioConfig

__all__ = [
    "BeamformingInfeasible",
    "BeamformingOptions",
    "BeamformingSolution",
    "SinrIterate",
    "amgm_bound",
    "build_beamforming_subproblem",
    "check_beams",
    "initial_beams",
    "solve_beamforming_sca",
]


class BeamformingInfeasible(RuntimeError):
    def __init__(self, family: str, detail: str = ""):
        super().__init__(f"beamforming infeasible, binding constraint family: {family}" + (f" ({detail})" if detail else ""))
        self.family = family


@dataclass
class BeamformingOptions:
    tol_sca: float = 1e-5
    max_iter: int = 30
    rank_tol: float = 1e-3
    randomization: bool = True
    num_random: int = 200
    solver_tol: float = 1e-7
    seed: int = 0


@dataclass
class SinrIterate:
    """SCA anchor: SINR auxiliaries eps_k and interference-plus-noise nu_k [W]."""

    eps: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float).reshape(-1)
        self.nu = np.asarray(self.nu, dtype=float).reshape(-1)
        if self.eps.shape != self.nu.shape:
            raise ValueError("eps and nu must have one entry per user")
        if np.any(~(self.eps > 0)) or np.any(~(self.nu > 0)):
            raise ValueError("SCA iterate must be strictly positive")


@dataclass
class BeamformingSolution:
    lifted: np.ndarray  # (K, N_t, N_t)
    beams: np.ndarray  # (K, N_t)
    eps: np.ndarray
    nu: np.ndarray
    objective: float  # eta * transmit power [W]
    rank_residuals: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    events: list = field(default_factory=list)

    @property
    def transmit_power(self) -> float:
        return float(np.sum(np.abs(self.beams) ** 2))


def amgm_bound(eps, nu, eps_t, nu_t):
    """Convex majorant of eps * nu, tight where (eps, nu) is parallel to the anchor."""
    return eps_t / (2.0 * nu_t) * nu**2 + nu_t / (2.0 * eps_t) * eps**2


def _gram(row: np.ndarray) -> np.ndarray:
    # Hermitian R with w^H R w = |row @ w|^2
    return np.outer(row.conj(), row)


@dataclass
class _Terms:
    grams: list  # per user Gram of the composite channel
    varpi: np.ndarray  # jamming plus noise per user [W]
    echo_gram: np.ndarray
    echo_floor: float  # gamma_T (g_Jam |h_JT|^2 + sigma^2)


def _terms(chs: ChannelSet, phases, cfg: ScenarioConfig) -> _Terms:
    hb, hj = composite_channels(chs, phases)
    theta = np.asarray(getattr(phases, "theta", phases), dtype=complex)
    row = (chs.rhs_target_steer.conj() * theta) @ chs.bs_rhs
    jt = echo_jamming(chs, theta)
    return _Terms(
        grams=[_gram(hb[k]) for k in range(hb.shape[0])],
        varpi=cfg.jam_power * np.abs(hj) ** 2 + cfg.noise_power,
        echo_gram=_gram(row),
        echo_floor=cfg.echo_sinr_min * (cfg.jam_power * abs(jt) ** 2 + cfg.noise_power),
    )


def _power_unit(t: _Terms) -> float:
    # watts per unit of the scaled covariance: makes Tr(H_k W)/varpi_k O(1)
    gains = np.array([np.real(np.trace(G)) for G in t.grams])
    ref = np.median(t.varpi / np.maximum(gains, 1e-300))
    return float(ref) if np.isfinite(ref) and ref > 0 else 1.0


def build_beamforming_subproblem(chs: ChannelSet, phases, iterate: SinrIterate, cfg: ScenarioConfig,
                                 *, drop: tuple = ()) -> ConicProblem:
    """Convex beam program at the SCA anchor ``iterate``.

    ``drop`` removes constraint families (``"power"``, ``"echo"``, ``"rate"``)
    and is only used to diagnose infeasibility.
    """
    Nt, K, _ = chs.shape
    if iterate.eps.size != K:
        raise ValueError(f"iterate has {iterate.eps.size} users, channels have {K}")
    t = _terms(chs, phases, cfg)
    unit = _power_unit(t)
    p = ConicProblem("beamforming")
    W = [p.psd(f"W{k}", Nt) for k in range(K)]
    eps = p.variable("eps", K, nonneg=True)
    nu = p.variable("nu", K)  # in units of varpi_k

    total = sum((Wk.trace() for Wk in W), Affine())
    p.minimize(total)
    if "power" not in drop:
        p.add_le(total * (unit / cfg.bs_power_max), 1.0, "power")
    if "rate" not in drop:
        if cfg.rate_min > 0:
            p.add_geo_mean_ge([e + 1.0 for e in eps], 2.0 ** (cfg.rate_min / K), "rate")
    for k in range(K):
        scale = unit / t.varpi[k]
        interf = sum((W[i].trace_with(t.grams[k] * scale) for i in range(K) if i != k), Affine())
        p.add_ge(nu[k], interf + 1.0, "interference")
        e_t, n_t = iterate.eps[k], iterate.nu[k] / t.varpi[k]
        signal = W[k].trace_with(t.grams[k] * scale)
        p.add_sum_squares_le(
            [math.sqrt(e_t / (2.0 * n_t)) * nu[k], math.sqrt(n_t / (2.0 * e_t)) * eps[k]], signal, "amgm"
        )
    if "echo" not in drop and cfg.echo_sinr_min > 0:
        g = sum((Wk.trace_with(t.echo_gram * (unit / t.echo_floor)) for Wk in W), Affine())
        p.add_ge(g, 1.0, "echo")
    p.handles = {"W": W, "eps": eps, "nu": nu, "unit": unit, "varpi": t.varpi}
    return p


def _fixed_sinr_problem(t: _Terms, sinr: np.ndarray, cfg: ScenarioConfig, Nt: int) -> ConicProblem:
    K = len(t.grams)
    unit = _power_unit(t)
    p = ConicProblem("beamforming-init")
    W = [p.psd(f"W{k}", Nt) for k in range(K)]
    total = sum((Wk.trace() for Wk in W), Affine())
    p.minimize(total)
    p.add_le(total * (unit / cfg.bs_power_max), 1.0, "power")
    for k in range(K):
        scale = unit / t.varpi[k]
        sig = W[k].trace_with(t.grams[k] * scale)
        interf = sum((W[i].trace_with(t.grams[k] * scale) for i in range(K) if i != k), Affine())
        p.add_ge(sig - sinr[k] * interf, sinr[k], "sinr")
    if cfg.echo_sinr_min > 0:
        g = sum((Wk.trace_with(t.echo_gram * (unit / t.echo_floor)) for Wk in W), Affine())
        p.add_ge(g, 1.0, "echo")
    p.handles = {"W": W, "unit": unit}
    return p


def check_beams(chs: ChannelSet, phases, beams, cfg: ScenarioConfig, tol: float = 1e-6) -> dict:
    """Normalised slacks of the power, rate and echo constraints for explicit beams."""
    w = np.asarray(beams, dtype=complex)
    power = (cfg.bs_power_max - np.sum(np.abs(w) ** 2)) / cfg.bs_power_max
    rate = sum_rate(comm_sinrs(chs, phases, w, cfg)) - cfg.rate_min
    rate /= cfg.rate_min if cfg.rate_min > 0 else 1.0
    echo = echo_sinr(chs, phases, w, cfg) - cfg.echo_sinr_min
    echo /= cfg.echo_sinr_min if cfg.echo_sinr_min > 0 else 1.0
    out = {"power": power, "rate": rate, "echo": echo}
    out["feasible"] = min(power, rate, echo) >= -tol
    return out


def _anchor_from_beams(t: _Terms, beams: np.ndarray, lifted=None) -> SinrIterate:
    K = len(t.grams)
    if lifted is None:
        lifted = np.stack([np.outer(w, w.conj()) for w in beams])
    power = np.array([[np.real(np.trace(t.grams[k] @ lifted[i])) for i in range(K)] for k in range(K)])
    sig = np.diag(power).copy()
    nu = power.sum(axis=1) - sig + t.varpi
    eps = np.maximum(sig / nu, 1e-12)
    return SinrIterate(eps, nu)


def _min_scaling(t: _Terms, beams, cfg: ScenarioConfig, cap: float | None = None):
    """Smallest c with sqrt(c) * beams meeting the rate and echo floors.

    Echo SINR is linear in c and every user SINR c S / (c I + varpi) is
    increasing, so the answer is a bisection on a monotone scalar function.
    Returns None when c would exceed ``cap`` (default: the power cap).
    """
    w = np.asarray(beams, dtype=complex)
    P = float(np.sum(np.abs(w) ** 2))
    if P <= 0:
        return None
    cmax = cfg.bs_power_max / P if cap is None else min(cap, cfg.bs_power_max / P)
    K = len(t.grams)
    gains = np.array([[np.real(np.conj(w[i]) @ t.grams[k] @ w[i]) for i in range(K)] for k in range(K)])
    S = np.diag(gains).copy()
    I = gains.sum(axis=1) - S
    echo = sum(np.real(np.conj(wk) @ t.echo_gram @ wk) for wk in w)
    c_lo = 0.0
    if cfg.echo_sinr_min > 0:
        if echo <= 0:
            return None
        c_lo = t.echo_floor / echo

    def rate(c):
        return float(np.sum(np.log2(1.0 + c * S / (c * I + t.varpi))))

    if cfg.rate_min > 0 and rate(max(c_lo, 1e-300)) < cfg.rate_min:
        if rate(cmax) < cfg.rate_min:
            return None
        lo, hi = max(c_lo, cmax * 1e-12), cmax
        while rate(lo) >= cfg.rate_min:
            lo *= 1e-3
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if rate(mid) >= cfg.rate_min:
                hi = mid
            else:
                lo = mid
            if hi / lo - 1.0 < 1e-12:
                break
        c_lo = max(c_lo, hi)
    c = c_lo * (1.0 + 1e-9)
    return c if 0 < c <= cmax else None


def _recover(chs, phases, lifted, cfg, opts: BeamformingOptions, events: list):
    K, Nt = lifted.shape[0], lifted.shape[1]
    t = _terms(chs, phases, cfg)
    beams = np.zeros((K, Nt), dtype=complex)
    res = np.zeros(K)
    for k in range(K):
        beams[k], res[k] = extract_rank_one(lifted[k])
    c = _min_scaling(t, beams, cfg)
    best = None if c is None else beams * np.sqrt(c)
    if c is not None and abs(c - 1.0) > 1e-6:
        events.append(f"rescaled beams by {c:.6g} after rank-one extraction")
    if np.max(res) > opts.rank_tol and opts.randomization:
        rng = np.random.default_rng([opts.seed, 0xBEA])
        roots = []
        for k in range(K):
            lam, U = np.linalg.eigh(0.5 * (lifted[k] + lifted[k].conj().T))
            roots.append(U * np.sqrt(np.clip(lam, 0.0, None)))
        best_p = np.inf if best is None else float(np.sum(np.abs(best) ** 2))
        improved = 0
        for _ in range(opts.num_random):
            z = (rng.standard_normal((K, Nt)) + 1j * rng.standard_normal((K, Nt))) / np.sqrt(2.0)
            cand = np.stack([roots[k] @ z[k] for k in range(K)])
            pc = float(np.sum(np.abs(cand) ** 2))
            cc = _min_scaling(t, cand, cfg, cap=best_p / pc if np.isfinite(best_p) else None)
            if cc is None:
                continue
            best, best_p = cand * np.sqrt(cc), cc * pc
            improved += 1
        if improved:
            events.append(f"randomization improved the recovered beams {improved} times")
    return best, res


def initial_beams(chs: ChannelSet, phases, cfg: ScenarioConfig) -> np.ndarray:
    """A feasible starting point.

    Solves the fixed-SINR power minimisation (a convex SDR) for K + 1 splits
    of the rate floor, even and all-to-one-user, and keeps the cheapest
    recovered beams; falls back to equal-power maximum-ratio beams scaled up
    to the power cap.
    """
    Nt, K, _ = chs.shape
    t = _terms(chs, phases, cfg)
    splits = [np.full(K, 2.0 ** (cfg.rate_min / K) - 1.0)]
    if K > 1 and cfg.rate_min > 0:
        for k in range(K):
            one = np.zeros(K)
            one[k] = 2.0 ** cfg.rate_min - 1.0
            splits.append(one)
    best, best_p = None, np.inf
    for target in splits:
        p = _fixed_sinr_problem(t, target, cfg, Nt)
        sol = solve_conic(p)
        if not sol.optimal:
            continue
        lifted = np.stack([sol.value(W) for W in p.handles["W"]]) * p.handles["unit"]
        beams, _ = _recover(chs, phases, lifted, cfg, BeamformingOptions(randomization=len(splits) == 1), [])
        if beams is not None and float(np.sum(np.abs(beams) ** 2)) < best_p:
            best, best_p = beams, float(np.sum(np.abs(beams) ** 2))
    if best is not None:
        return best
    hb, _ = composite_channels(chs, phases)
    mrt = hb.conj() / np.maximum(np.linalg.norm(hb, axis=1, keepdims=True), 1e-300)
    mrt = mrt * np.sqrt(cfg.bs_power_max / (K * 1e3))
    c = _min_scaling(t, mrt, cfg)
    if c is None:
        raise BeamformingInfeasible(_diagnose(chs, phases, cfg, _anchor_from_beams(t, mrt)))
    return mrt * np.sqrt(c)


def _diagnose(chs, phases, cfg, anchor) -> str:
    for family in ("echo", "power", "rate"):
        p = build_beamforming_subproblem(chs, phases, anchor, cfg, drop=(family,))
        if solve_conic(p).status == "optimal":
            return family
    return "rate"


def solve_beamforming_sca(chs: ChannelSet, phases, cfg: ScenarioConfig, options: BeamformingOptions | None = None,
                          start=None) -> BeamformingSolution:
    """SCA loop on the convexified program, then rank-one recovery.

    ``start`` are feasible beams to anchor from (and to fall back on if the
    recovered beams are not at least as good).
    """
    opts = options or BeamformingOptions()
    Nt, K, _ = chs.shape
    t = _terms(chs, phases, cfg)
    events: list = []
    incumbent = None
    if start is not None and check_beams(chs, phases, start, cfg)["feasible"]:
        incumbent = np.asarray(start, dtype=complex)
    if incumbent is None:
        incumbent = initial_beams(chs, phases, cfg)
    anchor = _anchor_from_beams(t, incumbent)
    trace = [cfg.pa_inefficiency * float(np.sum(np.abs(incumbent) ** 2))]
    lifted = np.stack([np.outer(w, w.conj()) for w in incumbent])
    it = 0
    for it in range(1, opts.max_iter + 1):
        p = build_beamforming_subproblem(chs, phases, anchor, cfg)
        sol = solve_conic(p, tol=opts.solver_tol)
        if not sol.optimal:
            if it == 1 and sol.status == "infeasible":
                raise BeamformingInfeasible(_diagnose(chs, phases, cfg, anchor))
            events.append(f"sca iteration {it}: solver status {sol.status}, stopped")
            break
        unit = p.handles["unit"]
        new = np.stack([sol.value(W) for W in p.handles["W"]]) * unit
        obj = cfg.pa_inefficiency * float(np.real(sum(np.trace(X) for X in new)))
        if obj > trace[-1] * (1 + 1e-9) + 1e-15:
            # numerical noise around the fixed point; keep the previous iterate
            events.append(f"sca iteration {it}: no decrease, stopped")
            break
        lifted = new
        anchor = _anchor_from_beams(t, None, lifted)
        trace.append(obj)
        if abs(trace[-2] - trace[-1]) <= opts.tol_sca * max(abs(trace[-2]), 1e-30):
            break

    beams, res = _recover(chs, phases, lifted, cfg, opts, events)
    p_inc = float(np.sum(np.abs(incumbent) ** 2))
    if beams is None or float(np.sum(np.abs(beams) ** 2)) > p_inc:
        if beams is None:
            events.append("recovered beams infeasible, kept incumbent")
        beams = incumbent
        lifted_out = np.stack([np.outer(w, w.conj()) for w in beams])
        res = np.zeros(K)
    else:
        lifted_out = lifted
    fin = _anchor_from_beams(t, beams)
    return BeamformingSolution(
        lifted=lifted_out,
        beams=beams,
        eps=fin.eps,
        nu=fin.nu,
        objective=cfg.pa_inefficiency * float(np.sum(np.abs(beams) ** 2)),
        rank_residuals=res,
        objective_trace=trace,
        iterations=it,
        events=events,
    )
