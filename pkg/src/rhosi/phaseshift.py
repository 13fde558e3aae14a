"""RHS phase design for fixed beams and UAV position.

The phase vector is lifted with a trailing 1, ``tb = [theta; 1]`` and
``Omega = tb tb^H`` of size (M+1), so every received amplitude
``d + theta^T c`` becomes ``tb^T [c; d]`` and its power the linear form
``Tr(Omega conj(cb) cb^T)``.  Direct paths and their cross terms with the
cascaded path are therefore exact.

The rate constraint is split as A + B with A = sum log2(total_k) concave
and B = -sum log2(interference_k) convex.  B is replaced by its tangent (a
global underestimator) and each log in A by the conic minorant
``log x >= log x0 + 1 - x0 / x``.  Rank one is enforced by the penalty
kappa * (||Omega||_* - linearised ||Omega||_2) with kappa escalation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beamform import _min_scaling, _terms
from .channel import ChannelSet
from .conic import Affine, ConicProblem, extract_rank_one, solve_conic
from .metrics import comm_sinrs, echo_sinr, sum_rate
from .scenario import ScenarioConfig

__all__ = [
    "LiftedSet",
    "PhaseConfig",
    "PhaseInfeasible",
    "PhaseOptions",
    "augment",
    "build_phase_subproblem",
    "dc_a",
    "dc_b",
    "dc_bound_B",
    "lift_channels",
    "matched_phases",
    "penalty_value",
    "quantize_phases",
    "solve_phase_penalty",
]

LN2 = math.log(2.0)


class PhaseInfeasible(RuntimeError):
    pass


@dataclass
class PhaseOptions:
    kappa0: float = 1e-2
    growth: float = 10.0
    kappa_max: float = 1e6
    inner_max: int = 5
    inner_tol: float = 1e-6
    rank_tol: float = 1e-3
    rate_weight: float = 1.0
    echo_weight: float = 0.1
    echo_cap: float = 1.0
    solver_tol: float = 1e-7
    use_rate: bool = True
    use_echo: bool = True


@dataclass
class PhaseConfig:
    theta: np.ndarray
    omega: np.ndarray
    rank_residual: float = 0.0
    penalty_value: float = 0.0
    kappa: float = 0.0
    objective_trace: list = field(default_factory=list)
    projection_delta: float = 0.0
    accepted: bool = True
    events: list = field(default_factory=list)

    @classmethod
    def from_theta(cls, theta, **kw) -> "PhaseConfig":
        th = np.asarray(theta, dtype=complex).reshape(-1)
        return cls(theta=th, omega=np.outer(th, th.conj()), **kw)


def augment(theta) -> np.ndarray:
    """Lifted (M+1) x (M+1) matrix of ``[theta; 1]``."""
    tb = np.append(np.asarray(theta, dtype=complex), 1.0)
    return np.outer(tb, tb.conj())


def _gram_aug(c: np.ndarray, d: complex) -> np.ndarray:
    cb = np.append(c, d)
    return np.outer(cb.conj(), cb)


@dataclass
class LiftedSet:
    """Phase-linear coefficients for fixed beams.

    ``theta^T G_B[k] w`` is the cascaded amplitude of beam ``w`` at user k;
    ``Xi_*`` are (M+1)-square Hermitian Grams in the augmented lifting.
    """

    G_B: np.ndarray  # (K, M, N_t)
    G_J: np.ndarray  # (K, M)
    G_RT: np.ndarray  # (M, N_t)
    G_JT: np.ndarray  # (M,)
    Xi_B: np.ndarray  # (K, K, M+1, M+1); [k, i] = beam i at user k
    Xi_J: np.ndarray  # (K, M+1, M+1), includes g_Jam
    Xi_RT: np.ndarray  # (K, M+1, M+1); beam i toward the target
    Xi_JT: np.ndarray  # (M+1, M+1), includes g_Jam
    varpi_J: np.ndarray  # g_Jam |h_J,k|^2 + sigma^2 (direct jamming only)
    varpi_JT: float
    noise: float
    echo_min: float

    @property
    def M(self) -> int:
        return self.G_J.shape[1]

    @property
    def K(self) -> int:
        return self.G_J.shape[0]

    def total(self, omega) -> np.ndarray:
        return np.array([
            sum(_tr(omega, self.Xi_B[k, i]) for i in range(self.K)) + _tr(omega, self.Xi_J[k]) + self.noise
            for k in range(self.K)
        ])

    def interference(self, omega) -> np.ndarray:
        return np.array([
            sum(_tr(omega, self.Xi_B[k, i]) for i in range(self.K) if i != k) + _tr(omega, self.Xi_J[k]) + self.noise
            for k in range(self.K)
        ])

    def echo_margin(self, omega) -> float:
        """Beampattern power minus gamma_T times jamming-plus-noise."""
        g = sum(_tr(omega, self.Xi_RT[i]) for i in range(self.K))
        return g - self.echo_min * (_tr(omega, self.Xi_JT) + self.noise)


def _tr(A, B) -> float:
    return float(np.real(np.sum(A * B.T)))


def lift_channels(chs: ChannelSet, beams, cfg: ScenarioConfig) -> LiftedSet:
    w = np.asarray(beams, dtype=complex)
    Nt, K, M = chs.shape
    if w.shape != (K, Nt):
        raise ValueError(f"beams have shape {w.shape}, expected {(K, Nt)}")
    g = cfg.jam_power
    hr = chs.rhs_user.conj()  # (K, M)
    a = chs.rhs_target_steer.conj()
    G_B = hr[:, :, None] * chs.bs_rhs[None, :, :]
    G_J = hr * chs.jam_rhs[None, :]
    G_RT = a[:, None] * chs.bs_rhs
    G_JT = a * chs.jam_rhs
    direct = chs.bs_user.conj() @ w.T  # [k, i]
    Xi_B = np.empty((K, K, M + 1, M + 1), dtype=complex)
    for k in range(K):
        for i in range(K):
            Xi_B[k, i] = _gram_aug(G_B[k] @ w[i], direct[k, i])
    Xi_J = np.stack([g * _gram_aug(G_J[k], chs.jam_user[k]) for k in range(K)])
    Xi_RT = np.stack([_gram_aug(G_RT @ w[i], 0.0) for i in range(K)])
    Xi_JT = g * _gram_aug(G_JT, chs.jam_target)
    return LiftedSet(
        G_B=G_B, G_J=G_J, G_RT=G_RT, G_JT=G_JT, Xi_B=Xi_B, Xi_J=Xi_J, Xi_RT=Xi_RT, Xi_JT=Xi_JT,
        varpi_J=g * np.abs(chs.jam_user) ** 2 + cfg.noise_power,
        varpi_JT=g * abs(chs.jam_target) ** 2 + cfg.noise_power,
        noise=cfg.noise_power, echo_min=cfg.echo_sinr_min,
    )


def dc_a(omega, lifted: LiftedSet) -> float:
    return float(np.sum(np.log2(lifted.total(omega))))


def dc_b(omega, lifted: LiftedSet) -> float:
    """B(Omega) = -sum_k log2(interference_k); convex, sum rate = A + B."""
    return float(-np.sum(np.log2(lifted.interference(omega))))


def dc_bound_B(omega, anchor, lifted: LiftedSet) -> float:
    """Tangent of B at ``anchor`` evaluated at ``omega``; never exceeds B(omega)."""
    I0 = lifted.interference(anchor)
    I1 = lifted.interference(omega)
    return dc_b(anchor, lifted) - float(np.sum((I1 - I0) / I0)) / LN2


def _top_eig(X):
    lam, U = np.linalg.eigh(0.5 * (X + X.conj().T))
    return float(lam[-1]), U[:, -1]


def penalty_value(omega, anchor, kappa: float) -> float:
    """kappa * (||Omega||_* - [||anchor||_2 + u^H (Omega - anchor) u]) for PSD Omega."""
    lam, u = _top_eig(anchor)
    lin = lam + float(np.real(u.conj() @ (omega - anchor) @ u))
    return kappa * (float(np.real(np.trace(omega))) - lin)


def build_phase_subproblem(lifted: LiftedSet, anchor, kappa: float, cfg: ScenarioConfig,
                           options: PhaseOptions | None = None) -> ConicProblem:
    """Penalised convex program at the lifted ``anchor`` ((M+1)-square or PhaseConfig)."""
    if not kappa > 0:
        raise ValueError("penalty parameter must be positive")
    opts = options or PhaseOptions()
    A0 = augment(anchor.theta) if isinstance(anchor, PhaseConfig) else np.asarray(anchor, dtype=complex)
    n = lifted.M + 1
    if A0.shape != (n, n):
        raise ValueError(f"anchor must be {n}x{n} (augmented lifting)")
    K = lifted.K
    p = ConicProblem("phase")
    Om = p.psd("Omega", n)
    for m in range(n):
        p.add_eq(Om.diag(m), 1.0, "unit_diag")

    lam, u = _top_eig(A0)
    penalty = kappa * (Om.trace() - Om.trace_with(np.outer(u, u.conj())))  # + kappa*(u^H A0 u - lam) = 0
    obj = penalty
    handles = {"Omega": Om, "penalty": penalty}

    if opts.use_rate and cfg.rate_min > 0:
        I0 = lifted.interference(A0)
        T0 = lifted.total(A0)
        s_r = p.variable("s_rate", 1)
        u_k = p.variable("u", K)
        rate_lb = Affine()
        for k in range(K):
            tot = sum((Om.trace_with(lifted.Xi_B[k, i] / I0[k]) for i in range(K)), Affine())
            tot = tot + Om.trace_with(lifted.Xi_J[k] / I0[k]) + lifted.noise / I0[k]
            itf = sum((Om.trace_with(lifted.Xi_B[k, i] / I0[k]) for i in range(K) if i != k), Affine())
            itf = itf + Om.trace_with(lifted.Xi_J[k] / I0[k]) + lifted.noise / I0[k]
            t0 = T0[k] / I0[k]
            p.add_rotated(u_k[k], tot, [1.0], "rate_aux")
            rate_lb = rate_lb + (math.log2(t0) + (1.0 - t0 * u_k[k]) / LN2) - (itf - 1.0) / LN2
        p.add_ge(rate_lb - s_r.x, cfg.rate_min, "rate")
        obj = obj - opts.rate_weight * s_r.x
        handles["s_rate"] = s_r
        handles["rate_lb"] = rate_lb
    if opts.use_echo and cfg.echo_sinr_min > 0:
        scale = lifted.echo_min * (_tr(A0, lifted.Xi_JT) + lifted.noise)
        g = sum((Om.trace_with(lifted.Xi_RT[i] / scale) for i in range(K)), Affine())
        jam = Om.trace_with(lifted.Xi_JT * (lifted.echo_min / scale)) + lifted.echo_min * lifted.noise / scale
        s_e = p.variable("s_echo", 1)
        p.add_ge(g - jam - s_e.x, 0.0, "echo")
        p.add_le(s_e.x, opts.echo_cap, "echo_cap")
        obj = obj - opts.echo_weight * s_e.x
        handles["s_echo"] = s_e
    p.minimize(obj)
    p.handles = handles
    return p


def matched_phases(chs: ChannelSet, user: int = 0, beams=None) -> np.ndarray:
    """Phases co-phasing the cascaded BS -> RHS -> ``user`` path.

    With beams the cascade is also aligned with that user's direct path.
    """
    hr = chs.rhs_user[user].conj()
    if beams is None:
        c = hr * chs.bs_rhs[:, 0] if chs.bs_rhs.shape[1] else hr
        ref = 0.0
    else:
        w = np.asarray(beams, dtype=complex)[user]
        c = hr * (chs.bs_rhs @ w)
        ref = float(np.angle(chs.bs_user[user].conj() @ w))
    return np.exp(1j * (ref - np.angle(c)))


def quantize_phases(pc, bits: int) -> PhaseConfig:
    """Snap each phase to the nearest of 2**bits uniform points; ties go to the smaller angle."""
    if bits < 1:
        raise ValueError("bits must be at least 1")
    theta = pc.theta if isinstance(pc, PhaseConfig) else np.asarray(pc, dtype=complex)
    levels = 2**bits
    step = 2.0 * np.pi / levels
    x = np.mod(np.angle(theta), 2.0 * np.pi) / step
    lo = np.floor(x)
    frac = x - lo
    # values within rounding noise of a grid point stay on it
    idx = np.where(frac > 0.5 + 1e-12, lo + 1, lo)
    idx = np.where(np.abs(frac - 1.0) < 1e-9, lo + 1, idx)
    idx = np.mod(idx, levels)
    return PhaseConfig.from_theta(np.exp(1j * step * idx))


def _phase_feasible(chs, theta, beams, cfg, tol=1e-6) -> bool:
    if cfg.rate_min > 0:
        r = sum_rate(comm_sinrs(chs, theta, beams, cfg))
        if r < cfg.rate_min * (1 - tol):
            return False
    if cfg.echo_sinr_min > 0 and echo_sinr(chs, theta, beams, cfg) < cfg.echo_sinr_min * (1 - tol):
        return False
    return True


def _scale_needed(chs, theta, beams, cfg) -> float:
    c = _min_scaling(_terms(chs, theta, cfg), beams, cfg)
    return np.inf if c is None else c


def _true_objective(omega, anchor, kappa, sol, p, opts) -> float:
    val = penalty_value(omega, omega, kappa)
    if "s_rate" in p.handles:
        val -= opts.rate_weight * sol.value(p.handles["s_rate"])
    if "s_echo" in p.handles:
        val -= opts.echo_weight * sol.value(p.handles["s_echo"])
    return val


def solve_phase_penalty(chs: ChannelSet, beams, cfg: ScenarioConfig, options: PhaseOptions | None = None,
                        start=None) -> PhaseConfig:
    """Penalty SCA with kappa escalation, then unit-modulus projection.

    The returned phases are feasible with ``beams``.  They replace ``start``
    only if the beams would need no more power than before; otherwise
    ``start`` is returned with ``accepted=False``.
    """
    opts = options or PhaseOptions()
    Nt, K, M = chs.shape
    w = np.asarray(beams, dtype=complex)
    # floors switched off in the options are not enforced anywhere in this step
    cfg = cfg.replace(rate_min=cfg.rate_min if opts.use_rate else 0.0,
                      echo_sinr_min=cfg.echo_sinr_min if opts.use_echo else 0.0)
    if start is None:
        theta0 = matched_phases(chs, 0, w)
    else:
        theta0 = np.asarray(getattr(start, "theta", start), dtype=complex)
    if not _phase_feasible(chs, theta0, w, cfg):
        raise PhaseInfeasible("starting phases violate the rate or echo floor with the given beams")
    if M == 1:
        th = np.exp(1j * np.angle(theta0))
        return PhaseConfig.from_theta(th, kappa=opts.kappa0)

    lifted = lift_channels(chs, w, cfg)
    anchor = augment(theta0)
    kappa = opts.kappa0
    trace: list = []
    events: list = []
    res = 0.0
    while True:
        prev = None
        for _ in range(opts.inner_max):
            p = build_phase_subproblem(lifted, anchor, kappa, cfg, opts)
            sol = solve_conic(p, tol=opts.solver_tol)
            if not sol.optimal:
                events.append(f"kappa {kappa:.3g}: solver status {sol.status}")
                break
            Om = sol.value(p.handles["Omega"])
            val = _true_objective(Om, anchor, kappa, sol, p, opts)
            trace.append((kappa, val))
            anchor = Om
            if prev is not None and abs(prev - val) <= opts.inner_tol * max(1.0, abs(prev)):
                break
            prev = val
        lam = np.linalg.eigvalsh(0.5 * (anchor + anchor.conj().T))
        res = float(max(lam[-2], 0.0) / lam[-1]) if lam[-1] > 0 else 0.0
        if res <= opts.rank_tol or kappa >= opts.kappa_max:
            break
        kappa *= opts.growth
    if res > opts.rank_tol:
        events.append(f"rank residual {res:.3g} above tolerance at kappa cap")

    v, _ = extract_rank_one(anchor)
    raw = v[:M] / v[M] if abs(v[M]) > 0 else v[:M]
    theta = np.exp(1j * np.angle(raw))
    delta = float(np.max(np.abs(theta - raw)))
    pen = penalty_value(anchor, anchor, kappa)
    out = PhaseConfig.from_theta(theta, rank_residual=res, penalty_value=pen, kappa=kappa,
                                 objective_trace=trace, projection_delta=delta, events=events)
    if not _phase_feasible(chs, theta, w, cfg):
        events.append("projected phases infeasible, kept the starting phases")
        return PhaseConfig.from_theta(theta0, rank_residual=res, kappa=kappa, objective_trace=trace,
                                      accepted=False, events=events)
    if _scale_needed(chs, theta, w, cfg) > _scale_needed(chs, theta0, w, cfg) * (1 + 1e-12):
        events.append("new phases need more transmit power, kept the starting phases")
        return PhaseConfig.from_theta(theta0, rank_residual=res, kappa=kappa, objective_trace=trace,
                                      accepted=False, events=events)
    return out
