"""UAV deployment and velocity planning for fixed beams and phases.

All slots are optimised jointly.  Path-loss dependence on the UAV position is
carried by distance slacks (a, b, c, d) tied to the air-link distances through
first-order bounds on distance products, the SINR split of the beam step is
reused through (kappa, chi), and the induced-power term is linearised through
the slack aleph with 1/aleph^2 <= aleph^2 + |v|^2/v0^2.

Identifications used here (s = air-link distances, p = 2/beta):

    a_k <= (s_Rk s_BR)^(-beta/2)    user-k cascade amplitude, lower slack
    b_k >= (s_Rk s_JR)^(-beta/2)    jammer cascade amplitude at user k
    c   <= s_BR^(-beta/2)           BS -> surface amplitude seen by the target
    d   >= s_JR^(-beta/2)           jammer -> surface amplitude seen by the target

Angles and fading are frozen at the anchor position, so every accepted step
is re-checked against the exact channel model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import ChannelSet, DegenerateGeometryError, assemble_channels
from .conic import Affine, ConicProblem, asum, solve_conic
from .metrics import Solution, aero_power, check_feasibility, comm_sinrs, echo_sinr
from .scenario import AeroParams, ScenarioConfig

__all__ = [
    "TrajectoryCoefficients",
    "TrajectoryInfeasible",
    "TrajectoryIterate",
    "TrajectoryOptions",
    "TrajectoryResult",
    "aleph_exact",
    "amplitudes",
    "anchor_iterate",
    "best_cruise_speed",
    "build_trajectory_subproblem",
    "d1_bound",
    "d1_value",
    "d2_bound",
    "d2_value",
    "e_bound",
    "e_value",
    "f_bound",
    "f_value",
    "lambda_upsilon_coefficients",
    "power_tangent",
    "product_bound_lower",
    "product_bound_upper",
    "solve_trajectory_sca",
    "surrogate_sinrs",
]


SILENT_SINR = 1e-9  # anchor SINR below which a user is treated as receiving nothing


class TrajectoryInfeasible(RuntimeError):
    def __init__(self, message: str, binding=()):
        super().__init__(message)
        self.binding = list(binding)


# --- bounds ---------------------------------------------------------------------

def _air(Q, p, L: float) -> float:
    Q = np.asarray(Q, float)
    p = np.asarray(p, float)
    return float(math.sqrt(float(np.sum((Q - p) ** 2)) + L * L))


def product_bound_upper(Q, anchor, pair, altitude: float) -> float:
    """Convex majorant of s_a(Q) s_b(Q), tight at ``anchor``.

    ``pair`` holds the two ground endpoints; s = sqrt(|Q - p|^2 + L^2) is
    floored at L (the altitude) by construction.
    """
    pa, pb = (np.asarray(p, float) for p in pair)
    Q, Qt = np.asarray(Q, float), np.asarray(anchor, float)
    sa, sb = _air(Q, pa, altitude), _air(Q, pb, altitude)
    sta, stb = _air(Qt, pa, altitude), _air(Qt, pb, altitude)
    return 0.5 * ((sa + sb) ** 2 - sta**2 - stb**2) - float((2 * Qt - pa - pb) @ (Q - Qt))


def product_bound_lower(Q, anchor, pair, altitude: float) -> float:
    """Concave minorant of s_a(Q) s_b(Q), tight at ``anchor``."""
    pa, pb = (np.asarray(p, float) for p in pair)
    Q, Qt = np.asarray(Q, float), np.asarray(anchor, float)
    sta, stb = _air(Qt, pa, altitude), _air(Qt, pb, altitude)
    if sta <= 0.0 or stb <= 0.0:
        raise DegenerateGeometryError("anchor sits on a ground endpoint at zero altitude")
    grad = (Qt - pa) / sta + (Qt - pb) / stb
    sa2, sb2 = _air(Q, pa, altitude) ** 2, _air(Q, pb, altitude) ** 2
    return 0.5 * (sta + stb) ** 2 - 0.5 * (sa2 + sb2) + (sta + stb) * float(grad @ (Q - Qt))


def power_tangent(x, x_anchor, p: float):
    """Tangent of the convex x^(-p) at ``x_anchor`` (a global minorant on x > 0)."""
    return x_anchor ** (-p) - p * x_anchor ** (-p - 1.0) * (x - x_anchor)


def d1_value(a, lam, ups, direct=0.0):
    return a * a * lam + a * ups + direct


def d1_bound(a, a_anchor, lam, ups, direct=0.0):
    return d1_value(a_anchor, lam, ups, direct) + (2.0 * a_anchor * lam + ups) * (a - a_anchor)


def d2_value(a, lam, ups, iota, varpi):
    """Interference-plus-noise as a function of the amplitude slack ``a``."""
    lam, ups = np.asarray(lam, float), np.asarray(ups, float)
    return float(np.sum(a * a * lam + a * ups)) + iota + varpi


def d2_bound(a, a_anchor, lam, ups, iota, varpi):
    lam, ups = np.asarray(lam, float), np.asarray(ups, float)
    return d2_value(a_anchor, lam, ups, iota, varpi) + float(np.sum(2.0 * a_anchor * lam + ups)) * (a - a_anchor)


def e_value(c, d, lam_rt, lam_jt, ups_jt, varpi_jt, gamma):
    return c * c * lam_rt - gamma * (d * d * lam_jt + d * ups_jt + varpi_jt)


def e_bound(c, d, c_anchor, lam_rt, lam_jt, ups_jt, varpi_jt, gamma):
    """Minorant of the echo margin: tangent in c, exact (concave) in d."""
    lin = c_anchor**2 * lam_rt + 2.0 * c_anchor * lam_rt * (c - c_anchor)
    return lin - gamma * (d * d * lam_jt + d * ups_jt + varpi_jt)


def f_value(aleph, v, v0: float):
    v = np.asarray(v, float)
    return aleph * aleph + float(v @ v) / v0**2


def f_bound(aleph, v, aleph_anchor, v_anchor, v0: float):
    v, vt = np.asarray(v, float), np.asarray(v_anchor, float)
    return (2.0 * aleph_anchor * (aleph - aleph_anchor) + 2.0 / v0**2 * float(vt @ (v - vt))
            + aleph_anchor**2 + float(vt @ vt) / v0**2)


def aleph_exact(v, v0: float) -> float:
    """Induced-power factor at velocity ``v`` (equals 1 at hover)."""
    x = float(np.sum(np.asarray(v, float) ** 2)) / (2.0 * v0**2)
    return math.sqrt(1.0 / (math.sqrt(1.0 + x * x) + x))


def best_cruise_speed(aero: AeroParams, v_max: float) -> float:
    res = minimize_scalar(lambda s: aero_power([s, 0.0], aero), bounds=(0.0, v_max), method="bounded",
                          options={"xatol": 1e-9})
    s = float(res.x)
    return s if aero_power([s, 0.0], aero) < aero_power([0.0, 0.0], aero) else 0.0


# --- coefficients -----------------------------------------------------------

@dataclass
class TrajectoryCoefficients:
    """Distance-free channel factors of one slot at frozen angles.

    ``lam_B[k, i]``/``ups_B[k, i]``: beam i seen by user k through the surface;
    ``direct[k, i] = |h_B,k^H w_i|^2``; jammer terms already carry g_Jam.
    """

    lam_B: np.ndarray
    ups_B: np.ndarray
    direct: np.ndarray
    lam_J: np.ndarray
    ups_J: np.ndarray
    varpi_J: np.ndarray
    lam_RT: float
    lam_JT: float
    ups_JT: float
    varpi_JT: float

    @property
    def iota(self) -> np.ndarray:
        return self.direct.sum(axis=1) - np.diag(self.direct)


def lambda_upsilon_coefficients(chs: ChannelSet, phases, beams, cfg: ScenarioConfig) -> TrajectoryCoefficients:
    theta = np.asarray(getattr(phases, "theta", phases), dtype=complex).reshape(-1)
    w = np.asarray(beams, dtype=complex)
    Nt, K, M = chs.shape
    if w.ndim == 1:
        w = w[None, :]
    if w.shape != (K, Nt):
        raise ValueError(f"beams have shape {w.shape}, expected {(K, Nt)}")
    if theta.shape != (M,):
        raise ValueError(f"phase vector has {theta.size} entries, surface has {M}")
    pl, g = cfg.path_gain_ref, cfg.jam_power
    rows = (chs.rhs_user_unit.conj() * theta) @ chs.bs_rhs_unit  # (K, Nt)
    c = rows @ w.T  # [k, i]
    dlink = chs.bs_user.conj() @ w.T  # [k, i]
    e = (chs.rhs_user_unit.conj() * theta) @ chs.jam_rhs_unit  # (K,)
    steer = chs.rhs_target_steer.conj() * theta
    echo_rows = steer @ chs.bs_rhs_unit
    e_t = steer @ chs.jam_rhs_unit
    j_t = chs.jam_target
    return TrajectoryCoefficients(
        lam_B=pl**2 * np.abs(c) ** 2,
        ups_B=2.0 * pl * np.real(np.conj(dlink) * c),
        direct=np.abs(dlink) ** 2,
        lam_J=g * pl**2 * np.abs(e) ** 2,
        ups_J=2.0 * g * pl * np.real(np.conj(chs.jam_user) * e),
        varpi_J=g * np.abs(chs.jam_user) ** 2 + cfg.noise_power,
        lam_RT=float(pl * np.sum(np.abs(w @ echo_rows) ** 2)),
        lam_JT=float(g * pl * abs(e_t) ** 2),
        ups_JT=float(2.0 * g * math.sqrt(pl) * np.real(np.conj(j_t) * e_t)),
        varpi_JT=float(g * abs(j_t) ** 2 + cfg.noise_power),
    )


def amplitudes(Q, cfg: ScenarioConfig) -> dict:
    """True values of the four distance slacks at position ``Q``."""
    L, beta = cfg.uav_altitude, cfg.path_loss_exp
    s_br = _air(Q, cfg.bs_pos, L)
    s_jr = _air(Q, cfg.jammer_pos, L)
    s_rk = np.array([_air(Q, u, L) for u in cfg.users])
    return {
        "a": (s_rk * s_br) ** (-beta / 2),
        "b": (s_rk * s_jr) ** (-beta / 2),
        "c": s_br ** (-beta / 2),
        "d": s_jr ** (-beta / 2),
    }


def surrogate_sinrs(coef: TrajectoryCoefficients, a, b) -> np.ndarray:
    """SINRs rebuilt from the coefficients and the amplitude values."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    K = a.size
    gain = coef.lam_B * (a * a)[:, None] + coef.ups_B * a[:, None] + coef.direct
    sig = np.diag(gain).copy()
    interf = gain.sum(axis=1) - sig
    jam = coef.lam_J * b * b + coef.ups_J * b + coef.varpi_J
    return sig / (interf + jam) if K else sig


# --- iterate and subproblem ---------------------------------------------------------

@dataclass
class TrajectoryIterate:
    positions: np.ndarray  # (N, 2)
    velocities: np.ndarray  # (N, 2)
    a: np.ndarray  # (N, K)
    b: np.ndarray
    c: np.ndarray  # (N,)
    d: np.ndarray
    kappa: np.ndarray  # (N, K) SINRs
    chi: np.ndarray  # (N, K) interference plus noise [W]
    aleph: np.ndarray  # (N,)

    @property
    def num_slots(self) -> int:
        return self.positions.shape[0]


def anchor_iterate(positions, velocities, coefs: list[TrajectoryCoefficients], cfg: ScenarioConfig) -> TrajectoryIterate:
    """Tight slacks at a given trajectory (every bound holds with equality)."""
    Q = np.asarray(positions, float).reshape(-1, 2)
    V = np.asarray(velocities, float).reshape(-1, 2)
    N, K = Q.shape[0], cfg.num_users
    out = {k: np.zeros((N, K)) for k in ("a", "b", "kappa", "chi")}
    cs, ds, al = np.zeros(N), np.zeros(N), np.zeros(N)
    for n in range(N):
        amp = amplitudes(Q[n], cfg)
        co = coefs[n]
        out["a"][n], out["b"][n] = amp["a"], amp["b"]
        cs[n], ds[n] = amp["c"], amp["d"]
        gain = co.lam_B * (amp["a"] ** 2)[:, None] + co.ups_B * amp["a"][:, None] + co.direct
        sig = np.diag(gain)
        chi = gain.sum(axis=1) - sig + co.lam_J * amp["b"] ** 2 + co.ups_J * amp["b"] + co.varpi_J
        out["kappa"][n], out["chi"][n] = sig / chi, chi
        al[n] = aleph_exact(V[n], cfg.aero.mean_induced_velocity)
    return TrajectoryIterate(Q.copy(), V.copy(), out["a"], out["b"], cs, ds, out["kappa"], out["chi"], al)


@dataclass
class TrajectoryOptions:
    tol: float = 1e-5
    max_iter: int = 30
    backtrack: int = 10
    anchor_weight: float = 1e-4  # W per (service radius)^2 of displacement; a tie-break only
    escape: bool = True
    solver_tol: float = 1e-7
    elastic_weight: float = 1e3  # W per unit of normalised rate/echo shortfall


def build_trajectory_subproblem(iterate: TrajectoryIterate, coefs: list[TrajectoryCoefficients], cfg: ScenarioConfig,
                                options: TrajectoryOptions | None = None) -> ConicProblem:
    """Joint convex program over all slots around ``iterate``.

    Positions are scaled by the service radius, slacks by their anchor values
    and chi_k by the jam-plus-noise floor, so every quantity is O(1).
    """
    opts = options or TrajectoryOptions()
    N, K = iterate.num_slots, cfg.num_users
    if len(coefs) != N:
        raise ValueError(f"{len(coefs)} coefficient sets for {N} slots")
    aero = cfg.aero
    ell = cfg.service_radius
    L = cfg.uav_altitude / ell
    pexp = 2.0 / cfg.path_loss_exp
    v0 = aero.mean_induced_velocity
    bs = np.asarray(cfg.bs_pos, float) / ell
    jam = np.asarray(cfg.jammer_pos, float) / ell
    users = cfg.users / ell
    speed_tol = 1e-9

    p = ConicProblem("trajectory")
    H = {"Q": [], "v": [], "a": [], "b": [], "c": [], "d": [], "kappa": [], "chi": [], "aleph": []}
    cost = []
    for n in range(N):
        Qn = p.variable(f"Q{n}", 2)
        vn = p.variable(f"v{n}", 2)
        an = p.variable(f"a{n}", K, nonneg=True)
        bn = p.variable(f"b{n}", K, nonneg=True)
        cn = p.variable(f"c{n}", 1, nonneg=True)
        dn = p.variable(f"d{n}", 1, nonneg=True)
        kn = p.variable(f"kappa{n}", K, nonneg=True)
        xn = p.variable(f"chi{n}", K, nonneg=True)
        hn = p.variable(f"aleph{n}", 1, nonneg=True)
        for key, blk in zip(H, (Qn, vn, an, bn, cn, dn, kn, xn, hn)):
            H[key].append(blk)

    for n in range(N):
        Qn, vn, an, bn = H["Q"][n], H["v"][n], H["a"][n], H["b"][n]
        cn, dn, kn, xn, hn = H["c"][n][0], H["d"][n][0], H["kappa"][n], H["chi"][n], H["aleph"][n][0]
        co = coefs[n]
        Qt = iterate.positions[n] / ell
        vt = iterate.velocities[n]

        def dist(pt):
            return [Qn[0] - pt[0], Qn[1] - pt[1], Affine(const=L)]

        s_br = _air(Qt, bs, L)
        s_jr = _air(Qt, jam, L)

        # cascade amplitude of user k: s_Rk s_BR <= a^-p (majorant <= tangent)
        for k in range(K):
            s_rk = _air(Qt, users[k], L)
            ta, tb = p._aux("ta"), p._aux("tb")
            p.add_soc(ta, dist(users[k]), "dist")
            p.add_soc(tb, dist(bs), "dist")
            lin = (2 * Qt - users[k] - bs)
            prod = s_rk * s_br
            rhs = prod * (1.0 - pexp * (an[k] - 1.0)) + 0.5 * (s_rk**2 + s_br**2) + asum(
                lin[j] * (Qn[j] - Qt[j]) for j in range(2))
            p.add_rotated(2.0 * rhs, 1.0, [ta + tb], "c1")

            # jammer cascade at user k: s_Rk s_JR >= b^-p (minorant >= power)
            s_rj = _air(Qt, users[k], L)
            grad = (Qt - jam) / s_jr + (Qt - users[k]) / s_rj
            u = p._aux("ub")
            p.add_power(u, bn[k], 1.0, 1.0 / (1.0 + pexp), "c2")
            lower = 0.5 * (s_jr + s_rj) ** 2 + (s_jr + s_rj) * asum(grad[j] * (Qn[j] - Qt[j]) for j in range(2))
            # 0.5 (|Q - pJ|^2 + |Q - pk|^2 + 2 L^2) + prod u <= lower
            p.add_sum_squares_le(
                [Qn[0] - jam[0], Qn[1] - jam[1], Qn[0] - users[k][0], Qn[1] - users[k][1]],
                2.0 * (lower - u * (s_jr * s_rj)) - 2.0 * L * L, "c2")

        # echo amplitudes: s_BR <= c^-p, s_JR >= d^-p
        if cfg.echo_sinr_min > 0:
            p.add_soc(s_br * (1.0 - pexp * (cn - 1.0)), dist(bs), "c3")
            u = p._aux("ud")
            p.add_power(u, dn, 1.0, 1.0 / (1.0 + pexp), "c4")
            g_jr = (Qt - jam) / s_jr
            p.add_ge(s_jr + asum(g_jr[j] * (Qn[j] - Qt[j]) for j in range(2)), u * s_jr, "c4")
            w0 = co.varpi_JT
            a_t, d_t = iterate.c[n], iterate.d[n]
            lam_rt = a_t**2 * co.lam_RT / w0
            lam_jt = d_t**2 * co.lam_JT / w0
            ups_jt = d_t * co.ups_JT / w0
            g = cfg.echo_sinr_min
            rhs = lam_rt * (2.0 * cn - 1.0) - g * ups_jt * dn - g
            if opts.elastic_weight > 0:
                sig = p._aux("sig_echo")
                p.add_ge(sig, 0.0, "elastic")
                rhs = rhs + sig
                cost.append(opts.elastic_weight * sig)
            p.add_sum_squares_le([math.sqrt(g * lam_jt) * dn], rhs, "echo")

        # SINR split: D1 tangent >= AM-GM(kappa, chi), exact D2 <= chi;
        # kappa_k, chi_k are carried in units of their anchor values
        if cfg.rate_min > 0:
            kap_t = np.asarray(iterate.kappa[n], float)
            for k in range(K):
                chi_t = iterate.chi[n, k]
                if not kap_t[k] > SILENT_SINR:
                    # (almost) no signal reaches user k: count it as silent, which
                    # only tightens the rate floor by log2(1 + SILENT_SINR)
                    p.add_eq(kn[k], 0.0, "d1")
                    p.add_ge(xn[k], 1.0, "d2")
                    continue
                w0 = kap_t[k] * chi_t
                a_t, b_t = iterate.a[n, k], iterate.b[n, k]
                lam = co.lam_B[k] * a_t**2 / w0
                ups = co.ups_B[k] * a_t / w0
                dr = co.direct[k] / w0
                d1 = (lam[k] + ups[k] + dr[k]) + (2.0 * lam[k] + ups[k]) * (an[k] - 1.0)
                p.add_sum_squares_le([math.sqrt(0.5) * xn[k], math.sqrt(0.5) * kn[k]], d1, "d1")
                others = [i for i in range(K) if i != k]
                # interference scaled by chi_t
                lam_o = float(sum(lam[i] for i in others)) * kap_t[k]
                ups_o = float(sum(ups[i] for i in others)) * kap_t[k]
                iota = float(sum(dr[i] for i in others)) * kap_t[k]
                lam_j = co.lam_J[k] * b_t**2 / chi_t
                ups_j = co.ups_J[k] * b_t / chi_t
                rhs = xn[k] - ups_o * an[k] - ups_j * bn[k] - iota - co.varpi_J[k] / chi_t
                p.add_sum_squares_le([math.sqrt(lam_o) * an[k], math.sqrt(lam_j) * bn[k]], rhs, "d2")
            floor = Affine(const=2.0 ** (cfg.rate_min / K))
            if opts.elastic_weight > 0:
                sig = p._aux("sig_rate")
                p.add_ge(sig, 0.0, "elastic")
                floor = floor - sig
                cost.append(opts.elastic_weight * sig)
            p.add_geo_mean_ge([(kap_t[k] if kap_t[k] > SILENT_SINR else 0.0) * kn[k] + 1.0 for k in range(K)], floor, "rate")

        # induced-power slack: 1/aleph^2 <= F(aleph, v)
        h_t = iterate.aleph[n]
        z, y = p._aux("z"), p._aux("y")
        p.add_inverse_le(hn, z, "aleph")
        p.add_sum_squares_le([z], y, "aleph")
        F = (2.0 * h_t * (hn - h_t) + asum(2.0 / v0**2 * vt[j] * (vn[j] - vt[j]) for j in range(2))
             + h_t**2 + float(vt @ vt) / v0**2)
        p.add_le(y, F, "aleph")

        # kinematics
        p.add_soc(cfg.service_radius / ell, [Qn[0], Qn[1]], "radius")
        p.add_soc(cfg.v_max, [vn[0], vn[1]], "speed")
        if n + 1 < N:
            Qm, vm = H["Q"][n + 1], H["v"][n + 1]
            step = [Qm[0] - Qn[0], Qm[1] - Qn[1]]
            spd = float(np.linalg.norm(vt))
            if spd > speed_tol:
                reach = asum((cfg.slot_duration / ell) * vt[j] / spd * vn[j] for j in range(2))
                p.add_soc(reach, step, "motion")
            else:
                p.add_eq(step[0], 0.0, "motion")
                p.add_eq(step[1], 0.0, "motion")
            p.add_soc(cfg.a_max * cfg.slot_duration, [vm[0] - vn[0], vm[1] - vn[1]], "accel")

        # aero objective: profile r >= |v|^2, parasite s >= |v|^3, induced P_I aleph
        r, t, s = p._aux("r"), p._aux("t"), p._aux("s")
        u1, u2 = p._aux("u1"), p._aux("u2")
        p.add_sum_squares_le([vn[0], vn[1]], r, "profile")
        p.add_soc(t, [vn[0], vn[1]], "parasite")
        p.add_rotated(s, 1.0, [u1], "parasite")
        p.add_rotated(t, 1.0, [u2], "parasite")
        p.add_rotated(u1, u2, [t], "parasite")
        cost.append(aero.blade_power + (3.0 * aero.blade_power / aero.tip_speed**2) * r
                    + aero.parasite_coeff * s + aero.induced_power * hn)
        if opts.anchor_weight > 0:
            q = p._aux("prox")
            p.add_sum_squares_le([Qn[0] - Qt[0], Qn[1] - Qt[1]], q, "prox")
            cost.append(opts.anchor_weight * q)

    p.minimize(asum(cost) / N)
    p.handles = {**H, "ell": ell}
    return p


def _read(sol, p, iterate: TrajectoryIterate):
    H = p.handles
    N = iterate.num_slots
    Q = np.array([sol.value(H["Q"][n]) for n in range(N)]) * H["ell"]
    V = np.array([sol.value(H["v"][n]) for n in range(N)])
    aleph = np.array([sol.value(H["aleph"][n]) for n in range(N)])
    return Q, V, aleph


# --- SCA driver ---------------------------------------------------------------

@dataclass
class TrajectoryResult:
    positions: np.ndarray
    velocities: np.ndarray
    aero: np.ndarray  # per slot [W]
    objective_trace: list[float]
    aleph: np.ndarray | None = None  # induced-power slack of the last full subproblem step
    aleph_velocities: np.ndarray | None = None  # the velocities that slack was solved with
    iterations: int = 0
    events: list[str] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return float(np.mean(self.aero))


def _mean_aero(V, aero: AeroParams) -> float:
    return float(np.mean([aero_power(v, aero) for v in V]))


def _feasible(cfg, beams, thetas, Q, V, tol=1e-6):
    chs = [assemble_channels(cfg, Q[n], n) for n in range(Q.shape[0])]
    rep = check_feasibility(Solution(beams, thetas, Q, V), cfg, tol=tol, channels=chs)
    return rep, chs


def solve_trajectory_sca(chs_list, thetas, beams, cfg: ScenarioConfig, options: TrajectoryOptions | None = None,
                         start=None) -> TrajectoryResult:
    """SCA over the deployment step.

    ``start`` is ``(positions, velocities)``; by default the positions of the
    given channel sets and hover.  Each accepted step is feasible under the
    exact channel model and does not raise the mean aero power.
    """
    opts = options or TrajectoryOptions()
    beams = np.asarray(beams, dtype=complex)
    thetas = np.asarray(thetas, dtype=complex)
    N = len(chs_list)
    if start is None:
        Q = np.array([c.geom.uav_xy for c in chs_list], dtype=float)
        V = np.zeros((N, 2))
    else:
        Q = np.asarray(start[0], float).reshape(N, 2).copy()
        V = np.asarray(start[1], float).reshape(N, 2).copy()
    rep, chs = _feasible(cfg, beams, thetas, Q, V)
    if not rep.feasible:
        raise TrajectoryInfeasible(f"starting trajectory is infeasible: {rep}", rep.binding())
    events: list[str] = []
    obj = _mean_aero(V, cfg.aero)
    trace = [obj]

    if opts.escape and np.all(np.linalg.norm(V, axis=1) < 1e-9):
        # hover is a stationary point of the linearised induced term; try cruising in place
        s = best_cruise_speed(cfg.aero, cfg.v_max)
        if s > 0:
            Vc = np.tile([s, 0.0], (N, 1))
            rep_c, chs_c = _feasible(cfg, beams, thetas, Q, Vc)
            obj_c = _mean_aero(Vc, cfg.aero)
            if rep_c.feasible and obj_c < obj:
                V, obj, chs = Vc, obj_c, chs_c
                trace.append(obj)
                events.append(f"escape to cruise speed {s:.4g} m/s")

    aleph = aleph_v = None
    it = 0
    for it in range(1, opts.max_iter + 1):
        coefs = [lambda_upsilon_coefficients(chs[n], thetas[n], beams[n], cfg) for n in range(N)]
        anchor = anchor_iterate(Q, V, coefs, cfg)
        p = build_trajectory_subproblem(anchor, coefs, cfg, opts)
        sol = solve_conic(p, tol=opts.solver_tol)
        if not sol.optimal:
            events.append(f"iteration {it}: subproblem {sol.status} ({sol.solver_status})")
            break
        Qc, Vc, al = _read(sol, p, anchor)
        if _mean_aero(Vc, cfg.aero) >= obj * (1.0 - opts.tol):
            aleph, aleph_v = al, Vc
            events.append(f"iteration {it}: converged")
            break
        accepted = False
        step = 1.0
        for _ in range(opts.backtrack + 1):
            Vs = V + step * (Vc - V)
            obj_s = _mean_aero(Vs, cfg.aero)
            if obj_s <= obj + 1e-12:
                # the exact channels carry carrier-scale phases, so a position
                # change that the frozen-angle model accepts may still fail;
                # then keep the positions and take the velocity part alone
                for Qs in (Q + step * (Qc - Q), Q):
                    rep_s, chs_s = _feasible(cfg, beams, thetas, Qs, Vs)
                    if rep_s.feasible:
                        accepted = True
                        break
            if accepted:
                break
            step *= 0.5
        if not accepted:
            events.append(f"iteration {it}: no feasible descent along the step")
            break
        if step < 1.0:
            events.append(f"iteration {it}: step shortened to {step:.3g}")
        else:
            aleph, aleph_v = al, Vc
        change = (obj - obj_s) / max(abs(obj), 1e-300)
        Q, V, obj, chs = Qs, Vs, obj_s, chs_s
        trace.append(obj)
        if change <= opts.tol:
            break
    aero_slots = np.array([aero_power(v, cfg.aero) for v in V])
    return TrajectoryResult(Q, V, aero_slots, trace, aleph, aleph_v, it, events)
