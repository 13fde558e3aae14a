"""Channel construction for one UAV position and time slot.

Air links (BS/jammer -> RHS, RHS -> users/target) are deterministic line of
sight; ground links (BS -> users, jammer -> users/target) are Rician with a
small-scale scattering part drawn once per ``(seed, slot)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioConfig

__all__ = [
    "ChannelSet",
    "DegenerateGeometryError",
    "GeometrySnapshot",
    "assemble_channels",
    "draw_fading",
    "geometry",
    "path_gain",
    "rician_fade",
    "steering_vector",
    "ula_response",
]


class DegenerateGeometryError(ValueError):
    pass


def steering_vector(angle: float, length: int, spacing_ratio: float) -> np.ndarray:
    """Entries exp(j 2 pi i rho sin(angle)), i = 0..length-1."""
    if length < 1:
        raise ValueError("steering vector length must be at least 1")
    i = np.arange(length)
    return np.exp(1j * 2.0 * np.pi * i * spacing_ratio * np.sin(angle))


def ula_response(cos_or_sin: float, length: int, spacing: float, wavelength: float) -> np.ndarray:
    """Row of exp(-j 2 pi d i c / lambda) as used by the array channel models."""
    i = np.arange(length)
    return np.exp(-1j * 2.0 * np.pi * spacing * i * cos_or_sin / wavelength)


def path_gain(distance: float, pl_ref: float, beta: float) -> float:
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return pl_ref * distance ** (-beta)


def rician_fade(los_component, rician_factor: float, rng) -> np.ndarray | complex:
    """Mix a LoS component with unit-power circular Gaussian scattering."""
    if rician_factor < 0:
        raise ValueError("rician factor must be non-negative")
    los = np.asarray(los_component, dtype=complex)
    if np.isinf(rician_factor):
        return los if los.ndim else complex(los)
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2.0)
    out = np.sqrt(rician_factor / (rician_factor + 1.0)) * los + np.sqrt(1.0 / (rician_factor + 1.0)) * nlos
    return out if out.ndim else complex(out)


def _acos(x: float) -> float:
    return float(np.arccos(np.clip(x, -1.0, 1.0)))


def _asin(x: float) -> float:
    return float(np.arcsin(np.clip(x, -1.0, 1.0)))


@dataclass(frozen=True)
class GeometrySnapshot:
    uav_xy: np.ndarray
    d_bs_rhs: float
    d_jam_rhs: float
    d_rhs_user: np.ndarray
    d_bs_user: np.ndarray
    d_jam_user: np.ndarray
    d_jam_target: float
    d_rhs_target: float
    zeta: float  # vertical AoA, BS -> RHS
    xi: float  # horizontal AoA, BS -> RHS
    omega: float  # AoA, jammer -> RHS
    phi: np.ndarray  # AoD, RHS -> user k
    varsigma: float  # AoD, RHS -> target
    psi: np.ndarray  # departure angle at the BS array toward user k


def geometry(cfg: ScenarioConfig, uav_xy, slot: int = 0) -> GeometrySnapshot:
    if not 0 <= slot < cfg.horizon_slots:
        raise ValueError(f"slot {slot} outside 0..{cfg.horizon_slots - 1}")
    q = np.asarray(uav_xy, dtype=float)
    L = cfg.uav_altitude
    bs = np.asarray(cfg.bs_pos, float)
    jam = np.asarray(cfg.jammer_pos, float)
    tgt = np.asarray(cfg.target_pos, float)
    users = cfg.users

    def air(p):
        return float(np.sqrt(np.sum((p - q) ** 2) + L * L))

    d_br, d_jr, d_rt = air(bs), air(jam), air(tgt)
    d_rk = np.array([air(u) for u in users])
    d_bk = np.linalg.norm(users - bs, axis=1)
    d_jk = np.linalg.norm(users - jam, axis=1)
    d_jt = float(np.linalg.norm(tgt - jam))
    if np.any(d_bk <= 0) or np.any(d_jk <= 0) or d_jt <= 0:
        raise DegenerateGeometryError("a ground entity coincides with the BS or the jammer")

    return GeometrySnapshot(
        uav_xy=q,
        d_bs_rhs=d_br,
        d_jam_rhs=d_jr,
        d_rhs_user=d_rk,
        d_bs_user=d_bk,
        d_jam_user=d_jk,
        d_jam_target=d_jt,
        d_rhs_target=d_rt,
        zeta=_acos(abs(bs[0] - q[0]) / d_br),
        xi=_asin(abs(bs[1] - q[1]) / d_br),
        omega=_acos(abs(jam[0] - q[0]) / d_jr),
        phi=np.array([_acos(abs(q[0] - u[0]) / d) for u, d in zip(users, d_rk)]),
        varsigma=_acos(abs(q[0] - tgt[0]) / d_rt),
        psi=np.array([_asin(abs(bs[1] - u[1]) / d) for u, d in zip(users, d_bk)]),
    )


@dataclass(frozen=True)
class ChannelSet:
    """All channels of one slot.  Vectors follow the composite-channel forms

    user k sees ``h_bs_user[k].conj() @ w + h_rhs_user[k].conj() @ diag(theta) @ bs_rhs @ w``.
    """

    bs_rhs: np.ndarray  # (M, N_t)
    jam_rhs: np.ndarray  # (M,)
    rhs_user: np.ndarray  # (K, M)
    bs_user: np.ndarray  # (K, N_t)
    jam_user: np.ndarray  # (K,)
    jam_target: complex
    rhs_target_steer: np.ndarray  # (M,)
    rhs_target: np.ndarray  # (M,)
    slot_index: int
    geom: GeometrySnapshot
    # path-loss-free air-link factors, used by the deployment step
    bs_rhs_unit: np.ndarray
    jam_rhs_unit: np.ndarray
    rhs_user_unit: np.ndarray
    spacing_ratio: float = 0.5

    @property
    def shape(self) -> tuple[int, int, int]:
        """(N_t, K, M)."""
        return self.bs_rhs.shape[1], self.rhs_user.shape[0], self.bs_rhs.shape[0]


@dataclass(frozen=True)
class Fading:
    bs_user: np.ndarray  # (K, N_t) standard circular normal
    jam_user: np.ndarray  # (K,)
    jam_target: complex


def draw_fading(cfg: ScenarioConfig, slot: int, rng=None) -> Fading:
    """Scattering draws of the ground links; fixed per ``(cfg.seed, slot)``."""
    if rng is None:
        rng = np.random.default_rng([cfg.seed, slot, 0xFAD])
    K, Nt = cfg.num_users, cfg.num_antennas

    def cn(shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)

    return Fading(bs_user=cn((K, Nt)), jam_user=cn(K), jam_target=complex(cn(())))


def assemble_channels(cfg: ScenarioConfig, uav_xy, slot: int = 0, rng=None) -> ChannelSet:
    g = geometry(cfg, uav_xy, slot)
    fad = draw_fading(cfg, slot, rng)
    M, Nt, K = cfg.num_elements, cfg.num_antennas, cfg.num_users
    lam, dr, dt = cfg.carrier_wavelength, cfg.rhs_spacing, cfg.bs_spacing
    pl, beta, rho = cfg.path_gain_ref, cfg.path_loss_exp, cfg.rician_factor

    rx = ula_response(np.cos(g.zeta), M, dr, lam).conj()
    tx = ula_response(np.sin(g.xi), Nt, dt, lam)
    H_unit = np.outer(rx, tx)
    hjr_unit = np.exp(-1j * 2 * np.pi * g.d_jam_rhs / lam) * ula_response(np.cos(g.omega), M, dr, lam)
    hrk_unit = np.stack([ula_response(np.cos(p), M, dr, lam) for p in g.phi])
    hrt_unit = ula_response(np.cos(g.varsigma), M, dr, lam)

    a_los = np.sqrt(rho / (rho + 1.0))
    a_nlos = np.sqrt(1.0 / (rho + 1.0))
    bs_user = np.empty((K, Nt), dtype=complex)
    for k in range(K):
        los = ula_response(np.sin(g.psi[k]), Nt, dt, lam)
        bs_user[k] = np.sqrt(path_gain(g.d_bs_user[k], pl, beta)) * (a_los * los + a_nlos * fad.bs_user[k])
    jam_user = np.array([
        np.sqrt(path_gain(g.d_jam_user[k], pl, beta)) * (a_los + a_nlos * fad.jam_user[k])
        for k in range(K)
    ])
    jam_target = complex(np.sqrt(path_gain(g.d_jam_target, pl, beta)) * (a_los + a_nlos * fad.jam_target))

    return ChannelSet(
        bs_rhs=np.sqrt(path_gain(g.d_bs_rhs, pl, beta)) * H_unit,
        jam_rhs=np.sqrt(path_gain(g.d_jam_rhs, pl, beta)) * hjr_unit,
        rhs_user=np.sqrt(pl * g.d_rhs_user[:, None] ** (-beta)) * hrk_unit,
        bs_user=bs_user,
        jam_user=jam_user,
        jam_target=jam_target,
        rhs_target_steer=steering_vector(g.varsigma, M, cfg.element_spacing_ratio),
        rhs_target=np.sqrt(path_gain(g.d_rhs_target, pl, beta)) * hrt_unit,
        slot_index=slot,
        geom=g,
        bs_rhs_unit=H_unit,
        jam_rhs_unit=hjr_unit,
        rhs_user_unit=hrk_unit,
        spacing_ratio=cfg.element_spacing_ratio,
    )
