"""Performance functionals and constraint checks of the network-power problem."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, assemble_channels, steering_vector
from .scenario import AeroParams, ScenarioConfig

__all__ = [
    "CONSTRAINTS",
    "FeasibilityReport",
    "Solution",
    "aero_power",
    "aero_terms",
    "beampattern_gain",
    "check_feasibility",
    "comm_sinr",
    "comm_sinrs",
    "composite_channels",
    "echo_sinr",
    "network_objective",
    "sum_rate",
    "total_power",
]

CONSTRAINTS = ("power", "rate", "echo", "radius", "motion", "accel", "speed", "unit_modulus")


def _theta(phases) -> np.ndarray:
    theta = getattr(phases, "theta", phases)
    return np.asarray(theta, dtype=complex).reshape(-1)


def _beams(beams, chs: ChannelSet) -> np.ndarray:
    w = np.asarray(beams, dtype=complex)
    nt = chs.bs_rhs.shape[1]
    if w.ndim == 1:
        w = w[None, :]
    if w.shape[-1] != nt:
        raise ValueError(f"beams have {w.shape[-1]} entries, BS has {nt} antennas")
    return w


def composite_channels(chs: ChannelSet, phases) -> tuple[np.ndarray, np.ndarray]:
    """Rows h_hat_B,k (K, N_t) and scalars h_hat_J,k (K,) for a phase vector."""
    theta = _theta(phases)
    if theta.shape[0] != chs.bs_rhs.shape[0]:
        raise ValueError("phase vector length does not match the RHS size")
    cascade = (chs.rhs_user.conj() * theta) @ chs.bs_rhs
    hb = chs.bs_user.conj() + cascade
    hj = chs.jam_user + (chs.rhs_user.conj() * theta) @ chs.jam_rhs
    return hb, hj


def comm_sinrs(chs: ChannelSet, phases, beams, cfg: ScenarioConfig) -> np.ndarray:
    w = _beams(beams, chs)
    hb, hj = composite_channels(chs, phases)
    if w.shape[0] != hb.shape[0]:
        raise ValueError("need one beam per user")
    gains = np.abs(hb @ w.T) ** 2  # [k, i] = |h_hat_k w_i|^2
    sig = np.diag(gains).copy()
    interf = gains.sum(axis=1) - sig
    return sig / (interf + cfg.jam_power * np.abs(hj) ** 2 + cfg.noise_power)


def comm_sinr(chs: ChannelSet, phases, beams, user: int, cfg: ScenarioConfig) -> float:
    return float(comm_sinrs(chs, phases, beams, cfg)[user])


def sum_rate(sinrs) -> float:
    s = np.asarray(sinrs, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR values must be non-negative")
    return float(np.sum(np.log2(1.0 + s)))


def beampattern_gain(chs: ChannelSet, phases, beams, angle: float | None = None) -> float:
    w = _beams(beams, chs)
    theta = _theta(phases)
    M = chs.bs_rhs.shape[0]
    a = chs.rhs_target_steer if angle is None else steering_vector(angle, M, chs.spacing_ratio)
    row = (a.conj() * theta) @ chs.bs_rhs
    return float(np.sum(np.abs(w @ row) ** 2))


def echo_jamming(chs: ChannelSet, phases) -> complex:
    theta = _theta(phases)
    return chs.jam_target + (chs.rhs_target_steer.conj() * theta) @ chs.jam_rhs


def echo_sinr(chs: ChannelSet, phases, beams, cfg: ScenarioConfig) -> float:
    g = beampattern_gain(chs, phases, beams)
    return g / (cfg.jam_power * abs(echo_jamming(chs, phases)) ** 2 + cfg.noise_power)


def aero_terms(v, aero: AeroParams) -> tuple[float, float, float]:
    """(profile, parasite, induced) power at horizontal velocity ``v``."""
    speed2 = float(np.sum(np.asarray(v, dtype=float) ** 2))
    profile = aero.blade_power * (1.0 + 3.0 * speed2 / aero.tip_speed**2)
    parasite = aero.parasite_coeff * speed2**1.5
    x = speed2 / (2.0 * aero.mean_induced_velocity**2)
    # sqrt(1 + x^2) - x written without cancellation
    induced = aero.induced_power * np.sqrt(1.0 / (np.sqrt(1.0 + x * x) + x))
    return profile, parasite, float(induced)


def aero_power(v, aero: AeroParams) -> float:
    return float(sum(aero_terms(v, aero)))


def total_power(beams, v, cfg: ScenarioConfig) -> float:
    w = np.asarray(beams, dtype=complex)
    transmit = float(np.sum(np.abs(w) ** 2))
    return cfg.pa_inefficiency * transmit + aero_power(v, cfg.aero) + cfg.constant_power


@dataclass
class Solution:
    """Beams (N, K, N_t), phases (N, M), positions (N, 2) and velocities (N, 2)."""

    beams: np.ndarray
    thetas: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def copy(self) -> "Solution":
        return Solution(self.beams.copy(), self.thetas.copy(), self.positions.copy(), self.velocities.copy())

    @property
    def num_slots(self) -> int:
        return self.beams.shape[0]


def network_objective(sol: Solution, cfg: ScenarioConfig, include_constants: bool = True) -> float:
    """Slot-averaged network power [W]."""
    per_slot = [
        total_power(sol.beams[n], sol.velocities[n], cfg) for n in range(sol.num_slots)
    ]
    value = float(np.mean(per_slot))
    return value if include_constants else value - cfg.constant_power


@dataclass
class FeasibilityReport:
    slacks: dict[str, np.ndarray] = field(default_factory=dict)
    worst_violation: float = 0.0
    tolerance: float = 1e-6

    @property
    def feasible(self) -> bool:
        return self.worst_violation <= self.tolerance

    def binding(self) -> list[tuple[str, int]]:
        """(constraint, slot) pairs whose normalised slack is violated."""
        out = []
        for name, s in self.slacks.items():
            for n in np.flatnonzero(s < -self.tolerance):
                out.append((name, int(n)))
        return out

    def __str__(self) -> str:
        state = "feasible" if self.feasible else f"infeasible at {self.binding()[:6]}"
        return f"FeasibilityReport({state}, worst={self.worst_violation:.3g})"


def check_feasibility(sol: Solution, cfg: ScenarioConfig, tol: float = 1e-6, channels=None) -> FeasibilityReport:
    """Signed slacks of every constraint, each divided by its right-hand scale."""
    N = sol.num_slots
    if channels is None:
        channels = [assemble_channels(cfg, sol.positions[n], n) for n in range(N)]
    power = np.empty(N)
    rate = np.empty(N)
    echo = np.empty(N)
    unit = np.empty(N)
    r_scale = cfg.rate_min if cfg.rate_min > 0 else 1.0
    g_scale = cfg.echo_sinr_min if cfg.echo_sinr_min > 0 else 1.0
    for n in range(N):
        chs, w, th = channels[n], sol.beams[n], sol.thetas[n]
        power[n] = (cfg.bs_power_max - np.sum(np.abs(w) ** 2)) / cfg.bs_power_max
        rate[n] = (sum_rate(comm_sinrs(chs, th, w, cfg)) - cfg.rate_min) / r_scale
        echo[n] = (echo_sinr(chs, th, w, cfg) - cfg.echo_sinr_min) / g_scale
        unit[n] = -np.max(np.abs(np.abs(th) - 1.0))
    speed = np.linalg.norm(sol.velocities, axis=1)
    radius = (cfg.service_radius - np.linalg.norm(sol.positions, axis=1)) / cfg.service_radius
    vdt = cfg.v_max * cfg.slot_duration
    adt = cfg.a_max * cfg.slot_duration
    motion = np.zeros(N)
    accel = np.zeros(N)
    if N > 1:
        step = np.linalg.norm(np.diff(sol.positions, axis=0), axis=1)
        motion[:-1] = (speed[:-1] * cfg.slot_duration - step) / vdt
        accel[:-1] = (adt - np.linalg.norm(np.diff(sol.velocities, axis=0), axis=1)) / adt
    speed_slack = (cfg.v_max - speed) / cfg.v_max
    slacks = {
        "power": power, "rate": rate, "echo": echo, "radius": radius,
        "motion": motion, "accel": accel, "speed": speed_slack, "unit_modulus": unit,
    }
    worst = max(0.0, -min(float(np.min(s)) for s in slacks.values()))
    return FeasibilityReport(slacks=slacks, worst_violation=worst, tolerance=tol)
