"""Alternating optimisation of beams, surface phases and the UAV trajectory.

Each outer round runs the three block solvers in turn (beams per slot, phases
per slot, then the whole trajectory jointly).  Every block step either keeps
its incumbent or returns a point that is feasible and no worse, so the
network power never increases from round to round.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .beamform import BeamformingInfeasible, BeamformingOptions, initial_beams, solve_beamforming_sca
from .channel import assemble_channels
from .metrics import FeasibilityReport, Solution, check_feasibility, network_objective
from .phaseshift import PhaseInfeasible, PhaseOptions, matched_phases, solve_phase_penalty
from .scenario import ScenarioConfig
from .trajectory import TrajectoryInfeasible, TrajectoryOptions, solve_trajectory_sca

__all__ = [
    "AoOptions", "AoRecord", "AoTrace", "hover_candidates", "initial_solution", "run_rhosi", "target_phases",
    "verify_monotone",
]

STEPS = ("beams", "phases", "trajectory")


@dataclass
class AoOptions:
    max_outer: int = 20
    tol_outer: float = 1e-4
    order: tuple = STEPS
    feas_tol: float = 1e-6
    beams: BeamformingOptions = field(default_factory=BeamformingOptions)
    phases: PhaseOptions = field(default_factory=PhaseOptions)
    trajectory: TrajectoryOptions = field(default_factory=TrajectoryOptions)
    optimize_phases: bool = True
    optimize_trajectory: bool = True
    log: object = None  # writable text stream for the per-round log


@dataclass
class AoRecord:
    iteration: int
    objective: float
    transmit_w: float
    aero_w: float
    step_objectives: dict
    feasibility: FeasibilityReport
    wall_time: float
    rank_residual: float
    inner_counts: dict
    events: list = field(default_factory=list)

    def log_line(self) -> str:
        inner = ",".join(f"{k}:{v}" for k, v in self.inner_counts.items())
        steps = ",".join(f"{k}:{v:.9g}" for k, v in self.step_objectives.items())
        return (f"iter={self.iteration} objective_w={self.objective:.9g} transmit_w={self.transmit_w:.9g} "
                f"aero_w={self.aero_w:.9g} steps={steps} feasible={int(self.feasibility.feasible)} "
                f"worst={self.feasibility.worst_violation:.3g} rank={self.rank_residual:.3g} "
                f"inner={inner} wall_s={self.wall_time:.3f}")


@dataclass
class AoTrace:
    records: list
    solution: Solution | None
    initial_objective: float
    status: str = "running"
    diagnostic: str = ""
    channels: list | None = field(default=None, repr=False)

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.records]

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else self.initial_objective

    def __len__(self) -> int:
        return len(self.records)

    def log_text(self) -> str:
        head = f"# rhosi trace status={self.status} initial_objective_w={self.initial_objective:.9g}"
        if self.diagnostic:
            head += f" diagnostic={self.diagnostic!r}"
        return "\n".join([head] + [r.log_line() for r in self.records]) + "\n"

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.log_text())


def verify_monotone(trace, tol: float) -> tuple[bool, int | None]:
    """True iff obj[s+1] <= obj[s] + tol everywhere; else (False, s+1) of the first jump."""
    obj = trace.objectives if isinstance(trace, AoTrace) else list(trace)
    if not obj:
        raise ValueError("empty trace")
    for s in range(len(obj) - 1):
        if obj[s + 1] > obj[s] + tol:
            return False, s + 1
    return True, None


def target_phases(chs) -> np.ndarray:
    """Phases co-phasing the BS -> RHS -> target echo path."""
    rx = chs.bs_rhs[:, 0] if chs.bs_rhs.shape[1] else np.ones(chs.bs_rhs.shape[0])
    return np.exp(1j * (np.angle(chs.rhs_target_steer) - np.angle(rx)))


def hover_candidates(cfg: ScenarioConfig, rings: int = 4, per_ring: int = 8) -> np.ndarray:
    """Disk centre first, then rings of growing radius inside the service disk."""
    pts = [np.zeros(2)]
    for i in range(1, rings + 1):
        r = cfg.service_radius * i / rings
        for j in range(per_ring):
            phi = 2.0 * np.pi * (j + 0.5 * (i % 2)) / per_ring
            pts.append(r * np.array([np.cos(phi), np.sin(phi)]))
    return np.array(pts)


def _start_at(cfg, Q, V):
    N = cfg.horizon_slots
    chs = [assemble_channels(cfg, Q[n], n) for n in range(N)]
    last = None
    picks = [lambda c, k=k: matched_phases(c, k) for k in range(cfg.num_users)] + [target_phases]
    for pick in picks:
        thetas = np.stack([pick(c) for c in chs])
        try:
            beams = np.stack([initial_beams(c, thetas[n], cfg) for n, c in enumerate(chs)])
        except BeamformingInfeasible as exc:
            last = exc
            continue
        return Solution(beams, thetas, Q, V), chs
    raise last


def initial_solution(cfg: ScenarioConfig, positions=None, velocities=None, search: bool = True):
    """Hover start with user-matched (else target-matched) phases and SDR beams.

    Phases matched to user 0 are tried first, then to each other user, then
    to the target.

    Without ``positions`` the UAV hovers at the disk centre; when no beams
    meet the floors there and ``search`` is set, the first hover point of
    :func:`hover_candidates` that admits feasible beams in every slot is used.
    """
    N = cfg.horizon_slots
    V = np.zeros((N, 2)) if velocities is None else np.array(velocities, dtype=float).reshape(N, 2)
    if positions is not None:
        return _start_at(cfg, np.array(positions, dtype=float).reshape(N, 2), V)
    cands = hover_candidates(cfg) if search else np.zeros((1, 2))
    last = None
    for q in cands:
        try:
            return _start_at(cfg, np.tile(q, (N, 1)), V)
        except BeamformingInfeasible as exc:
            last = exc
    raise last


def _transmit(sol: Solution, cfg) -> float:
    return cfg.pa_inefficiency * float(np.mean(np.sum(np.abs(sol.beams) ** 2, axis=(1, 2))))


def _aero(sol: Solution, cfg) -> float:
    return network_objective(sol, cfg) - _transmit(sol, cfg) - cfg.constant_power


def run_rhosi(cfg: ScenarioConfig, options: AoOptions | None = None, start=None) -> AoTrace:
    """Run the alternating optimisation; ``start`` is an optional feasible (Solution, channels)."""
    opts = options or AoOptions()
    if sorted(opts.order) != sorted(STEPS):
        raise ValueError(f"order must be a permutation of {STEPS}")
    log = opts.log
    try:
        sol, chs = start if start is not None else initial_solution(cfg)
    except BeamformingInfeasible as exc:
        return AoTrace([], None, float("nan"), "failed", f"no feasible starting beams: {exc}")
    rep = check_feasibility(sol, cfg, opts.feas_tol, channels=chs)
    obj0 = network_objective(sol, cfg)
    trace = AoTrace([], sol, obj0, channels=chs)
    if not rep.feasible:
        trace.status, trace.diagnostic = "failed", f"initial point infeasible: {rep}"
        return trace
    if log is not None:
        log.write(f"# start objective_w={obj0:.9g}\n")
    N = cfg.horizon_slots
    prev = obj0
    for s in range(1, opts.max_outer + 1):
        t0 = time.perf_counter()
        cur = sol.copy()
        steps, inner, events = {}, {}, []
        rank = 0.0
        try:
            for step in opts.order:
                if step == "beams":
                    its = 0
                    for n in range(N):
                        r = solve_beamforming_sca(chs[n], cur.thetas[n], cfg, opts.beams, start=cur.beams[n])
                        cur.beams[n] = r.beams
                        its += r.iterations
                    inner["beams"] = its
                elif step == "phases" and opts.optimize_phases:
                    its, acc = 0, 0
                    for n in range(N):
                        pc = solve_phase_penalty(chs[n], cur.beams[n], cfg, opts.phases, start=cur.thetas[n])
                        its += len(pc.objective_trace)
                        if pc.accepted:
                            cur.thetas[n] = pc.theta
                            rank = max(rank, pc.rank_residual)
                            acc += 1
                    inner["phases"] = its
                    events.append(f"phases accepted in {acc}/{N} slots")
                elif step == "trajectory" and opts.optimize_trajectory:
                    tr = solve_trajectory_sca(chs, cur.thetas, cur.beams, cfg, opts.trajectory,
                                              start=(cur.positions, cur.velocities))
                    cur.positions, cur.velocities = tr.positions, tr.velocities
                    chs = [assemble_channels(cfg, cur.positions[n], n) for n in range(N)]
                    inner["trajectory"] = tr.iterations
                    events.extend(tr.events)
                steps[step] = network_objective(cur, cfg)
        except (BeamformingInfeasible, PhaseInfeasible, TrajectoryInfeasible) as exc:
            trace.status, trace.diagnostic = "failed", f"round {s}: {type(exc).__name__}: {exc}"
            break
        rep = check_feasibility(cur, cfg, opts.feas_tol, channels=chs)
        obj = network_objective(cur, cfg)
        if not rep.feasible or obj > prev:
            # never hand back a worse or infeasible point
            events.append(f"round rejected: {'infeasible' if not rep.feasible else 'objective increased'}")
            chs = [assemble_channels(cfg, sol.positions[n], n) for n in range(N)]
            cur = sol
            rep = check_feasibility(cur, cfg, opts.feas_tol, channels=chs)
            obj = prev
        rec = AoRecord(s, obj, _transmit(cur, cfg), _aero(cur, cfg), steps, rep, time.perf_counter() - t0, rank,
                       inner, events)
        trace.records.append(rec)
        if log is not None:
            log.write(rec.log_line() + "\n")
        sol = cur
        trace.solution, trace.channels = sol, chs
        if abs(prev - obj) <= opts.tol_outer * abs(prev):
            trace.status = "converged"
            break
        prev = obj
    else:
        trace.status = "max_outer"
    return trace

