"""Experiment sweeps, baselines, a brute-force oracle and result files."""
from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ao import AoOptions, AoTrace, initial_solution, run_rhosi
from .beamform import BeamformingInfeasible, initial_beams, solve_beamforming_sca
from .channel import assemble_channels
from .metrics import Solution, check_feasibility, comm_sinrs, composite_channels, echo_sinr, network_objective, sum_rate
from .phaseshift import quantize_phases
from .scenario import ScenarioConfig, default_scenario
from .trajectory import best_cruise_speed

__all__ = [
    "AXES", "CSV_HEADER", "VARIANTS", "OracleResult", "PointRow", "SweepResult", "SweepSpec", "compare_variants",
    "emit_results", "evaluate", "full_power_sum_rate", "oracle_grid_search", "point_config", "random_position", "read_csv",
    "run_baseline", "run_sweep", "run_variant",
]

AXES = {"antennas": "num_antennas", "jam_power": "jam_power"}
VARIANTS = ("rhosi", "discrete_phases", "random_deployment")
CSV_HEADER = ("axis", "variant", "seed", "objective_w", "sum_rate_bpshz", "echo_sinr_db", "runtime_s")
DISCRETE_BITS = 3


@dataclass
class SweepSpec:
    axis: str
    values: list
    seeds: list = field(default_factory=lambda: list(range(10)))
    variant: str = "rhosi"
    overrides: dict = field(default_factory=dict)
    out: str | None = None
    base: ScenarioConfig | None = None  # scenario file contents; default_scenario when None
    options: AoOptions | None = None
    workers: int = 1
    random_phases: bool = False  # random_deployment only: also fix the phases at random

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {sorted(AXES)}, got {self.axis!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not list(self.values):
            raise ValueError("values must be nonempty")
        if isinstance(self.seeds, int):
            self.seeds = list(range(self.seeds))
        if len(self.seeds) < 1:
            raise ValueError("need at least one seed")


@dataclass
class PointRow:
    axis: str
    value: float
    variant: str
    seed: int
    objective_w: float
    sum_rate_bpshz: float
    echo_sinr_db: float
    runtime_s: float
    ok: bool = True
    diagnostic: str = ""

    def csv_fields(self, timings: bool) -> list[str]:
        return [f"{self.axis}={_fmt(self.value)}", self.variant, str(self.seed), _fmt(self.objective_w),
                _fmt(self.sum_rate_bpshz), _fmt(self.echo_sinr_db), _fmt(self.runtime_s) if timings else ""]


@dataclass
class SweepResult:
    spec: SweepSpec | None
    rows: list
    runtime: float = 0.0

    def values(self) -> list:
        return sorted({r.value for r in self.rows})

    def _stat(self, attr: str, fn) -> dict:
        out = {}
        for v in self.values():
            xs = np.array([getattr(r, attr) for r in self.rows if r.value == v and r.ok])
            out[v] = fn(xs) if xs.size else float("nan")
        return out

    def mean(self, attr: str = "objective_w") -> dict:
        return self._stat(attr, lambda x: float(np.mean(x)))

    def std(self, attr: str = "objective_w") -> dict:
        return self._stat(attr, lambda x: float(np.std(x)))

    def failed_points(self) -> list:
        return [v for v in self.values() if not any(r.ok for r in self.rows if r.value == v)]

    @property
    def complete(self) -> bool:
        return bool(self.rows) and not self.failed_points()


def _fmt(x: float) -> str:
    return "nan" if x is None or not math.isfinite(x) else f"{x:.10g}"


# --- evaluation -------------------------------------------------------------

def full_power_sum_rate(sol: Solution, chs, cfg: ScenarioConfig) -> float:
    """Slot-mean sum rate after scaling each slot's beams to the BS power budget."""
    rates = []
    for n in range(sol.num_slots):
        w = sol.beams[n]
        p = float(np.sum(np.abs(w) ** 2))
        scale = math.sqrt(cfg.bs_power_max / p) if p > 0 else 0.0
        rates.append(sum_rate(comm_sinrs(chs[n], sol.thetas[n], scale * w, cfg)))
    return float(np.mean(rates))


def evaluate(sol: Solution, chs, cfg: ScenarioConfig) -> tuple[float, float, float]:
    """(network power W, full-power sum rate bps/Hz, mean echo SINR dB)."""
    echo = [echo_sinr(chs[n], sol.thetas[n], sol.beams[n], cfg) for n in range(sol.num_slots)]
    return network_objective(sol, cfg), full_power_sum_rate(sol, chs, cfg), float(np.mean(10 * np.log10(echo)))


def random_position(cfg: ScenarioConfig, seed: int) -> np.ndarray:
    """Uniform point in the service disk, fixed per seed."""
    rng = np.random.default_rng([seed, 0xD15C])
    r = cfg.service_radius * math.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([r * math.cos(phi), r * math.sin(phi)])


def _resolve_beams(sol: Solution, chs, cfg, options: AoOptions) -> Solution:
    """Fresh beams for fixed phases and trajectory."""
    out = sol.copy()
    for n in range(sol.num_slots):
        w0 = initial_beams(chs[n], out.thetas[n], cfg)
        out.beams[n] = solve_beamforming_sca(chs[n], out.thetas[n], cfg, options.beams, start=w0).beams
    return out


def run_baseline(variant: str, cfg: ScenarioConfig, seed: int | None = None, options: AoOptions | None = None,
                 rhosi: AoTrace | None = None, random_phases: bool = False):
    """Run a comparison scheme; returns (solution, channels, info) with solution None if infeasible.

    ``random_phases`` makes the random-deployment baseline also draw its
    surface phases at random (fixed per seed) instead of optimising them.
    """
    opts = options or AoOptions()
    seed = cfg.seed if seed is None else seed
    if variant == "rhosi":
        tr = rhosi or run_rhosi(cfg, opts)
        if tr.status == "failed":
            return None, None, tr.diagnostic
        return tr.solution, tr.channels, tr.status
    if variant == "discrete_phases":
        tr = rhosi or run_rhosi(cfg, opts)
        if tr.status == "failed":
            return None, None, tr.diagnostic
        sol = tr.solution.copy()
        sol.thetas = np.stack([quantize_phases(t, DISCRETE_BITS).theta for t in sol.thetas])
        try:
            sol = _resolve_beams(sol, tr.channels, cfg, opts)
        except BeamformingInfeasible as exc:
            return None, None, f"quantized phases infeasible: {exc}"
        return sol, tr.channels, f"{DISCRETE_BITS}-bit phases"
    if variant == "random_deployment":
        N = cfg.horizon_slots
        Q = np.tile(random_position(cfg, seed), (N, 1))
        V = np.zeros((N, 2))
        V[:, 0] = best_cruise_speed(cfg.aero, cfg.v_max)
        try:
            if random_phases:
                rng = np.random.default_rng([seed, 0x7E7A])
                chs = [assemble_channels(cfg, Q[n], n) for n in range(N)]
                th = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, (N, cfg.num_elements)))
                beams = np.stack([initial_beams(chs[n], th[n], cfg) for n in range(N)])
                start = Solution(beams, th, Q, V), chs
            else:
                start = initial_solution(cfg, Q, V)
        except BeamformingInfeasible as exc:
            return None, None, f"random position infeasible: {exc}"
        o = AoOptions(**{**opts.__dict__, "optimize_trajectory": False, "optimize_phases": not random_phases})
        tr = run_rhosi(cfg, o, start=start)
        if tr.status == "failed":
            return None, None, tr.diagnostic
        return tr.solution, tr.channels, tr.status
    raise ValueError(f"unknown variant {variant!r}")


# --- sweeps -----------------------------------------------------------------

def point_config(spec: SweepSpec, value, seed: int) -> ScenarioConfig:
    key = AXES[spec.axis]
    val = int(value) if key == "num_antennas" else float(value)
    changes = {**spec.overrides, key: val, "seed": seed}
    if "horizon_slots" in changes and "total_time" not in changes:
        base_dt = (spec.base or ScenarioConfig()).slot_duration
        changes["total_time"] = changes["horizon_slots"] * changes.get("slot_duration", base_dt)
    if spec.base is not None:
        return spec.base.replace(**changes)
    return default_scenario(**changes)


def run_variant(variant: str, cfg: ScenarioConfig, axis: str, value, options: AoOptions | None = None,
                rhosi: AoTrace | None = None, random_phases: bool = False) -> PointRow:
    t0 = time.perf_counter()
    sol, chs, info = run_baseline(variant, cfg, cfg.seed, options, rhosi, random_phases)
    dt = time.perf_counter() - t0
    if sol is None or not check_feasibility(sol, cfg, channels=chs).feasible:
        nan = float("nan")
        return PointRow(axis, float(value), variant, cfg.seed, nan, nan, nan, dt, ok=False, diagnostic=str(info))
    obj, rate, echo = evaluate(sol, chs, cfg)
    return PointRow(axis, float(value), variant, cfg.seed, obj, rate, echo, dt, diagnostic=str(info))


def compare_variants(cfg: ScenarioConfig, axis: str, value, variants=VARIANTS,
                     options: AoOptions | None = None) -> list[PointRow]:
    """Seed-paired rows; the discrete baseline reuses the same RHOSI run."""
    tr = None
    if "rhosi" in variants or "discrete_phases" in variants:
        t0 = time.perf_counter()
        tr = run_rhosi(cfg, options or AoOptions())
        base_time = time.perf_counter() - t0
    rows = []
    for v in variants:
        row = run_variant(v, cfg, axis, value, options, rhosi=tr if v != "random_deployment" else None)
        if v != "random_deployment":
            row.runtime_s += base_time
        rows.append(row)
    return rows


def _job(args) -> PointRow:
    spec, value, seed = args
    return run_variant(spec.variant, point_config(spec, value, seed), spec.axis, value, spec.options,
                       random_phases=spec.random_phases)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Every (value, seed) pair of ``spec``; rows come back in (value, seed) order."""
    t0 = time.perf_counter()
    jobs = [(spec, v, s) for v in spec.values for s in spec.seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    res = SweepResult(spec, rows, time.perf_counter() - t0)
    if spec.out:
        emit_results(res, spec.out, "csv")
    return res


# --- output -----------------------------------------------------------------

def emit_results(result: SweepResult, path, fmt: str = "csv", timings: bool = False) -> list[Path]:
    """Write the CSV (and for ``chart`` also an SVG next to it); returns the written paths.

    Wall times are left blank unless ``timings`` so identical runs give identical bytes.
    """
    path = Path(path)
    if fmt not in ("csv", "chart"):
        raise ValueError(f"format must be csv or chart, got {fmt!r}")
    csv_path = path.with_suffix(".csv") if fmt == "chart" else path
    written = []
    try:
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CSV_HEADER)
            for r in result.rows:
                wr.writerow(r.csv_fields(timings))
        written.append(csv_path)
        if fmt == "chart":
            svg = path.with_suffix(".svg")
            _chart(result, svg)
            written.append(svg)
    except OSError as exc:
        raise OSError(f"cannot write results to {exc.filename or path}: {exc.strerror}") from exc
    return written


def read_csv(path) -> list[PointRow]:
    rows = []
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in rd:
            axis, value = rec[0].split("=")
            num = [float(x) for x in rec[3:6]]
            rt = float(rec[6]) if rec[6] else float("nan")
            rows.append(PointRow(axis, float(value), rec[1], int(rec[2]), *num, rt, ok=math.isfinite(num[0])))
    return rows


def _chart(result: SweepResult, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "rhosi"
    rows = result.rows
    axis = rows[0].axis if rows else (result.spec.axis if result.spec else "antennas")
    attr, label = ("objective_w", "network power [W]") if axis == "antennas" else ("sum_rate_bpshz", "sum rate [bps/Hz]")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for variant in sorted({r.variant for r in rows}):
        sub = SweepResult(None, [r for r in rows if r.variant == variant])
        xs = sub.values()
        mu, sd = sub.mean(attr), sub.std(attr)
        ax.errorbar(xs, [mu[x] for x in xs], yerr=[sd[x] for x in xs], marker="o", capsize=3, label=variant)
    ax.set_xlabel("number of BS antennas" if axis == "antennas" else "jamming power [W]")
    ax.set_ylabel(label)
    ax.grid(alpha=0.3)
    if rows:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- brute-force oracle -----------------------------------------------------

@dataclass
class OracleResult:
    objective: float
    transmit_power: float
    beam: np.ndarray | None
    theta: np.ndarray | None
    position: np.ndarray | None
    speed: float
    evaluated: int

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.objective)


def _unit_directions(nt: int, res: int) -> np.ndarray:
    if nt == 1:
        return np.ones((1, 1), dtype=complex)
    if nt != 2:
        raise ValueError("oracle supports at most 2 antennas")
    alpha = (np.arange(res) + 0.5) * (0.5 * np.pi / res)
    phi = np.arange(2 * res) * (np.pi / res)
    a, p = np.meshgrid(alpha, phi, indexing="ij")
    return np.stack([np.cos(a).ravel(), (np.sin(a) * np.exp(1j * p)).ravel()], axis=1)


def oracle_grid_search(cfg: ScenarioConfig, resolution: int = 8) -> OracleResult:
    """Exhaustive search of a single-user, single-slot instance.

    Grid: beam directions (plus the two matched directions of each channel
    pair), ``resolution`` phase levels per element and a square grid of
    ``resolution``² UAV positions clipped to the disk.  For a fixed direction
    the least feasible power is closed form, so every candidate is rank-one.
    """
    if cfg.num_antennas > 2 or cfg.num_users != 1 or cfg.num_elements > 3 or cfg.horizon_slots != 1:
        raise ValueError("oracle needs N_t <= 2, K = 1, M <= 3, N = 1")
    res = int(resolution)
    if res < 2:
        raise ValueError("resolution must be at least 2")
    speed = best_cruise_speed(cfg.aero, cfg.v_max)
    aero = network_objective(Solution(np.zeros((1, 1, cfg.num_antennas)), np.ones((1, cfg.num_elements)),
                                      np.zeros((1, 2)), np.array([[speed, 0.0]])), cfg)
    levels = np.exp(2j * np.pi * np.arange(res) / res)
    thetas = np.array(list(itertools.product(levels, repeat=cfg.num_elements)))
    dirs = _unit_directions(cfg.num_antennas, res)
    r0 = cfg.service_radius
    grid = np.linspace(-r0, r0, res)
    positions = [np.array([x, y]) for x in grid for y in grid if x * x + y * y <= r0 * r0 * (1 + 1e-12)]
    positions.append(np.zeros(2))
    need_rate = 2.0 ** cfg.rate_min - 1.0
    best = OracleResult(float("inf"), float("inf"), None, None, None, speed, 0)
    count = 0
    for q in positions:
        chs = assemble_channels(cfg, q, 0)
        for th in thetas:
            h, hj = composite_channels(chs, th)
            h, hj = h[0], complex(np.atleast_1d(hj)[0])
            row = (chs.rhs_target_steer.conj() * th) @ chs.bs_rhs
            jam_e = chs.jam_target + (chs.rhs_target_steer.conj() * th) @ chs.jam_rhs
            n_c = cfg.jam_power * abs(hj) ** 2 + cfg.noise_power
            n_e = cfg.jam_power * abs(jam_e) ** 2 + cfg.noise_power
            cand = np.vstack([dirs, _matched(h), _matched(row)])
            gc = np.abs(cand @ h) ** 2
            ge = np.abs(cand @ row) ** 2
            with np.errstate(divide="ignore"):
                p = np.maximum(np.where(gc > 0, need_rate * n_c / gc, np.inf) if need_rate > 0 else 0.0,
                               np.where(ge > 0, cfg.echo_sinr_min * n_e / ge, np.inf) if cfg.echo_sinr_min > 0 else 0.0)
            p = np.where(p <= cfg.bs_power_max, p, np.inf)
            count += len(cand)
            i = int(np.argmin(p))
            if p[i] < best.transmit_power:
                best = OracleResult(0.0, float(p[i]), math.sqrt(p[i]) * cand[i], th.copy(), q.copy(), speed, 0)
    if not math.isfinite(best.transmit_power):
        return OracleResult(float("inf"), float("inf"), None, None, None, speed, count)
    best.objective = aero + cfg.pa_inefficiency * best.transmit_power
    best.evaluated = count
    return best


def _matched(v: np.ndarray) -> np.ndarray:
    # row convention y = w @ v, so the matched unit direction is conj(v)/|v|
    n = np.linalg.norm(v)
    return (v.conj() / n)[None, :] if n > 0 else np.zeros((0, v.size), dtype=complex)
