"""Physical scenario: constants, geometry, thresholds and the time grid.

Scenario files are flat YAML mappings in SI units.  Keys ending in ``_db`` or
``_dbm`` carry logarithmic values and are converted to linear watts / ratios on
load; the plain key of the same quantity is always linear.  Example::

    num_antennas: 8
    jam_power_dbm: 30
    user_pos: [[120, 40], [300, 210], [80, 330]]
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

__all__ = [
    "AeroParams",
    "ScenarioConfig",
    "ScenarioError",
    "SchemaError",
    "ValidationError",
    "db_to_linear",
    "dbm_to_watts",
    "default_scenario",
    "dump_scenario",
    "load_scenario",
    "load_scenario_file",
    "validate_scenario",
]


class ScenarioError(ValueError):
    pass


class SchemaError(ScenarioError):
    """The document does not follow the key/value schema."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


class ValidationError(ScenarioError):
    """A parsed scenario violates a physical invariant."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class AeroParams:
    """Rotary-wing propulsion constants (level flight)."""

    blade_power: float = 79.86  # P_0 [W]
    induced_power: float = 88.63  # P_I [W]
    blade_angular_speed: float = 300.0  # [rad/s]
    rotor_radius: float = 0.4  # [m]
    fuselage_drag_ratio: float = 0.6
    air_density: float = 1.225  # [kg/m^3]
    rotor_solidity: float = 0.05
    disc_area: float = 0.503  # [m^2]
    mean_induced_velocity: float = 4.03  # v_0 [m/s]

    @property
    def tip_speed(self) -> float:
        return self.blade_angular_speed * self.rotor_radius

    @property
    def parasite_coeff(self) -> float:
        """Coefficient c of the parasite term c * |v|^3."""
        return (
            0.5
            * self.fuselage_drag_ratio
            * self.air_density
            * self.rotor_solidity
            * self.disc_area
        )


@dataclass(frozen=True)
class ScenarioConfig:
    num_antennas: int = 6
    num_users: int = 3
    num_elements: int = 20
    horizon_slots: int = 60
    slot_duration: float = 1.0
    total_time: float = 60.0
    area_size: float = 400.0
    bs_pos: tuple[float, float] = (0.0, 0.0)
    jammer_pos: tuple[float, float] = (300.0, 300.0)
    target_pos: tuple[float, float] = (200.0, 100.0)
    user_pos: tuple[tuple[float, float], ...] = ()
    uav_altitude: float = 40.0
    service_radius: float = 200.0
    carrier_wavelength: float = 0.1
    rhs_spacing: float = 0.05
    bs_spacing: float = 0.05
    element_spacing_ratio: float = 0.5
    path_gain_ref: float = 0.01
    path_loss_exp: float = 2.2
    rician_factor: float = 2.0
    noise_power: float = 1e-12
    jam_power: float = 1.0
    bs_power_max: float = 10.0
    rate_min: float = 1.0
    echo_sinr_min: float = field(default_factory=lambda: db_to_linear(3.0))
    v_max: float = 15.0
    a_max: float = 5.0
    pa_inefficiency: float = 1.25
    circuit_power: float = 0.1
    aero: AeroParams = field(default_factory=AeroParams)
    seed: int = 0

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def users(self) -> np.ndarray:
        return np.asarray(self.user_pos, dtype=float).reshape(-1, 2)

    @property
    def constant_power(self) -> float:
        """Terms of the network power that no optimisation step can change."""
        return (self.num_antennas + 1) * self.circuit_power + self.jam_power


def _draw_users(num_users: int, area: float, seed: int) -> tuple[tuple[float, float], ...]:
    rng = np.random.default_rng([seed, 0x05E5])
    pts = rng.uniform(0.0, area, size=(num_users, 2))
    return tuple((float(x), float(y)) for x, y in pts)


def default_scenario(seed: int = 0, **overrides: Any) -> ScenarioConfig:
    """Reference setup: 0.4 km square, N_t=6, K=3, M=20, T=60 s in 1 s slots.

    Users are drawn uniformly in the square from ``seed`` unless ``user_pos`` is
    given; ``num_users`` overrides redraw them.
    """
    cfg = ScenarioConfig(seed=seed)
    cfg = dataclasses.replace(cfg, **overrides) if overrides else cfg
    if not cfg.user_pos:
        cfg = dataclasses.replace(
            cfg, user_pos=_draw_users(cfg.num_users, cfg.area_size, cfg.seed)
        )
    return cfg


_SCENARIO_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_AERO_FIELDS = {f.name for f in dataclasses.fields(AeroParams)}
_INT_FIELDS = {"num_antennas", "num_users", "num_elements", "horizon_slots", "seed"}
_POINT_FIELDS = {"bs_pos", "jammer_pos", "target_pos"}

# log-scale aliases: key -> (linear field, converter)
_LOG_KEYS = {
    "path_gain_ref_db": ("path_gain_ref", db_to_linear),
    "rician_factor_db": ("rician_factor", db_to_linear),
    "echo_sinr_min_db": ("echo_sinr_min", db_to_linear),
    "noise_power_dbm": ("noise_power", dbm_to_watts),
    "jam_power_dbm": ("jam_power", dbm_to_watts),
    "bs_power_max_dbm": ("bs_power_max", dbm_to_watts),
}
_ALIASES = {"eta": "pa_inefficiency"}


def _key_lines(text: str) -> dict[str, int]:
    lines = {}
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines
    if isinstance(node, yaml.MappingNode):
        for k, _ in node.value:
            lines[str(k.value)] = k.start_mark.line + 1
    return lines


def _as_point(key: str, value: Any, line: int | None) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError):
        raise SchemaError("expected a 2-D point [x, y]", key, line) from None
    return (x, y)


def load_scenario(config_text: str) -> ScenarioConfig:
    """Parse a scenario document; missing keys take their default values.

    Raises :class:`SchemaError` for malformed documents and
    :class:`ValidationError` when the result violates an invariant.  The
    ``RHOSI_SEED`` environment variable, when set, overrides ``seed``.
    """
    try:
        raw = yaml.safe_load(config_text) if config_text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError(f"unparseable document: {exc}", line=mark.line + 1 if mark else None) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise SchemaError("document must be a flat key/value mapping", line=1)
    lines = _key_lines(config_text)

    values: dict[str, Any] = {}
    aero: dict[str, float] = {}
    for key, value in raw.items():
        key = str(key)
        line = lines.get(key)
        name = _ALIASES.get(key, key)
        if name in _LOG_KEYS:
            target, conv = _LOG_KEYS[name]
            try:
                values[target] = conv(float(value))
            except (TypeError, ValueError):
                raise SchemaError("expected a number", key, line) from None
        elif name == "aero":
            if not isinstance(value, dict):
                raise SchemaError("expected a mapping of aero parameters", key, line)
            for ak, av in value.items():
                if ak not in _AERO_FIELDS:
                    raise SchemaError("unknown aero parameter", f"aero.{ak}", line)
                try:
                    aero[ak] = float(av)
                except (TypeError, ValueError):
                    raise SchemaError("expected a number", f"aero.{ak}", line) from None
        elif name.startswith("aero.") and name[5:] in _AERO_FIELDS:
            try:
                aero[name[5:]] = float(value)
            except (TypeError, ValueError):
                raise SchemaError("expected a number", key, line) from None
        elif name in _POINT_FIELDS:
            values[name] = _as_point(key, value, line)
        elif name == "user_pos":
            if not isinstance(value, (list, tuple)):
                raise SchemaError("expected a list of 2-D points", key, line)
            values[name] = tuple(_as_point(key, p, line) for p in value)
        elif name in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise SchemaError("expected an integer", key, line)
            values[name] = int(value)
        elif name in _SCENARIO_FIELDS:
            if isinstance(value, bool):
                raise SchemaError("expected a number", key, line)
            try:
                values[name] = float(value)
            except (TypeError, ValueError):
                raise SchemaError("expected a number", key, line) from None
        else:
            raise SchemaError("unknown key", key, line)

    env_seed = os.environ.get("RHOSI_SEED")
    if env_seed is not None and env_seed.strip():
        values["seed"] = int(env_seed)
    if aero:
        values["aero"] = AeroParams(**aero)
    # keep T = N * dt consistent when only one side of the grid is given
    if "horizon_slots" in values and "total_time" not in values:
        values["total_time"] = values["horizon_slots"] * values.get("slot_duration", 1.0)

    cfg = default_scenario(**values)
    report = validate_scenario(cfg)
    if report:
        raise ValidationError(report)
    return cfg


def load_scenario_file(path: str | os.PathLike) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialise with linear SI keys; ``load_scenario`` inverts this exactly."""
    out: dict[str, Any] = {}
    for name in _SCENARIO_FIELDS:
        value = getattr(cfg, name)
        if name == "aero":
            out[name] = {k: float(getattr(value, k)) for k in sorted(_AERO_FIELDS)}
        elif name in _POINT_FIELDS:
            out[name] = [float(value[0]), float(value[1])]
        elif name == "user_pos":
            out[name] = [[float(x), float(y)] for x, y in value]
        elif name in _INT_FIELDS:
            out[name] = int(value)
        else:
            out[name] = float(value)
    return yaml.safe_dump(out, sort_keys=False)


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    """Return one message per violated invariant (empty when valid)."""
    bad: list[str] = []
    for name in ("num_antennas", "num_users", "num_elements", "horizon_slots"):
        if getattr(cfg, name) < 1:
            bad.append(f"{name} must be at least 1")
    if not math.isclose(cfg.total_time, cfg.horizon_slots * cfg.slot_duration, rel_tol=1e-9):
        bad.append("time grid: total_time must equal horizon_slots * slot_duration")
    if not cfg.pa_inefficiency > 1.0:
        bad.append("pa_inefficiency must exceed 1")
    positive = (
        "slot_duration", "total_time", "area_size", "uav_altitude", "service_radius",
        "carrier_wavelength", "rhs_spacing", "bs_spacing", "element_spacing_ratio",
        "path_gain_ref", "path_loss_exp", "rician_factor", "noise_power", "jam_power",
        "bs_power_max", "v_max", "a_max", "circuit_power", "echo_sinr_min",
    )
    for name in positive:
        value = getattr(cfg, name)
        if not (value > 0 and math.isfinite(value)):
            bad.append(f"{name} must be strictly positive")
    if cfg.rate_min < 0:
        bad.append("rate_min must be non-negative")
    if len(cfg.user_pos) != cfg.num_users:
        bad.append(f"user_pos must list num_users={cfg.num_users} points")
    for f in dataclasses.fields(AeroParams):
        value = getattr(cfg.aero, f.name)
        if not (value > 0 and math.isfinite(value)):
            bad.append(f"aero.{f.name} must be strictly positive")

    def inside(p) -> bool:
        return 0.0 <= p[0] <= cfg.area_size and 0.0 <= p[1] <= cfg.area_size

    for name in ("bs_pos", "jammer_pos", "target_pos"):
        if not inside(getattr(cfg, name)):
            bad.append(f"{name} lies outside the deployment square")
    for i, p in enumerate(cfg.user_pos):
        if not inside(p):
            bad.append(f"user_pos[{i}] lies outside the deployment square")
    return bad
