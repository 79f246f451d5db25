"""Declarative run configuration (TOML) for the command-line front end.

Sections mirror the parameter records one-to-one (``[source]``,
``[ensemble]``, ``[control]``, ``[solver]``, ``[decay]``, ``[stats]``,
``[grid]``, ``[scan]``); keys carry the same names and units as the record
fields (rates in gamma13 units, times in internal 1/gamma13 units, lengths
in meters) except where a key is suffixed otherwise.  Unknown keys are
rejected, and every record re-validates its invariants on construction.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import DEFAULT_EDGE_1090, ControlProfile, EnsembleParams, TimeGrid, UNITS
from .errors import ConfigError
from .solver import SolverConfig
from .source import SourceParams, default_grid, generate_heralded_waveform
from .storage import DecayModel, heuristic_off_time

_US = UNITS.time_from_ns(1000.0)  # one microsecond, internal units


@dataclass(frozen=True)
class GridConfig:
    """Waveform sampling grid; ``None`` fields fall back to source defaults."""

    t_start: float | None = None
    t_end: float | None = None
    dt: float | None = None


@dataclass(frozen=True)
class ControlConfig:
    """Control timing: either off_time/on_time or storage_time (+ optional t_off)."""

    omega_peak: float = 4.6
    off_time: float | None = None
    on_time: float | None = None
    storage_time: float | None = UNITS.time_from_ns(900.0)
    t_off: float | None = None
    edge_10_90: float = DEFAULT_EDGE_1090

    def __post_init__(self):
        explicit = self.off_time is not None or self.on_time is not None
        if explicit and (self.storage_time is not None or self.t_off is not None):
            raise ConfigError(
                "[control] use either off_time/on_time or storage_time/t_off, not both"
            )
        if explicit and (self.off_time is None or self.on_time is None):
            raise ConfigError("[control] off_time and on_time must be given together")

    def profile(self, packet, ens) -> ControlProfile:
        """Resolve into a ControlProfile (heuristic t_off when unspecified)."""
        if self.off_time is not None:
            return ControlProfile(self.omega_peak, self.off_time, self.on_time, self.edge_10_90)
        hold = self.storage_time if self.storage_time is not None else 0.0
        t_off = self.t_off
        if t_off is None:
            t_off = heuristic_off_time(packet, ens, self.omega_peak)
        return ControlProfile(self.omega_peak, t_off, t_off + hold, self.edge_10_90)


@dataclass(frozen=True)
class ScanConfig:
    od_values: tuple = (30.0, 60.0, 90.0, 126.0, 168.0)
    omega_values: tuple = tuple(2.5 + 0.5 * i for i in range(14))
    storage_times: tuple = tuple(0.5 * _US * (i + 1) for i in range(10))
    omega_min: float = 2.5
    omega_max: float = 11.0
    n_coarse: int = 15
    storage_time: float = UNITS.time_from_ns(900.0)


@dataclass(frozen=True)
class StatsConfig:
    trial_rate: float = 2.8e5
    pair_probability: float = 0.42
    two_pair_probability: float = 0.0462
    noise_rate_as: float = 90.0
    dark_rate_g: float = 500.0
    dark_rate_as: float = 25.0
    channel_efficiency: float = 0.027
    duration: float = 20.0
    t_w: float = 800.0  # ns
    g2_windows: tuple = (200.0, 400.0, 600.0, 800.0, 1000.0, 1200.0)
    bin_ns: float = 50.0
    span_ns: float = 2500.0
    split_as: bool = True
    thermal_autocorrelation: bool = True


@dataclass(frozen=True)
class RunConfig:
    seed: int = 20260810
    source: SourceParams = field(default_factory=SourceParams)
    grid: GridConfig = field(default_factory=GridConfig)
    ensemble: EnsembleParams = field(default_factory=lambda: EnsembleParams(od=126.0, length=0.028, gamma12=0.004))
    control: ControlConfig = field(default_factory=ControlConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    decay: DecayModel | None = field(
        default_factory=lambda: DecayModel("gaussian", tau0=UNITS.time_from_ns(4000.0))
    )
    scan: ScanConfig = field(default_factory=ScanConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)

    def waveform_grid(self) -> TimeGrid:
        base = default_grid(self.source)
        g = self.grid
        t_start = g.t_start if g.t_start is not None else base.t_start
        t_end = g.t_end if g.t_end is not None else base.t_end
        dt = g.dt if g.dt is not None else base.dt
        return TimeGrid.spanning(t_start, t_end, dt)

    def waveform(self):
        return generate_heralded_waveform(self.source, self.waveform_grid())


_SECTIONS = {
    "source": SourceParams,
    "grid": GridConfig,
    "ensemble": EnsembleParams,
    "control": ControlConfig,
    "solver": SolverConfig,
    "decay": DecayModel,
    "scan": ScanConfig,
    "stats": StatsConfig,
}

_LIST_FIELDS = {"od_values", "omega_values", "storage_times", "g2_windows"}


def _build_section(name: str, cls, data: dict):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key [{name}].{key}")
        if key in _LIST_FIELDS:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"[{name}].{key} must be a list")
            value = tuple(float(v) for v in value)
        elif isinstance(value, bool):
            pass
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            ann = known[key].type
            if "int" in str(ann) and "float" not in str(ann):
                value = int(value)
            else:
                value = float(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def parse_config(data: dict) -> RunConfig:
    kwargs = {}
    for key, value in data.items():
        if key == "seed":
            if not isinstance(value, int):
                raise ConfigError("seed must be an integer")
            kwargs["seed"] = value
            continue
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section [{key}]")
        if not isinstance(value, dict):
            raise ConfigError(f"[{key}] must be a table")
        if key == "decay" and not value:
            kwargs["decay"] = None  # an empty [decay] table disables hold decay
            continue
        kwargs[key] = _build_section(key, _SECTIONS[key], value)
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    """Read a TOML run configuration; ``None`` yields package defaults."""
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {p}: {exc}") from exc
    cfg = parse_config(data)
    _check_finite(cfg)
    return cfg


def _check_finite(cfg: RunConfig) -> None:
    for section in ("source", "ensemble"):
        record = getattr(cfg, section)
        for f in fields(record):
            value = getattr(record, f.name)
            if isinstance(value, float) and not math.isfinite(value):
                raise ConfigError(f"[{section}].{f.name} must be finite")
