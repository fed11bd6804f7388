"""Experiment configuration: a sectioned INI file with units in the key names.

``load_config("default")`` (or no path with ``SKINSTRETCH_CONFIG`` unset)
returns the built-in defaults. Every key is optional; unknown sections or
keys are rejected so typos cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
import hashlib
import os
import re
from dataclasses import dataclass, field, fields, replace

from .actuation import AxisDriveSpec
from .calibration import FitHyper, TrajectorySpec
from .controller import ControllerConfig, PidGains
from .elastomer import ElastomerParams
from .magnetics import MagnetometerSpec, MagnetSpec
from .plant import SensorModel

ENV_VAR = "SKINSTRETCH_CONFIG"
AXES = "xyz"


class ConfigError(ValueError):
    """Malformed configuration; the message names the file line and field."""


@dataclass(frozen=True)
class CalibrationRun:
    test_poses: int = 45
    dynamic_duration_s: float = 30.0
    collect_rate_hz: float = 100.0
    move_s: float = 0.5
    via_rest: bool = True


@dataclass(frozen=True)
class CharacterizationRun:
    ramp_rate_m_per_s: float = 0.25e-3
    torsion_angle_deg: float = 15.0


@dataclass(frozen=True)
class StepRun:
    amplitudes_n: tuple = (1.0, 2.0, 3.0)
    repeats: int = 10
    directions: tuple = ("x", "y", "xy")
    # XY steps command the full amplitude on each axis (else amplitude/sqrt 2)
    xy_full_amplitude: bool = True
    pre_s: float = 1.0
    hold_s: float = 2.0
    post_s: float = 1.0
    normal_preload_n: float = 2.0


@dataclass(frozen=True)
class ChirpRun:
    f0_hz: float = 1.0
    f1_hz: float = 100.0
    duration_s: float = 10.0
    amplitude_n: float = 1.0
    normal_preload_n: float = 2.0
    excitation_floor_rel: float = 1e-9
    crossover_smoothing_octaves: float = 1.0 / 3.0
    crossover_rule: str = "last"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "runs"
    model_path: str = ""
    sensor: SensorModel = field(default_factory=SensorModel)
    drive: AxisDriveSpec = field(default_factory=AxisDriveSpec)
    gains: PidGains = field(default_factory=PidGains)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    fit: FitHyper = field(default_factory=FitHyper)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    calibration: CalibrationRun = field(default_factory=CalibrationRun)
    characterization: CharacterizationRun = field(default_factory=CharacterizationRun)
    step: StepRun = field(default_factory=StepRun)
    chirp: ChirpRun = field(default_factory=ChirpRun)


# --- value codecs ------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_optional_float(text: str):
    return None if text.strip().lower() == "none" else float(text)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split())


def _pairs(text: str) -> tuple:
    """'k:tau k:tau' -> ((k, tau), ...); empty text gives ()."""
    out = []
    for item in text.split():
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError(f"expected value:value, got {item!r}")
        out.append((float(a), float(b)))
    return tuple(out)


def _fmt_pairs(pairs) -> str:
    return " ".join(f"{a!r}:{b!r}" for a, b in pairs)


def _int_pair(text: str) -> tuple:
    parts = text.split()
    if len(parts) != 2:
        raise ValueError(f"expected two integers, got {text!r}")
    return (int(parts[0]), int(parts[1]))


def _words(text: str) -> tuple:
    return tuple(text.split())


def _scalar_codec(kind):
    if kind is bool:
        return _parse_bool
    if kind is int:
        return int
    if kind is float:
        return float
    return str


def _flat_keys(obj, skip=()) -> dict:
    """key -> (value, parser) for the scalar fields of a frozen dataclass."""
    out = {}
    for f in fields(obj):
        if f.name.startswith("_") or f.name in skip:
            continue
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            if v and all(isinstance(x, str) for x in v):
                out[f.name] = (v, _words)
            else:
                out[f.name] = (v, _floats)
        elif isinstance(v, bool):
            out[f.name] = (v, _parse_bool)
        elif v is None or "None" in str(f.type):
            out[f.name] = (v, _parse_optional_float)
        else:
            out[f.name] = (v, _scalar_codec(type(v)))
    return out


def _sections(cfg: ExperimentConfig) -> dict:
    """section -> {key: (value, parser)} describing the whole config."""
    s = cfg.sensor
    mm = s.magnetometer
    e = s.elastomer
    c = cfg.controller
    g = cfg.gains
    magnetometer = _flat_keys(mm, skip=("bit_windows",))
    for axis, window in zip(AXES, mm.bit_windows):
        magnetometer[f"bit_window_{axis}"] = (window, _int_pair)
    elastomer = {
        "shear_stiffness_n_per_m": (e.shear_stiffness_n_per_m, float),
        "normal_stiffness_n_per_m": (e.normal_stiffness_n_per_m, float),
        "magnet_coupling_ratio": (e.magnet_coupling_ratio, float),
    }
    for axis, branches in zip(AXES, e.creep_branches):
        elastomer[f"creep_branches_{axis}_n_per_m_s"] = (tuple(tuple(b) for b in branches), _pairs)
    for axis, ops in zip(AXES, e.hysteresis_operators):
        elastomer[f"hysteresis_operators_{axis}_m_n_per_m"] = (tuple(tuple(o) for o in ops), _pairs)
    controller = {
        "kp_v_per_n": (g.kp, _floats),
        "ki_v_per_n_s": (g.ki, _floats),
        "kd_v_s_per_n": (g.kd, _floats),
        **_flat_keys(c),
    }
    trajectory = _flat_keys(cfg.trajectory, skip=("force_bounds_n",))
    for axis, bounds in zip(AXES, cfg.trajectory.force_bounds_n):
        trajectory[f"force_bounds_{axis}_n"] = (tuple(bounds), _floats)
    return {
        "run": {
            "seed": (cfg.seed, int),
            "out_dir": (cfg.out_dir, str),
            "model_path": (cfg.model_path, str),
        },
        "magnet": _flat_keys(s.magnet),
        "magnetometer": magnetometer,
        "elastomer": elastomer,
        "sensor": {
            "reference_noise_sd_n": (s.reference_noise_sd_n, float),
            "tilt_pivot_above_magnet_m": (s.tilt_pivot_above_magnet_m, float),
        },
        "drive": _flat_keys(cfg.drive),
        "controller": controller,
        "fit": _flat_keys(cfg.fit),
        "trajectory": trajectory,
        "calibration": _flat_keys(cfg.calibration),
        "characterization": _flat_keys(cfg.characterization),
        "step": _flat_keys(cfg.step),
        "chirp": _flat_keys(cfg.chirp),
    }


def _build(values: dict) -> ExperimentConfig:
    """Assemble an ExperimentConfig from section -> {key: parsed value}."""
    v = values
    mm = dict(v["magnetometer"])
    mm["bit_windows"] = tuple(mm.pop(f"bit_window_{a}") for a in AXES)
    el = v["elastomer"]
    elastomer = ElastomerParams(
        shear_stiffness_n_per_m=el["shear_stiffness_n_per_m"],
        normal_stiffness_n_per_m=el["normal_stiffness_n_per_m"],
        magnet_coupling_ratio=el["magnet_coupling_ratio"],
        creep_branches=tuple(el[f"creep_branches_{a}_n_per_m_s"] for a in AXES),
        hysteresis_operators=tuple(el[f"hysteresis_operators_{a}_m_n_per_m"] for a in AXES),
    )
    sensor = SensorModel(
        magnet=MagnetSpec(**v["magnet"]),
        magnetometer=MagnetometerSpec(**mm),
        elastomer=elastomer,
        **v["sensor"],
    )
    ctl = dict(v["controller"])
    gains = PidGains(kp=ctl.pop("kp_v_per_n"), ki=ctl.pop("ki_v_per_n_s"), kd=ctl.pop("kd_v_s_per_n"))
    traj = dict(v["trajectory"])
    traj["force_bounds_n"] = tuple(traj.pop(f"force_bounds_{a}_n") for a in AXES)
    return ExperimentConfig(
        seed=v["run"]["seed"],
        out_dir=v["run"]["out_dir"],
        model_path=v["run"]["model_path"],
        sensor=sensor,
        drive=AxisDriveSpec(**v["drive"]),
        gains=gains,
        controller=ControllerConfig(**ctl),
        fit=FitHyper(**v["fit"]),
        trajectory=TrajectorySpec(**traj),
        calibration=CalibrationRun(**v["calibration"]),
        characterization=CharacterizationRun(**v["characterization"]),
        step=StepRun(**v["step"]),
        chirp=ChirpRun(**v["chirp"]),
    )


# --- public API --------------------------------------------------------------


def to_ini(cfg: ExperimentConfig) -> str:
    """Canonical text form; parsing it back yields an equal config."""
    lines = []
    for section, keys in _sections(cfg).items():
        lines.append(f"[{section}]")
        for key, (value, parser) in keys.items():
            text = _fmt_pairs(value) if parser is _pairs else _fmt(value)
            lines.append(f"{key} = {text}".rstrip())
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical text; the output directory does not count."""
    return hashlib.sha256(to_ini(replace(cfg, out_dir="")).encode()).hexdigest()


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return n
    return None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    schema = _sections(ExperimentConfig())
    values = {sec: {k: val for k, (val, _) in keys.items()} for sec, keys in schema.items()}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError(f"{source}:{_line_of(text, section, '') or '?'}: unknown section [{section}]")
        for key, raw in parser.items(section):
            where = f"{source}:{_line_of(text, section, key) or '?'}: [{section}] {key}"
            if key not in schema[section]:
                raise ConfigError(f"{where}: unknown key")
            try:
                values[section][key] = schema[section][key][1](raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None
    try:
        return _build(values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: invalid configuration: {exc}") from None


def load_config(path: str | os.PathLike | None = None) -> ExperimentConfig:
    """Load ``path``; ``None`` consults $SKINSTRETCH_CONFIG, ``"default"`` the built-ins."""
    if path is None:
        path = os.environ.get(ENV_VAR) or "default"
    if str(path) == "default":
        return ExperimentConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config(text, source=str(path))


def with_overrides(cfg: ExperimentConfig, seed: int | None = None, out_dir: str | None = None) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if out_dir is not None:
        changes["out_dir"] = str(out_dir)
    return replace(cfg, **changes) if changes else cfg
