"""Sensor metrology: hysteresis, viscoelastic creep and torsional sensitivity."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .plant import SensorModel, SensorTrace, simulate_stage

AXES = "xyz"


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class LoadingProtocol:
    axis: int
    peak_displacement_m: float
    preload_z_m: float = 0.0
    ramp_rate_m_per_s: float = 0.25e-3
    hold_s: float = 35.0
    rate_hz: float = 100.0

    def __post_init__(self):
        if self.peak_displacement_m <= 0 or self.ramp_rate_m_per_s <= 0 or self.rate_hz <= 0:
            raise ValueError("peak displacement and rates must be positive")
        if self.axis not in (0, 1, 2):
            raise ValueError("axis must be 0, 1 or 2")


def default_protocol(axis: int, **overrides) -> LoadingProtocol:
    """Lateral runs push 1.25 mm over a 0.2 mm indentation; Z indents 0.5 mm."""
    if axis == 2:
        return LoadingProtocol(2, 0.5e-3, **overrides)
    return LoadingProtocol(axis, 1.25e-3, preload_z_m=0.2e-3, **overrides)


def _direction(p: LoadingProtocol) -> np.ndarray:
    v = np.zeros(3)
    # indentation compresses, i.e. negative Z
    v[p.axis] = -p.peak_displacement_m if p.axis == 2 else p.peak_displacement_m
    return v


def _ramp(a, b, seconds, rate_hz) -> np.ndarray:
    n = max(int(round(seconds * rate_hz)), 1)
    frac = np.arange(1, n + 1)[:, None] / n
    return a + (b - a) * frac


def _preload(p: LoadingProtocol) -> tuple[np.ndarray, np.ndarray]:
    base = np.array([0.0, 0.0, -p.preload_z_m])
    if p.preload_z_m == 0:
        return base, np.zeros((0, 3))
    # indent, then let the fast relaxation settle
    path = np.concatenate([_ramp(np.zeros(3), base, 1.0, p.rate_hz), np.repeat(base[None], int(5 * p.rate_hz), 0)])
    return base, path


def readings(trace: SensorTrace, model) -> np.ndarray:
    return model.predict(trace.counts)


def hysteresis_metric(loading, unloading) -> float:
    """Loading/unloading reading gap at half the maximum force, percent of max.

    ``loading`` and ``unloading`` are (reference force, reading) pairs of
    arrays in the order they were recorded. Forces may be negative (the
    loop is normalized by the sign of its peak).
    """
    ref_l, read_l = (np.asarray(a, dtype=float) for a in loading)
    ref_u, read_u = (np.asarray(a, dtype=float) for a in unloading)
    peak_i = np.argmax(np.abs(ref_l))
    sign = np.sign(ref_l[peak_i]) or 1.0
    ref_l, read_l, ref_u, read_u = sign * ref_l, sign * read_l, sign * ref_u, sign * read_u
    fmax = max(ref_l.max(), ref_u.max())
    if not fmax > 0:
        raise ProtocolError("maximum applied force must be positive")
    half = fmax / 2
    a = _first_crossing(ref_l, read_l, half, rising=True)
    b = _first_crossing(ref_u, read_u, half, rising=False)
    return abs(b - a) / fmax * 100.0


def _first_crossing(ref, reading, level, rising: bool) -> float:
    hit = ref >= level if rising else ref <= level
    idx = np.flatnonzero(hit)
    if len(idx) == 0:
        raise ProtocolError("curve does not span half of the maximum force")
    i = idx[0]
    if i == 0:
        return float(reading[0])
    x0, x1 = ref[i - 1], ref[i]
    w = 0.0 if x1 == x0 else (level - x0) / (x1 - x0)
    return float(reading[i - 1] + w * (reading[i] - reading[i - 1]))


def hysteresis_run(sensor: SensorModel, model, p: LoadingProtocol, seed=0):
    """Run one load/unload cycle; returns (loading, unloading, trace)."""
    base, pre = _preload(p)
    peak = base + _direction(p)
    ramp_s = p.peak_displacement_m / p.ramp_rate_m_per_s
    up = _ramp(base, peak, ramp_s, p.rate_hz)
    down = _ramp(peak, base, ramp_s, p.rate_hz)
    path = np.concatenate([pre, up, down])
    trace = simulate_stage(sensor, path, 1.0 / p.rate_hz, seed)
    read = readings(trace, model)[:, p.axis]
    ref = trace.reference[:, p.axis]
    n0, n1 = len(pre), len(pre) + len(up)
    # start each curve from the pre-loaded rest values
    lo = slice(max(n0 - 1, 0), n1)
    loading = (ref[lo] - ref[lo][0], read[lo] - read[lo][0])
    unloading = (ref[n1:] - ref[lo][0], read[n1:] - read[lo][0])
    return loading, unloading, trace


def creep_metric(t, custom, reference, hold_s: float = 30.0) -> float:
    """(custom - reference) at onset+30 s minus the same at onset+5 s.

    Onset is the first sample whose reference magnitude exceeds 10% of the
    plateau (largest magnitude in the record).
    """
    t = np.asarray(t, dtype=float)
    custom = np.asarray(custom, dtype=float)
    reference = np.asarray(reference, dtype=float)
    plateau = np.max(np.abs(reference))
    if plateau == 0:
        return 0.0
    onset_i = np.flatnonzero(np.abs(reference) > 0.1 * plateau)
    if len(onset_i) == 0:
        raise ProtocolError("no force onset detected")
    onset = t[onset_i[0]]
    if t[-1] < onset + hold_s - 1e-9:
        raise ProtocolError(f"hold of {t[-1] - onset:.2f} s after onset is shorter than {hold_s} s")
    diff = custom - reference
    return float(np.interp(onset + hold_s, t, diff) - np.interp(onset + 5.0, t, diff))


def creep_run(sensor: SensorModel, model, p: LoadingProtocol, seed=0, ramp_s: float = 0.0) -> tuple[float, SensorTrace]:
    """Indent and hold for ``p.hold_s``; returns (creep N, trace after preload)."""
    base, pre = _preload(p)
    peak = base + _direction(p)
    ramp = _ramp(base, peak, ramp_s, p.rate_hz) if ramp_s > 0 else peak[None]
    hold = np.repeat(peak[None], int(round(p.hold_s * p.rate_hz)), 0)
    path = np.concatenate([pre, np.repeat(base[None], 10, 0), ramp, hold])
    trace = simulate_stage(sensor, path, 1.0 / p.rate_hz, seed)
    part = trace.slice(slice(len(pre), None))
    read = readings(part, model)[:, p.axis]
    ref = part.reference[:, p.axis]
    # measure against the pre-loaded rest so only the indentation counts
    return creep_metric(part.t, read - read[0], ref - ref[0]), part


def torsion_sensitivity(
    sensor: SensorModel, model, rotation_axis: int, angle_deg: float = 15.0, duration_s: float = 20.0, seed=0, rate_hz: float = 100.0
) -> np.ndarray:
    """Per-axis reading error caused by tilting the magnet, rest to fully deformed.

    The tilt ramps from 0 to ``angle_deg`` over the first 80% of the run and
    holds; the elastomer carries no translational load. The result is the
    mean (custom - reference) over the final second minus the same over the
    first second.
    """
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    angle = np.radians(angle_deg) * np.clip(t / (0.8 * duration_s), 0.0, 1.0)
    trace = simulate_stage(sensor, np.zeros((n, 3)), 1.0 / rate_hz, seed, tilt_axis=rotation_axis, tilt_rad=angle)
    diff = readings(trace, model) - trace.reference
    w = int(rate_hz)
    return diff[-w:].mean(axis=0) - diff[:w].mean(axis=0)


@dataclass
class CharacterizationReport:
    hysteresis_pct: np.ndarray
    creep_n: np.ndarray
    torsion_errors: np.ndarray  # row: rotation axis, column: reading axis
    z_offset_n: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "x", "y", "z"])
            w.writerow(["hysteresis_pct", *(f"{v:.6g}" for v in self.hysteresis_pct)])
            w.writerow(["creep_n", *(f"{v:.6g}" for v in self.creep_n)])
            for axis, row in zip(AXES, self.torsion_errors):
                w.writerow([f"torsion_about_{axis}_n", *(f"{v:.6g}" for v in row)])
            w.writerow(["z_offset_n", "", "", f"{self.z_offset_n:.6g}"])

    def text(self) -> str:
        fmt = lambda v: ", ".join(f"{x:.3f}" for x in v)
        lines = [
            f"hysteresis (%)  X, Y, Z: {fmt(self.hysteresis_pct)}",
            f"creep (N)       X, Y, Z: {fmt(self.creep_n)}",
        ]
        for axis, row in zip(AXES.upper(), self.torsion_errors):
            lines.append(f"torsion about {axis} (N) X, Y, Z: {fmt(row)}")
        lines.append(f"Z offset at rest (N): {self.z_offset_n:.3f}")
        return "\n".join(lines)


def characterize(sensor: SensorModel, model, seed=0, ramp_rate_m_per_s: float = 0.25e-3) -> CharacterizationReport:
    hyst, creep = np.zeros(3), np.zeros(3)
    z_offset = 0.0
    for axis in range(3):
        p = default_protocol(axis, ramp_rate_m_per_s=ramp_rate_m_per_s)
        loading, unloading, trace = hysteresis_run(sensor, model, p, seed + axis)
        hyst[axis] = hysteresis_metric(loading, unloading)
        if axis == 2:
            z_offset = float(readings(trace, model)[0, 2] - trace.reference[0, 2])
        creep[axis], _ = creep_run(sensor, model, p, seed + 10 + axis)
    torsion = np.vstack([torsion_sensitivity(sensor, model, a, seed=seed + 20 + a) for a in range(3)])
    return CharacterizationReport(hyst, creep, torsion, z_offset)
