"""Step-response metrics and chirp-based frequency response (Bode) estimation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class StepMetrics:
    steady_state_error: float  # N
    rise_time: float  # s
    settled: bool = True

    def __post_init__(self):
        if self.rise_time < 0:
            raise ValueError("rise time cannot be negative")


def _crossing_time(t, y, level, start) -> tuple[float, int]:
    idx = np.flatnonzero((y >= level) & (np.arange(len(y)) >= start))
    if len(idx) == 0:
        return np.nan, -1
    i = idx[0]
    if i == 0 or y[i - 1] >= level:
        return float(t[i]), i
    w = (level - y[i - 1]) / (y[i] - y[i - 1])
    return float(t[i - 1] + w * (t[i] - t[i - 1])), i


def step_metrics(
    t,
    desired,
    measured,
    step_onset: float,
    step_amplitude: float,
    direction=None,
    settle_window=(1.8, 2.0),
) -> StepMetrics:
    """Steady-state error and 10-90% rise time for one step.

    ``desired``/``measured`` are (n,) or (n, k); multi-axis signals are
    projected on ``direction`` (unit-normalized). The steady-state error is
    the mean |desired - measured| over [onset+1.8 s, onset+2.0 s); the rise
    time is measured on the measured signal between 10% and 90% of the
    change from its pre-onset level to its steady-state level. Crossings are
    linearly interpolated; two crossings within one sample interval count as
    an unresolved (zero) rise time.
    """
    t = np.asarray(t, dtype=float)
    desired = np.asarray(desired, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if desired.ndim == 2:
        u = np.asarray(direction if direction is not None else np.ones(desired.shape[1]), dtype=float)
        u = u / np.linalg.norm(u)
        desired, measured = desired @ u, measured @ u
    if t[-1] < step_onset + settle_window[1] - 1e-9 - (t[-1] - t[-2] if len(t) > 1 else 0):
        raise ValueError("trace does not cover the settling window")

    sign = -1.0 if step_amplitude < 0 else 1.0
    desired, measured = sign * desired, sign * measured
    win = (t >= step_onset + settle_window[0] - 1e-9) & (t < step_onset + settle_window[1] - 1e-9)
    error = float(np.mean(np.abs(desired[win] - measured[win])))

    pre = (t < step_onset - 1e-9) & (t >= step_onset - 0.2)
    base = float(np.mean(measured[pre])) if np.any(pre) else float(measured[0])
    final = float(np.mean(measured[win]))
    span = final - base
    start = int(np.searchsorted(t, step_onset - 1e-9))
    if step_amplitude == 0:
        return StepMetrics(error, 0.0, settled=True)
    if span <= 0:
        return StepMetrics(error, 0.0, settled=False)
    t10, i10 = _crossing_time(t, measured, base + 0.1 * span, start)
    t90, i90 = _crossing_time(t, measured, base + 0.9 * span, start)
    if i10 < 0 or i90 < 0:
        return StepMetrics(error, 0.0, settled=False)
    rise = 0.0 if i10 == i90 else max(t90 - t10, 0.0)
    # flag steps still drifting across the window by more than 5% of the step
    drift = abs(measured[win][-1] - measured[win][0])
    return StepMetrics(error, rise, settled=drift <= 0.05 * abs(step_amplitude))


def exp_chirp(f0: float, f1: float, duration: float, amplitude: float, sample_rate: float):
    """Exponential sweep A sin(2 pi f0 (k^t - 1) / ln k), k = (f1/f0)^(1/T).

    Returns ``(t, signal)`` sampled at ``sample_rate`` over [0, duration).
    """
    if not 0 < f0 < f1:
        raise ValueError("need 0 < f0 < f1")
    if duration <= 0:
        raise ValueError("duration must be positive")
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    return t, amplitude * np.sin(chirp_phase(t, f0, f1, duration))


def chirp_phase(t, f0, f1, duration):
    log_k = np.log(f1 / f0) / duration
    return 2 * np.pi * f0 * np.expm1(log_k * np.asarray(t)) / log_k


def chirp_frequency(t, f0, f1, duration):
    return f0 * (f1 / f0) ** (np.asarray(t) / duration)


@dataclass
class BodeCurve:
    frequencies: np.ndarray  # Hz
    magnitude_db: np.ndarray
    phase_deg: np.ndarray
    gain_crossover: float | None  # Hz

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["freq_hz", "mag_db", "phase_deg"])
            for row in zip(self.frequencies, self.magnitude_db, self.phase_deg):
                w.writerow([f"{v:.8g}" for v in row])


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def spectrum(x, n_fft: int) -> np.ndarray:
    """One-sided FFT of ``x`` zero-padded to ``n_fft``."""
    return np.fft.rfft(np.asarray(x, dtype=float), n=n_fft)


def unwrap_deg(phase_deg) -> np.ndarray:
    return np.unwrap(np.asarray(phase_deg, dtype=float), period=360.0)


def gain_crossover(freq, mag_db, rule: str = "first") -> float | None:
    """Downward crossing of 0 dB, interpolated linearly in (log f, dB).

    ``rule="first"`` returns the lowest such crossing; ``rule="last"`` the
    highest, i.e. where the magnitude finally drops below 0 dB.
    """
    if rule not in ("first", "last"):
        raise ValueError(f"unknown crossover rule {rule!r}")
    freq = np.asarray(freq, dtype=float)
    mag_db = np.asarray(mag_db, dtype=float)
    hits = np.flatnonzero((mag_db[:-1] > 0) & (mag_db[1:] <= 0))
    if len(hits) == 0:
        return None
    i = hits[0] if rule == "first" else hits[-1]
    w = mag_db[i] / (mag_db[i] - mag_db[i + 1])
    lf = np.log(freq[i]) + w * (np.log(freq[i + 1]) - np.log(freq[i]))
    return float(np.exp(lf))


def smooth_octave(freq, values, octaves: float) -> np.ndarray:
    """Moving average over a window ``octaves`` wide, centred in log2(f)."""
    freq = np.asarray(freq, dtype=float)
    values = np.asarray(values, dtype=float)
    if octaves <= 0:
        return values.copy()
    lf = np.log2(freq)
    lo = np.searchsorted(lf, lf - octaves / 2, side="left")
    hi = np.searchsorted(lf, lf + octaves / 2, side="right")
    csum = np.concatenate([[0.0], np.cumsum(values)])
    return (csum[hi] - csum[lo]) / (hi - lo)


def bode(
    commanded,
    measured,
    sample_rate: float,
    f0: float = 1.0,
    f1: float = 100.0,
    floor_rel: float = 1e-9,
    smooth_octaves: float = 0.0,
    crossover_rule: str = "first",
) -> BodeCurve:
    """Frequency response measured/commanded from Hann-windowed FFTs.

    Bins outside [f0, f1], or where the commanded magnitude falls below
    ``floor_rel`` times its peak, are dropped. Phase is unwrapped. With
    ``smooth_octaves > 0`` the crossover is read from the magnitude
    averaged over that fraction of an octave; the returned curve itself
    is never smoothed.
    """
    commanded = np.asarray(commanded, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if commanded.shape != measured.shape or commanded.ndim != 1:
        raise ValueError("commanded and measured must be equal-length 1-D signals")
    n = len(commanded)
    if n < 2 * sample_rate / f0:
        raise ValueError("signals must span at least two periods of f0")
    window = np.hanning(n)
    n_fft = next_pow2(n)
    c = spectrum(commanded * window, n_fft)
    m = spectrum(measured * window, n_fft)
    freq = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    keep = (freq >= f0) & (freq <= f1) & (np.abs(c) > floor_rel * np.abs(c).max())
    h = m[keep] / c[keep]
    freq = freq[keep]
    mag = 20 * np.log10(np.abs(h))
    phase = unwrap_deg(np.degrees(np.angle(h)))
    xover = gain_crossover(freq, smooth_octave(freq, mag, smooth_octaves), crossover_rule)
    return BodeCurve(freq, mag, phase, xover)
