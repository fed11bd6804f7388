"""500 Hz force-control loop: Euler-backward low-pass filters and a voltage PID."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

TRACE_COLUMNS = (
    "t_s",
    "desired_x_n",
    "desired_y_n",
    "measured_x_n",
    "measured_y_n",
    "reference_x_n",
    "reference_y_n",
    "voltage_x_v",
    "voltage_y_v",
)


class PlantDivergenceError(RuntimeError):
    def __init__(self, tick: int, detail: str = ""):
        self.tick = tick
        super().__init__(f"plant state became non-finite at tick {tick}{': ' + detail if detail else ''}")


@dataclass(frozen=True)
class PidGains:
    kp: tuple = (13.2, 12.0)  # V/N
    ki: tuple = (3.6, 12.0)  # V/(N s)
    kd: tuple = (0.36, 0.72)  # V s/N

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            if any(g < 0 for g in getattr(self, name)):
                raise ValueError(f"{name} gains must be >= 0")


@dataclass(frozen=True)
class ControllerConfig:
    dt_s: float = 0.002
    force_cutoff_hz: float | None = 10.0
    encoder_cutoff_hz: float | None = 10.0
    supply_voltage_v: float = 6.0
    sensor_delay_ticks: int = 1


@dataclass
class LowPassState:
    cutoff_hz: float
    output: float | np.ndarray = 0.0

    def __post_init__(self):
        if not self.cutoff_hz > 0:
            raise ValueError("cutoff must be positive")


def euler_backward(prev, x, a):
    """y_k = (y_{k-1} + a x_k) / (1 + a) with a = wc dt; exact for Fractions."""
    return (prev + a * x) / (1 + a)


def lowpass_coefficient(cutoff_hz: float, dt: float) -> float:
    """Backward-Euler gain ``a`` whose discrete response is -3 dB at the cutoff.

    The textbook choice a = 2 pi fc dt puts the discrete -3 dB point below fc
    (|H(fc)| = 0.686 at 10 Hz / 500 Hz); solving |a / (1 + a - e^{-j w dt})|
    = 1/sqrt(2) at w = 2 pi fc keeps the filter structure and its cutoff.
    """
    theta = 2 * math.pi * cutoff_hz * dt
    if not 0 < theta < math.pi:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie between 0 and the Nyquist rate {0.5 / dt} Hz")
    one_minus_c = 1 - math.cos(theta)
    return one_minus_c + math.sqrt(2 * one_minus_c**2 + math.sin(theta) ** 2)


def lowpass_step(state: LowPassState, x, dt: float):
    """Backward-Euler one-pole low-pass step at ``state.cutoff_hz``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = euler_backward(state.output, x, lowpass_coefficient(state.cutoff_hz, dt))
    return LowPassState(state.cutoff_hz, y), y


@dataclass
class ControllerState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    prev_error: np.ndarray | None = None
    prev_voltage: np.ndarray = field(default_factory=lambda: np.zeros(2))
    force_filter: LowPassState | None = None
    encoder_filter: LowPassState | None = None


def initial_state(config: ControllerConfig) -> ControllerState:
    state = ControllerState()
    if config.force_cutoff_hz is not None:
        state.force_filter = LowPassState(config.force_cutoff_hz, np.zeros(2))
    if config.encoder_cutoff_hz is not None:
        state.encoder_filter = LowPassState(config.encoder_cutoff_hz, np.zeros(2))
    return state


def pid_step(gains: PidGains, state: ControllerState, desired, measured, dt: float, supply_v: float = 6.0):
    """One PID update on both axes.

    The measured force passes the force filter (when configured) before the
    error is formed; the derivative acts on that filtered error. Integration
    halts while the previous output sat on the rail in the direction the
    error pushes, and the accumulator is clamped to supply/ki.

    Returns ``(new_state, voltage, filtered_measured)``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    desired = np.asarray(desired, dtype=float)
    measured = np.asarray(measured, dtype=float)
    kp, ki, kd = (np.asarray(g, dtype=float) for g in (gains.kp, gains.ki, gains.kd))

    force_filter = state.force_filter
    if force_filter is not None:
        force_filter, filtered = lowpass_step(force_filter, measured, dt)
    else:
        filtered = measured
    error = desired - filtered

    railed = (np.abs(state.prev_voltage) >= supply_v) & (np.sign(state.prev_voltage) == np.sign(error))
    integral = np.where(railed, state.integral, state.integral + error * dt)
    with np.errstate(divide="ignore"):
        limit = np.where(ki > 0, supply_v / np.where(ki > 0, ki, 1.0), 0.0)
    integral = np.clip(integral, -limit, limit)

    derivative = np.zeros_like(error) if state.prev_error is None else (error - state.prev_error) / dt
    voltage = np.clip(kp * error + ki * integral + kd * derivative, -supply_v, supply_v)
    new = ControllerState(
        integral=integral,
        prev_error=error,
        prev_voltage=voltage,
        force_filter=force_filter,
        encoder_filter=state.encoder_filter,
    )
    return new, voltage, filtered


class Plant(Protocol):
    """Anything the loop can drive: two voltage inputs, two force channels."""

    def reset(self, seed) -> None: ...

    def sense(self) -> tuple[np.ndarray, np.ndarray]:
        """(custom-sensor force, reference force) at the current state."""

    def advance(self, voltage: np.ndarray, dt: float) -> None: ...

    def encoder_positions(self) -> np.ndarray: ...


@dataclass
class ExperimentTrace:
    t: np.ndarray
    desired: np.ndarray
    measured: np.ndarray
    reference: np.ndarray
    voltage: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.desired, self.measured, self.reference, self.voltage])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in self.rows():
                w.writerow([f"{v:.10g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "ExperimentTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TRACE_COLUMNS:
                raise ValueError(f"{path}: unexpected trace header {header}")
            data = np.array([[float(v) for v in row] for row in reader])
        data = data.reshape(-1, len(TRACE_COLUMNS))
        return cls(data[:, 0], data[:, 1:3], data[:, 3:5], data[:, 5:7], data[:, 7:9])


def sample_reference(reference, n_ticks: int, dt: float) -> np.ndarray:
    """Turn a callable ``f(t) -> (2,)`` or an (n, 2) array into tick samples."""
    if callable(reference):
        return np.array([np.asarray(reference(k * dt), dtype=float) for k in range(n_ticks)]).reshape(n_ticks, 2)
    arr = np.asarray(reference, dtype=float)
    if arr.shape != (n_ticks, 2):
        raise ValueError(f"reference must have shape ({n_ticks}, 2), got {arr.shape}")
    return arr


def closed_loop(
    plant: Plant,
    gains: PidGains,
    reference: Callable | np.ndarray,
    duration_s: float,
    seed=0,
    config: ControllerConfig = ControllerConfig(),
) -> ExperimentTrace:
    """Run the sensor -> filter -> PID -> motor -> elastomer loop.

    One row per tick. The custom-sensor reading used at tick k was taken
    ``sensor_delay_ticks`` earlier. The recorded measured force is the
    custom-sensor reading at that tick (before filtering); the reference
    force is the instantaneous reference-sensor value.
    """
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    dt = config.dt_s
    n = int(round(duration_s / dt))
    desired = sample_reference(reference, n, dt)

    plant.reset(seed)
    state = initial_state(config)
    first, _ = plant.sense()
    pending = [np.asarray(first, dtype=float)] * config.sensor_delay_ticks

    t = np.arange(n) * dt
    measured = np.empty((n, 2))
    ref = np.empty((n, 2))
    volts = np.empty((n, 2))
    for k in range(n):
        custom, reference_now = plant.sense()
        if pending:
            pending.append(np.asarray(custom, dtype=float))
            delayed = pending.pop(0)
        else:
            delayed = custom
        state, v, filtered = pid_step(gains, state, desired[k], delayed, dt, config.supply_voltage_v)
        if state.encoder_filter is not None:
            enc, _ = lowpass_step(state.encoder_filter, plant.encoder_positions(), dt)
            state.encoder_filter = enc
        measured[k] = custom
        ref[k] = reference_now
        volts[k] = v
        plant.advance(v, dt)
        if not (np.all(np.isfinite(custom)) and np.all(np.isfinite(reference_now))):
            raise PlantDivergenceError(k)
    return ExperimentTrace(t, desired, measured, ref, volts)
