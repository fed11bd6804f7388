"""Simulated hardware: the magnetic force sensor and the two-axis interface."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import elastomer as el
from .actuation import AxisDriveSpec, AxisState, axis_step, encoder_counts
from .magnetics import MagnetometerSpec, MagnetSpec, dipole_field, quantize, rotation_matrix


@dataclass(frozen=True)
class SensorModel:
    """Magnet, magnetometer and elastomer, plus the reference sensor's noise."""

    magnet: MagnetSpec = field(default_factory=MagnetSpec)
    magnetometer: MagnetometerSpec = field(default_factory=MagnetometerSpec)
    elastomer: el.ElastomerParams = field(default_factory=el.ElastomerParams)
    reference_noise_sd_n: float = 0.003
    # Rotation centre used for torsional tilts, as height above the magnet centre.
    tilt_pivot_above_magnet_m: float = -1.35e-3

    def memoryless(self) -> "SensorModel":
        return SensorModel(
            self.magnet,
            self.magnetometer,
            self.elastomer.memoryless(),
            self.reference_noise_sd_n,
            self.tilt_pivot_above_magnet_m,
        )

    def field_for(self, magnet_displacement, tilt_axis: int | None = None, tilt_rad=None) -> np.ndarray:
        """Noise-free field for (N, 3) magnet displacements, optionally tilted."""
        d = np.atleast_2d(np.asarray(magnet_displacement, dtype=float))
        if tilt_axis is None:
            return dipole_field(d, self.magnetometer, self.magnet)
        angles = np.broadcast_to(np.asarray(tilt_rad, dtype=float), (len(d),))
        out = np.empty_like(d)
        lever = np.array([0.0, 0.0, -self.tilt_pivot_above_magnet_m])
        for i, (disp, ang) in enumerate(zip(d, angles)):
            rot = rotation_matrix(tilt_axis, ang)
            # magnet centre swings about the pivot
            shift = rot @ lever - lever
            out[i] = dipole_field(disp + shift, self.magnetometer, self.magnet, orientation=rot)
        return out


@dataclass
class SensorTrace:
    """Time series from a stage-driven (open-loop) sensor run."""

    t: np.ndarray
    displacement: np.ndarray  # (n, 3) m, imposed by the stage
    counts: np.ndarray  # (n, 3) int
    reference: np.ndarray  # (n, 3) N, reference-sensor reading
    true_force: np.ndarray  # (n, 3) N, noise free

    def slice(self, mask) -> "SensorTrace":
        return SensorTrace(self.t[mask], self.displacement[mask], self.counts[mask], self.reference[mask], self.true_force[mask])


def simulate_stage(
    sensor: SensorModel,
    displacement,
    dt: float,
    seed=0,
    tilt_axis: int | None = None,
    tilt_rad=None,
    state: el.ElastomerState | None = None,
) -> SensorTrace:
    """Drive the elastomer through a displacement history sampled every ``dt``.

    Returns counts and reference-sensor readings at every sample. The
    elastomer starts at rest unless ``state`` is given.
    """
    disp = np.asarray(displacement, dtype=float).reshape(-1, 3)
    n = len(disp)
    rng = np.random.default_rng(seed)
    params = sensor.elastomer
    st = el.ElastomerState.rest(params) if state is None else state.copy()
    force = np.empty((n, 3))
    for i in range(n):
        st, force[i], _ = el.step(st, disp[i], dt, params)
    magnet = params.magnet_coupling_ratio * disp
    fld = sensor.field_for(magnet, tilt_axis, tilt_rad)
    counts = quantize(fld, sensor.magnetometer, rng).counts
    reference = force + rng.normal(0.0, sensor.reference_noise_sd_n, force.shape) if sensor.reference_noise_sd_n > 0 else force.copy()
    return SensorTrace(np.arange(n) * dt, disp, counts, reference, force)


def preload_displacement(force_n: float, params: el.ElastomerParams, axis: int = 2) -> float:
    """Displacement on ``axis`` whose quasi-static force equals ``force_n``."""
    if force_n == 0:
        return 0.0

    def residual(d):
        v = np.zeros(3)
        v[axis] = d
        return el.quasi_static_force(v, params)[axis] - force_n

    span = el.MAX_DISPLACEMENT_M
    return brentq(residual, -span, span, xtol=1e-12)


class TactileInterface:
    """Closed-loop plant: two motor axes pushing the platform through the sensor.

    The platform top is held by the reference sensor, so the elastomer
    deformation on X/Y equals the carriage positions; Z carries a constant
    normal preload. The custom-sensor force comes from the calibrated model
    applied to quantized magnetometer counts.
    """

    def __init__(
        self,
        sensor: SensorModel,
        model,
        drive: AxisDriveSpec = AxisDriveSpec(),
        drive_y: AxisDriveSpec | None = None,
        normal_preload_n: float = 2.0,
        substeps: int = 10,
    ):
        self.sensor = sensor
        self.model = model
        self.drives = (drive, drive_y or drive)
        self.substeps = substeps
        # compression is negative force along Z
        self.z_preload_m = preload_displacement(-abs(normal_preload_n), sensor.elastomer)
        self.reset(0)

    def reset(self, seed) -> None:
        self.rng = np.random.default_rng(seed)
        self.axes = [AxisState(), AxisState()]
        self.elastic = el.ElastomerState.rest(self.sensor.elastomer)
        self.force = np.zeros(3)
        self._settle_preload()

    def _settle_preload(self) -> None:
        # bring the normal preload in before the loop starts
        d = np.array([0.0, 0.0, self.z_preload_m])
        for _ in range(200):
            self.elastic, self.force, _ = el.step(self.elastic, d, 0.05, self.sensor.elastomer)

    def displacement(self) -> np.ndarray:
        return np.array([self.axes[0].position_m, self.axes[1].position_m, self.z_preload_m])

    def sense(self):
        magnet = self.sensor.elastomer.magnet_coupling_ratio * self.displacement()
        fld = dipole_field(magnet, self.sensor.magnetometer, self.sensor.magnet)
        counts = quantize(fld, self.sensor.magnetometer, self.rng).counts
        custom = self.model.predict(counts)[:2]
        sd = self.sensor.reference_noise_sd_n
        reference = self.force[:2] + (self.rng.normal(0.0, sd, 2) if sd > 0 else 0.0)
        return custom, reference

    def advance(self, voltage, dt: float) -> None:
        h = dt / self.substeps
        for i in (0, 1):
            ax, spec, load, v = self.axes[i], self.drives[i], self.force[i], float(voltage[i])
            for _ in range(self.substeps):
                ax = axis_step(ax, v, load, h, spec)
            self.axes[i] = ax
        self.elastic, self.force, _ = el.step(self.elastic, self.displacement(), dt, self.sensor.elastomer)

    def encoder_positions(self) -> np.ndarray:
        return np.array(
            [encoder_counts(a.position_m, s) * s.resolution_m for a, s in zip(self.axes, self.drives)]
        )


class UnitGainPlant:
    """Force equals the last applied voltage (V -> N). Used as a loop oracle."""

    def __init__(self, gain: float = 1.0):
        self.gain = gain
        self.reset(0)

    def reset(self, seed) -> None:
        self.output = np.zeros(2)

    def sense(self):
        return self.output.copy(), self.output.copy()

    def advance(self, voltage, dt: float) -> None:
        self.output = self.gain * np.asarray(voltage, dtype=float)

    def encoder_positions(self) -> np.ndarray:
        return np.zeros(2)
