"""Point-dipole field of the embedded magnet and the magnetometer quantizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MU0 = 4e-7 * np.pi
ADC_BITS = 19
WINDOW_BITS = 16


class InvalidPoseError(ValueError):
    """Magnet and sensor closer than the configured minimum separation."""


@dataclass(frozen=True)
class MagnetSpec:
    radius_m: float = 1.5e-3
    height_m: float = 1.0e-3
    remanence_t: float = 1.4

    def __post_init__(self):
        if self.radius_m <= 0 or self.height_m <= 0:
            raise ValueError("magnet radius and height must be positive")
        if self.remanence_t < 0:
            raise ValueError("remanence must be non-negative")


@dataclass(frozen=True)
class MagnetometerSpec:
    """Three-axis magnetometer with a 19-bit converter read through 16-bit windows.

    ``full_scale_ut`` is the field at the 19-bit converter's positive full
    scale (code 2**18), so one converter LSB is ``full_scale_ut / 2**18``.
    ``bit_windows`` gives the (low, high) converter bits reported per axis.
    """

    air_gap_m: float = 3.5e-3
    full_scale_ut: float = 0.6 * 2**18
    bit_windows: tuple = ((0, 15), (0, 15), (1, 16))
    noise_sd_ut: float = 1.5
    read_time_s: float = 1.55e-3
    min_separation_m: float = 0.5e-3

    def __post_init__(self):
        if self.air_gap_m <= 0:
            raise ValueError("air gap must be positive")
        if self.noise_sd_ut < 0:
            raise ValueError("noise_sd must be >= 0")
        if len(self.bit_windows) != 3:
            raise ValueError("need one bit window per axis")
        for lo, hi in self.bit_windows:
            if hi - lo + 1 != WINDOW_BITS or lo < 0 or hi >= ADC_BITS:
                raise ValueError(f"bit window ({lo}, {hi}) must select 16 of 19 bits")

    @property
    def adc_lsb_ut(self) -> float:
        return self.full_scale_ut / 2 ** (ADC_BITS - 1)

    def lsb_ut(self) -> np.ndarray:
        """Field per output count on each axis."""
        return np.array([self.adc_lsb_ut * 2**lo for lo, _ in self.bit_windows])


@dataclass
class FieldReading:
    field_ut: np.ndarray
    counts: np.ndarray
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=bool))


def magnetic_moment(spec: MagnetSpec) -> float:
    """Dipole moment (A m^2) of a uniformly magnetized cylinder, Br V / mu0."""
    volume = np.pi * spec.radius_m**2 * spec.height_m
    return spec.remanence_t * volume / MU0


def rotation_matrix(axis: int, angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    if axis == 0:
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == 1:
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == 2:
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise ValueError(f"axis must be 0, 1 or 2, got {axis}")


def magnet_center(displacement, sensor: MagnetometerSpec, magnet: MagnetSpec) -> np.ndarray:
    d = np.asarray(displacement, dtype=float)
    center = d.copy()
    center[..., 2] = center[..., 2] + sensor.air_gap_m + magnet.height_m / 2
    return center


def dipole_field(
    displacement,
    sensor: MagnetometerSpec,
    magnet: MagnetSpec,
    orientation: np.ndarray | None = None,
) -> np.ndarray:
    """Field in microtesla at the magnetometer for a displaced magnet.

    ``displacement`` is (3,) or (N, 3) metres relative to the rest pose; the
    rest pose puts the dipole ``air_gap + height/2`` above the sensor.
    ``orientation`` optionally rotates the moment (default +Z).
    """
    center = magnet_center(displacement, sensor, magnet)
    r = -center  # sensor sits at the origin
    dist = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(dist < sensor.min_separation_m):
        raise InvalidPoseError(
            f"magnet-sensor separation {float(dist.min()):.3e} m below "
            f"{sensor.min_separation_m:.3e} m"
        )
    m = np.array([0.0, 0.0, magnetic_moment(magnet)])
    if orientation is not None:
        m = np.asarray(orientation) @ m
    m_dot_r = np.sum(r * m, axis=-1, keepdims=True)
    b = (3.0 * m_dot_r * r / dist**2 - m) / dist**3
    return b * (MU0 / (4 * np.pi)) * 1e6


def quantize(field_ut, spec: MagnetometerSpec, rng=None) -> FieldReading:
    """Add sensor noise and reduce a field to windowed converter counts.

    Accepts a single (3,) field or an (N, 3) batch. ``rng`` is a seed or a
    ``numpy.random.Generator``; noise is skipped when ``noise_sd_ut`` is 0.
    """
    b = np.array(field_ut, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("field must be finite")
    if spec.noise_sd_ut > 0:
        b = b + np.random.default_rng(rng).normal(0.0, spec.noise_sd_ut, b.shape)

    half = 2 ** (ADC_BITS - 1)
    code = np.floor(b / spec.adc_lsb_ut)
    saturated = (code < -half) | (code > half - 1)
    code = np.clip(code, -half, half - 1)

    shifts = np.array([2**lo for lo, _ in spec.bit_windows], dtype=float)
    wmax = 2 ** (WINDOW_BITS - 1)
    counts = np.floor(code / shifts)
    saturated |= (counts < -wmax) | (counts > wmax - 1)
    counts = np.clip(counts, -wmax, wmax - 1).astype(np.int64)
    return FieldReading(field_ut=b, counts=counts, saturated=saturated)
