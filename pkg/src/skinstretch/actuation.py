"""Lead-screw platform axis: DC gearmotor, backlash and quadrature encoder."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class AxisDriveSpec:
    """One platform axis. Motor constants refer to the motor shaft.

    The electrical time constant is neglected, so current is algebraic:
    i = (V - ke*w) / R.
    """

    supply_voltage_v: float = 6.0
    resistance_ohm: float = 3.75
    torque_constant_nm_per_a: float = 1.8e-3
    inertia_kg_m2: float = 1.0e-8
    viscous_friction_nm_s: float = 3.0e-6
    gear_ratio: float = 5.0
    screw_lead_m: float = 0.5e-3
    encoder_cpr: int = 12
    travel_limit_m: float = 4.5e-3
    backlash_m: float = 20e-6

    def __post_init__(self):
        for name in (
            "supply_voltage_v",
            "resistance_ohm",
            "torque_constant_nm_per_a",
            "inertia_kg_m2",
            "viscous_friction_nm_s",
            "gear_ratio",
            "screw_lead_m",
            "travel_limit_m",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.encoder_cpr <= 0:
            raise ValueError("encoder_cpr must be a positive integer")
        if self.backlash_m < 0:
            raise ValueError("backlash must be >= 0")

    @property
    def metres_per_motor_rad(self) -> float:
        return self.screw_lead_m / (2 * math.pi * self.gear_ratio)

    @property
    def resolution_m(self) -> float:
        return self.screw_lead_m / (self.encoder_cpr * self.gear_ratio)

    def no_load_speed(self, voltage: float) -> float:
        """Steady motor speed (rad/s) at constant voltage with no load."""
        kt, r, b = self.torque_constant_nm_per_a, self.resistance_ohm, self.viscous_friction_nm_s
        return kt * voltage / (r * b + kt * kt)


@dataclass(frozen=True)
class AxisState:
    position_m: float = 0.0  # carriage
    omega_rad_s: float = 0.0  # motor shaft
    screw_m: float = 0.0  # nut position; differs from carriage inside the backlash gap

    @property
    def engagement_m(self) -> float:
        return self.screw_m - self.position_m


def axis_step(state: AxisState, voltage: float, load_force: float, dt: float, spec: AxisDriveSpec) -> AxisState:
    """Semi-implicit Euler step of the motor and screw.

    ``load_force`` is the force the elastomer exerts on the carriage along
    the axis (N, positive opposes positive travel). It only reaches the
    motor while the nut is in contact with the carriage.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not (math.isfinite(voltage) and math.isfinite(load_force)):
        raise ValueError("voltage and load_force must be finite")
    if abs(voltage) > spec.supply_voltage_v + 1e-12:
        raise ValueError(f"|voltage| {voltage} exceeds supply {spec.supply_voltage_v}")

    kt, r = spec.torque_constant_nm_per_a, spec.resistance_ohm
    lever = spec.metres_per_motor_rad
    half_gap = spec.backlash_m / 2
    engaged = abs(state.engagement_m) >= half_gap - 1e-15
    load_torque = load_force * lever if engaged else 0.0

    # damping terms (back-EMF, viscous) taken implicitly
    damping = spec.viscous_friction_nm_s + kt * kt / r
    omega = (spec.inertia_kg_m2 * state.omega_rad_s + dt * (kt * voltage / r - load_torque)) / (
        spec.inertia_kg_m2 + dt * damping
    )
    screw = state.screw_m + dt * omega * lever
    position = min(max(state.position_m, screw - half_gap), screw + half_gap)

    limit = spec.travel_limit_m
    if abs(position) > limit:
        position = math.copysign(limit, position)
        screw = min(max(screw, position - half_gap), position + half_gap)
        omega = 0.0
    return AxisState(position_m=position, omega_rad_s=omega, screw_m=screw)


def encoder_counts(position_m: float, spec: AxisDriveSpec) -> int:
    # nudge keeps exact multiples of the resolution from rounding down
    ticks = position_m * spec.encoder_cpr * spec.gear_ratio / spec.screw_lead_m
    return math.floor(ticks + 1e-9)
