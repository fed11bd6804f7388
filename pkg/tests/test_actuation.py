import math

import numpy as np

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skinstretch.actuation import AxisDriveSpec, AxisState, axis_step, encoder_counts

SPEC = AxisDriveSpec()


def run(state, voltage, seconds, dt=2e-4, load=0.0, spec=SPEC):
    for _ in range(int(round(seconds / dt))):
        state = axis_step(state, voltage, load, dt, spec)
    return state


def test_encoder_resolution():
    # 0.5 mm lead / (12 counts x 5:1 gear)
    assert SPEC.resolution_m == pytest.approx(25e-6 / 3, rel=1e-12)


def test_encoder_counts_floor():
    r = SPEC.resolution_m
    assert encoder_counts(0.0, SPEC) == 0
    assert encoder_counts(r, SPEC) == 1
    assert encoder_counts(0.999 * r, SPEC) == 0
    assert encoder_counts(-0.5 * r, SPEC) == -1
    assert encoder_counts(7 * r, SPEC) == 7


def test_no_load_speed_closed_form():
    # kt V / (R b + kt^2), mapped through the screw: about 11.9 mm/s at 6 V
    w = 1.8e-3 * 6.0 / (3.75 * 3.0e-6 + 1.8e-3**2)
    assert SPEC.no_load_speed(6.0) == pytest.approx(w, rel=1e-12)
    final = run(AxisState(), 6.0, 0.05)
    assert final.omega_rad_s == pytest.approx(w, rel=1e-6)
    assert w * SPEC.metres_per_motor_rad == pytest.approx(11.86e-3, rel=1e-3)


def test_zero_voltage_stays_put():
    assert run(AxisState(), 0.0, 0.01) == AxisState()


def test_backlash_dead_zone_on_reversal():
    s = run(run(AxisState(), 3.0, 0.05), 0.0, 0.05)  # advance, then coast to rest
    assert s.engagement_m == pytest.approx(SPEC.backlash_m / 2, abs=1e-12)
    pos_before = s.position_m
    # reverse: the carriage holds until the nut has crossed the gap
    while s.screw_m > pos_before - SPEC.backlash_m / 2 + 1e-12:
        s = axis_step(s, -3.0, 0.0, 1e-5, SPEC)
        if s.screw_m > pos_before - SPEC.backlash_m / 2:
            assert s.position_m == pos_before
    s = run(s, -3.0, 0.05)
    assert s.position_m < pos_before
    assert s.engagement_m == pytest.approx(-SPEC.backlash_m / 2, abs=1e-12)


def test_travel_limit():
    s = run(AxisState(), 6.0, 1.0, dt=1e-3)
    assert s.position_m == pytest.approx(SPEC.travel_limit_m)
    assert s.omega_rad_s == 0.0


def test_load_slows_the_motor():
    free = run(AxisState(), 6.0, 0.05)
    loaded = run(AxisState(), 6.0, 0.05, load=5.0)
    assert loaded.omega_rad_s < free.omega_rad_s


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        axis_step(AxisState(), 6.5, 0.0, 1e-3, SPEC)
    with pytest.raises(ValueError):
        axis_step(AxisState(), 1.0, math.nan, 1e-3, SPEC)
    with pytest.raises(ValueError):
        axis_step(AxisState(), 1.0, 0.0, 0.0, SPEC)
    with pytest.raises(ValueError):
        AxisDriveSpec(resistance_ohm=0.0)
    with pytest.raises(ValueError):
        AxisDriveSpec(encoder_cpr=0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-6.0, 6.0), min_size=1, max_size=60))
def test_carriage_within_gap_and_limits(voltages):
    s = AxisState()
    for v in voltages:
        s = axis_step(s, v, 0.0, 1e-3, SPEC)
        assert abs(s.position_m) <= SPEC.travel_limit_m
        assert abs(s.engagement_m) <= SPEC.backlash_m / 2 + 1e-15


def test_encoder_25um_is_3_counts():
    assert encoder_counts(25e-6, SPEC) == 3


def test_coasting_dissipates_energy():
    s = run(AxisState(), 6.0, 0.02)
    speeds = []
    for _ in range(200):
        s = axis_step(s, 0.0, 0.0, 1e-4, SPEC)
        speeds.append(s.omega_rad_s)
    assert speeds[0] > 0 and np.all(np.diff(np.square(speeds)) <= 0)


@settings(max_examples=80, deadline=None)
@given(st.floats(-4e-3, 4e-3))
def test_encoder_step_per_resolution(x):
    r = SPEC.resolution_m
    frac = (x / r) % 1.0
    if 1e-6 < frac < 1 - 1e-6:  # away from floor boundaries
        assert encoder_counts(x + r, SPEC) == encoder_counts(x, SPEC) + 1
