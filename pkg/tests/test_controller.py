import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from skinstretch.controller import (
    ControllerConfig,
    ExperimentTrace,
    LowPassState,
    PidGains,
    PlantDivergenceError,
    closed_loop,
    euler_backward,
    initial_state,
    lowpass_coefficient,
    lowpass_step,
    pid_step,
    sample_reference,
)
from skinstretch.plant import UnitGainPlant

RAW = ControllerConfig(force_cutoff_hz=None, encoder_cutoff_hz=None)


@pytest.mark.parametrize("fc", [1.0, 10.0, 50.0, 200.0])
def test_lowpass_is_minus_3db_at_cutoff(fc):
    dt = 0.002
    a = lowpass_coefficient(fc, dt)
    h = a / (1 + a - cmath.exp(-2j * math.pi * fc * dt))
    assert abs(h) == pytest.approx(1 / math.sqrt(2), rel=1e-12)


def test_lowpass_coefficient_limits():
    with pytest.raises(ValueError):
        lowpass_coefficient(250.0, 0.002)
    with pytest.raises(ValueError):
        lowpass_coefficient(0.0, 0.002)
    # for fc << fs the gain tends to the textbook wc dt
    assert lowpass_coefficient(0.01, 0.002) == pytest.approx(2 * math.pi * 0.01 * 0.002, rel=1e-4)


def test_euler_backward_exact_step():
    a = Fraction(1, 7)
    y = Fraction(0)
    for k in range(1, 30):
        y = euler_backward(y, 1, a)
        assert y == 1 - Fraction(7, 8) ** k


def test_lowpass_step_dc_gain():
    s = LowPassState(10.0, 0.0)
    for _ in range(2000):
        s, y = lowpass_step(s, 3.0, 0.002)
    assert y == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(ValueError):
        LowPassState(0.0)


def test_proportional_and_saturation():
    g = PidGains((2.0, 20.0), (0.0, 0.0), (0.0, 0.0))
    _, v, _ = pid_step(g, initial_state(RAW), (1.0, 1.0), (0.5, 0.0), 0.002)
    assert v.tolist() == [1.0, 6.0]
    _, v, _ = pid_step(g, initial_state(RAW), (-1.0, -1.0), (0.0, 0.0), 0.002, supply_v=3.0)
    assert v.tolist() == [-2.0, -3.0]


def test_integral_accumulates_and_halts_on_rail():
    g = PidGains((0.0, 0.0), (10.0, 1000.0), (0.0, 0.0))
    s = initial_state(RAW)
    for _ in range(5):
        s, v, _ = pid_step(g, s, (1.0, 1.0), (0.0, 0.0), 0.01)
    assert s.integral[0] == pytest.approx(0.05)
    assert v[0] == pytest.approx(0.5)
    # Y railed after its first tick; integration stops there
    assert v[1] == 6.0 and s.integral[1] == pytest.approx(0.006)


def test_derivative_on_filtered_error():
    g = PidGains((0.0, 0.0), (0.0, 0.0), (1.0, 1.0))
    s = initial_state(RAW)
    s, v, _ = pid_step(g, s, (1.0, 0.0), (0.0, 0.0), 0.01)
    assert v.tolist() == [0.0, 0.0]
    s, v, _ = pid_step(g, s, (1.0, 0.0), (0.02, -0.01), 0.01)
    np.testing.assert_allclose(v, [-2.0, 1.0])


def test_measured_force_is_filtered():
    cfg = ControllerConfig(force_cutoff_hz=10.0)
    g = PidGains((1.0, 1.0), (0.0, 0.0), (0.0, 0.0))
    _, v, filtered = pid_step(g, initial_state(cfg), (0.0, 0.0), (1.0, 1.0), 0.002)
    a = lowpass_coefficient(10.0, 0.002)
    np.testing.assert_allclose(filtered, a / (1 + a))
    np.testing.assert_allclose(v, -a / (1 + a))


def test_gains_must_be_nonnegative():
    with pytest.raises(ValueError):
        PidGains(kp=(-1.0, 1.0))


def test_unit_plant_loop_with_delay():
    # y_k = v_{k-1}; the controller sees y one tick late
    kp = 0.5
    g = PidGains((kp, kp), (0.0, 0.0), (0.0, 0.0))
    trace = closed_loop(UnitGainPlant(), g, np.ones((400, 2)), 0.8, config=RAW)
    assert trace.voltage[0, 0] == pytest.approx(kp)
    assert trace.measured[1, 0] == pytest.approx(kp)
    assert trace.voltage[1, 0] == pytest.approx(kp)  # still acting on the delayed zero
    assert trace.measured[-1, 0] == pytest.approx(kp / (1 + kp), rel=1e-9)


def test_pi_loop_removes_error():
    g = PidGains((0.2, 0.2), (50.0, 50.0), (0.0, 0.0))
    trace = closed_loop(UnitGainPlant(), g, lambda t: (1.0, -0.5), 2.0, config=RAW)
    np.testing.assert_allclose(trace.measured[-1], [1.0, -0.5], atol=1e-6)


def test_divergence_is_reported():
    class Broken(UnitGainPlant):
        def sense(self):
            return np.array([np.nan, 0.0]), np.zeros(2)

    with pytest.raises(PlantDivergenceError, match="tick 0"):
        closed_loop(Broken(), PidGains(), np.zeros((10, 2)), 0.02)


def test_reference_shape_checked():
    with pytest.raises(ValueError, match="shape"):
        sample_reference(np.zeros((5, 2)), 10, 0.002)
    assert sample_reference(lambda t: (t, -t), 3, 0.5).tolist() == [[0, 0], [0.5, -0.5], [1.0, -1.0]]


def test_trace_csv_roundtrip(tmp_path):
    trace = closed_loop(UnitGainPlant(), PidGains(), lambda t: (1.0, 0.5), 0.1)
    trace.to_csv(tmp_path / "t.csv")
    back = ExperimentTrace.from_csv(tmp_path / "t.csv")
    np.testing.assert_allclose(back.rows(), trace.rows(), rtol=1e-9, atol=1e-12)
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        ExperimentTrace.from_csv(tmp_path / "bad.csv")


def test_dc_pass_from_matching_state():
    s = LowPassState(10.0, 2.5)
    for _ in range(100):
        s, y = lowpass_step(s, 2.5, 0.002)
        assert y == 2.5


def test_zero_error_gives_zero_voltage():
    s = initial_state(ControllerConfig())
    for _ in range(20):
        s, v, _ = pid_step(PidGains(), s, (0.0, 0.0), (0.0, 0.0), 0.002)
        assert v.tolist() == [0.0, 0.0]


def test_p_only_saturation_hand_case():
    g = PidGains((13.2, 13.2), (0.0, 0.0), (0.0, 0.0))
    _, v, _ = pid_step(g, initial_state(RAW), (0.5, -0.5), (0.0, 0.0), 0.002)
    assert v.tolist() == [6.0, -6.0]  # 13.2 x 0.5 = 6.6 -> clamp


def test_i_only_linear_until_clamp():
    ki = 100.0
    g = PidGains((0.0, 0.0), (ki, ki), (0.0, 0.0))
    s, volts = initial_state(RAW), []
    for _ in range(40):
        s, v, _ = pid_step(g, s, (1.0, 1.0), (0.0, 0.0), 0.002)
        volts.append(v[0])
    k = np.arange(1, 41)
    np.testing.assert_allclose(volts, np.minimum(ki * 0.002 * k, 6.0), rtol=1e-12)


def test_unit_plant_p_control_hand_recursion():
    # plant output y_k = v_{k-1}; with one tick of sensor delay the loop sees
    # y_{k-1} = v_{k-2}, so v_k = kp (1 - v_{k-2})
    kp = 0.5
    trace = closed_loop(UnitGainPlant(), PidGains((kp, kp), (0.0, 0.0), (0.0, 0.0)), np.ones((10, 2)), 0.02, config=RAW)
    want = []
    for k in range(10):
        prev2 = want[k - 2] if k >= 2 else 0.0
        want.append(kp * (1.0 - prev2))
    assert trace.voltage[:, 0].tolist() == want
    assert trace.measured[1:, 0].tolist() == want[:-1]


def test_zero_reference_from_rest_is_all_zero():
    trace = closed_loop(UnitGainPlant(), PidGains(), np.zeros((200, 2)), 0.4)
    assert not np.any(trace.rows()[:, 1:])


def test_loop_determinism_and_voltage_bound(default_model):
    from skinstretch.plant import SensorModel, TactileInterface

    plant = TactileInterface(SensorModel(), default_model)
    ref = lambda t: (2.0 * (t > 0.05), -1.0 * (t > 0.1))
    a = closed_loop(plant, PidGains(), ref, 0.6, seed=7)
    b = closed_loop(plant, PidGains(), ref, 0.6, seed=7)
    assert np.array_equal(a.rows(), b.rows())
    assert np.all(np.abs(a.voltage) <= 6.0)


def test_integral_bounded_under_unreachable_reference():
    g = PidGains((1.0, 1.0), (5.0, 5.0), (0.0, 0.0))
    s = initial_state(RAW)
    for _ in range(5000):
        s, v, _ = pid_step(g, s, (100.0, -100.0), (0.0, 0.0), 0.002)
        assert np.all(np.abs(s.integral) <= 6.0 / 5.0 + 1e-12)


@pytest.mark.slow
def test_one_newton_step_on_default_plant(default_model, default_config):
    from skinstretch.experiments import make_interface, step_command
    from skinstretch.response import step_metrics

    cfg = default_config
    desired, unit, along = step_command(cfg, "x", 1.0)
    plant = make_interface(cfg, default_model, 2.0)
    trace = closed_loop(plant, cfg.gains, desired, len(desired) * cfg.controller.dt_s, seed=1, config=cfg.controller)
    m = step_metrics(trace.t, trace.desired, trace.measured, 1.0, along, direction=unit)
    assert m.steady_state_error < 0.05 and m.settled
