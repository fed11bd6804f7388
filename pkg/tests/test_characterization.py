import numpy as np
import pytest

from skinstretch import characterization as ch


def test_hysteresis_zero_for_identical_curves():
    f = np.linspace(0, 4, 50)
    assert ch.hysteresis_metric((f, f), (f[::-1], f[::-1])) == 0.0


def test_hysteresis_known_gap():
    f = np.linspace(0, 4, 41)
    up, down = f - 0.2, f[::-1] + 0.2
    assert ch.hysteresis_metric((f, up), (f[::-1], down)) == pytest.approx(10.0)


def test_hysteresis_negative_loop():
    f = -np.linspace(0, 4, 41)
    assert ch.hysteresis_metric((f, f + 0.2), (f[::-1], f[::-1] - 0.2)) == pytest.approx(10.0)


def test_hysteresis_rejects_flat():
    z = np.zeros(10)
    with pytest.raises(ch.ProtocolError):
        ch.hysteresis_metric((z, z), (z, z))


def test_creep_metric_linear_drift():
    t = np.arange(0, 40, 0.01)
    ref = np.where(t >= 1.0, 3.0, 0.0)
    custom = ref + 0.01 * np.maximum(t - 1.0, 0.0)
    # drift from onset+5 s to onset+30 s
    assert ch.creep_metric(t, custom, ref) == pytest.approx(0.25, rel=1e-6)
    assert ch.creep_metric(t, ref, ref) == 0.0
    assert ch.creep_metric(t, ref, np.zeros_like(t)) == 0.0


def test_creep_metric_short_hold():
    t = np.arange(0, 20, 0.01)
    with pytest.raises(ch.ProtocolError, match="shorter"):
        ch.creep_metric(t, np.ones_like(t), np.ones_like(t))


def test_protocol_validation():
    with pytest.raises(ValueError):
        ch.LoadingProtocol(3, 1e-3)
    with pytest.raises(ValueError):
        ch.LoadingProtocol(0, -1e-3)
    assert ch.default_protocol(2).peak_displacement_m == 0.5e-3
    assert ch.default_protocol(0).preload_z_m == 0.2e-3


def test_report_outputs(tmp_path):
    r = ch.CharacterizationReport(np.array([1.0, 2, 3]), np.array([0.1, 0.2, -0.3]), np.eye(3), -0.25)
    r.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "metric,x,y,z" and lines[-1] == "z_offset_n,,,-0.25"
    assert "torsion about Z" in r.text()


def test_memoryless_plant_has_no_creep(default_model):
    from skinstretch.plant import SensorModel

    for axis in range(3):
        creep, _ = ch.creep_run(SensorModel().memoryless(), default_model, ch.default_protocol(axis), seed=axis)
        assert abs(creep) < 0.02  # reference and magnetometer noise only


def test_zero_tilt_has_no_torsion_error(default_model):
    from skinstretch.plant import SensorModel

    err = ch.torsion_sensitivity(SensorModel(), default_model, 0, angle_deg=0.0, duration_s=4.0)
    assert np.all(np.abs(err) < 0.01)


def test_single_operator_loop_closed_form():
    from skinstretch.selftest import check_hysteresis_closed_form, check_creep_analytic

    assert check_hysteresis_closed_form()[0]
    assert check_creep_analytic()[0]
