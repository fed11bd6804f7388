"""Fast oracle checks runnable from the CLI (``skinstretch selftest``).

Each check compares a pipeline stage against an independent closed form
or brute-force computation and returns ``(passed, detail)``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from . import calibration as cal
from . import characterization as ch
from . import elastomer as el
from .actuation import AxisDriveSpec
from .controller import ControllerConfig, LowPassState, PidGains, euler_backward, initial_state, lowpass_step, pid_step
from .plant import SensorModel, simulate_stage
from .response import bode, exp_chirp, spectrum


def check_encoder_resolution():
    res = AxisDriveSpec().resolution_m * 1e6
    return abs(res - 25 / 3) < 1e-9, f"{res:.4f} um per count"


def check_feature_expansion():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(100, 3))
    got = cal.expand_features(u, np.zeros(3), np.ones(3))
    terms = [()]
    for deg in range(1, 4):
        terms += list(itertools.combinations_with_replacement(range(3), deg))
    want = np.array([[math.prod(row[i] for i in t) for t in terms] for row in u])
    return got.shape == (100, 20) and np.array_equal(got, want), f"{got.shape[1]} monomials"


def check_grids():
    g = cal.paper_grid()
    unique = len(np.unique(np.round(g.poses, 12), axis=0))
    test = cal.random_test_grid(45).n_samples
    ok = len(g) == 165 and unique == 165 and g.n_samples == 16500 and test == 4500
    return ok, f"{len(g)} poses, {g.n_samples} training samples, {test} test samples"


def check_euler_backward():
    a = Fraction(2) * Fraction(314159, 100000) * 10 * Fraction(1, 500)
    y = Fraction(0)
    for k in range(1, 51):
        y = euler_backward(y, Fraction(1), a)
        if y != 1 - (1 / (1 + a)) ** k:
            return False, f"mismatch at sample {k}"
    return True, "50 samples exact"


def check_lowpass_attenuation():
    dt, f = 0.002, 10.0
    t = np.arange(5000) * dt
    x = np.sin(2 * np.pi * f * t)
    state, y = LowPassState(10.0, 0.0), np.empty_like(x)
    for i, v in enumerate(x):
        state, y[i] = lowpass_step(state, v, dt)
    gain = np.sqrt(2) * np.std(y[2500:])
    return abs(gain - 1 / np.sqrt(2)) <= 0.02 / np.sqrt(2), f"gain {gain:.4f}"


def check_p_saturation():
    cfg = ControllerConfig(force_cutoff_hz=None, encoder_cutoff_hz=None)
    _, v, _ = pid_step(PidGains((13.2, 12.0), (0.0, 0.0), (0.0, 0.0)), initial_state(cfg), (1.0, -1.0), (0.0, 0.0), cfg.dt_s)
    return bool(np.array_equal(v, [6.0, -6.0])), f"clamped to {v.tolist()} V"


def check_bode_one_pole():
    # y_k = (y_{k-1} + a x_k) / (1 + a), H(z) = a / (1 + a - z^-1)
    dt = 0.002
    a = 2 * np.pi * 10.0 * dt
    _, x = exp_chirp(1.0, 100.0, 10.0, 1.0, 1 / dt)
    y, prev = np.empty_like(x), 0.0
    for i, v in enumerate(x):
        prev = y[i] = (prev + a * v) / (1 + a)
    b = bode(x, y, 1 / dt)
    band = (b.frequencies >= 1) & (b.frequencies <= 50)
    h = a / (1 + a - np.exp(-2j * np.pi * b.frequencies[band] * dt))
    mag_err = np.max(np.abs(b.magnitude_db[band] - 20 * np.log10(np.abs(h))))
    ph_err = np.max(np.abs(b.phase_deg[band] - np.degrees(np.angle(h))))
    return mag_err < 0.5 and ph_err < 3.0, f"max error {mag_err:.3f} dB, {ph_err:.2f} deg"


def check_fft_vs_dft():
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (1, 7, 64, 200, 256):
        x = rng.normal(size=n)
        k = np.arange(n // 2 + 1)[:, None]
        direct = np.exp(-2j * np.pi * k * np.arange(n) / n) @ x
        worst = max(worst, float(np.max(np.abs(spectrum(x, n) - direct)) / max(np.max(np.abs(direct)), 1e-300)))
    return worst < 1e-9, f"max relative deviation {worst:.1e}"


def check_hysteresis_closed_form():
    # spring plus one elasto-slide element driven through a full load cycle;
    # the reading gap at mid-stroke is exactly 2 w r
    r, w, k = 0.2e-3, 2000.0, 3000.0
    params = el.ElastomerParams(
        shear_stiffness_n_per_m=k,
        creep_branches=((), (), ()),
        hysteresis_operators=(((r, w),), (), ()),
    )
    peak = 1.0e-3
    d = np.concatenate([np.linspace(0, peak, 501), np.linspace(peak, 0, 501)[1:]])
    state, f = el.ElastomerState.rest(params), np.empty(len(d))
    for i, v in enumerate(d):
        state, force, _ = el.step(state, np.array([v, 0.0, 0.0]), 0.01, params)
        f[i] = force[0]
    fmax = k * peak + w * r
    reference = d * fmax / peak  # a hysteresis-free sensor along the same stroke
    got = ch.hysteresis_metric((reference[:501], f[:501]), (reference[500:], f[500:]))
    want = 2 * w * r / fmax * 100
    return abs(got - want) <= 1e-6 * want, f"{got:.6f}% vs closed form {want:.6f}%"


def check_creep_analytic():
    k, tau, k0 = 500.0, 8.0, 3000.0
    params = el.ElastomerParams(
        shear_stiffness_n_per_m=k0,
        creep_branches=(((k, tau),), (), ()),
        hysteresis_operators=((), (), ()),
    )
    sensor = SensorModel(elastomer=params, reference_noise_sd_n=0.0)
    d = 1.0e-3
    path = np.zeros((3200, 3))
    path[100:, 0] = d
    trace = simulate_stage(sensor, path, 0.01, seed=0)
    # a sensor that ignores relaxation reads the instantaneous spring force
    custom = np.where(np.arange(3200) >= 100, (k0 + k) * d, 0.0)
    got = ch.creep_metric(trace.t, custom, trace.true_force[:, 0])
    want = k * d * (np.exp(-5.0 / tau) - np.exp(-30.0 / tau))
    return abs(got - want) <= 0.01 * abs(want), f"{got:.5f} N vs analytic {want:.5f} N"


CHECKS = {
    "encoder-resolution": check_encoder_resolution,
    "feature-expansion": check_feature_expansion,
    "calibration-grids": check_grids,
    "euler-backward": check_euler_backward,
    "lowpass-attenuation": check_lowpass_attenuation,
    "p-saturation": check_p_saturation,
    "bode-one-pole": check_bode_one_pole,
    "fft-vs-dft": check_fft_vs_dft,
    "hysteresis-closed-form": check_hysteresis_closed_form,
    "creep-analytic": check_creep_analytic,
}


def run_all() -> list[tuple[str, bool, str]]:
    results = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # report, don't abort the remaining checks
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
