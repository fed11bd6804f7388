import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skinstretch import elastomer as el

SPRING_ONLY = dict(creep_branches=((), (), ()), hysteresis_operators=((), (), ()))


def run(params, path, dt=0.01):
    state = el.ElastomerState.rest(params)
    out = []
    for d in path:
        state, f, _ = el.step(state, np.asarray(d, dtype=float), dt, params)
        out.append(f)
    return np.array(out), state


def test_linear_spring():
    p = el.ElastomerParams(shear_stiffness_n_per_m=1000.0, normal_stiffness_n_per_m=5000.0, **SPRING_ONLY)
    f, _ = run(p, [[1e-3, -2e-3, 0.5e-3]])
    np.testing.assert_allclose(f[0], [1.0, -2.0, 2.5])


def test_maxwell_branch_relaxes_exponentially():
    k, tau = 500.0, 2.0
    p = el.ElastomerParams(shear_stiffness_n_per_m=1000.0, creep_branches=(((k, tau),), (), ()), hysteresis_operators=((), (), ()))
    dt, d = 0.05, 1e-3
    f, _ = run(p, [[d, 0, 0]] * 200, dt)
    t = np.arange(1, 201) * dt
    want = 1000.0 * d + k * d * np.exp(-t / tau)
    np.testing.assert_allclose(f[:, 0], want, rtol=1e-12)


def test_elasto_slide_loop_gap():
    r, w = 0.1e-3, 800.0
    p = el.ElastomerParams(shear_stiffness_n_per_m=2000.0, creep_branches=((), (), ()), hysteresis_operators=(((r, w),), (), ()))
    up = np.linspace(0, 1e-3, 101)
    down = np.linspace(1e-3, 0, 101)[1:]
    path = np.zeros((201, 3))
    path[:, 0] = np.concatenate([up, down])
    f, _ = run(p, path)
    mid_up, mid_down = f[50, 0], f[150, 0]
    assert mid_up - mid_down == pytest.approx(2 * w * r, rel=1e-9)


def test_loop_dissipates_energy():
    # clockwise loop: positive work done on the elastomer over a cycle
    p = el.ElastomerParams()
    d = 1e-3 * np.sin(np.linspace(0, 2 * np.pi, 401))
    path = np.zeros((401, 3))
    path[:, 0] = d
    f, _ = run(p, path, dt=0.001)
    work = np.sum(0.5 * (f[1:, 0] + f[:-1, 0]) * np.diff(d))
    assert work > 0


def test_small_strain_stiffness():
    p = el.ElastomerParams()
    d = 1e-6
    f = el.quasi_static_force(np.array([d, 0, 0]), p)[0]
    assert f / d == pytest.approx(p.small_strain_stiffness()[0])


def test_magnet_moves_with_coupling_ratio():
    p = el.ElastomerParams(magnet_coupling_ratio=0.5)
    _, _, m = el.step(el.ElastomerState.rest(p), np.array([1e-3, 0, -2e-3]), 0.01, p)
    np.testing.assert_allclose(m, [0.5e-3, 0, -1e-3])


def test_memoryless_drops_history():
    p = el.ElastomerParams().memoryless()
    assert np.all(p._creep_k == 0) and np.all(p._play_w == 0)


@pytest.mark.parametrize("bad", [np.zeros(2), np.array([np.nan, 0, 0]), np.array([6e-3, 0, 0])])
def test_step_rejects_bad_displacement(bad):
    p = el.ElastomerParams()
    with pytest.raises(ValueError):
        el.step(el.ElastomerState.rest(p), bad, 0.01, p)


def test_params_validation():
    with pytest.raises(ValueError):
        el.ElastomerParams(shear_stiffness_n_per_m=0.0)
    with pytest.raises(ValueError):
        el.ElastomerParams(magnet_coupling_ratio=1.5)
    with pytest.raises(ValueError):
        el.ElastomerParams(creep_branches=(((-1.0, 1.0),), (), ()))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2e-3, 2e-3), min_size=5, max_size=40))
def test_slide_force_bounded(seq):
    # each elasto-slide element contributes at most w*r in magnitude
    p = el.ElastomerParams(creep_branches=((), (), ()))
    path = np.zeros((len(seq), 3))
    path[:, 0] = seq
    f, _ = run(p, path)
    bound = np.sum(p._play_w[0] * p._play_r[0])
    assert np.all(np.abs(f[:, 0] - p.spring[0] * path[:, 0]) <= bound + 1e-12)


def test_rest_stays_at_rest():
    p = el.ElastomerParams()
    f, _ = run(p, np.zeros((500, 3)))
    assert np.all(f == 0.0)


def test_pure_spring_3000():
    p = el.ElastomerParams(shear_stiffness_n_per_m=3000.0, **SPRING_ONLY)
    np.testing.assert_allclose(el.quasi_static_force(np.array([1e-3, 0, 0]), p), [3.0, 0, 0], rtol=1e-12)
    f, _ = run(p, [[1e-3, 0, 0]])
    np.testing.assert_allclose(f[0], [3.0, 0, 0], rtol=1e-12)


def test_quasi_static_is_long_horizon_limit():
    # 100 x the slowest time constant
    p = el.ElastomerParams()
    tau_max = max(tau for axis in p.creep_branches for _, tau in axis)
    d = np.array([1.1e-3, -0.6e-3, -0.4e-3])
    dt = 0.5
    f, _ = run(p, [d] * int(100 * tau_max / dt), dt=dt)
    np.testing.assert_allclose(f[-1], el.quasi_static_force(d, p), atol=1e-6)


def test_hysteresis_is_rate_independent():
    p = el.ElastomerParams(creep_branches=((), (), ()))
    path = np.zeros((401, 3))
    path[:, 0] = 1e-3 * np.sin(np.linspace(0, 3 * np.pi, 401))
    coarse, _ = run(p, path, dt=0.01)
    fine, _ = run(p, path, dt=0.005)
    assert np.max(np.abs(coarse - fine)) < 1e-9


def test_creep_monotone_under_held_step():
    p = el.ElastomerParams()
    f, _ = run(p, [[1e-3, 0, 0]] * 3000, dt=0.01)
    assert np.all(np.diff(f[:, 0]) <= 1e-15)
