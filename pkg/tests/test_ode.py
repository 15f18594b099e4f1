import numpy as np
import pytest

from bifurkit.model import ModelParams, dfe_state, endemic_equilibria
from bifurkit.ode import (IntegrationError, IntegratorSettings, NoCrossingError,
                          Termination, integrate, integrate_with_section)
from bifurkit.systems import model_full_system, model_system


@pytest.fixture
def fig13_params(base_params):
    return ModelParams(beta=1.0, rho=0.15, **base_params)


@pytest.fixture
def fig18_params(base_params):
    return ModelParams(beta=1.4, rho=0.2, **base_params)


def test_region_i_converges_to_dfe(fig13_params):
    sysm = model_system()
    traj = integrate(sysm.rhs, fig13_params, [0.9, 0.1, 0.0], (0.0, 2000.0))
    assert traj.termination is Termination.TIME_REACHED
    assert np.max(np.abs(traj.terminal_state - dfe_state())) < 1e-4


def test_full_system_conservation(fig18_params):
    sysm = model_full_system()
    traj = integrate(sysm.rhs, fig18_params, [0.9, 0.0, 0.1, 0.0], (0.0, 1000.0))
    totals = traj.states.sum(axis=1)
    assert np.max(np.abs(totals - 1.0)) < 1e-8


def test_region_vi_sustained_oscillation(fig18_params):
    # orbit neither settles on an equilibrium nor leaves the simplex
    sysm = model_system()
    traj = integrate(sysm.rhs, fig18_params, [0.9, 0.1, 0.0], (0.0, 5000.0))
    end = traj.terminal_state
    assert np.max(np.abs(end - dfe_state())) > 1e-3
    for e in endemic_equilibria(fig18_params):
        assert np.max(np.abs(end - e.state)) > 1e-3
    tail = traj.states[traj.times > 4000.0]
    assert tail[:, 1].max() - tail[:, 1].min() > 1e-2


def test_reduced_trajectories_stay_in_simplex(fig18_params):
    sysm = model_system()
    traj = integrate(sysm.rhs, fig18_params, [0.9, 0.1, 0.0], (0.0, 1000.0))
    assert traj.states.min() > -1e-8
    assert traj.states.sum(axis=1).max() < 1.0 + 1e-8


def test_circular_field_crossing_times():
    field = lambda p, x: np.array([-x[1], x[0]])
    xs, ts, _ = integrate_with_section(
        field, None, [1.0, 0.0], (0.0, 30.0),
        section=([1.0, 0.0], 0.0), direction=+1, n_crossings=4)
    expected = [np.pi / 2 + 2 * np.pi * k for k in range(4)]
    assert ts == pytest.approx(expected, abs=1e-8)
    for x in xs:
        assert x == pytest.approx([0.0, 1.0], abs=1e-8)


def test_return_times_converge_on_attractor(fig18_params):
    # ride onto the cycle, then measure successive section returns
    sysm = model_system()
    warm = integrate(sysm.rhs, fig18_params, [0.9, 0.1, 0.0], (0.0, 3000.0))
    x0 = warm.terminal_state
    i_mean = warm.states[warm.times > 2000.0, 1].mean()
    xs, ts, _ = integrate_with_section(
        sysm.rhs, fig18_params, x0, (0.0, 4000.0),
        section=([0.0, 1.0, 0.0], i_mean), direction=+1, n_crossings=12)
    gaps = np.diff(ts)
    rel_change = np.abs(np.diff(gaps[-5:])) / gaps[-1]
    assert np.all(rel_change < 1e-4)


def test_no_crossing_error(fig13_params):
    sysm = model_system()
    with pytest.raises(NoCrossingError):
        integrate_with_section(sysm.rhs, fig13_params, [0.9, 0.1, 0.0], (0.0, 500.0),
                               section=([0.0, 1.0, 0.0], 0.5), direction=+1)


def test_tolerance_halving_consistency(fig18_params):
    sysm = model_system()
    loose = IntegratorSettings(rtol=2e-7, atol=2e-9)
    tight = IntegratorSettings(rtol=1e-7, atol=1e-9)
    a = integrate(sysm.rhs, fig18_params, [0.7, 0.2, 0.05], (0.0, 50.0), loose)
    b = integrate(sysm.rhs, fig18_params, [0.7, 0.2, 0.05], (0.0, 50.0), tight)
    assert np.max(np.abs(a.terminal_state - b.terminal_state)) < 10 * 2e-7


def test_time_reversal_returns_to_start(fig18_params):
    sysm = model_system()
    x0 = np.array([0.7, 0.2, 0.05])
    fwd = integrate(sysm.rhs, fig18_params, x0, (0.0, 20.0))
    back = integrate(lambda p, x: -sysm.rhs(p, x), fig18_params,
                     fwd.terminal_state, (0.0, 20.0))
    assert np.max(np.abs(back.terminal_state - x0)) < 1e-6


def test_step_cap_reported():
    field = lambda p, x: -x
    s = IntegratorSettings(max_steps=5)
    traj = integrate(field, None, np.array([1.0]), (0.0, 1e6), s)
    assert traj.termination is Termination.STEP_CAP


def test_nonfinite_state_raises():
    field = lambda p, x: np.array([x[0] ** 2])  # finite-time blow-up
    with pytest.raises(IntegrationError):
        integrate(field, None, np.array([1.0]), (0.0, 10.0))


def test_dense_output_matches_steps(fig18_params):
    sysm = model_system()
    s = IntegratorSettings(dense=True)
    traj = integrate(sysm.rhs, fig18_params, [0.7, 0.2, 0.05], (0.0, 10.0), s)
    for k in (1, len(traj.times) // 2, len(traj.times) - 1):
        assert traj(traj.times[k]) == pytest.approx(traj.states[k], abs=1e-9)


def test_invalid_time_span():
    with pytest.raises(ValueError):
        integrate(lambda p, x: -x, None, np.array([1.0]), (1.0, 0.0))
