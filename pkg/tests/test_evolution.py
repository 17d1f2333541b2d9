import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conftest import eig_for
from fracheat import (TimeDependentData, build_grid, concentration_sequence, duhamel,
                      elliptic_limit_check, martin_kernel, solve_h, u_star)
from fracheat.evolution import (boundary_duhamel, boundary_pairing, energy_estimate_gap,
                                integrability_scaling, integrate_modes, segment_weights,
                                trace_bound_constant, uniform_integrability_probe)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(1e-4, 1e4), tau=st.floats(1e-4, 1.0))
def test_segment_weights_match_quadrature(lam, tau):
    a, b = segment_weights(np.array([lam]), tau)
    qa, _ = integrate.quad(lambda r: np.exp(-lam * (tau - r)) * (1 - r / tau), 0, tau, epsabs=1e-14)
    qb, _ = integrate.quad(lambda r: np.exp(-lam * (tau - r)) * r / tau, 0, tau, epsabs=1e-14)
    assert a[0] == pytest.approx(qa, rel=1e-8, abs=1e-14)
    assert b[0] == pytest.approx(qb, rel=1e-8, abs=1e-14)


def test_integrate_modes_with_jumps_against_ode_solver():
    lam = np.array([0.5, 3.0])
    knots = np.array([0.0, 0.4, 1.0])
    gs = np.array([[1.0, -2.0], [3.0, 0.5]])
    ge = np.array([[2.0, 0.0], [-1.0, 1.5]])

    def rhs(t, c):
        j = 0 if t < 0.4 else 1
        frac = (t - knots[j]) / (knots[j + 1] - knots[j])
        return -lam * c + (1 - frac) * gs[j] + frac * ge[j]

    times = np.array([0.2, 0.4, 0.7, 1.0])
    got = integrate_modes(lam, np.array([1.0, 1.0]), knots, gs, ge, times)
    sol = integrate.solve_ivp(rhs, (0, 1), [1.0, 1.0], t_eval=times, rtol=1e-11, atol=1e-13,
                              max_step=0.01)
    np.testing.assert_allclose(got, sol.y.T, atol=1e-8)
    with pytest.raises(ValueError):
        integrate_modes(lam, np.zeros(2), knots, gs, ge, [1.5])


def _backward_euler(a, u0, f_of_t, t_end, dt):
    n = len(u0)
    m = np.eye(n) + dt * a
    u = u0.copy()
    for j in range(1, int(round(t_end / dt)) + 1):
        u = np.linalg.solve(m, u + dt * f_of_t(j * dt))
    return u


@pytest.mark.parametrize("kind, s", [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)])
def test_solution_agrees_with_backward_euler(kind, s):
    eig = eig_for(kind, s, 32)
    rng = np.random.default_rng(4)
    times = np.linspace(0, 0.5, 11)
    u0, f0, f1 = rng.random(32), rng.random(32), rng.random(32)
    f = f0[None, :] + np.outer(times, f1)
    traj = solve_h(eig, eig.gamma, TimeDependentData(u0, f, None, times), times)
    ref = _backward_euler(eig.operator.matrix, u0, lambda t: f0 + t * f1, 0.5, 1e-3)
    err = np.abs(traj.values[-1] - ref).max() / np.abs(ref).max()
    assert err < 5e-3


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 99))
def test_solution_map_is_linear(a, b, seed):
    eig = eig_for("rfl", 0.25, 32)
    rng = np.random.default_rng(seed)
    times = np.linspace(0, 1, 6)

    def data():
        return TimeDependentData(rng.random(32), rng.random((6, 32)), rng.random((6, 2)), times)

    d1, d2 = data(), data()
    mix = TimeDependentData(a * d1.u0 + b * d2.u0, a * d1.f + b * d2.f, a * d1.h + b * d2.h, times)
    v1, v2, vm = (solve_h(eig, eig.gamma, d, times).values for d in (d1, d2, mix))
    np.testing.assert_allclose(vm, a * v1 + b * v2, atol=1e-10 * (1 + np.abs(vm).max()))


@pytest.mark.parametrize("kind, s", [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)])
def test_nonnegative_data_give_nonnegative_solution(kind, s):
    eig = eig_for(kind, s, 64)
    rng = np.random.default_rng(5)
    times = np.linspace(0, 1, 21)
    u0, f = rng.random(64), rng.random((21, 64))
    vals = solve_h(eig, eig.gamma, TimeDependentData(u0, f, None, times), times).values
    assert vals.min() >= -1e-10 * vals.max()
    # with boundary data, positivity holds wherever the boundary trace is resolved
    data = TimeDependentData(u0, f, rng.random((21, 2)), times)
    vals = solve_h(eig, eig.gamma, data, times).values
    resolved = martin_kernel(eig).converged.all(axis=1)
    assert resolved.sum() >= 64 - 10
    assert vals[:, resolved].min() >= -1e-10 * vals.max()


@pytest.mark.parametrize("t", [0.05, 0.5, 2.0])
def test_energy_estimate(t):
    eig = eig_for("sfl", 0.5, 64)
    rng = np.random.default_rng(6)
    assert energy_estimate_gap(eig, TimeDependentData(rng.standard_normal(64), rng.standard_normal(64)), t) >= 0
    times = np.linspace(0, t, 9)
    data = TimeDependentData(rng.standard_normal(64), rng.standard_normal((9, 64)), None, times)
    assert energy_estimate_gap(eig, data, t) >= -1e-12


def test_duhamel_of_ground_state_is_exact():
    eig = eig_for("cfl", 0.75, 64)
    for t in (0.1, 1.0):
        exact = -np.expm1(-eig.lambda1 * t) / eig.lambda1 * eig.phi1
        np.testing.assert_allclose(duhamel(eig, eig.phi1, t), exact, rtol=1e-12, atol=1e-14)


def test_boundary_duhamel_converges_to_martin_solution():
    eig = eig_for("sfl", 0.5, 64)
    pair, conv = boundary_pairing(eig, 1.0)
    assert pair.shape == (2, 64) and conv[:, :10].all()
    u = boundary_duhamel(eig, 1.0, 1.0, 50.0)
    np.testing.assert_allclose(u, u_star(eig), rtol=1e-10)
    with pytest.raises(ValueError):
        boundary_duhamel(eig, 1.0, 1.0, -1.0)


def test_data_validation():
    eig = eig_for("sfl", 0.5, 16)
    times = np.linspace(0, 1, 3)
    bad = [
        TimeDependentData(np.zeros(15)),
        TimeDependentData(np.zeros(16), np.zeros(15)),
        TimeDependentData(np.zeros(16), np.zeros((2, 16)), None, times),
        TimeDependentData(np.zeros(16), None, np.zeros((3, 3)), times),
        TimeDependentData(np.full(16, np.nan)),
        TimeDependentData(np.zeros(16), np.zeros((3, 16)), None, np.array([0.0, 0.5, 0.5])),
    ]
    for d in bad:
        with pytest.raises(ValueError):
            solve_h(eig, 1.0, d, times)
    with pytest.raises(ValueError):
        solve_h(eig, 1.0, TimeDependentData(np.zeros(16)), [0.5, 0.2])


def test_trajectory_interpolates_linearly():
    eig = eig_for("sfl", 0.5, 16)
    traj = solve_h(eig, 1.0, TimeDependentData(np.ones(16)), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(traj.at(0.25), 0.5 * (traj.values[0] + traj.values[1]))


def test_concentration_sequence_mass_and_support():
    g = build_grid(1, 64)
    f = concentration_sequence(g, 0.25, np.ones(2), 8)
    band = (g.delta >= 1 / 8) & (g.delta <= 2 / 8)
    assert np.all(f[~band] == 0)
    assert g.inner(f, g.delta ** 0.25) == pytest.approx(g.boundary_measure)
    with pytest.raises(ValueError):
        concentration_sequence(g, 0.25, np.ones(2), 1)
    tab = concentration_sequence(g, 0.25, np.ones((3, 2)), 8)
    assert tab.shape == (3, 64)


def test_elliptic_limit_rate():
    eig = eig_for("rfl", 0.25, 64)
    rng = np.random.default_rng(8)
    rep = elliptic_limit_check(eig, 0.25, rng.random(64), rng.random(64), np.ones(2),
                               np.linspace(5, 10, 11) / eig.lambda1)
    assert rep.passed


def test_integrability_probe_scales_with_window():
    eig = eig_for("sfl", 0.5, 64)
    times = np.linspace(0, 1, 101)
    data = TimeDependentData(np.ones(64), None, np.ones((101, 2)), times)
    traj = solve_h(eig, 1.0, data, times)
    g = eig.grid
    rep = integrability_scaling(traj, g, 1.0, 0.2, [0.01, 0.02, 0.04, 0.08],
                                [g.delta < r for r in (0.05, 0.1, 0.2)])
    assert rep.window_exponent == pytest.approx(1.0, abs=0.1)
    assert rep.set_exponent > 0
    with pytest.raises(ValueError):
        uniform_integrability_probe(traj, g, 1.0, 0.95, 0.1, np.ones(64, bool))


def test_trace_bound_constant_finite():
    eig = eig_for("rfl", 0.25, 64)
    interior, boundary = trace_bound_constant(eig, 0.25, eig.phi1 * eig.grid.delta ** 0.25, 1.0)
    assert 0 < interior < 10 and 0 < boundary < 10
