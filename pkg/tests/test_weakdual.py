import numpy as np
import pytest

from conftest import eig_for
from fracheat import TimeDependentData, solve_h, weak_phi_residual, weak_psi_residual
from fracheat.weakdual import WeakDualResidual, l1_estimate_check, make_test_functions

OPS = [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)]


def _run(kind, s, n, steps, seed=0):
    eig = eig_for(kind, s, n)
    times = np.linspace(0, 1, steps + 1)
    rng = np.random.default_rng(seed)
    data = TimeDependentData(rng.random(n), np.outer(1 + times, rng.random(n)),
                             np.outer(2 - times, rng.random(2)), times)
    return eig, data, solve_h(eig, eig.gamma, data, times)


def test_relative_residual_uses_precancellation_scale():
    r = WeakDualResidual(1e-6, 2e-6, 1.0)
    assert r.residual == pytest.approx(1e-6)
    assert r.relative == pytest.approx(1e-6)
    assert WeakDualResidual(0.0, 0.0, 0.0).relative == 0.0


@pytest.mark.parametrize("kind, s", OPS)
def test_ground_state_residual_is_second_order_in_time(kind, s):
    res = []
    for steps in (50, 100):
        eig, data, traj = _run(kind, s, 64, steps)
        res.append(weak_phi_residual(eig, eig.gamma, traj, data, eig.phi1).residual)
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.1)


@pytest.mark.parametrize("kind, s", OPS)
def test_bank_residuals_small(kind, s):
    eig, data, traj = _run(kind, s, 128, 200)
    bank = make_test_functions(eig, eig.gamma)
    assert {"phi1", "chi_left_phi1", "chi_band_phi1", "sign0_phi1", "bump0_delta"} <= set(bank)
    worst = max(weak_phi_residual(eig, eig.gamma, traj, data, phi, name).relative
                for name, phi in bank.items())
    assert worst < 5e-3


@pytest.mark.parametrize("kind, s", OPS)
def test_psi_form_relation_and_residual(kind, s):
    eig, data, traj = _run(kind, s, 64, 100)
    t = traj.times
    psi = np.outer(1 - t, eig.phi1) + np.outer((1 - t) * t, eig.grid.delta ** eig.gamma)
    r = weak_psi_residual(eig, eig.gamma, traj, data, psi, "smooth")
    assert r.relation_error < 1e-10
    assert r.relative < 1e-2


def test_psi_must_vanish_at_final_time():
    eig, data, traj = _run("sfl", 0.5, 32, 10)
    with pytest.raises(ValueError, match="vanish"):
        weak_psi_residual(eig, 1.0, traj, data, np.ones((11, 32)))
    with pytest.raises(ValueError):
        weak_psi_residual(eig, 1.0, traj, data, np.zeros((10, 32)))


def test_time_dependent_test_function_shape_checked():
    eig, data, traj = _run("sfl", 0.5, 32, 10)
    with pytest.raises(ValueError):
        weak_phi_residual(eig, 1.0, traj, data, np.ones((5, 32)))
    tab = np.outer(np.linspace(1, 2, 11), eig.phi1)
    assert weak_phi_residual(eig, 1.0, traj, data, tab).relative < 1e-2


@pytest.mark.parametrize("kind, s", OPS)
def test_l1_estimate_constants_bounded(kind, s):
    eig, data, traj = _run(kind, s, 64, 100)
    rep = l1_estimate_check(eig, eig.gamma, traj, data)
    assert 0 < rep.constant < 1
    assert 0 < rep.constant_phi1 < 1
