import numpy as np
import pytest

from conftest import eig_for
from fracheat import envelope, ondiagonal_slope, two_sided_report
from fracheat.kernel_bounds import (CAVEAT, default_branch_time, dgamma_envelope,
                                    dgamma_two_sided_report, distance_to_boundary, hopf_report,
                                    weighted_diagonal_report)

T_GRID = np.geomspace(0.05, 2.0, 8)


def test_distance_to_boundary():
    np.testing.assert_allclose(distance_to_boundary([[0.1, 0.5], [0.7, 0.95]]), [0.1, 0.05])


def test_envelope_rejects_synthetic_and_nonpositive_time():
    with pytest.raises(ValueError):
        envelope("synthetic", 0.5, 0.1, [0.5], [0.5])
    with pytest.raises(ValueError):
        envelope("rfl", 0.5, 0.0, [0.5], [0.5])
    with pytest.raises(ValueError):
        envelope("rfl", 0.5, 5.0, [0.5], [0.5], T=1.0)


def test_envelope_large_time_branch_is_ground_state_shape():
    lo, up = envelope("cfl", 0.75, 3.0, [[0.25]], [[0.5]], lam1=2.0, T=1.0)
    assert lo == pytest.approx(np.exp(-6.0) * 0.25 ** 0.5 * 0.5 ** 0.5)
    assert up == lo
    assert default_branch_time(4.0) == 0.5


def test_rfl_envelope_small_time_shape():
    s, t = 0.5, 1e-4
    lo, _ = envelope("rfl", s, t, [[0.5]], [[0.5]])
    assert lo == pytest.approx(t ** -1)
    far, _ = envelope("rfl", s, t, [[0.3]], [[0.6]])
    assert far == pytest.approx(t ** -1 * (t / 0.3) ** 2)


def test_sfl_envelope_orders_lower_below_upper():
    x = np.random.default_rng(0).random((20, 1))
    y = np.random.default_rng(1).random((20, 1))
    lo, up = envelope("sfl", 0.5, 0.1, x, y, c2=2.0)
    assert np.all(lo <= up)


@pytest.mark.parametrize("kind, s", [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)])
def test_two_sided_report_passes(kind, s):
    rep = two_sided_report(eig_for(kind, s, 64), kind, s, T_GRID)
    assert rep.passed and rep.c_low > 0 and rep.spread <= 1e3
    assert rep.informational == (kind == "cfl")
    assert (rep.note == CAVEAT) == (kind == "cfl")
    if kind == "sfl":
        assert rep.c2 is not None


def test_dgamma_two_sided_report_sfl():
    rep = dgamma_two_sided_report(eig_for("sfl", 0.5, 64), "sfl", 0.5, T_GRID)
    assert rep.passed
    lo, up = dgamma_envelope("sfl", 0.5, 0.1, [[0.0]], [[0.5]], c2=2.0)
    assert lo <= up


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_rfl_ondiagonal_slope(s):
    d = ondiagonal_slope(eig_for("rfl", s, 256), s)
    assert d.within(0.15), (d.slope, d.expected)
    assert d.window[0] < d.window[1]


def test_ondiagonal_slope_needs_a_window():
    with pytest.raises(ValueError):
        ondiagonal_slope(eig_for("rfl", 0.25, 64), 0.25, t_grid=[1.0, 2.0, 3.0])


def test_hopf_factor_finite():
    rep = hopf_report(eig_for("sfl", 0.5, 64))
    assert 0 < rep.ratio_min <= rep.ratio_max
    assert rep.factor < 10


@pytest.mark.parametrize("kind, s", [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)])
def test_fitted_constants_stable_under_refinement(kind, s):
    a, b = (two_sided_report(eig_for(kind, s, n), kind, s, T_GRID) for n in (64, 128))
    assert 0.5 <= b.c_low / a.c_low <= 2
    assert 0.5 <= b.c_up / a.c_up <= 2


@pytest.mark.parametrize("kind, s", [("sfl", 0.5), ("cfl", 0.75)])
def test_weighted_diagonal_grows_like_boundary_scaling(kind, s):
    # the weighted form with t^{-d/2s} misses the extra t^{-gamma/s} from the boundary factors
    eig = eig_for(kind, s, 128)
    rep = weighted_diagonal_report(eig)
    assert rep.informational and not rep.bounded_negative
    assert rep.growth_negative == pytest.approx(-eig.gamma / s, abs=0.15)
    assert rep.growth_positive < rep.growth_negative
