import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import eig_for
from fracheat import (TruncationError, heat_kernel, resolvent_apply, semigroup_apply,
                      submarkov_check, ultracontractivity_check)
from fracheat.semigroup import (chapman_kolmogorov_error, dgamma_heat_kernel,
                                dgamma_heat_kernel_series, green_from_heat, large_time_error_bound,
                                large_time_ratio_error, large_time_threshold, minimum_time,
                                resolvent_check, trace_identity_error)
from fracheat.green import green_kernel

OPS = [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)]


@pytest.mark.parametrize("kind, s", OPS)
def test_semigroup_matches_matrix_exponential(kind, s):
    eig = eig_for(kind, s, 48)
    u = np.random.default_rng(0).standard_normal(48)
    ref = expm(-0.05 * eig.operator.matrix) @ u
    np.testing.assert_allclose(semigroup_apply(eig, u, 0.05), ref, atol=1e-10 * np.abs(ref).max())


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_heat_kernel_needs_positive_time(t):
    with pytest.raises(ValueError, match="t > 0"):
        heat_kernel(eig_for("sfl", 0.5, 32), t)


def test_semigroup_at_zero_is_identity_and_negative_rejected():
    eig = eig_for("sfl", 0.5, 32)
    u = np.arange(32.0)
    np.testing.assert_allclose(semigroup_apply(eig, u, 0.0), u, atol=1e-10)
    with pytest.raises(ValueError):
        semigroup_apply(eig, u, -0.1)


def test_strict_kernel_raises_when_truncated():
    eig = eig_for("sfl", 0.5, 64).with_modes(4)
    with pytest.raises(TruncationError):
        heat_kernel(eig, 1e-3, strict=True)
    assert heat_kernel(eig_for("sfl", 0.5, 64), 1e-3, strict=True).truncation_ok


def test_minimum_time_tracks_modes():
    eig = eig_for("sfl", 0.5, 64)
    assert minimum_time(eig) == 0.0
    t8, t32 = minimum_time(eig.with_modes(8)), minimum_time(eig.with_modes(32))
    assert 0 < t32 < t8 < np.inf


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.01, 1.0), tau=st.floats(0.01, 1.0))
def test_chapman_kolmogorov(t, tau):
    assert chapman_kolmogorov_error(eig_for("rfl", 0.25, 64), t, tau) < 1e-10


@pytest.mark.parametrize("kind, s", OPS)
def test_kernel_positive_and_green_from_heat(kind, s):
    eig = eig_for(kind, s, 64)
    assert heat_kernel(eig, 0.05).values.min() > 0
    np.testing.assert_allclose(green_from_heat(eig, 0.3), green_kernel(eig).values, rtol=1e-10)
    assert trace_identity_error(eig, 0.05) < 1e-10


@pytest.mark.parametrize("kind, s", OPS)
def test_submarkov(kind, s):
    rep = submarkov_check(eig_for(kind, s, 64), [1e-3, 0.1, 1.0])
    assert rep.passed
    assert rep.max_of_s1 < 1


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_resolvent_against_direct_solve(lam):
    eig = eig_for("cfl", 0.75, 64)
    f = np.random.default_rng(2).standard_normal(64)
    # u + lam G[u] = G[f]  <=>  (A + lam) u = f
    ref = np.linalg.solve(eig.operator.matrix + lam * np.eye(64), f)
    np.testing.assert_allclose(resolvent_apply(eig, f, lam), ref, atol=1e-10 * np.abs(ref).max())
    assert resolvent_check(eig, lam).passed
    with pytest.raises(ValueError):
        resolvent_apply(eig, f, 0.0)


def test_ultracontractivity_plain_and_weighted():
    rep = ultracontractivity_check(eig_for("rfl", 0.25, 128), 0.25, 0.25)
    assert rep.passed and rep.c_weighted is not None and rep.note == ""
    cfl = ultracontractivity_check(eig_for("cfl", 0.75, 128), 0.75, 0.5)
    assert cfl.passed and "informational" in cfl.note


def test_large_time_behaviour():
    eig = eig_for("sfl", 0.5, 64)
    big_t = large_time_threshold(eig)
    assert large_time_error_bound(eig, big_t) <= 0.05
    for t in (big_t, 2 * big_t):
        assert large_time_ratio_error(eig, t) <= large_time_error_bound(eig, t) + 1e-12


def test_dgamma_kernel_matches_series():
    eig = eig_for("sfl", 0.5, 64)
    vals, conv = dgamma_heat_kernel(eig, 1.0, 0.1)
    assert conv.all()
    np.testing.assert_allclose(vals, dgamma_heat_kernel_series(eig, 1.0, 0.1), atol=1e-10)
