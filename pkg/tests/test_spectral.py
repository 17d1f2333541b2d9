import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import eig_for
from fracheat import (DegenerateSpectrumError, NotAdmissibleError, build_grid, eigendecompose,
                      estimate_sobolev_constant, weyl_check)
from fracheat.grid_ops import DiscreteOperator, OperatorKind
from fracheat.spectral import gram_residual, sobolev_weyl_bound, rayleigh_residual, weyl_constant

# published lambda_1 of the normalised half-Laplacian on (-1, 1), moved to (0, 1)
# (factor 2^{2s} = 2) and divided by the normalising constant C(1, 1/2) = 1/pi
RFL_HALF_LAMBDA1 = 1.1577738836977 * 2 * np.pi


@pytest.mark.parametrize("kind, s", [("rfl", 0.25), ("sfl", 0.5), ("cfl", 0.75)])
def test_eigensystem_is_orthonormal_and_exact(kind, s):
    eig = eig_for(kind, s, 64)
    assert gram_residual(eig) < 1e-10
    assert rayleigh_residual(eig) < 1e-10
    assert np.all(eig.phi1 > 0)
    assert np.all(np.diff(eig.lambdas) >= 0)


def test_sign_convention_largest_entry_positive():
    eig = eig_for("sfl", 0.5, 64)
    idx = np.abs(eig.phis).argmax(axis=0)
    assert np.all(eig.phis[idx[1:], np.arange(1, eig.phis.shape[1])] > 0)


def test_sfl_spectrum_is_power_of_discrete_laplacian():
    eig = eig_for("sfl", 0.5, 64)
    k = np.arange(1, 65)
    h = 1 / 64
    lap = 4 / h ** 2 * np.sin(k * np.pi * h / 2) ** 2
    np.testing.assert_allclose(eig.lambdas, np.sqrt(lap), rtol=1e-11)
    x = eig.grid.nodes[:, 0]
    np.testing.assert_allclose(eig.phi1, np.sqrt(2) * np.sin(np.pi * x), atol=1e-12)


def test_rfl_half_converges_to_published_lambda1():
    errs = [abs(eig_for("rfl", 0.5, n).lambda1 / RFL_HALF_LAMBDA1 - 1) for n in (128, 256)]
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)


def test_degenerate_spectrum_is_rejected():
    g = build_grid(1, 8)
    op = DiscreteOperator(OperatorKind.SYNTHETIC, 0.5, 0.5, np.eye(8), g)
    with pytest.raises(DegenerateSpectrumError):
        eigendecompose(op)


def test_indefinite_operator_is_rejected():
    g = build_grid(1, 8)
    op = DiscreteOperator(OperatorKind.SYNTHETIC, 0.5, 0.5, -np.diag(np.arange(1.0, 9.0)), g)
    with pytest.raises(NotAdmissibleError):
        eigendecompose(op)


def test_nonsymmetric_operator_is_rejected():
    g = build_grid(1, 8)
    a = np.diag(np.arange(1.0, 9.0))
    a[0, 1] = 0.5
    with pytest.raises(NotAdmissibleError):
        eigendecompose(DiscreteOperator(OperatorKind.SYNTHETIC, 0.5, 0.5, a, g))


@pytest.mark.parametrize("kind, s", [("rfl", 0.25), ("sfl", 0.3), ("sfl", 0.7), ("cfl", 0.75)])
def test_weyl_constant_stable_under_refinement(kind, s):
    a, b = (weyl_check(eig_for(kind, s, n), 32) for n in (128, 256))
    assert a.passed and b.passed
    assert b.c == pytest.approx(a.c, rel=0.1)
    assert b.fitted_exponent == pytest.approx(2 * s, rel=0.15)


def test_weyl_report_sobolev_constant():
    eig = eig_for("rfl", 0.25, 128)
    cs = estimate_sobolev_constant(eig, n_random=50)
    rep = weyl_check(eig, 16, sobolev=cs)
    alpha = 2 / (1 - 0.5)
    assert rep.sobolev_constant_bound == pytest.approx(2 * cs ** 2 * np.exp(-2.0))
    assert sobolev_weyl_bound(cs, 4, alpha) == pytest.approx(rep.sobolev_constant_bound * 4 ** 0.5)


def test_sobolev_estimate_stable_and_needs_d_above_2s():
    a, b = (estimate_sobolev_constant(eig_for("rfl", 0.25, n), n_random=100) for n in (128, 256))
    assert a > 0 and b == pytest.approx(a, rel=0.15)
    with pytest.raises(ValueError):
        estimate_sobolev_constant(eig_for("sfl", 0.5, 64))


@settings(max_examples=10, deadline=None)
@given(modes=st.integers(2, 63), t=st.floats(1e-3, 1.0))
def test_tail_bound_vanishes_only_with_all_modes(modes, t):
    eig = eig_for("sfl", 0.5, 64)
    assert eig.tail_bound(t) == 0.0
    cut = eig.with_modes(modes)
    assert cut.tail_bound(t) > 0
    assert cut.tail_bound(2 * t) < cut.tail_bound(t)
    assert weyl_constant(cut, modes) > 0


def test_with_modes_validates():
    eig = eig_for("sfl", 0.5, 64)
    with pytest.raises(ValueError):
        eig.with_modes(0)
    with pytest.raises(ValueError):
        eig.with_modes(65)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_projection_is_idempotent(seed):
    eig = eig_for("rfl", 0.25, 64).with_modes(20)
    u = np.random.default_rng(seed).standard_normal(64)
    p = eig.project(u)
    np.testing.assert_allclose(eig.project(p), p, atol=1e-10)
