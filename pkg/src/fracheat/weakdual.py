"""Residuals of the weak-dual identities for computed trajectories."""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .evolution import TimeDependentData, _evolve, integrate_modes
from .green import trace_matrix


@dataclass
class WeakDualResidual:
    """lhs and rhs of a weak identity.

    ``scale`` is the size of the integrals before cancellation (the same
    integrals with every integrand replaced by its absolute value); the
    relative residual divides by it so that sign-changing test functions,
    whose two sides nearly vanish, are not over-penalised.
    """

    lhs: float
    rhs: float
    scale: float
    descriptor: str = ""
    unconverged_traces: int = 0
    relation_error: float | None = None

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def relative(self):
        scale = max(abs(self.lhs), abs(self.rhs), self.scale)
        return self.residual / scale if scale > 0 else 0.0


def _as_series(values, times, n):
    """Tabulate a test function on ``times``: constant (N,) or (K+1, N) already on times."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return np.broadcast_to(values, (len(times), n))
    if values.shape != (len(times), n):
        raise ValueError(f"time-dependent test data must have shape ({len(times)}, {n})")
    return values


def _data_series(data, times, grid):
    n, b = grid.size, len(grid.boundary_weights)
    f = np.zeros((len(times), n)) if data.f is None else np.array([data.f_at(t) for t in times])
    h = np.zeros((len(times), b)) if data.h is None else np.array([data.h_at(t) for t in times])
    return f, h


def weak_phi_residual(eig, gamma, traj, data, phi, descriptor=""):
    """Both sides of the phi-form of the weak-dual identity on [0, T], T = traj.times[-1].

    lhs = int int u(t) phi(T - t)
    rhs = int u0 H[0,phi,0](T) + int int f(t) H[0,phi,0](T - t)
          + int sum_zeta h(t) D_gamma H[0,phi,0](T - t)
    ``phi`` is one Field (time-independent) or an array tabulated on traj.times
    (phi[j] is phi at time traj.times[j]).  Time integrals use the trapezoid
    rule on the trajectory grid.
    """
    grid = eig.grid
    t = traj.times
    if abs(t[0]) > 1e-14:
        raise ValueError("trajectory must start at t = 0")
    big_t = t[-1]
    rev = big_t - t[::-1]  # ascending times at which H[0,phi,0] is needed
    phi_tab = _as_series(phi, t, grid.size)
    # phi(T - t_j) sits at index K - j on a symmetric grid; interpolate otherwise
    if np.allclose(rev, t):
        phi_rev = phi_tab[::-1]
    else:
        phi_rev = np.array([[np.interp(big_t - tj, t, col) for col in phi_tab.T] for tj in t])
    phi_data = TimeDependentData(np.zeros(grid.size), f=np.ascontiguousarray(phi_tab), times=t)
    _, coef, _ = _evolve(eig, gamma, phi_data, rev)
    h_phi = (coef @ eig.phi.T)[::-1]  # h_phi[j] = H[0,phi,0](T - t_j)
    w = grid.weights
    u = traj.values
    lhs = trapezoid(np.einsum("jn,jn->j", u * w, phi_rev), t)
    lhs_abs = trapezoid(np.einsum("jn,jn->j", np.abs(u) * w, np.abs(phi_rev)), t)
    f, h = _data_series(data, t, grid)
    dtr = (trace_matrix(grid, gamma) @ h_phi.T).T
    sigma = grid.boundary_weights
    parts = [
        (grid.inner(data.u0, h_phi[0]), grid.inner(np.abs(data.u0), np.abs(h_phi[0]))),
        (trapezoid(np.einsum("jn,jn->j", f * w, h_phi), t),
         trapezoid(np.einsum("jn,jn->j", np.abs(f) * w, np.abs(h_phi)), t)),
        (trapezoid(np.einsum("jb,jb->j", h * sigma, dtr), t),
         trapezoid(np.einsum("jb,jb->j", np.abs(h) * sigma, np.abs(dtr)), t)),
    ]
    rhs = sum(p[0] for p in parts)
    scale = max(lhs_abs, sum(p[1] for p in parts))
    bad = traj.meta.get("unconverged_traces", 0)
    return WeakDualResidual(float(lhs), float(rhs), float(scale), descriptor, bad)


def phi_from_psi(eig, psi_coef, times):
    """Segment endpoint coefficients of phi(sigma) = -G[psi'(T - sigma)] + psi(T - sigma).

    ``psi_coef`` (K+1, M) holds <psi(t_j), phi_m> on ``times``; psi is linear
    per segment, so phi is linear per segment with jumps at the knots.
    Returns knots in sigma and (g_start, g_end) on those knots.
    """
    big_t = times[-1]
    slopes = np.diff(psi_coef, axis=0) / np.diff(times)[:, None]
    lam = eig.lam
    # sigma segment i = [T - t_{K-i}, T - t_{K-i-1}] maps to t segment K-1-i, traversed backwards
    knots = big_t - times[::-1]
    seg = slopes[::-1]
    start = -seg / lam + psi_coef[::-1][:-1]
    end = -seg / lam + psi_coef[::-1][1:]
    return knots, start, end


def weak_psi_residual(eig, gamma, traj, data, psi, descriptor=""):
    """psi-form: int int u (-G[psi_t] + psi) = int u0 G[psi(0)] + int int f G[psi] + int h D_gamma G[psi].

    ``psi`` is tabulated on traj.times with psi(T) = 0.  Also returns, in
    ``relation_error``, the largest per-mode mismatch between H[0,phi,0](T - t)
    and G[psi(t)] for the phi built from psi.
    """
    grid = eig.grid
    t = traj.times
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (len(t), grid.size):
        raise ValueError(f"psi must have shape ({len(t)}, {grid.size})")
    if np.abs(psi[-1]).max() > 1e-12 * max(np.abs(psi).max(), 1.0):
        raise ValueError("psi must vanish at the final time")
    lam = eig.lam
    c_psi = eig.coefficients(psi.T).T
    slope = np.diff(c_psi, axis=0) / np.diff(t)[:, None]
    g_psi = c_psi / lam  # coefficients of G[psi(t_j)]
    w = grid.weights
    # integrand on segment j uses the segment slope at both ends
    test_lo = eig.synthesize((-slope / lam + c_psi[:-1]).T).T
    test_hi = eig.synthesize((-slope / lam + c_psi[1:]).T).T
    u = traj.values
    dt = np.diff(t)
    lhs = float(np.sum(0.5 * dt * (np.einsum("jn,jn->j", u[:-1] * w, test_lo)
                                   + np.einsum("jn,jn->j", u[1:] * w, test_hi))))
    lhs_abs = float(np.sum(0.5 * dt * (np.einsum("jn,jn->j", np.abs(u[:-1]) * w, np.abs(test_lo))
                                       + np.einsum("jn,jn->j", np.abs(u[1:]) * w, np.abs(test_hi)))))
    gpsi = g_psi @ eig.phi.T
    f, h = _data_series(data, t, grid)
    dtr = (trace_matrix(grid, gamma) @ gpsi.T).T
    sigma = grid.boundary_weights
    rhs = grid.inner(data.u0, gpsi[0])
    rhs += trapezoid(np.einsum("jn,jn->j", f * w, gpsi), t)
    rhs += trapezoid(np.einsum("jb,jb->j", h * sigma, dtr), t)
    rhs_abs = grid.inner(np.abs(data.u0), np.abs(gpsi[0]))
    rhs_abs += trapezoid(np.einsum("jn,jn->j", np.abs(f) * w, np.abs(gpsi)), t)
    rhs_abs += trapezoid(np.einsum("jb,jb->j", np.abs(h) * sigma, np.abs(dtr)), t)
    knots, gs, ge = phi_from_psi(eig, c_psi, t)
    h_phi = integrate_modes(lam, np.zeros(len(lam)), knots, gs, ge, knots)  # at sigma = T - t_{K-i}
    target = g_psi[::-1]
    scale = max(np.abs(target).max(), 1e-300)
    rel = float(np.abs(h_phi - target).max() / scale)
    bad = traj.meta.get("unconverged_traces", 0)
    return WeakDualResidual(float(lhs), float(rhs), float(max(lhs_abs, rhs_abs)), descriptor, bad, rel)


@dataclass
class L1EstimateReport:
    lhs: float
    rhs: float
    constant: float
    lhs_phi1: float
    rhs_phi1: float
    constant_phi1: float


def l1_estimate_check(eig, gamma, traj, data):
    """Realized constant in int int |u| delta^gamma <= C (int |u0| delta^gamma + int int |f| delta^gamma + int int |h|).

    Also reports the same ratio with the weight phi_1 in place of delta^gamma
    and |D_gamma phi_1| on the boundary, the quantities produced by testing
    against sign(u) phi_1.
    """
    grid = eig.grid
    t = traj.times
    w = grid.weights
    dg = grid.delta ** gamma
    f, h = _data_series(data, t, grid)
    lhs = trapezoid((np.abs(traj.values) * (w * dg)).sum(axis=1), t)
    rhs = grid.l1(data.u0, dg) + trapezoid((np.abs(f) * (w * dg)).sum(axis=1), t)
    rhs += trapezoid((np.abs(h) * grid.boundary_weights).sum(axis=1), t)
    p1 = eig.phi1
    dp1 = np.abs(trace_matrix(grid, gamma) @ p1)
    lhs1 = trapezoid((np.abs(traj.values) * (w * p1)).sum(axis=1), t)
    rhs1 = grid.l1(data.u0, p1) + trapezoid((np.abs(f) * (w * p1)).sum(axis=1), t)
    rhs1 += trapezoid((np.abs(h) * (grid.boundary_weights * dp1)).sum(axis=1), t)

    def ratio(a, b):
        return float(a / b) if b > 0 else 0.0

    return L1EstimateReport(float(lhs), float(rhs), ratio(lhs, rhs), float(lhs1), float(rhs1), ratio(lhs1, rhs1))


def make_test_functions(eig, gamma, n_random=4, seed=0):
    """Named test functions: phi_1, sign patterns times phi_1, chi_A phi_1, bumps times delta^gamma."""
    grid = eig.grid
    rng = np.random.default_rng(seed)
    p1 = eig.phi1
    bank = {"phi1": p1.copy()}
    for i in range(n_random):
        sign = np.where(rng.random(grid.size) < 0.5, -1.0, 1.0)
        bank[f"sign{i}_phi1"] = sign * p1
    x = grid.nodes[:, 0]
    bank["chi_left_phi1"] = np.where(x < 0.5, p1, 0.0)
    bank["chi_band_phi1"] = np.where(grid.delta < 0.1, p1, 0.0)
    dg = grid.delta ** gamma
    for i in range(n_random):
        c = grid.nodes[rng.integers(grid.size)]
        r2 = ((grid.nodes - c) ** 2).sum(axis=1)
        bank[f"bump{i}_delta"] = np.exp(-r2 / 0.02) * dg
    return bank
