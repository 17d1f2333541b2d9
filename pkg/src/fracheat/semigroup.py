"""Heat semigroup, heat kernel, resolvent and their property checks."""

from dataclasses import dataclass, field

import numpy as np

from .green import dgamma_trace, green_apply, trace_matrix


class TruncationError(RuntimeError):
    """Raised when the mode-truncation tail dominates a requested evaluation."""


def _check_time(t, strict):
    if strict and not t > 0:
        raise ValueError(
            f"t = {t}: the heat kernel exists only for t > 0; S(0) is the identity, "
            "which has no bounded kernel"
        )
    if not strict and t < 0:
        raise ValueError(f"t = {t} < 0")


def semigroup_apply(eig, u0, t):
    _check_time(t, strict=False)
    c = eig.coefficients(u0)
    decay = np.exp(-eig.lam * t)
    return eig.synthesize(c * (decay if c.ndim == 1 else decay[:, None]))


@dataclass(frozen=True, eq=False)
class HeatKernel:
    t: float
    values: np.ndarray
    modes: int
    tail_bound: float
    grid: object

    def apply(self, u):
        return self.values @ (self.grid.weights * u)

    def row_mass(self):
        return self.values @ self.grid.weights

    @property
    def truncation_ok(self):
        return self.tail_bound <= 1e-6 * np.abs(self.values).max()


def heat_kernel(eig, t, strict=False):
    """S(t, x_i, x_j) = sum_k exp(-lambda_k t) phi_k(x_i) phi_k(x_j).

    With ``strict`` a tail bound above 1e-6 of the largest entry raises
    TruncationError instead of returning a flagged kernel.
    """
    _check_time(t, strict=True)
    values = (eig.phi * np.exp(-eig.lam * t)[None, :]) @ eig.phi.T
    values = 0.5 * (values + values.T)
    kern = HeatKernel(float(t), values, eig.modes, eig.tail_bound(t), eig.grid)
    if strict and not kern.truncation_ok:
        raise TruncationError(f"tail bound {kern.tail_bound:.3e} dominates at t = {t}")
    return kern


def minimum_time(eig, t_lo=1e-6, t_hi=10.0):
    """Smallest t (bisection in log t) with tail bound <= 1e-6 sup S(t)."""
    if eig.modes >= len(eig.lambdas):
        return 0.0

    def ok(t):
        return heat_kernel(eig, t).truncation_ok

    if ok(t_lo):
        return t_lo
    if not ok(t_hi):
        return float("inf")
    lo, hi = np.log(t_lo), np.log(t_hi)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(np.exp(mid)) else (mid, hi)
    return float(np.exp(hi))


def chapman_kolmogorov_error(eig, t, tau):
    a = heat_kernel(eig, t).values
    b = heat_kernel(eig, tau).values
    composed = a @ (eig.grid.weights[:, None] * b)
    direct = heat_kernel(eig, t + tau).values
    return float(np.abs(composed - direct).max())


def time_integrated_kernel(eig, t0=0.0, t1=np.inf):
    """int_{t0}^{t1} S(t) dt, exact per mode: (e^{-lambda t0} - e^{-lambda t1}) / lambda."""
    lam = eig.lam
    fac = (np.exp(-lam * t0) - (0.0 if np.isinf(t1) else np.exp(-lam * t1))) / lam
    return (eig.phi * fac[None, :]) @ eig.phi.T


def green_from_heat(eig, t1=1.0):
    """Green kernel assembled as int_0^{t1} S + int_{t1}^inf S."""
    return time_integrated_kernel(eig, 0.0, t1) + time_integrated_kernel(eig, t1, np.inf)


def dgamma_heat_kernel(eig, gamma, t, tol=0.05):
    """D_gamma S(t, zeta, y) by tracing kernel columns; returns (values B x N, converged)."""
    kern = heat_kernel(eig, t)
    tr = dgamma_trace(kern.values, gamma, eig.grid, tol)
    return tr.values, tr.converged


def dgamma_heat_kernel_series(eig, gamma, t):
    """sum_m exp(-lambda_m t) D_gamma phi_m(zeta) phi_m(y)."""
    dphi = trace_matrix(eig.grid, gamma) @ eig.phi
    return (dphi * np.exp(-eig.lam * t)[None, :]) @ eig.phi.T


def trace_identity_error(eig, t):
    """|sum_k exp(-2 lambda_k t) - int int S(t)^2| relative to the sum."""
    w = eig.grid.weights
    s = heat_kernel(eig, t).values
    lhs = float(np.exp(-2 * eig.lam * t).sum())
    rhs = float(w @ (s ** 2) @ w)
    return abs(lhs - rhs) / lhs


@dataclass
class SubMarkovReport:
    t_list: list
    min_of_s1: float
    max_of_s1: float
    random_bounds_ok: bool
    abs_comparison_violation: float
    l1_excess: float
    tol: float
    passed: bool
    details: dict = field(default_factory=dict)


def submarkov_check(eig, t_list, n_random=20, seed=0, tol=1e-8):
    """0 <= S(t)u0 <= 1 for 0 <= u0 <= 1, |S(t)u0| <= S(t)|u0|, and L1 contraction."""
    grid = eig.grid
    rng = np.random.default_rng(seed)
    n = grid.size
    ones = np.ones(n)
    unit = rng.uniform(0, 1, (n, n_random))
    signed = rng.standard_normal((n, n_random))
    lo, hi, ok, viol, excess = np.inf, -np.inf, True, 0.0, -np.inf
    for t in t_list:
        s1 = semigroup_apply(eig, ones, t)
        lo, hi = min(lo, s1.min()), max(hi, s1.max())
        su = semigroup_apply(eig, unit, t)
        ok &= bool(su.min() >= -tol and su.max() <= 1 + tol)
        ss = semigroup_apply(eig, signed, t)
        sa = semigroup_apply(eig, np.abs(signed), t)
        viol = max(viol, float((np.abs(ss) - sa).max()))
        l1_out = grid.weights @ np.abs(ss)
        l1_in = grid.weights @ np.abs(signed)
        excess = max(excess, float((l1_out - l1_in).max()))
    passed = bool(lo >= -tol and hi <= 1 + tol and ok and viol <= tol and excess <= tol)
    return SubMarkovReport(list(t_list), float(lo), float(hi), ok, viol, excess, tol, passed)


@dataclass
class UltracontractivityReport:
    t: np.ndarray
    c_plain: np.ndarray
    c_weighted: np.ndarray | None
    growth_slope_plain: float
    growth_slope_weighted: float | None
    passed: bool
    truncation_flags: np.ndarray
    note: str = ""


def ultracontractivity_check(eig, s, gamma, t_grid=None, slope_tol=0.1):
    """Fit C(t) = sup S t^{d/2s} and, for gamma < 2s, sup S t^{d/(2s-gamma)} / (delta^gamma delta^gamma).

    Pass iff neither curve grows as t decreases: the log-log slope of C(t)
    over the smaller half of the grid is at least -slope_tol.  The weighted
    curve is informational when d <= 2s, where the bound is not expected.
    """
    grid = eig.grid
    d = grid.dim
    if t_grid is None:
        t_grid = 2.0 ** np.arange(-10, 1)
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    dg = grid.delta ** gamma
    c1, c2, flags = [], [], []
    for t in t_grid:
        k = heat_kernel(eig, t)
        flags.append(k.truncation_ok)
        c1.append(k.values.max() * t ** (d / (2 * s)))
        if gamma < 2 * s:
            c2.append((k.values / np.outer(dg, dg)).max() * t ** (d / (2 * s - gamma)))
    c1 = np.array(c1)
    half = max(2, len(t_grid) // 2)
    lt = np.log(t_grid[:half])

    def growth(c):
        # growth as t -> 0 shows up as a negative slope of log C against log t
        return float(np.polyfit(lt, np.log(c[:half]), 1)[0])

    g1 = growth(c1)
    c2 = np.array(c2) if c2 else None
    g2 = growth(c2) if c2 is not None else None
    weighted_applies = c2 is not None and d > 2 * s
    note = "" if c2 is None or weighted_applies else (
        "weighted bound informational: it needs d > 2s")
    passed = g1 >= -slope_tol and (not weighted_applies or g2 >= -slope_tol) and np.all(np.isfinite(c1))
    return UltracontractivityReport(t_grid, c1, c2, g1, g2, bool(passed), np.array(flags), note)


def weighted_decay_rate(eig, u0, t_grid):
    """Fitted -d/dt log ||S(t)u0 delta^gamma||_1 over t_grid."""
    dg = eig.grid.delta ** eig.gamma
    norms = [eig.grid.l1(semigroup_apply(eig, u0, t), dg) for t in t_grid]
    return float(-np.polyfit(t_grid, np.log(norms), 1)[0])


def large_time_error_bound(eig, t):
    """sum_{m>=2} exp((lambda_1 - lambda_m) t) ||phi_m/phi_1||_inf^2.

    Bounds max |S(t)/(exp(-lambda_1 t) phi_1 phi_1) - 1| and decreases in t.
    """
    r = np.abs(eig.phi[:, 1:] / eig.phi1[:, None]).max(axis=0)
    return float(np.sum(np.exp((eig.lam[0] - eig.lam[1:]) * t) * r ** 2))


def large_time_threshold(eig, eps=0.05):
    """Smallest T with large_time_error_bound(T) <= eps (bisection)."""
    lo, hi = 0.0, 1.0 / eig.lambda1
    while large_time_error_bound(eig, hi) > eps:
        hi *= 2
        if hi > 1e8:
            return float("inf")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if large_time_error_bound(eig, mid) <= eps else (mid, hi)
    return hi


def large_time_ratio_error(eig, t):
    s = heat_kernel(eig, t).values
    ref = np.exp(-eig.lambda1 * t) * np.outer(eig.phi1, eig.phi1)
    return float(np.abs(s / ref - 1).max())


def resolvent_apply(eig, f, lam):
    if not lam > 0:
        raise ValueError(f"resolvent parameter must be positive, got {lam}")
    c = eig.coefficients(f)
    fac = 1.0 / (lam + eig.lam)
    return eig.synthesize(c * (fac if c.ndim == 1 else fac[:, None]))


@dataclass
class ResolventReport:
    lam: float
    ratio: float
    bound: float
    green_domination_violation: float
    tol: float
    passed: bool


def resolvent_check(eig, lam, n_random=20, seed=0, tol=1e-6):
    """max over random f of int |J f| phi_1 / int |f| phi_1 against 1/(lam + lambda_1).

    J f solves u + lam G[u] = G[f]; also checks |J f| <= G[|f|] entrywise.
    """
    grid = eig.grid
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((grid.size, n_random))
    f[:, : n_random // 2] = np.abs(f[:, : n_random // 2])
    u = resolvent_apply(eig, f, lam)
    w1 = grid.weights * eig.phi1
    ratio = float(np.max((w1 @ np.abs(u)) / (w1 @ np.abs(f))))
    dom = float((np.abs(u) - green_apply(eig, np.abs(f))).max())
    bound = 1.0 / (lam + eig.lambda1)
    scale = np.abs(u).max()
    passed = ratio <= bound + tol and dom <= tol * max(scale, 1.0)
    return ResolventReport(float(lam), ratio, bound, dom, tol, bool(passed))
