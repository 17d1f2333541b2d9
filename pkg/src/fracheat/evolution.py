"""The solution map H[u0, f, h] built from eigen-series with exact time integration.

Each mode obeys c' = -lambda c + g(t), where g collects <f(t), phi_m> and the
boundary pairing sum_zeta sigma_zeta D_gamma phi_m(zeta) h(t, zeta).  Data are
piecewise linear in time, so every segment is integrated in closed form.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .green import dgamma_trace, green_apply, martin_apply, martin_kernel, trace_matrix

_SMALL = 1e-2


def _phi_functions(x):
    """(1 - e^{-x})/x and (1 - (1 - e^{-x})/x)/x, stable for small x."""
    x = np.asarray(x, dtype=float)
    small = x < _SMALL
    xs = np.where(small, 1.0, x)
    p1 = np.where(small, 1 - x / 2 + x ** 2 / 6 - x ** 3 / 24 + x ** 4 / 120, -np.expm1(-xs) / xs)
    p2 = np.where(small, 0.5 - x / 6 + x ** 2 / 24 - x ** 3 / 120 + x ** 4 / 720, (1 - p1) / xs)
    return p1, p2


def segment_weights(lam, tau):
    """(A, B) with int_0^tau e^{-lam (tau - r)} g(r) dr = A g(0) + B g(tau) for linear g."""
    p1, p2 = _phi_functions(lam * tau)
    return tau * (p1 - p2), tau * p2


def integrate_modes(lam, c0, knots, g_start, g_end, times):
    """Solve c' = -lam c + g exactly for piecewise-linear g.

    ``g_start[j]``/``g_end[j]`` are the forcing values at the two ends of
    segment [knots[j], knots[j+1]] (so jumps at knots are allowed).  Returns
    c at every entry of ``times`` (each within [knots[0], knots[-1]]).
    """
    knots = np.asarray(knots, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.min() < knots[0] - 1e-12 or times.max() > knots[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError(f"requested times outside the data range [{knots[0]}, {knots[-1]}]")
    c_knots = np.empty((len(knots), len(lam)))
    c_knots[0] = c0
    dt = np.diff(knots)
    for j, tau in enumerate(dt):
        a, b = segment_weights(lam, tau)
        c_knots[j + 1] = np.exp(-lam * tau) * c_knots[j] + a * g_start[j] + b * g_end[j]
    seg = np.clip(np.searchsorted(knots, times, side="right") - 1, 0, len(dt) - 1)
    out = np.empty((len(times), len(lam)))
    for i, (t, j) in enumerate(zip(times, seg)):
        tau = t - knots[j]
        if tau <= 0:
            out[i] = c_knots[j]
            continue
        if tau >= dt[j]:
            out[i] = c_knots[j + 1]
            continue
        frac = tau / dt[j]
        g_t = (1 - frac) * g_start[j] + frac * g_end[j]
        a, b = segment_weights(lam, tau)
        out[i] = np.exp(-lam * tau) * c_knots[j] + a * g_start[j] + b * g_t
    return out


@dataclass
class TimeDependentData:
    """u0 plus f and h tabulated on ``times`` and linear in between.

    ``times=None`` means time-independent data valid for every t >= 0; then
    ``f`` has shape (N,) and ``h`` shape (B,).
    """

    u0: np.ndarray
    f: np.ndarray | None = None
    h: np.ndarray | None = None
    times: np.ndarray | None = None

    @property
    def constant(self):
        return self.times is None

    def f_at(self, t):
        if self.f is None:
            return None
        if self.constant:
            return self.f
        return np.array([np.interp(t, self.times, col) for col in self.f.T])

    def h_at(self, t):
        if self.h is None:
            return None
        if self.constant:
            return self.h
        return np.array([np.interp(t, self.times, col) for col in self.h.T])

    def validate(self, grid):
        n, b = grid.size, len(grid.boundary_weights)
        if self.u0.shape != (n,):
            raise ValueError(f"u0 must have shape ({n},)")
        if self.constant:
            if self.f is not None and self.f.shape != (n,):
                raise ValueError(f"time-independent f must have shape ({n},)")
            if self.h is not None and self.h.shape != (b,):
                raise ValueError(f"time-independent h must have shape ({b},)")
        else:
            k = len(self.times)
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("data times must be strictly increasing")
            if self.f is not None and self.f.shape != (k, n):
                raise ValueError(f"f must have shape ({k}, {n})")
            if self.h is not None and self.h.shape != (k, b):
                raise ValueError(f"h must have shape ({k}, {b})")
        for name in ("u0", "f", "h"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        return self


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    coefficients: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, t):
        """Linear interpolation in time between stored fields."""
        j = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        frac = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return (1 - frac) * self.values[j] + frac * self.values[j + 1]


def boundary_pairing(eig, gamma):
    """B x M matrix sigma_zeta D_gamma phi_m(zeta), and trace convergence flags."""
    tr = dgamma_trace(eig.phi, gamma, eig.grid)
    return eig.grid.boundary_weights[:, None] * tr.values, tr.converged


def _forcing(eig, gamma, data):
    """Mode forcing on the data knots: (knots, g_start, g_end, unconverged trace count)."""
    m = eig.modes
    bad = 0
    if data.constant:
        g = np.zeros(m)
        if data.f is not None:
            g = g + eig.coefficients(data.f)
        if data.h is not None:
            pair, conv = boundary_pairing(eig, gamma)
            g = g + data.h @ pair
            bad = int((~conv[np.abs(data.h) > 0]).sum())
        return None, g, g, bad
    g = np.zeros((len(data.times), m))
    if data.f is not None:
        g += eig.coefficients(data.f.T).T
    if data.h is not None:
        pair, conv = boundary_pairing(eig, gamma)
        g += data.h @ pair
        bad = int((~conv[np.abs(data.h).max(axis=0) > 0]).sum())
    return data.times, g[:-1], g[1:], bad


def _evolve(eig, gamma, data, times):
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    c0 = eig.coefficients(data.u0)
    knots, gs, ge, bad = _forcing(eig, gamma, data)
    lam = eig.lam
    if knots is None:
        # constant forcing: c(t) = e^{-lam t} c0 + (1 - e^{-lam t}) g / lam
        e = np.exp(-lam[None, :] * times[:, None])
        p1, _ = _phi_functions(lam[None, :] * times[:, None])
        coef = e * c0[None, :] + times[:, None] * p1 * gs[None, :]
    else:
        coef = integrate_modes(lam, c0, knots, gs, ge, times)
    return times, coef, bad


def solve_h(eig, gamma, data, times):
    """H[u0, f, h](t) = S(t)u0 + Duhamel(f) + boundary Duhamel(h) at each requested time."""
    data.validate(eig.grid)
    times, coef, bad = _evolve(eig, gamma, data, times)
    if np.any(np.diff(times) <= 0):
        raise ValueError("output times must be strictly increasing")
    values = coef @ eig.phi.T
    meta = {"kind": str(eig.kind.value), "s": eig.s, "gamma": gamma, "modes": eig.modes,
            "unconverged_traces": bad}
    return Trajectory(times, values, coef, meta)


def _single_time(eig, gamma, data, t):
    _, coef, _ = _evolve(eig, gamma, data, [t])
    return eig.synthesize(coef[0])


def duhamel(eig, f, t, times=None):
    """int_0^t S(t - sigma) f(sigma) d sigma.

    ``f`` is either one Field (time-independent) or an array (K+1, N)
    tabulated on ``times``.
    """
    f = np.asarray(f, dtype=float)
    zero = np.zeros(eig.grid.size)
    data = TimeDependentData(zero, f=f, times=None if times is None else np.asarray(times, float))
    return _single_time(eig, eig.gamma, data, t)


def boundary_duhamel(eig, gamma, h, t, times=None):
    """int_0^t sum_zeta sigma_zeta D_gamma S(t - sigma, zeta, .) h(sigma, zeta) d sigma."""
    if t < 0:
        raise ValueError("t must be non-negative")
    h = np.asarray(h, dtype=float)
    zero = np.zeros(eig.grid.size)
    if times is None:
        h = np.broadcast_to(h, (len(eig.grid.boundary_weights),)).copy()
    data = TimeDependentData(zero, h=h, times=None if times is None else np.asarray(times, float))
    return _single_time(eig, gamma, data, t)


def concentration_sequence(grid, gamma, h, j):
    """f_j = (|boundary| / |A_j|) chi_{A_j} delta^{-gamma} h(t, P(x)), A_j = {1/j <= delta <= 2/j}.

    ``h`` is (B,) or (K+1, B); the result has the matching time layout.
    """
    band = (grid.delta >= 1.0 / j - 1e-12) & (grid.delta <= 2.0 / j + 1e-12)
    if not band.any():
        raise ValueError(f"j = {j}: the band 1/j <= delta <= 2/j holds no grid node")
    if grid.dim == 1 and not ((band & (grid.nodes[:, 0] < 0.5)).any()
                              and (band & (grid.nodes[:, 0] > 0.5)).any()):
        raise ValueError(f"j = {j}: the band misses a boundary point")
    area = float(grid.weights[band].sum())
    proj = grid.nearest_boundary()
    h = np.asarray(h, dtype=float)
    scale = np.where(band, grid.boundary_measure / area / grid.delta ** gamma, 0.0)
    if h.ndim == 1:
        return scale * h[proj]
    return scale[None, :] * h[:, proj]


@dataclass
class DecayReport:
    times: np.ndarray
    errors: np.ndarray
    slope: float
    lambda1: float
    passed: bool


def elliptic_limit_check(eig, gamma, u0, f, h, t_grid, rel_tol=0.05, floor=1e-12):
    """Decay rate of ||(H[u0, f, h](t) - G[f] - M[h]) delta^gamma||_1 against lambda_1."""
    grid = eig.grid
    n, b = grid.size, len(grid.boundary_weights)
    f = np.zeros(n) if f is None else np.asarray(f, dtype=float)
    h = np.zeros(b) if h is None else np.broadcast_to(np.asarray(h, dtype=float), (b,)).copy()
    steady = green_apply(eig, f) + martin_apply(martin_kernel(eig, gamma), h)
    traj = solve_h(eig, gamma, TimeDependentData(np.asarray(u0, float), f, h), t_grid)
    dg = grid.delta ** gamma
    err = np.array([grid.l1(v - steady, dg) for v in traj.values])
    scale = max(grid.l1(steady, dg), grid.l1(np.asarray(u0, float), dg), 1e-300)
    use = err > floor * scale
    if use.sum() < 2:
        return DecayReport(traj.times, err, float("nan"), eig.lambda1, True)
    slope = float(np.polyfit(traj.times[use], np.log(err[use]), 1)[0])
    passed = abs(slope + eig.lambda1) <= rel_tol * eig.lambda1
    return DecayReport(traj.times, err, slope, eig.lambda1, bool(passed))


def _window_integral(traj, weight, t0, t1, mask):
    grid_t = traj.times
    inner = grid_t[(grid_t > t0) & (grid_t < t1)]
    ts = np.concatenate([[t0], inner, [t1]])
    vals = np.array([(np.abs(traj.at(t))[mask] * weight[mask]).sum() for t in ts])
    return float(trapezoid(vals, ts))


def uniform_integrability_probe(traj, grid, gamma, t0, h_window, subset):
    """int_{t0}^{t0 + h_window} int_A |H| delta^gamma for a boolean node mask A."""
    if t0 < traj.times[0] or t0 + h_window > traj.times[-1] + 1e-12:
        raise ValueError("window lies outside the trajectory")
    mask = np.asarray(subset, dtype=bool)
    if not mask.any():
        return 0.0
    weight = grid.weights * grid.delta ** gamma
    return _window_integral(traj, weight, t0, t0 + h_window, mask)


@dataclass
class IntegrabilityReport:
    windows: np.ndarray
    values: np.ndarray
    window_exponent: float
    set_sizes: np.ndarray
    set_values: np.ndarray
    set_exponent: float


def integrability_scaling(traj, grid, gamma, t0, windows, subsets):
    """Fitted exponents of the space-time integral in the window length and |A|."""
    full = np.ones(grid.size, dtype=bool)
    wv = np.array([uniform_integrability_probe(traj, grid, gamma, t0, w, full) for w in windows])
    sizes = np.array([grid.weights[np.asarray(a, bool)].sum() for a in subsets])
    w_max = max(windows)
    sv = np.array([uniform_integrability_probe(traj, grid, gamma, t0, w_max, a) for a in subsets])
    we = float(np.polyfit(np.log(windows), np.log(wv), 1)[0])
    ok = (sv > 0) & (sizes > 0)
    se = float(np.polyfit(np.log(sizes[ok]), np.log(sv[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return IntegrabilityReport(np.asarray(windows, float), wv, we, sizes, sv, se)


def energy_estimate_gap(eig, data, t, n_quad=400):
    """e^{-lambda_1 t}||u0||^2 + int_0^t ||f||^2 - ||H[u0, f, 0](t)||^2 (non-negative when it holds)."""
    grid = eig.grid
    u = _single_time(eig, eig.gamma, TimeDependentData(data.u0, data.f, None, data.times), t)
    if data.f is None:
        forcing = 0.0
    elif data.constant:
        forcing = t * grid.inner(data.f, data.f)
    else:
        ts = np.linspace(0, t, n_quad)
        vals = [grid.inner(data.f_at(s), data.f_at(s)) for s in ts]
        forcing = float(trapezoid(vals, ts))
    return np.exp(-eig.lambda1 * t) * grid.inner(data.u0, data.u0) + forcing - grid.inner(u, u)


def trace_bound_constant(eig, gamma, phi, t):
    """Ratios ||H[0,phi,0](t)/delta^gamma||_inf and ||D_gamma H[0,phi,0](t)||_inf over
    int_0^t e^{-lambda_1 s} ds ||phi/delta^gamma||_inf."""
    grid = eig.grid
    v = duhamel(eig, phi, t)
    dg = grid.delta ** gamma
    denom = (-np.expm1(-eig.lambda1 * t) / eig.lambda1) * np.abs(phi / dg).max()
    interior = np.abs(v / dg).max() / denom
    boundary = np.abs(trace_matrix(grid, gamma) @ v).max() / denom
    return float(interior), float(boundary)
