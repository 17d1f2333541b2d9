"""Grids on (0,1)^d and dense assembly of the model operators.

All operators act on values at the cell centres of a uniform grid and are
symmetric in the weighted pairing <u, v> = sum_i w_i u_i v_i.  RFL and CFL are
assembled without the normalising constant C(d, s) of the fractional
Laplacian; SFL is the exact spectral power of the finite-difference
Dirichlet Laplacian.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from ._backend import exterior_tail_square, ghost_tail, pair_kernel_matrix


class OperatorKind(str, Enum):
    RFL = "rfl"
    SFL = "sfl"
    CFL = "cfl"
    SYNTHETIC = "synthetic"


class GreenVariant(str, Enum):
    BASELINE = "baseline"
    DISCONTINUOUS = "discontinuous"
    OSCILLATORY_BOUNDARY = "oscillatory_boundary"
    OSCILLATORY_DIAGONAL = "oscillatory_diagonal"


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centred grid on the unit interval or square.

    Boundary nodes sit at the feet of the inward normals through the first
    layer of cells (the two endpoints in d=1, edge midpoints of the boundary
    cells in d=2).  ``stencil[b]`` lists the three interior nodes on the
    inward normal through boundary node ``b``, ordered outward-in, at normal
    distances ``(k + 1/2) h``.
    """

    dim: int
    n: int
    h: float
    nodes: np.ndarray
    weights: np.ndarray
    delta: np.ndarray
    boundary_nodes: np.ndarray
    boundary_weights: np.ndarray
    stencil: np.ndarray

    @property
    def size(self):
        return len(self.weights)

    @property
    def volume(self):
        return float(self.weights.sum())

    @property
    def boundary_measure(self):
        return float(self.boundary_weights.sum())

    def inner(self, u, v):
        return float(np.sum(self.weights * u * v))

    def l1(self, u, weight=None):
        a = np.abs(u) if weight is None else np.abs(u) * weight
        return float(np.sum(self.weights * a))

    def nearest_boundary(self):
        """Index of the nearest boundary node for every interior node (ties -> lowest index)."""
        diff = self.nodes[:, None, :] - self.boundary_nodes[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        return np.argmin(dist, axis=1)


@dataclass(frozen=True)
class WeightedInnerProduct:
    weights: np.ndarray

    def __call__(self, u, v):
        return float(np.sum(self.weights * u * v))

    def norm(self, u):
        return float(np.sqrt(self(u, u)))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    kind: OperatorKind
    s: float
    gamma: float
    matrix: np.ndarray
    grid: Grid
    notes: dict = field(default_factory=dict)

    def apply(self, u):
        return self.matrix @ u

    def symmetry_residual(self):
        wa = self.grid.weights[:, None] * self.matrix
        scale = np.abs(wa).max()
        return float(np.abs(wa - wa.T).max() / scale) if scale > 0 else 0.0


@dataclass(frozen=True, eq=False)
class GreenKernelMatrix:
    """Kernel values G(x_i, x_j); G[f]_i = sum_j w_j G_ij f_j."""

    values: np.ndarray
    grid: Grid
    s: float
    gamma: float
    variant: str = "series"
    notes: dict = field(default_factory=dict)

    def apply(self, f):
        return self.values @ (self.grid.weights * f)

    def symmetry_residual(self):
        scale = np.abs(self.values).max()
        return float(np.abs(self.values - self.values.T).max() / scale) if scale > 0 else 0.0

    def is_symmetric(self, tol=1e-10):
        return self.symmetry_residual() <= tol

    def min_weighted_eigenvalue(self):
        sw = np.sqrt(self.grid.weights)
        m = sw[:, None] * self.values * sw[None, :]
        return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


def build_grid(d, n_per_axis):
    if d not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {d}")
    if n_per_axis < 4:
        raise ValueError(f"need at least 4 cells per axis, got {n_per_axis}")
    n = int(n_per_axis)
    h = 1.0 / n
    x = (np.arange(n) + 0.5) * h
    k = np.arange(3)
    if d == 1:
        nodes = x[:, None]
        delta = np.minimum(x, 1.0 - x)
        boundary = np.array([[0.0], [1.0]])
        bweights = np.ones(2)
        stencil = np.array([k, n - 1 - k])
    else:
        xx, yy = np.meshgrid(x, x, indexing="xy")
        nodes = np.column_stack([xx.ravel(), yy.ravel()])  # index = j*n + i
        delta = np.minimum.reduce([nodes[:, 0], 1 - nodes[:, 0], nodes[:, 1], 1 - nodes[:, 1]])
        i = np.arange(n)
        zeros, ones = np.zeros(n), np.ones(n)
        boundary = np.vstack([
            np.column_stack([x, zeros]),   # bottom
            np.column_stack([ones, x]),    # right
            np.column_stack([x, ones]),    # top
            np.column_stack([zeros, x]),   # left
        ])
        stencil = np.vstack([
            k[None, :] * n + i[:, None],
            i[:, None] * n + (n - 1 - k)[None, :],
            (n - 1 - k)[None, :] * n + i[:, None],
            i[:, None] * n + k[None, :],
        ])
        bweights = np.full(4 * n, h)
    weights = np.full(len(nodes), h ** d)
    return Grid(d, n, h, nodes, weights, delta, boundary, bweights, stencil)


def _second_difference(n, h, reflect):
    t = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    if reflect:
        t[0, 0] = t[-1, -1] = 3.0
    return t / h ** 2


def _kron_sum(grid, t):
    if grid.dim == 1:
        return t
    eye = np.eye(grid.n)
    return np.kron(eye, t) + np.kron(t, eye)


def dirichlet_laplacian(grid):
    """-Delta_h with u = 0 on the boundary: 3-point (d=1) or 5-point (d=2).

    On the cell-centred grid the boundary sits half a cell outside the first
    node, so the ghost value is the odd reflection -u_0.  Then sin(k pi x) at
    the nodes are exact eigenvectors with eigenvalues 4 h^-2 sin^2(k pi h / 2).
    """
    return _kron_sum(grid, _second_difference(grid.n, grid.h, True))


def zero_extension_laplacian(grid):
    """-Delta_h with ghost values 0 at the first exterior cell centres (zero extension)."""
    return _kron_sum(grid, _second_difference(grid.n, grid.h, False))


def incell_coefficient(d, s, h):
    """c with int_cell (u(x)-u(x+z))|z|^{-(d+2s)} dz ~ c (-Delta u)(x).

    Second-order Taylor: the odd term cancels and the even term gives
    (1/2) int_cell z_1^2 |z|^{-(d+2s)} dz over the square cell of side h.
    """
    a = 0.5 * h
    if d == 1:
        return a ** (2 - 2 * s) / (2 - 2 * s)
    angular, _ = integrate.quad(lambda th: np.cos(th) ** (-(2 - 2 * s)), 0.0, np.pi / 4)
    return 2.0 * a ** (2 - 2 * s) / (2 - 2 * s) * angular


def exterior_tail(grid, s):
    """kappa_i = int_{complement} |x_i - y|^{-(d+2s)} dy."""
    if grid.dim == 1:
        x = grid.nodes[:, 0]
        return (x ** (-2 * s) + (1 - x) ** (-2 * s)) / (2 * s)
    return exterior_tail_square(grid.nodes, s)


def _ghost_cells(grid):
    h, n = grid.h, grid.n
    if grid.dim == 1:
        return np.array([[-0.5 * h], [1 + 0.5 * h]])
    c = (np.arange(-1, n + 1) + 0.5) * h
    xx, yy = np.meshgrid(c, c, indexing="xy")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    outside = (pts < 0).any(axis=1) | (pts > 1).any(axis=1)
    return pts[outside]


def _check_order(s, lo=0.0, hi=1.0, hi_closed=False):
    ok = lo < s < hi or (hi_closed and s == hi)
    if not ok:
        right = "]" if hi_closed else ")"
        raise ValueError(f"s must lie in ({lo}, {hi}{right}, got {s}")


def _nonlocal_matrix(grid, s, diag_extra):
    d = grid.dim
    k = pair_kernel_matrix(grid.nodes, grid.weights, d + 2 * s)
    a = -k
    a[np.diag_indices_from(a)] = k.sum(axis=1) + diag_extra
    a += incell_coefficient(d, s, grid.h) * zero_extension_laplacian(grid)
    return a


def assemble_rfl(grid, s):
    _check_order(s)
    kappa = exterior_tail(grid, s)
    a = _nonlocal_matrix(grid, s, kappa)
    return DiscreteOperator(OperatorKind.RFL, s, s, a, grid, {"kappa": kappa})


def assemble_cfl(grid, s):
    """Regional operator with a Dirichlet-type layer of ghost cells.

    The pair sum over Omega alone kills constants.  One layer of zero-valued
    ghost cells outside the boundary contributes sum_g w_g |x_i - g|^{-(d+2s)}
    to the diagonal, and the in-cell correction uses zero ghosts as well.
    This makes lambda_1 > 0 while leaving the far-exterior tail out.
    """
    if not 0.5 < s < 1.0:
        raise ValueError(
            f"censored operator needs s in (1/2, 1), got {s}: for s <= 1/2 the "
            "boundary condition is not seen by the process"
        )
    ghosts = _ghost_cells(grid)
    layer = ghost_tail(grid.nodes, ghosts, grid.h ** grid.dim, grid.dim + 2 * s)
    a = _nonlocal_matrix(grid, s, layer)
    return DiscreteOperator(OperatorKind.CFL, s, 2 * s - 1, a, grid, {"ghost_layer": layer})


def assemble_sfl(grid, s):
    _check_order(s, hi_closed=True)
    lap = dirichlet_laplacian(grid)
    if s == 1.0:
        return DiscreteOperator(OperatorKind.SFL, s, 1.0, lap.copy(), grid)
    mu, v = np.linalg.eigh(lap)
    a = (v * mu ** s) @ v.T
    a = 0.5 * (a + a.T)
    return DiscreteOperator(OperatorKind.SFL, s, 1.0, a, grid, {"laplacian_eigenvalues": mu})


def assemble(kind, grid, s):
    kind = OperatorKind(kind)
    if kind is OperatorKind.RFL:
        return assemble_rfl(grid, s)
    if kind is OperatorKind.CFL:
        return assemble_cfl(grid, s)
    if kind is OperatorKind.SFL:
        return assemble_sfl(grid, s)
    raise ValueError("synthetic operators come from synthetic_green + operator_from_green")


def _comparator(grid, s, gamma):
    """Two-sided Green comparator on all node pairs; the diagonal uses |x-y| = h/2."""
    d = grid.dim
    diff = grid.nodes[:, None, :] - grid.nodes[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(r, 0.5 * grid.h)
    dd = grid.delta[:, None] * grid.delta[None, :]
    bfac = np.minimum(dd / r ** 2, 1.0) ** gamma
    if d > 2 * s:
        return r ** (-(d - 2 * s)) * bfac, "power"
    if d == 2 * s:
        return (1.0 + np.log1p(np.sqrt(dd) / r)) * bfac, "log"
    return np.maximum(r, np.sqrt(dd)) ** (2 * s - d) * bfac, "regular"


def green_comparator(grid, s, gamma):
    return _comparator(grid, s, gamma)[0]


def synthetic_green(grid, s, gamma, variant, k=1, region=None):
    """Explicit Green kernels with prescribed two-sided bounds.

    BASELINE is the comparator itself.  The other variants multiply it by a
    factor in [1, 3]: ``1 + chi_A`` (``region`` is a boolean N x N mask,
    default {x_1 < y_1}), ``(2 + sin(1/delta(x)))(2 + sin(1/delta(y)))``, or
    ``2 + sin(exp^(k)(1/|x-y|^2))`` with ``exp^(k)`` the k-fold exponential.
    Entries where the iterated exponential overflows use the mean value 2
    and are counted in ``notes["overflow_entries"]``.
    """
    variant = GreenVariant(variant)
    base, form = _comparator(grid, s, gamma)
    notes = {"form": form}
    if variant is GreenVariant.BASELINE:
        values = base
    elif variant is GreenVariant.DISCONTINUOUS:
        if region is None:
            region = grid.nodes[:, None, 0] < grid.nodes[None, :, 0]
        region = np.asarray(region, dtype=bool)
        if not region.any() or region.all():
            raise ValueError("the discontinuity set must be a non-empty proper subset")
        values = base * (1.0 + region)
        notes["region_symmetric"] = bool((region == region.T).all())
    elif variant is GreenVariant.OSCILLATORY_BOUNDARY:
        osc = 2.0 + np.sin(1.0 / grid.delta)
        values = base * osc[:, None] * osc[None, :]
    else:
        if k < 1:
            raise ValueError("k must be a positive integer")
        diff = grid.nodes[:, None, :] - grid.nodes[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(r2, (0.5 * grid.h) ** 2)
        arg = 1.0 / r2
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(k):
                arg = np.exp(arg)
            osc = 2.0 + np.sin(arg)
        bad = ~np.isfinite(osc)
        osc[bad] = 2.0
        notes["overflow_entries"] = int(bad.sum())
        values = base * osc
    kernel = GreenKernelMatrix(values, grid, s, gamma, variant.value, notes)
    notes["symmetric"] = kernel.is_symmetric()
    notes["min_weighted_eigenvalue"] = kernel.min_weighted_eigenvalue()
    notes["mercer_ok"] = notes["min_weighted_eigenvalue"] > 0
    return kernel


def operator_from_green(kernel):
    """Invert a positive-definite symmetric kernel into a SYNTHETIC operator."""
    if not kernel.is_symmetric() or kernel.min_weighted_eigenvalue() <= 0:
        raise ValueError("kernel is not symmetric positive definite; cannot invert")
    g = kernel.values * kernel.grid.weights[None, :]
    a = np.linalg.inv(g)
    w = kernel.grid.weights
    wa = w[:, None] * a
    a = (0.5 * (wa + wa.T)) / w[:, None]
    return DiscreteOperator(OperatorKind.SYNTHETIC, kernel.s, kernel.gamma, a, kernel.grid,
                            {"variant": kernel.variant})
