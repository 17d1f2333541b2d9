"""Pure numpy implementations of the assembly kernels.

These are the reference versions; ``_kernels.pyx`` mirrors them loop by loop.
"""

import numpy as np

# Gauss-Legendre nodes per angular piece in the exterior-tail quadrature.
_NQUAD = 48


def pair_kernel_matrix(nodes, weights, exponent):
    """Return K with K[i, j] = w_j |x_i - x_j|^(-exponent), zero diagonal."""
    nodes = np.ascontiguousarray(nodes, dtype=float)
    diff = nodes[:, None, :] - nodes[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, 1.0)
    out = weights[None, :] * dist ** (-exponent)
    np.fill_diagonal(out, 0.0)
    return out


def ghost_tail(nodes, ghosts, ghost_weight, exponent):
    """Sum over ghost cells of ghost_weight |x_i - g|^(-exponent)."""
    diff = nodes[:, None, :] - ghosts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return ghost_weight * (dist ** (-exponent)).sum(axis=1)


def _ray_exit(px, py, theta):
    c, s = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore"):
        rx = np.where(c > 0, (1.0 - px) / c, np.where(c < 0, -px / c, np.inf))
        ry = np.where(s > 0, (1.0 - py) / s, np.where(s < 0, -py / s, np.inf))
    return np.minimum(rx, ry)


def exterior_tail_square(nodes, s, nquad=_NQUAD):
    """kappa(x) = int_{R^2 minus unit square} |x-y|^(-2-2s) dy for each node.

    Polar coordinates around x reduce this to (1/2s) int_0^{2pi} r(theta)^(-2s)
    with r the exit distance of the ray; the integrand is smooth between the
    four corner directions, so Gauss-Legendre is applied piecewise.
    """
    gx, gw = np.polynomial.legendre.leggauss(nquad)
    out = np.empty(len(nodes))
    for i, (px, py) in enumerate(nodes):
        corners = np.sort(np.mod(np.arctan2([-py, -py, 1 - py, 1 - py],
                                            [-px, 1 - px, 1 - px, -px]), 2 * np.pi))
        edges = np.concatenate([corners, [corners[0] + 2 * np.pi]])
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            th = 0.5 * (b - a) * gx + 0.5 * (b + a)
            r = _ray_exit(px, py, th)
            total += 0.5 * (b - a) * np.dot(gw, r ** (-2.0 * s))
        out[i] = total / (2.0 * s)
    return out
