"""
Discretization utilities shared by the resolvent and time-domain modules
"""
import logging

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson


def aligned_grid_size(grid_N, jump_points, search=4096):
    """Smallest N >= grid_N that puts every jump point on a grid node

    Nodes are x_j = -1/2 + j/N. When no N within the search window aligns
    (irrational jump positions) grid_N is returned unchanged.
    """
    if not jump_points:
        return grid_N
    for N in range(grid_N, grid_N + search):
        if all(abs((x + 0.5) * N - round((x + 0.5) * N)) < 1e-9 for x in jump_points):
            if N != grid_N:
                logging.getLogger(__name__).warning(
                    "grid size %d realigned to %d so jumps %s fall on nodes", grid_N, N, jump_points)
            return N
    logging.getLogger(__name__).warning("no aligned grid near N=%d for jumps %s", grid_N, jump_points)
    return grid_N


def periodic_grid(N):
    """Nodes x_j = -1/2 + j/N on the periodic cell, and the spacing"""
    dx = 1.0 / N
    return -0.5 + dx * np.arange(N), dx


def sample_damping(profile, x):
    """Sample b on grid nodes, taking the mean of one-sided limits on jumps

    A Strip node sitting exactly on x = +-sigma therefore gets Btilde/2,
    which is the cell average of b over the dual cell around that node.
    """
    b = np.asarray(profile.values(x), dtype=float).copy()
    for xj in profile.jump_points():
        hit = np.isclose(x, xj, rtol=0, atol=1e-12)
        if np.any(hit):
            tiny = 1e-9
            b[hit] = 0.5 * (profile.values(np.array([xj - tiny]))[0]
                            + profile.values(np.array([xj + tiny]))[0])
    return b


def periodic_laplacian(N, dx):
    """Sparse -d^2/dx^2 with periodic wrap, second-order central differences"""
    main = np.full(N, 2.0 / dx**2)
    off = np.full(N - 1, -1.0 / dx**2)
    K = sp.diags([main, off, off], [0, -1, 1], format="lil", dtype=float)
    K[0, N - 1] = -1.0 / dx**2
    K[N - 1, 0] = -1.0 / dx**2
    return K.tocsc()


def laplacian_eigenvalues(N, dx):
    """Exact spectrum 4 sin^2(pi j / N) / dx^2 of periodic_laplacian"""
    j = np.arange(N)
    return 4.0 * np.sin(np.pi * j / N) ** 2 / dx**2


def piecewise_simpson(func, breakpoints, points=8193):
    """Integrate func over [-1/2, 1/2] with composite Simpson on each smooth piece

    Args:
        func: vectorized integrand
        breakpoints: interior points where func may be non-smooth
        points: total number of Simpson nodes, split in proportion to length

    Returns:
        float or complex: the integral
    """
    edges = [-0.5] + sorted(p for p in breakpoints if -0.5 < p < 0.5) + [0.5]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(5, int(round(points * (b - a))))
        if n % 2 == 0:
            n += 1
        xs = np.linspace(a, b, n)
        # nudge off the breakpoint so one-sided values are used
        pad = 1e-13
        xs[0] += pad
        xs[-1] -= pad
        total = total + simpson(func(xs), x=xs)
    return total
