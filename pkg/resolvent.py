"""
Resolvent norms ||P(is)^-1|| along the imaginary axis.

P(is) = -Laplacian - s^2 + i s b(x) splits over the vertical Fourier modes
e^{2 i pi n y}; each mode is a periodic finite-difference operator in x and
the norm of its inverse is 1/sigma_min. The full norm is the max over modes.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from core import SmoothExp
from errors import FitUnstable, UsageError
from strip_spectrum import BranchParams, QuantizationRoot, branch
from utils.geometry import aligned_grid_size, periodic_grid, periodic_laplacian, sample_damping

logger = logging.getLogger(__name__)

DEFAULT_GRID_N = 2048
MIN_GRID_N = 64
EXTRA_MODES = 8
RAYLEIGH_TOL = 1e-10
MAX_INVERSE_ITER = 2000
MIN_FIT_POINTS = 5
GOLDEN_OFFSET = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ResolventScan:
    s_grid: List[float]
    norms: List[float]
    n_max: int
    grid_N: int
    fitted_exponent: float
    fit_window: Tuple[float, float]
    argmax_n: List[int] = field(default_factory=list)
    fit_residual: float = float("nan")
    indicative_exponent: Optional[float] = None


@dataclass
class BranchScan:
    roots: List[QuantizationRoot]
    s_grid: List[float]
    norms: List[float]
    envelope: List[float]
    fitted_exponent: float


def worker_count(requested: Optional[int] = None) -> int:
    """Thread cap from the argument, else DWSL_THREADS, else the CPU count"""
    if requested:
        return max(1, int(requested))
    env = os.environ.get("DWSL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer DWSL_THREADS=%r", env)
    return os.cpu_count() or 1


def default_n_max(s: float) -> int:
    return int(math.ceil(abs(s) / (2.0 * math.pi))) + EXTRA_MODES


def mode_grid(profile, grid_N: int):
    """Jump-aligned nodes, spacing and sampled damping for the mode operators"""
    if grid_N < MIN_GRID_N:
        raise UsageError(f"grid_N must be at least {MIN_GRID_N}, got {grid_N}")
    N = aligned_grid_size(grid_N, list(profile.jump_points()))
    x, dx = periodic_grid(N)
    return x, dx, sample_damping(profile, x)


def assemble_mode_operator(s: float, n: int, profile, grid_N: int = DEFAULT_GRID_N):
    """Sparse -d^2/dx^2 + 4 pi^2 n^2 - s^2 + i s b(x) on the periodic grid

    Args:
        s: frequency on the imaginary axis
        n: vertical Fourier index
        profile: damping profile
        grid_N: requested grid size, realigned so jumps of b fall on nodes

    Returns:
        scipy.sparse.csc_matrix: tridiagonal-plus-corners complex matrix
    """
    x, dx, b = mode_grid(profile, grid_N)
    K = periodic_laplacian(x.size, dx)
    shift = 4.0 * math.pi**2 * n**2 - s**2
    return (K + sp.diags(shift + 1j * s * b)).tocsc().astype(complex)


def smallest_singular_value(A, tol: float = RAYLEIGH_TOL, max_iter: int = MAX_INVERSE_ITER,
                            seed: int = 0) -> float:
    """sigma_min(A) by inverse iteration on A A^H through one sparse LU of A

    A singular factorization means z hit an eigenvalue exactly and 0 is
    returned.
    """
    A = sp.csc_matrix(A, dtype=complex)
    try:
        lu = splu(A)
    except RuntimeError as e:
        logger.warning("singular factorization, reporting sigma_min = 0: %s", e)
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    mu_prev = 0.0
    for it in range(max_iter):
        w = lu.solve(lu.solve(x), trans="H")
        mu = np.linalg.norm(w)
        if not np.isfinite(mu):
            return 0.0
        x = w / mu
        if abs(mu - mu_prev) <= tol * mu:
            logger.debug("inverse iteration converged in %d steps", it + 1)
            break
        mu_prev = mu
    else:
        logger.warning("inverse iteration stopped after %d steps", max_iter)
    return float(1.0 / math.sqrt(mu))


def mode_norms(s: float, profile, n_max: Optional[int] = None,
               grid_N: int = DEFAULT_GRID_N) -> Tuple[Dict[int, float], int]:
    """1/sigma_min for every 0 <= n <= n_max and the maximizing n

    Modes n and -n give the same operator, so only n >= 0 are assembled.
    """
    if n_max is None:
        n_max = default_n_max(s)
    norms = {}
    for n in range(0, n_max + 1):
        sigma = smallest_singular_value(assemble_mode_operator(s, n, profile, grid_N))
        norms[n] = math.inf if sigma == 0 else 1.0 / sigma
    argmax = max(norms, key=lambda k: (norms[k], -k))
    return norms, argmax


def resolvent_norm(s: float, profile, n_max: Optional[int] = None,
                   grid_N: int = DEFAULT_GRID_N) -> float:
    norms, argmax = mode_norms(s, profile, n_max, grid_N)
    return norms[argmax]


def offset_grid(s_lo: float, s_hi: float, count: int) -> np.ndarray:
    """Uniform grid shifted by an irrational fraction of its spacing"""
    step = (s_hi - s_lo) / count
    return s_lo + (np.arange(count) + GOLDEN_OFFSET) * step


def fit_power_law(s_values, norms, window=None) -> Tuple[float, float]:
    """Least-squares slope of log norm against log s inside the window

    Returns:
        tuple: (exponent, rms residual of the log fit)
    """
    s_values = np.asarray(s_values, dtype=float)
    norms = np.asarray(norms, dtype=float)
    lo, hi = window if window is not None else (s_values.min(), s_values.max())
    keep = (s_values >= lo) & (s_values <= hi) & np.isfinite(norms) & (norms > 0)
    if np.count_nonzero(keep) < MIN_FIT_POINTS:
        raise FitUnstable(f"only {np.count_nonzero(keep)} points in fit window [{lo}, {hi}]")
    ls, ln = np.log(s_values[keep]), np.log(norms[keep])
    slope, intercept = np.polyfit(ls, ln, 1)
    resid = ln - (slope * ls + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def scan_and_fit(profile, s_grid: Sequence[float], n_max: Optional[int] = None,
                 grid_N: int = DEFAULT_GRID_N, window=None, workers: Optional[int] = None,
                 eps: Optional[float] = None) -> ResolventScan:
    """Resolvent norm on every s of the grid and a power-law fit

    Args:
        profile: damping profile
        s_grid: frequencies, ideally from offset_grid
        n_max: mode cutoff, defaults per s to ceil(s/2pi) + 8
        grid_N: requested FD grid size
        window: (s_lo, s_hi) used for the fit, defaults to the whole grid
        workers: thread count, defaults to worker_count()
        eps: gradient-condition exponent for the indicative 8 eps bound
            attached to SmoothExp scans

    Returns:
        ResolventScan: norms, per-s maximizing mode and the fitted exponent
    """
    s_grid = [float(s) for s in s_grid]

    def one(s):
        return mode_norms(s, profile, n_max, grid_N)

    workers = worker_count(workers)
    if workers > 1 and len(s_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, s_grid))
    else:
        results = [one(s) for s in s_grid]

    norms = [r[0][r[1]] for r in results]
    argmax = [r[1] for r in results]
    win = tuple(window) if window is not None else (min(s_grid), max(s_grid))
    exponent, resid = fit_power_law(s_grid, norms, win)
    indicative = None
    if isinstance(profile, SmoothExp) and eps is not None:
        indicative = 8.0 * eps
    N = aligned_grid_size(grid_N, list(profile.jump_points()))
    used_n_max = n_max if n_max is not None else default_n_max(max(s_grid))
    logger.info("resolvent scan over %d frequencies: exponent %.4f", len(s_grid), exponent)
    return ResolventScan(s_grid=s_grid, norms=norms, n_max=used_n_max, grid_N=N,
                         fitted_exponent=exponent, fit_window=win, argmax_n=argmax,
                         fit_residual=resid, indicative_exponent=indicative)


def eigenvalue_envelope(z: complex, s: float, max_b: float) -> float:
    """Lower bound ||P(is)^-1|| >= 1/(|is - z| (|is + z| + max b)) from P(z)u = 0"""
    w = 1j * s
    denom = abs(w - z) * (abs(w + z) + max_b)
    return math.inf if denom == 0 else 1.0 / denom


def branch_frequency_scan(params: BranchParams, h_list: Sequence[float], grid_N: int = DEFAULT_GRID_N,
                          n_max: Optional[int] = None, workers: Optional[int] = None) -> BranchScan:
    """Resolvent norms at s = Im z along a strip branch, with the eigenvalue envelope"""
    roots = branch(params, list(h_list))
    s_grid = [float(r.z.imag) for r in roots]
    profile = params.profile
    scan = scan_and_fit(profile, s_grid, n_max=n_max, grid_N=grid_N, workers=workers)
    envelope = [eigenvalue_envelope(r.z, s, profile.max_value()) for r, s in zip(roots, s_grid)]
    return BranchScan(roots=roots, s_grid=s_grid, norms=scan.norms, envelope=envelope,
                      fitted_exponent=scan.fitted_exponent)
