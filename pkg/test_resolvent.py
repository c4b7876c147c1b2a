import math

import numpy as np
import pytest
import scipy.sparse as sp

from core import Constant, Parity, SmoothExp, Strip
from errors import FitUnstable, UsageError
from quasimode import build_cutoff, lower_bound_constant
from resolvent import (assemble_mode_operator, branch_frequency_scan, default_n_max, eigenvalue_envelope,
                       fit_power_law, mode_norms, offset_grid, resolvent_norm, scan_and_fit,
                       smallest_singular_value, worker_count)
from strip_spectrum import BranchParams
from utils.geometry import laplacian_eigenvalues, periodic_grid

STRIP = Strip(1.0, 0.25)


def _fd_oracle(s, N, n_max):
    x, dx = periodic_grid(N)
    lam = laplacian_eigenvalues(N, dx)
    return 1.0 / min(np.min(np.abs(lam + 4 * math.pi**2 * n * n - s * s)) for n in range(n_max + 1))


def test_worker_count(monkeypatch):
    assert worker_count(3) == 3
    monkeypatch.setenv("DWSL_THREADS", "2")
    assert worker_count() == 2
    monkeypatch.setenv("DWSL_THREADS", "many")
    assert worker_count() >= 1


def test_default_n_max():
    assert default_n_max(2 * math.pi * 3.5) == 4 + 8
    assert default_n_max(1.0) == 9


def test_operator_shape_and_alignment():
    A = assemble_mode_operator(10.0, 1, STRIP, grid_N=2050)
    assert A.shape == (2052, 2052)
    assert sp.issparse(A) and A.dtype == complex
    B = assemble_mode_operator(10.0, 1, Constant(0.0), grid_N=64)
    assert abs(B - B.conj().T).max() == 0
    with pytest.raises(UsageError):
        assemble_mode_operator(1.0, 0, STRIP, grid_N=32)


def test_smallest_singular_value_small_matrices():
    D = sp.diags([3.0, -4j, 5.0]).tocsc()
    assert smallest_singular_value(D) == pytest.approx(3.0, rel=1e-9)
    main = (np.arange(1, 9) * (1 + 1j)).astype(complex)
    T = sp.diags([main, np.full(7, 0.1), np.full(7, 0.1)], [0, -1, 1]).tocsc()
    expected = np.linalg.svd(T.toarray(), compute_uv=False).min()
    assert smallest_singular_value(T) == pytest.approx(expected, rel=1e-8)


def test_undamped_sigma_matches_fd_spectrum():
    N = 256
    A = assemble_mode_operator(2 * math.pi, 0, Constant(0.0), grid_N=N)
    x, dx = periodic_grid(N)
    expected = abs(4 * math.sin(math.pi / N) ** 2 / dx**2 - 4 * math.pi**2)
    assert smallest_singular_value(A) == pytest.approx(expected, rel=1e-8)


def test_exact_eigenvalue_is_singular():
    assert smallest_singular_value(assemble_mode_operator(0.0, 0, Constant(0.0), grid_N=64)) <= 1e-8


def test_undamped_scan_matches_oracle():
    s_grid = offset_grid(1.0, 30.0, 12)
    scan = scan_and_fit(Constant(0.0), s_grid, grid_N=256, workers=2)
    assert len(scan.norms) == 12
    for s, norm in zip(scan.s_grid, scan.norms):
        assert norm == pytest.approx(_fd_oracle(s, 256, default_n_max(s)), rel=1e-5)


def test_mode_norms_cover_requested_modes():
    norms, argmax = mode_norms(15.0, STRIP, n_max=3, grid_N=128)
    assert sorted(norms) == [0, 1, 2, 3]
    assert norms[argmax] == max(norms.values())


def test_offset_grid_avoids_endpoints():
    g = offset_grid(10.0, 20.0, 10)
    assert g.size == 10
    assert g[0] > 10.0 and g[-1] < 20.0
    assert np.allclose(np.diff(g), 1.0)


def test_fit_power_law():
    s = np.geomspace(10, 100, 12)
    slope, rms = fit_power_law(s, 3.0 * s**1.5)
    assert slope == pytest.approx(1.5)
    assert rms <= 1e-12
    slope, _ = fit_power_law(s, s**2, window=(30, 100))
    assert slope == pytest.approx(2.0)
    with pytest.raises(FitUnstable):
        fit_power_law(s[:4], s[:4])
    with pytest.raises(FitUnstable):
        fit_power_law(s, s, window=(90, 100))


def test_quasimode_bound_holds():
    C = lower_bound_constant(build_cutoff(STRIP))
    for n in (1, 5):
        assert resolvent_norm(2 * math.pi * n, STRIP, grid_N=512) >= C


def test_eigenvalue_envelope():
    assert eigenvalue_envelope(-0.1 + 10j, 10.0, 1.0) == pytest.approx(1.0 / (0.1 * (abs(-0.1 + 20j) + 1.0)))
    assert eigenvalue_envelope(10j, 10.0, 1.0) == math.inf


def test_smooth_scan_reports_indicative_exponent():
    scan = scan_and_fit(SmoothExp(), offset_grid(20.0, 40.0, 5), grid_N=128, eps=0.1, workers=1)
    assert scan.indicative_exponent == pytest.approx(0.8)
    assert scan_and_fit(STRIP, offset_grid(20.0, 40.0, 5), grid_N=128, workers=1).indicative_exponent is None


@pytest.mark.slow
def test_branch_norms_exceed_envelope():
    params = BranchParams(1.0, 0.25, Parity.EVEN, 0)
    scan = branch_frequency_scan(params, list(np.geomspace(1 / 50, 1 / 300, 5)), grid_N=1024)
    assert len(scan.roots) == 5
    assert all(n >= 0.9 * e for n, e in zip(scan.norms, scan.envelope))


@pytest.mark.parametrize("s", [5.5, 12.3])
def test_norm_is_stable_under_grid_refinement(s):
    coarse = resolvent_norm(s, STRIP, grid_N=512)
    fine = resolvent_norm(s, STRIP, grid_N=1024)
    assert fine == pytest.approx(coarse, rel=0.05)


def test_norm_never_drops_when_more_modes_are_kept():
    norms = [resolvent_norm(17.3, STRIP, n_max=k, grid_N=256) for k in range(7)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_sigma_min_is_below_every_rayleigh_quotient():
    A = assemble_mode_operator(17.3, 2, STRIP, grid_N=256)
    sigma = smallest_singular_value(A)
    rng = np.random.default_rng(11)
    for _ in range(5):
        v = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
        assert sigma <= np.linalg.norm(A @ v) / np.linalg.norm(v) * (1 + 1e-9)
