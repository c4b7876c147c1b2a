import math

import numpy as np
import pytest

from core import Constant, Parity, SmoothExp, Strip
from errors import LocalizationViolation, NearSpectrum, UsageError
from semigroup_lab import (build_system, check_gap_region, check_observability_ingredient,
                           check_resolvent_identity, check_sandwich, check_spectrum_localization,
                           kernel_report, sqrt_damping_coefficients, truncation_drift)
from strip_spectrum import BranchParams, scaling_constant
from utils.geometry import piecewise_simpson

STRIP = Strip(1.0, 0.25)


@pytest.fixture(scope="module")
def strip8():
    return build_system(STRIP, 8)


def _numeric_coefficient(profile, j):
    jumps = profile.jump_points()
    re = piecewise_simpson(lambda x: np.sqrt(profile.values(x)) * np.cos(2 * math.pi * j * x), jumps, 20001)
    im = piecewise_simpson(lambda x: -np.sqrt(profile.values(x)) * np.sin(2 * math.pi * j * x), jumps, 20001)
    return complex(re, im)


def test_strip_coefficients_closed_form():
    g = sqrt_damping_coefficients(STRIP, 3)
    assert g.size == 7
    for j in range(-3, 4):
        assert g[j + 3] == pytest.approx(_numeric_coefficient(STRIP, j), abs=1e-10)


def test_fft_coefficients_for_smooth_profile():
    prof = SmoothExp(alpha=1.0, sigma=0.2, amplitude=1.0)
    g = sqrt_damping_coefficients(prof, 2)
    for j in range(-2, 3):
        assert g[j + 2] == pytest.approx(_numeric_coefficient(prof, j), abs=1e-6)


def test_block_structure():
    system = build_system(Constant(4.0), 2)
    assert [blk.n for blk in system.blocks] == [0, 1, 2]
    assert [blk.size for blk in system.blocks] == [5, 3, 1]
    assert system.dim == 26
    assert system.full_generator().shape == (26, 26)
    for blk in system.blocks:
        assert np.allclose(blk.B, 2.0 * np.eye(blk.size))
        assert np.allclose(blk.lam, 4 * math.pi**2 * (blk.ms**2 + blk.n**2))
    with pytest.raises(UsageError):
        build_system(STRIP, 0)


def test_truncated_multiplier_norm_is_bounded(strip8):
    assert strip8.norm_Bstar <= strip8.sup_sqrt_b + 1e-12
    assert strip8.sup_sqrt_b == pytest.approx(1.0)


def test_constant_damping_spectrum():
    system = build_system(Constant(1.0), 8)
    report = check_spectrum_localization(system)
    assert report.passed and report.kernel.holds
    eigs = system.spectrum()
    assert np.all(eigs.real <= 1e-9) and np.all(eigs.real >= -1 - 1e-9)
    nonreal = eigs[np.abs(eigs.imag) > 1e-6]
    assert np.allclose(nonreal.real, -0.5, atol=1e-9)
    assert report.kernel_cluster == 1


def test_strip_spectrum_localization(strip8):
    report = check_spectrum_localization(strip8)
    assert report.passed
    assert report.conjugate_symmetric
    assert report.eigenvalue_count == sum(2 * blk.size for blk in strip8.blocks)
    assert report.kernel.dim_ker_A == 1


def test_localization_violation_is_reported(strip8):
    report = check_spectrum_localization(strip8, strict=False)
    assert report.passed
    strip8.norm_Bstar = 0.01
    try:
        with pytest.raises(LocalizationViolation):
            check_spectrum_localization(strip8)
        assert not check_spectrum_localization(strip8, strict=False).passed
    finally:
        strip8.norm_Bstar = build_system(STRIP, 8).norm_Bstar


def test_undamped_kernel_matches_kernel_of_A():
    report = kernel_report(build_system(Constant(0.0), 4))
    assert report.holds
    assert report.dim_ker_generator == report.dim_ker_A == 1


def test_resolvent_block_identity(strip8):
    rng = np.random.default_rng(1)
    for z in rng.uniform(-0.4, -0.01, 5) + 1j * rng.uniform(1.0, 40.0, 5):
        assert check_resolvent_identity(strip8, z) <= 1e-9


def test_near_spectrum_is_rejected(strip8):
    z = strip8.spectrum()[3]
    with pytest.raises(NearSpectrum):
        check_resolvent_identity(strip8, z)


def test_sandwich_constants():
    s_list = [5.0, 10.0, 20.0, 40.0]
    undamped = check_sandwich(build_system(Constant(0.0), 8), s_list, workers=1)
    assert undamped.constant <= 10.0
    assert len(undamped.semigroup_norms) == 4
    strip = check_sandwich(build_system(STRIP, 8), s_list, workers=2)
    assert strip.holds(100.0)
    with pytest.raises(UsageError):
        check_sandwich(build_system(STRIP, 2), [0.0])


def test_gap_region():
    damped = check_gap_region(build_system(Constant(1.0), 8), alpha=2 / 3)
    assert damped.exponent == pytest.approx(1.5)
    assert damped.count > 0
    assert damped.min_product >= 0.5 * 10**1.5 * (1 - 1e-9)
    undamped = check_gap_region(build_system(Constant(0.0), 8))
    assert undamped.min_product <= 1e-8
    empty = check_gap_region(build_system(Constant(1.0), 1), im_min=1e3)
    assert empty.count == 0 and empty.min_product == math.inf


def test_observability_ingredient():
    s_list = [5.0, 20.0]
    for s, c in zip(s_list, check_observability_ingredient(build_system(Constant(1.0), 6), s_list)):
        assert c <= (1 + 1e-9) / (1 + s * s)


def test_truncation_drift_for_diagonal_damping():
    box = (-1.0, 0.1, 1.0, 40.0)
    assert truncation_drift(build_system(Constant(1.0), 6), build_system(Constant(1.0), 10), box) <= 1e-9


def test_strip_gap_products_reach_branch_constant():
    C0 = scaling_constant(BranchParams(1.0, 0.25, Parity.EVEN, 0))
    report = check_gap_region(build_system(STRIP, 16))
    assert report.count > 0
    assert report.min_product <= 1.1 * C0
    assert -0.5 - 1e-9 <= report.argmin.real <= 0


def test_strip_truncation_converges():
    box = (-0.6, 0.0, 1.0, 20.0)
    assert truncation_drift(build_system(STRIP, 16), build_system(STRIP, 32), box) <= 1e-3
