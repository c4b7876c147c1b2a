import math

import numpy as np
import pytest

from core import Boundary, Parity, csqrt_right
from errors import OddMZero, ParityMismatch, UsageError
from strip_spectrum import (BranchParams, asymptotic_im_zeta, branch, damped_mass_fraction,
                            interface_jump, mode_profile, penetration_length, quantization_residual,
                            rayleigh_re_z, scaling_constant, solve_branch_at_h, square_spectrum,
                            wavevectors, weak_damping_seed)


@pytest.fixture
def even0():
    return BranchParams(1.0, 0.25, Parity.EVEN, 0)


def test_odd_parity_needs_positive_m():
    params = BranchParams(1.0, 0.25, Parity.ODD, 0)
    with pytest.raises(OddMZero):
        scaling_constant(params)
    with pytest.raises(OddMZero):
        solve_branch_at_h(params, 0.01)


def test_rejects_bad_inputs(even0):
    with pytest.raises(UsageError):
        branch(even0, [0.01, 0.02])
    with pytest.raises(UsageError):
        solve_branch_at_h(even0, 0.0)
    with pytest.raises(UsageError):
        wavevectors(1.0, -1.0, 1.0)
    with pytest.raises(UsageError):
        BranchParams(1.0, 0.25, Parity.EVEN, -1)


def test_scaling_constant_formula(even0):
    expected = (math.pi / 2) ** 2 / (0.25**3 * math.sqrt(2.0))
    assert scaling_constant(even0) == pytest.approx(expected)
    odd = BranchParams(2.0, 0.2, Parity.ODD, 1)
    assert scaling_constant(odd) == pytest.approx(math.pi**2 / (0.2**3 * 2.0))
    assert asymptotic_im_zeta(even0, 1e-4) == pytest.approx(1e-6 * expected)


def test_vertical_index():
    params = BranchParams()
    assert params.vertical_index(0.01) == 16.0
    h = 1.0 / (2 * math.pi * 10.4)
    assert params.vertical_index(h) == 10.0
    assert params.vertical_index(h, half_integers=True) == 10.5
    assert BranchParams(n=3).vertical_index(0.01) == 3.0


@pytest.mark.parametrize("parity,m", [(Parity.EVEN, 0), (Parity.EVEN, 1), (Parity.ODD, 1), (Parity.ODD, 2)])
def test_root_is_consistent(parity, m):
    params = BranchParams(1.0, 0.25, parity, m)
    root = solve_branch_at_h(params, 0.02)
    assert root.residual <= 1e-9
    assert abs(quantization_residual(root.k, root.h, root.B, params)) <= 1e-9
    assert root.z == pytest.approx(1j * (1 / root.h + root.zeta_t))
    assert -0.5 < root.z.real < 0
    assert root.B == pytest.approx(params.Btilde * (1 + root.h * root.zeta_t), rel=1e-9)
    jv, jd = interface_jump(root, params)
    assert jv <= 1e-10 and jd <= 1e-8
    assert rayleigh_re_z(root, params) == pytest.approx(root.z.real, rel=1e-6)
    assert 0 < damped_mass_fraction(root, params) < 1
    assert penetration_length(root) > 0


def test_branch_follows_asymptotics(even0):
    hs = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
    roots = branch(even0, hs)
    assert [r.h for r in roots] == hs
    errs = [abs(r.zeta_t.imag - asymptotic_im_zeta(even0, r.h)) for r in roots]
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert order >= 1.8
    deep = branch(even0, [4e-5, 2e-5, 1e-5])
    C0 = scaling_constant(even0)
    assert all(abs(r.scaling_diagnostic / C0 - 1) <= 0.1 for r in deep)


def test_mode_profile_normalization(even0):
    root = solve_branch_at_h(even0, 0.02)
    x, v = mode_profile(root, even0, samples=1024)
    assert x.shape == v.shape == (1024,)
    assert v[512] == pytest.approx(1.0)
    assert np.allclose(v[1:], v[1:][::-1])


def test_square_spectrum():
    odd = BranchParams(1.0, 0.25, Parity.ODD, 1)
    even = BranchParams(1.0, 0.25, Parity.EVEN, 0)
    with pytest.raises(ParityMismatch):
        square_spectrum(odd, 0.02, Boundary.NEUMANN)
    with pytest.raises(ParityMismatch):
        square_spectrum(even, 0.02, Boundary.DIRICHLET)
    with pytest.raises(UsageError):
        square_spectrum(even, 0.02, Boundary.PERIODIC)
    root = square_spectrum(even, 0.02, Boundary.NEUMANN)
    assert (2 * root.n) == round(2 * root.n)
    assert -0.5 < root.z.real < 0


def test_dirichlet_square_matches_torus_odd_root():
    odd = BranchParams(1.0, 0.25, Parity.ODD, 1)
    square = square_spectrum(odd, 0.02, Boundary.DIRICHLET)
    torus = solve_branch_at_h(odd, 0.02)
    assert square.n == torus.n == 8.0
    assert square.z == pytest.approx(torus.z, abs=1e-12)
    assert abs(torus.k.real * 0.25 - math.pi) < math.pi / 2


def test_residual_stays_finite_far_from_real_axis():
    odd = BranchParams(1.0, 0.25, Parity.ODD, 1)
    for k in (7.54 + 5.03j, 12.0 + 400j, 12.0 + 4000j):
        assert np.isfinite(quantization_residual(k, 0.02, 1.0, odd))


def test_weak_seed_avoids_tangent_pole():
    odd = BranchParams(1.0, 0.25, Parity.ODD, 1)
    k0 = weak_damping_seed(odd, 0.02)
    assert k0.imag > 0
    assert np.isfinite(quantization_residual(k0, 0.02, 1.0, odd))
    even = BranchParams()
    assert weak_damping_seed(even, 0.02) == pytest.approx(csqrt_right(2j * 0.25 / 0.02))
