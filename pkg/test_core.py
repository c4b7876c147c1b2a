import numpy as np
import pytest

from core import (Boundary, Constant, Domain, Geometry, ModeIndex, Parity, Sampled, SmoothExp, Strip,
                  check_gradient_condition, csqrt_right, eval_damping, profile_from_config,
                  profile_from_text, profile_to_text)
from errors import ConfigError, DiscontinuousProfile, ParityMismatch, UsageError
from utils.geometry import (aligned_grid_size, laplacian_eigenvalues, periodic_grid, periodic_laplacian,
                            piecewise_simpson, sample_damping)


def test_csqrt_right_keeps_right_half_plane():
    w = np.array([-4.0 + 1e-3j, -4.0 - 1e-3j, 9.0, -1j])
    r = csqrt_right(w)
    assert np.all(r.real >= 0)
    assert np.allclose(r * r, w)
    assert csqrt_right(complex(-4.0, 1e-3)) == pytest.approx(np.conj(csqrt_right(complex(-4.0, -1e-3))))


def test_geometry_rejects_bad_boundary():
    with pytest.raises(UsageError):
        Geometry(Domain.TORUS, Boundary.DIRICHLET)
    with pytest.raises(UsageError):
        Geometry(Domain.SQUARE, Boundary.PERIODIC)
    Geometry(Domain.SQUARE, Boundary.NEUMANN)


def test_mode_index_validation():
    torus = Geometry()
    dirichlet = Geometry(Domain.SQUARE, Boundary.DIRICHLET)
    neumann = Geometry(Domain.SQUARE, Boundary.NEUMANN)
    ModeIndex(3).validate(torus)
    with pytest.raises(UsageError):
        ModeIndex(2.5).validate(torus)
    with pytest.raises(UsageError):
        ModeIndex(1.3).validate(neumann)
    with pytest.raises(UsageError):
        ModeIndex(1, m=-1).validate(torus)
    ModeIndex(2.5, parity=Parity.ODD).validate(dirichlet)
    with pytest.raises(ParityMismatch):
        ModeIndex(2, parity=Parity.EVEN).validate(dirichlet)
    with pytest.raises(UsageError):
        ModeIndex(0, parity=Parity.ODD).validate(dirichlet)
    with pytest.raises(ParityMismatch):
        ModeIndex(2, parity=Parity.ODD).validate(neumann)


def test_strip_values_and_jumps():
    strip = Strip(2.0, 0.25)
    x = np.array([-0.5, -0.3, 0.0, 0.25, 0.26, 0.49])
    assert np.allclose(strip.values(x), [2.0, 2.0, 0.0, 0.0, 2.0, 2.0])
    assert strip.jump_points() == (-0.25, 0.25)
    assert strip.sigma_prime == pytest.approx(0.25)
    assert eval_damping(strip, 0.4) == 2.0
    assert isinstance(eval_damping(strip, 0.4), float)


@pytest.mark.parametrize("kwargs", [{"Btilde": 0.0}, {"sigma": 0.0}, {"sigma": 0.5}])
def test_strip_rejects_bad_parameters(kwargs):
    with pytest.raises(UsageError):
        Strip(**kwargs)


def test_smoothexp_vanishes_on_undamped_band():
    prof = SmoothExp(alpha=1.0, sigma=0.25, amplitude=2.0)
    x = np.linspace(-0.25, 0.25, 11)
    assert np.all(prof.values(x) == 0.0)
    assert prof.values(np.array([0.5]))[0] == pytest.approx(2.0 * np.exp(-1.0))
    assert prof.max_value() == pytest.approx(2.0 * np.exp(-1.0))
    h = 1e-6
    xs = np.array([0.3, 0.4, -0.35])
    fd = (prof.values(xs + h) - prof.values(xs - h)) / (2 * h)
    assert np.allclose(prof.derivative(xs), fd, rtol=1e-5)


def test_constant_and_zero():
    assert Constant(0.0).is_zero()
    assert not Constant(0.5).is_zero()
    with pytest.raises(UsageError):
        Constant(-1.0)


def test_sampled_interpolates_periodically():
    prof = Sampled(samples=(0.0, 1.0, 2.0, 1.0))
    assert prof.values(np.array([-0.5]))[0] == pytest.approx(0.0)
    assert prof.values(np.array([0.0]))[0] == pytest.approx(2.0)
    assert prof.values(np.array([0.5]))[0] == pytest.approx(0.0)
    assert prof.is_even()
    assert not Sampled(samples=(0.0, 1.0, 2.0, 3.0)).is_even()
    with pytest.raises(UsageError):
        Sampled(samples=(1.0,))
    with pytest.raises(UsageError):
        Sampled(samples=(1.0, -1.0))


def test_gradient_condition():
    with pytest.raises(UsageError):
        check_gradient_condition(Strip(), 0.0)
    with pytest.raises(DiscontinuousProfile):
        check_gradient_condition(Strip(), 0.1, strict=True)
    jump = check_gradient_condition(Strip(), 0.1)
    assert not jump.holds and jump.C_eps_estimate == float("inf")
    smooth = check_gradient_condition(SmoothExp(), 0.1)
    assert smooth.holds and np.isfinite(smooth.C_eps_estimate)
    assert check_gradient_condition(Constant(1.0), 0.5).C_eps_estimate == 0.0


def test_profile_config_round_trip_and_errors():
    for prof in (Strip(1.5, 0.2), SmoothExp(2.0, 0.1, 3.0), Constant(0.7), Sampled(samples=(0.0, 1.0, 0.0))):
        assert profile_from_text(profile_to_text(prof)) == prof
    with pytest.raises(ConfigError):
        profile_from_config({"kind": "gaussian"})
    with pytest.raises(ConfigError):
        profile_from_config({"kind": "strip", "width": "1"})
    with pytest.raises(ConfigError):
        profile_from_config({"kind": "strip", "sigma": "wide"})
    with pytest.raises(ConfigError):
        profile_from_text("kind strip\n")


def test_grid_helpers():
    assert aligned_grid_size(2048, (-0.25, 0.25)) == 2048
    assert aligned_grid_size(2050, (-0.25, 0.25)) == 2052
    assert aligned_grid_size(100, ()) == 100
    x, dx = periodic_grid(8)
    assert dx == 0.125 and x[0] == -0.5
    K = periodic_laplacian(16, 1 / 16).toarray()
    assert np.allclose(np.sort(np.linalg.eigvalsh(K)), np.sort(laplacian_eigenvalues(16, 1 / 16)))
    b = sample_damping(Strip(1.0, 0.25), periodic_grid(8)[0])
    assert b[2] == pytest.approx(0.5) and b[6] == pytest.approx(0.5)


def test_piecewise_simpson_handles_jumps():
    strip = Strip(1.0, 0.25)
    assert piecewise_simpson(strip.values, strip.jump_points()) == pytest.approx(0.5, abs=1e-10)
    assert piecewise_simpson(lambda x: x**2, ()) == pytest.approx(1 / 12, abs=1e-12)
