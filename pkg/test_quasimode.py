import math

import numpy as np
import pytest

from core import Constant, Sampled, SmoothExp, Strip
from errors import ExactEigenmode, NoGap, SupportOverlap, UsageError
from quasimode import (build_cutoff, constant_cutoff, cos_squared_cutoff, cos_squared_ratio,
                       lower_bound_constant, quasimode_frequency, quasimode_ratio, quasimode_table,
                       smooth_step, smooth_step_d2, undamped_half_width)

STRIP = Strip(1.0, 0.25)


def test_smooth_step_shape():
    t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(smooth_step(t), [1.0, 1.0, 0.5, 0.0, 0.0])
    ts = np.linspace(0.05, 0.95, 19)
    h = 1e-4
    fd = (smooth_step(ts + h) - 2 * smooth_step(ts) + smooth_step(ts - h)) / h**2
    assert np.allclose(smooth_step_d2(ts), fd, rtol=1e-4, atol=1e-4)


def test_undamped_half_width():
    assert undamped_half_width(STRIP) == 0.25
    assert undamped_half_width(SmoothExp(sigma=0.1)) == 0.1
    assert undamped_half_width(SmoothExp(amplitude=0.0)) == 0.5
    assert undamped_half_width(Constant(0.0)) == 0.5
    assert undamped_half_width(Constant(1.0)) == 0.0
    samples = tuple(1.0 if abs(-0.5 + j / 16) >= 0.375 else 0.0 for j in range(16))
    assert undamped_half_width(Sampled(samples=samples)) == pytest.approx(0.3125)


def test_cutoff_support():
    cutoff = build_cutoff(STRIP, margin=0.05)
    assert cutoff.sigma_support == pytest.approx(0.2)
    inner = np.abs(cutoff.x) <= 0.1
    outer = np.abs(cutoff.x) >= 0.2
    assert np.all(cutoff.samples[inner] == 1.0)
    assert np.all(cutoff.samples[outer] == 0.0)
    assert np.all((cutoff.samples >= 0) & (cutoff.samples <= 1))


def test_no_gap():
    with pytest.raises(NoGap):
        build_cutoff(Constant(1.0))
    with pytest.raises(NoGap):
        build_cutoff(STRIP, margin=0.3)
    with pytest.raises(NoGap):
        build_cutoff(STRIP, margin=0.05, sigma_support=0.22)


def test_ratio_is_independent_of_n():
    cutoff = build_cutoff(STRIP)
    ratios = [quasimode_ratio(n, cutoff, STRIP) for n in range(1, 101)]
    assert max(ratios) - min(ratios) <= 1e-10 * np.mean(ratios)
    assert quasimode_frequency(3) == pytest.approx(6 * math.pi)
    with pytest.raises(UsageError):
        quasimode_ratio(0, cutoff, STRIP)


def test_constant_scales_with_support_squared():
    c_small = lower_bound_constant(build_cutoff(STRIP, sigma_support=0.1))
    c_large = lower_bound_constant(build_cutoff(STRIP, sigma_support=0.2))
    assert c_small < c_large
    assert c_small / c_large == pytest.approx(0.25, rel=1e-4)


def test_cos_squared_reference():
    cutoff = cos_squared_cutoff(0.25)
    assert cutoff.norm_d2_L2 / cutoff.norm_L2 == pytest.approx(cos_squared_ratio(0.25), rel=1e-6)
    assert lower_bound_constant(cutoff) == pytest.approx(math.sqrt(3) / (16 * math.pi**2), rel=1e-6)


def test_overlap_and_exact_eigenmode():
    with pytest.raises(SupportOverlap):
        quasimode_ratio(1, constant_cutoff(), STRIP)
    with pytest.raises(ExactEigenmode):
        lower_bound_constant(constant_cutoff())
    rows = quasimode_table([1, 2], constant_cutoff(), Constant(0.0))
    assert rows == [(1, 0.0, float("inf")), (2, 0.0, float("inf"))]


def test_table_rows():
    cutoff = build_cutoff(STRIP)
    rows = quasimode_table(range(1, 4), cutoff, STRIP)
    assert [r[0] for r in rows] == [1, 2, 3]
    C = lower_bound_constant(cutoff)
    assert all(r[2] == C and r[1] == pytest.approx(1 / C) for r in rows)


def test_ratio_by_quadrature_matches_closed_form():
    cutoff = cos_squared_cutoff(0.25)
    for n in (1, 7, 40):
        assert quasimode_ratio(n, cutoff, Constant(0.0)) == pytest.approx(cos_squared_ratio(0.25), rel=1e-6)


def test_wide_cutoff_overlaps_strip_damping():
    wide = build_cutoff(Constant(0.0), margin=0.05)
    assert wide.sigma_support == pytest.approx(0.45)
    with pytest.raises(SupportOverlap):
        quasimode_ratio(1, wide, STRIP)
    prof = SmoothExp(alpha=1.0, sigma=0.25, amplitude=1.0)
    narrow = build_cutoff(STRIP)
    assert quasimode_ratio(5, narrow, prof) == pytest.approx(quasimode_ratio(5, narrow, STRIP), rel=1e-6)


def test_detuned_frequency_adds_to_residual():
    cutoff = build_cutoff(STRIP)
    on = quasimode_ratio(4, cutoff, STRIP)
    s = quasimode_frequency(4) + 0.5
    detune = abs(quasimode_frequency(4) ** 2 - s * s)
    off = quasimode_ratio(4, cutoff, STRIP, s=s)
    assert detune - on <= off <= detune + on
    assert off != pytest.approx(on)
