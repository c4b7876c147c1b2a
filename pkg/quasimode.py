"""
Quasimodes concentrated on the trapped vertical lines of the undamped strip.

phi_n(x, y) = chi(x) e^{2 i pi n y} with chi supported away from {b > 0}
satisfies P(i 2 pi n) phi_n = -chi'' e^{2 i pi n y}. quasimode_ratio evaluates the
full residual by quadrature, so the ratio comes out independent of n only
when b chi really vanishes; its reciprocal bounds ||P(i 2 pi n)^-1|| from below.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from core import Constant, SmoothExp, Sampled, Strip
from errors import ExactEigenmode, NoGap, SupportOverlap, UsageError
from utils.geometry import piecewise_simpson

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 8193


@dataclass
class Cutoff:
    sigma_support: float
    x: np.ndarray
    samples: np.ndarray
    second_derivative: np.ndarray
    norm_L2: float
    norm_d2_L2: float
    label: str = "bump"
    chi: Optional[Callable] = field(default=None, repr=False)
    d2chi: Optional[Callable] = field(default=None, repr=False)
    breakpoints: Tuple[float, ...] = ()


def _f(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1"""
    t = np.asarray(t, dtype=float)
    p, q = _f(1.0 - t), _f(t)
    return p / (p + q)


def smooth_step_d2(t):
    """Analytic second derivative of smooth_step"""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    s = 1.0 - ti
    p, q = np.exp(-1.0 / s), np.exp(-1.0 / ti)
    # derivatives of f(u) = exp(-1/u): f' = f/u^2, f'' = f (1/u^4 - 2/u^3)
    dp = -p / s**2
    dq = q / ti**2
    d2p = p * (1.0 / s**4 - 2.0 / s**3)
    d2q = q * (1.0 / ti**4 - 2.0 / ti**3)
    S = p + q
    N = dp * q - p * dq
    dN = d2p * q - p * d2q
    out[inside] = (dN * S - 2.0 * N * (dp + dq)) / S**3
    return out


def undamped_half_width(profile) -> float:
    """Largest g with b = 0 on |x| <= g (1/2 when b vanishes identically)"""
    if isinstance(profile, (Strip, SmoothExp)):
        if isinstance(profile, SmoothExp) and profile.amplitude == 0:
            return 0.5
        return float(profile.sigma)
    if isinstance(profile, Constant):
        return 0.5 if profile.c == 0 else 0.0
    if isinstance(profile, Sampled):
        x = np.abs(profile.grid)
        damped = x[np.asarray(profile.samples) > 0]
        # linear interpolation switches b on one cell before the first damped node
        return max(0.0, float(damped.min()) - 1.0 / x.size) if damped.size else 0.5
    raise UsageError(f"unsupported profile {profile!r}")


def _from_functions(sigma_support, chi: Callable, d2chi: Callable, breakpoints, samples, label):
    x = np.linspace(-0.5, 0.5, samples)
    norm = np.sqrt(piecewise_simpson(lambda t: chi(t) ** 2, breakpoints, samples))
    norm_d2 = np.sqrt(piecewise_simpson(lambda t: d2chi(t) ** 2, breakpoints, samples))
    return Cutoff(sigma_support=sigma_support, x=x, samples=chi(x), second_derivative=d2chi(x),
                  norm_L2=float(norm), norm_d2_L2=float(norm_d2), label=label, chi=chi, d2chi=d2chi,
                  breakpoints=tuple(breakpoints))


def build_cutoff(profile, margin: float = 0.05, samples: int = DEFAULT_SAMPLES,
                 sigma_support: Optional[float] = None) -> Cutoff:
    """Smooth cutoff equal to 1 on |x| <= s/2 and 0 on |x| >= s, s = sigma_support.

    Args:
        profile: damping profile whose undamped strip hosts the cutoff
        margin: required distance between the support of chi and {b > 0}
        samples: number of sample and quadrature points
        sigma_support: support half-width, defaults to the strip half-width
            minus the margin

    Returns:
        Cutoff: samples, analytic second derivative and both L2 norms
    """
    gap = undamped_half_width(profile)
    if sigma_support is None:
        sigma_support = gap - margin
    if sigma_support <= 0 or sigma_support + margin > gap + 1e-15:
        raise NoGap(f"support {sigma_support} plus margin {margin} exceeds the undamped half-width {gap}")
    half = 0.5 * sigma_support

    def chi(x):
        return smooth_step((np.abs(x) - half) / half)

    def d2chi(x):
        return smooth_step_d2((np.abs(x) - half) / half) / half**2

    return _from_functions(sigma_support, chi, d2chi, [-sigma_support, -half, half, sigma_support],
                           samples, "bump")


def cos_squared_cutoff(sigma_support: float, samples: int = DEFAULT_SAMPLES) -> Cutoff:
    """C^1 reference cutoff cos^2(a x) on |x| <= s with a = pi/(2s)"""
    a = np.pi / (2.0 * sigma_support)

    def chi(x):
        return np.where(np.abs(x) <= sigma_support, np.cos(a * x) ** 2, 0.0)

    def d2chi(x):
        return np.where(np.abs(x) <= sigma_support, -2.0 * a**2 * np.cos(2.0 * a * x), 0.0)

    return _from_functions(sigma_support, chi, d2chi, [-sigma_support, sigma_support],
                           samples, "cos2")


def cos_squared_ratio(sigma_support: float) -> float:
    """Closed form of ||chi''|| / ||chi|| for cos_squared_cutoff"""
    a = np.pi / (2.0 * sigma_support)
    return float(4.0 * a**2 / np.sqrt(3.0))


def constant_cutoff(samples: int = DEFAULT_SAMPLES) -> Cutoff:
    """chi = 1, an exact eigenfunction when b vanishes"""
    x = np.linspace(-0.5, 0.5, samples)
    return Cutoff(sigma_support=0.5, x=x, samples=np.ones_like(x), second_derivative=np.zeros_like(x),
                  norm_L2=1.0, norm_d2_L2=0.0, label="one", chi=np.ones_like, d2chi=np.zeros_like)


def quasimode_frequency(n: int) -> float:
    """Quasimode phi_n sits at z = i 2 pi n on the unit torus"""
    return 2.0 * np.pi * n


def quasimode_ratio(n: int, cutoff: Cutoff, profile, s: Optional[float] = None,
                    samples: int = DEFAULT_SAMPLES) -> float:
    """||P(i s) phi_n|| / ||phi_n|| for phi_n = chi(x) e^{2 i pi n y}, s = 2 pi n by default

    The residual -chi'' + (4 pi^2 n^2 - s^2) chi + i s b chi is integrated
    by piecewise Simpson over the breakpoints of chi and the jumps of b.
    Raises SupportOverlap when the damping term does not vanish.
    """
    if n < 1:
        raise UsageError(f"quasimode index must be positive, got {n}")
    kn = quasimode_frequency(n)
    s = kn if s is None else float(s)
    detune = kn * kn - s * s
    breaks = sorted(set(cutoff.breakpoints) | set(profile.jump_points()))
    damped = piecewise_simpson(lambda x: np.abs(s * profile.values(x) * cutoff.chi(x)) ** 2, breaks, samples)
    if damped > 0:
        raise SupportOverlap(f"cutoff overlaps the damped region, ||s b chi|| = {np.sqrt(damped):.3e}")

    def residual2(x):
        chi = cutoff.chi(x)
        return np.abs(-cutoff.d2chi(x) + detune * chi + 1j * s * profile.values(x) * chi) ** 2

    mass = piecewise_simpson(lambda x: cutoff.chi(x) ** 2, breaks, samples)
    ratio = float(np.sqrt(piecewise_simpson(residual2, breaks, samples) / mass))
    logger.debug("quasimode n=%d at s=%.6g: ratio %.12g", n, s, ratio)
    return ratio


def lower_bound_constant(cutoff: Cutoff) -> float:
    """C = ||chi|| / ||chi''|| with ||P(i 2 pi n)^-1|| >= C for all n >= 1"""
    if cutoff.norm_d2_L2 == 0:
        raise ExactEigenmode("chi'' vanishes, the quasimode is an exact eigenfunction")
    return float(cutoff.norm_L2 / cutoff.norm_d2_L2)


def quasimode_table(ns, cutoff: Cutoff, profile) -> List[Tuple[int, float, float]]:
    """Rows (n, ratio, lower_bound_C)"""
    try:
        C = lower_bound_constant(cutoff)
    except ExactEigenmode:
        C = float("inf")
    return [(int(n), quasimode_ratio(int(n), cutoff, profile), C) for n in ns]
