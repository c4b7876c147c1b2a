"""
Shared domain types for the damped-wave lab.

Geometry, damping profiles and mode indices live here, together with the
profile-level predicates every other module relies on. Points x are taken
on the fundamental cell [-1/2, 1/2) of the horizontal circle; the vertical
direction is the unit circle carrying Fourier modes e^{2 i pi n y}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from errors import ConfigError, DiscontinuousProfile, ParityMismatch, UsageError

logger = logging.getLogger(__name__)


class Parity(Enum):
    EVEN = "even"
    ODD = "odd"


class Domain(Enum):
    TORUS = "torus"
    SQUARE = "square"


class Boundary(Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


def csqrt_right(w):
    """Principal complex square root with Re >= 0 enforced.

    Works on scalars and arrays. On the negative real axis the sign of the
    imaginary part of w decides the sheet, so sqrt(conj(w)) == conj(sqrt(w))
    away from the cut.
    """
    r = np.sqrt(np.asarray(w, dtype=complex))
    r = np.where(r.real < 0, -r, r)
    if r.ndim == 0:
        return complex(r)
    return r


@dataclass(frozen=True)
class Geometry:
    domain: Domain = Domain.TORUS
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.domain is Domain.TORUS and self.boundary is not Boundary.PERIODIC:
            raise UsageError(f"torus requires periodic boundary, got {self.boundary.value}")
        if self.domain is Domain.SQUARE and self.boundary is Boundary.PERIODIC:
            raise UsageError("square requires dirichlet or neumann boundary")
        return self


@dataclass(frozen=True)
class ModeIndex:
    """Vertical index n (integer or half-integer) with horizontal number m"""
    n: float
    m: int = 0
    parity: Parity = Parity.EVEN

    def validate(self, geometry: Geometry):
        if self.m < 0:
            raise UsageError(f"m must be nonnegative, got {self.m}")
        twice_n = 2 * self.n
        if abs(twice_n - round(twice_n)) > 1e-12:
            raise UsageError(f"n must be an integer or half-integer, got {self.n}")
        if geometry.domain is Domain.TORUS:
            if abs(self.n - round(self.n)) > 1e-12:
                raise UsageError(f"torus modes need integer n, got {self.n}")
            return self
        if self.n < 0:
            raise UsageError(f"square modes need n >= 0, got {self.n}")
        if geometry.boundary is Boundary.DIRICHLET:
            if self.parity is not Parity.ODD:
                raise ParityMismatch("dirichlet square forces odd parity")
            if self.n == 0:
                raise UsageError("dirichlet square excludes n = 0")
        elif self.parity is not Parity.EVEN:
            raise ParityMismatch("neumann square forces even parity")
        return self


class DampingProfile:
    """Base class for the damping coefficient b(x) >= 0"""

    kind = "abstract"

    def values(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def max_value(self) -> float:
        raise NotImplementedError

    def jump_points(self) -> Tuple[float, ...]:
        return ()

    def is_even(self) -> bool:
        return True

    def is_zero(self) -> bool:
        return self.max_value() == 0.0

    def to_config(self) -> Dict[str, str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Strip(DampingProfile):
    """b = 0 on |x| <= sigma and b = Btilde on sigma < |x| <= 1/2"""
    Btilde: float = 1.0
    sigma: float = 0.25
    kind = "strip"

    def __post_init__(self):
        if not self.Btilde > 0:
            raise UsageError(f"strip amplitude must be positive, got {self.Btilde}")
        if not 0 < self.sigma < 0.5:
            raise UsageError(f"strip half-width must lie in (0, 1/2), got {self.sigma}")

    @property
    def sigma_prime(self) -> float:
        return 0.5 - self.sigma

    def values(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.sigma, 0.0, self.Btilde)

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def max_value(self):
        return float(self.Btilde)

    def jump_points(self):
        return (-self.sigma, self.sigma)

    def to_config(self):
        return {"kind": self.kind, "Btilde": repr(float(self.Btilde)), "sigma": repr(float(self.sigma))}


@dataclass(frozen=True)
class SmoothExp(DampingProfile):
    """b = amplitude * exp(-t^(-alpha)) with t = (|x| - sigma) / (1/2 - sigma) for |x| > sigma"""
    alpha: float = 1.0
    sigma: float = 0.25
    amplitude: float = 1.0
    kind = "smoothexp"

    def __post_init__(self):
        if not self.alpha > 0:
            raise UsageError(f"alpha must be positive, got {self.alpha}")
        if not 0 <= self.sigma < 0.5:
            raise UsageError(f"sigma must lie in [0, 1/2), got {self.sigma}")
        if self.amplitude < 0:
            raise UsageError(f"amplitude must be nonnegative, got {self.amplitude}")

    def _t(self, x):
        return (np.abs(x) - self.sigma) / (0.5 - self.sigma)

    def values(self, x):
        x = np.asarray(x, dtype=float)
        t = self._t(x)
        out = np.zeros_like(t)
        mask = t > 0
        out[mask] = self.amplitude * np.exp(-t[mask] ** (-self.alpha))
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        t = self._t(x)
        out = np.zeros_like(t)
        mask = t > 0
        tm = t[mask]
        b = self.amplitude * np.exp(-tm ** (-self.alpha))
        out[mask] = b * self.alpha * tm ** (-self.alpha - 1) * np.sign(x[mask]) / (0.5 - self.sigma)
        return out

    def max_value(self):
        return float(self.amplitude * np.exp(-1.0))

    def to_config(self):
        return {
            "kind": self.kind,
            "alpha": repr(float(self.alpha)),
            "sigma": repr(float(self.sigma)),
            "amplitude": repr(float(self.amplitude)),
        }


@dataclass(frozen=True)
class Constant(DampingProfile):
    c: float = 0.0
    kind = "constant"

    def __post_init__(self):
        if self.c < 0:
            raise UsageError(f"constant damping must be nonnegative, got {self.c}")

    def values(self, x):
        return np.full_like(np.asarray(x, dtype=float), float(self.c))

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def max_value(self):
        return float(self.c)

    def to_config(self):
        return {"kind": self.kind, "c": repr(float(self.c))}


@dataclass(frozen=True)
class Sampled(DampingProfile):
    """Nonnegative samples on the uniform grid x_j = -1/2 + j/N, periodic linear interpolation"""
    samples: Tuple[float, ...] = field(default_factory=tuple)
    kind = "sampled"

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.size < 2:
            raise UsageError("sampled profile needs at least two values")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise UsageError("sampled profile values must be finite and nonnegative")
        object.__setattr__(self, "samples", tuple(float(v) for v in arr))

    @property
    def grid(self):
        n = len(self.samples)
        return -0.5 + np.arange(n) / n

    def values(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.append(self.grid, 0.5)
        fp = np.append(self.samples, self.samples[0])
        wrapped = (x + 0.5) % 1.0 - 0.5
        return np.interp(wrapped, xp, fp)

    def derivative(self, x):
        arr = np.asarray(self.samples)
        dx = 1.0 / arr.size
        grad = (np.roll(arr, -1) - np.roll(arr, 1)) / (2 * dx)
        xp = np.append(self.grid, 0.5)
        fp = np.append(grad, grad[0])
        wrapped = (np.asarray(x, dtype=float) + 0.5) % 1.0 - 0.5
        return np.interp(wrapped, xp, fp)

    def max_value(self):
        return float(max(self.samples))

    def is_even(self):
        arr = np.asarray(self.samples)
        # x_j -> -x_j maps index j to (N - j) mod N on this grid
        mirrored = np.roll(arr[::-1], 1)
        return bool(np.allclose(arr, mirrored, rtol=0, atol=1e-14))

    def to_config(self):
        return {"kind": self.kind, "samples": ",".join(repr(v) for v in self.samples)}


def eval_damping(profile: DampingProfile, x):
    """Evaluate b(x). Scalars in, float out; arrays in, array out."""
    out = profile.values(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass
class GradientCheck:
    holds: bool
    C_eps_estimate: float
    refined_estimate: float = float("nan")


def _gradient_ratio(profile, eps, grid_size):
    x = -0.5 + (np.arange(grid_size) + 0.5) / grid_size
    b = profile.values(x)
    db = profile.derivative(x)
    mask = b > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(db[mask]) / b[mask] ** (1.0 - eps)))


def check_gradient_condition(profile: DampingProfile, eps: float, grid_size: int = 4096,
                             strict: bool = False) -> GradientCheck:
    """Estimate C_eps in |b'(x)| <= C_eps b(x)^(1-eps) on {b > 0}.

    The estimate is taken on two grids (grid_size and twice that). The
    condition is accepted when the refined estimate is finite and has not
    grown by more than half, i.e. no blow-up trend under refinement.

    Args:
        profile: Damping profile to inspect
        eps: Exponent loss, in (0, 1)
        grid_size: Number of cell midpoints on the coarse grid
        strict: Raise DiscontinuousProfile for jump profiles instead of
            reporting holds=False

    Returns:
        GradientCheck: holds flag and the estimated constant
    """
    if not 0 < eps < 1:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    if profile.jump_points():
        if strict:
            raise DiscontinuousProfile(f"{profile.kind} profile has jumps at {profile.jump_points()}")
        logger.info("gradient condition fails trivially at the jumps of %s", profile.kind)
        return GradientCheck(holds=False, C_eps_estimate=float("inf"), refined_estimate=float("inf"))

    coarse = _gradient_ratio(profile, eps, grid_size)
    fine = _gradient_ratio(profile, eps, 2 * grid_size)
    holds = bool(np.isfinite(fine) and fine <= 1.5 * coarse + 1e-12)
    logger.debug("gradient ratio coarse=%g fine=%g holds=%s", coarse, fine, holds)
    return GradientCheck(holds=holds, C_eps_estimate=max(coarse, fine), refined_estimate=fine)


PROFILE_KINDS = {
    "strip": Strip,
    "smoothexp": SmoothExp,
    "constant": Constant,
    "sampled": Sampled,
}


def profile_from_config(entries: Dict[str, str]) -> DampingProfile:
    """Build a profile from key=value entries as written by to_config"""
    entries = dict(entries)
    kind = entries.pop("kind", None)
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"unknown profile kind: {kind!r}")
    cls = PROFILE_KINDS[kind]
    allowed = {f for f in cls.__dataclass_fields__}
    unknown = set(entries) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for {kind} profile: {sorted(unknown)}")
    try:
        if cls is Sampled:
            values = tuple(float(v) for v in entries.get("samples", "").split(",") if v.strip())
            return Sampled(samples=values)
        return cls(**{k: float(v) for k, v in entries.items()})
    except ValueError as e:
        raise ConfigError(f"bad value in {kind} profile: {e}") from e


def profile_to_text(profile: DampingProfile) -> str:
    return "".join(f"{k}={v}\n" for k, v in profile.to_config().items())


def profile_from_text(text: str) -> DampingProfile:
    entries = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return profile_from_config(entries)
