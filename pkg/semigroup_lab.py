"""
Finite-dimensional model of the damped wave semigroup.

A = -Laplacian is diagonal in the Fourier basis e^{2 i pi (m x + n y)} and
B is multiplication by sqrt(b). Since b depends on x only, the generator
[[0, I], [-A, -BB*]] is block diagonal in n and every check runs block by
block. Norms on the energy space use the weight (1 + lambda)^(1/2) on the
displacement component.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from core import Constant, Strip
from errors import LocalizationViolation, NearSpectrum, UsageError
from resolvent import worker_count

logger = logging.getLogger(__name__)

FOURIER_SAMPLES = 4096
LOCALIZATION_TOL = 1e-9
KERNEL_CLUSTER = 1e-7
NEAR_SPECTRUM = 1e-6


def sqrt_damping_coefficients(profile, jmax: int) -> np.ndarray:
    """Fourier coefficients g_j of sqrt(b) for j = -jmax..jmax

    Strip and Constant use closed forms; other profiles are sampled and
    transformed by FFT.
    """
    j = np.arange(-jmax, jmax + 1)
    if isinstance(profile, Strip):
        root = math.sqrt(profile.Btilde)
        out = np.empty(j.size, dtype=complex)
        nz = j != 0
        out[nz] = -root * np.sin(2 * math.pi * j[nz] * profile.sigma) / (math.pi * j[nz])
        out[~nz] = root * (1.0 - 2.0 * profile.sigma)
        return out
    if isinstance(profile, Constant):
        return np.where(j == 0, math.sqrt(profile.c), 0.0).astype(complex)
    M = max(FOURIER_SAMPLES, 8 * (2 * jmax + 1))
    x = -0.5 + np.arange(M) / M
    g = np.sqrt(np.maximum(profile.values(x), 0.0))
    ghat = np.fft.fft(g) / M
    # the grid starts at x = -1/2, which multiplies coefficient j by (-1)^j
    return ghat[j % M] * np.where(j % 2 == 0, 1.0, -1.0)


@dataclass
class ModeBlock:
    n: int
    ms: np.ndarray
    lam: np.ndarray
    B: np.ndarray

    @property
    def size(self) -> int:
        return self.ms.size

    @property
    def BB(self) -> np.ndarray:
        return self.B @ self.B.conj().T

    def generator(self) -> np.ndarray:
        d = self.size
        out = np.zeros((2 * d, 2 * d), dtype=complex)
        out[:d, d:] = np.eye(d)
        out[d:, :d] = -np.diag(self.lam)
        out[d:, d:] = -self.BB
        return out

    def weight(self) -> np.ndarray:
        return np.concatenate([np.sqrt(1.0 + self.lam), np.ones(self.size)])

    def scaled_generator(self) -> np.ndarray:
        """Generator in coordinates where the energy norm is Euclidean"""
        w = self.weight()
        return (w[:, None] * self.generator()) / w[None, :]

    def P(self, z: complex) -> np.ndarray:
        return np.diag(self.lam + z * z) + z * self.BB


@dataclass
class TruncatedSystem:
    profile: object
    freq_cutoff: int
    blocks: List[ModeBlock]
    norm_Bstar: float
    sup_sqrt_b: float
    _spectra: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        """Total dimension, counting the blocks n and -n separately"""
        return sum(2 * blk.size * (1 if blk.n == 0 else 2) for blk in self.blocks)

    def full_generator(self) -> np.ndarray:
        """Block-diagonal generator over n = -K..K (small cutoffs only)"""
        by_n = {blk.n: blk for blk in self.blocks}
        ns = range(-self.freq_cutoff, self.freq_cutoff + 1)
        return la.block_diag(*(by_n[abs(n)].generator() for n in ns))

    def block_spectrum(self, blk: ModeBlock) -> np.ndarray:
        if blk.n not in self._spectra:
            self._spectra[blk.n] = la.eigvals(blk.scaled_generator())
        return self._spectra[blk.n]

    def spectrum(self) -> np.ndarray:
        """All eigenvalues, n >= 0 blocks only (n and -n coincide)"""
        return np.concatenate([self.block_spectrum(blk) for blk in self.blocks])


def build_system(profile, freq_cutoff: int) -> TruncatedSystem:
    """Truncate to 4 pi^2 (m^2 + n^2) <= (2 pi K)^2 with K = freq_cutoff

    Args:
        profile: damping profile
        freq_cutoff: K >= 1

    Returns:
        TruncatedSystem: one block per n = 0..K
    """
    if freq_cutoff < 1:
        raise UsageError(f"freq_cutoff must be at least 1, got {freq_cutoff}")
    K = int(freq_cutoff)
    ghat = sqrt_damping_coefficients(profile, 2 * K)
    blocks = []
    for n in range(0, K + 1):
        M = math.isqrt(K * K - n * n)
        ms = np.arange(-M, M + 1)
        lam = 4 * math.pi**2 * (ms**2 + n * n).astype(float)
        # B[i, j] = g_{m_i - m_j}; ghat is indexed from -2K
        B = la.toeplitz(ghat[2 * K + (ms - ms[0])], ghat[2 * K - (ms - ms[0])])
        blocks.append(ModeBlock(n=n, ms=ms, lam=lam, B=B))
    norm_B = max(np.linalg.norm(blk.B, 2) for blk in blocks)
    sup = math.sqrt(profile.max_value())
    logger.info("truncated system K=%d: %d blocks, ||B*||=%.6g, sup sqrt(b)=%.6g",
                K, len(blocks), norm_B, sup)
    return TruncatedSystem(profile=profile, freq_cutoff=K, blocks=blocks,
                           norm_Bstar=float(norm_B), sup_sqrt_b=sup)


@dataclass
class KernelReport:
    dim_ker_generator: int
    dim_ker_A: int
    max_velocity_component: float

    @property
    def holds(self) -> bool:
        return self.dim_ker_generator == self.dim_ker_A and self.max_velocity_component <= 1e-8


@dataclass
class LocalizationReport:
    passed: bool
    eigenvalue_count: int
    max_violation: float
    norm_Bstar: float
    sup_sqrt_b: float
    truncated_bound_binding: bool
    conjugate_symmetric: bool
    kernel_cluster: int
    kernel: KernelReport


def kernel_report(system: TruncatedSystem, tol: float = 1e-10) -> KernelReport:
    """Null space of the generator against ker A x {0}"""
    dim_gen = 0
    dim_A = 0
    worst = 0.0
    for blk in system.blocks:
        mult = 1 if blk.n == 0 else 2
        dim_A += mult * int(np.count_nonzero(blk.lam == 0))
        G = blk.scaled_generator()
        _, sv, vh = np.linalg.svd(G)
        null = sv <= tol * max(1.0, sv[0])
        dim_gen += mult * int(np.count_nonzero(null))
        for vec in vh[null]:
            worst = max(worst, float(np.linalg.norm(vec[blk.size:])))
    return KernelReport(dim_ker_generator=dim_gen, dim_ker_A=dim_A, max_velocity_component=worst)


def _conjugate_symmetric(eigs: np.ndarray, tol: float) -> bool:
    for z in eigs:
        if np.min(np.abs(eigs - np.conj(z))) > tol * max(1.0, abs(z)):
            return False
    return True


def check_spectrum_localization(system: TruncatedSystem, tol: float = LOCALIZATION_TOL,
                                strict: bool = True) -> LocalizationReport:
    """Non-real eigenvalues in (-||B*||^2/2, 0) + iR, real ones in [-||B*||^2, 0]

    Raises:
        LocalizationViolation: with the offending eigenvalue, when strict
    """
    nb2 = system.norm_Bstar**2
    worst = 0.0
    offender = None
    cluster = 0
    symmetric = True
    count = 0
    for blk in system.blocks:
        eigs = system.block_spectrum(blk)
        count += eigs.size
        if system.profile.is_even():
            symmetric &= _conjugate_symmetric(eigs, tol)
        for z in eigs:
            scale = tol * max(1.0, abs(z))
            if abs(z) <= KERNEL_CLUSTER:
                cluster += 1
                continue
            lo = -nb2 if abs(z.imag) <= scale else -0.5 * nb2
            excess = max(z.real - scale, lo - scale - z.real, 0.0)
            if excess > worst:
                worst, offender = excess, z
    kern = kernel_report(system)
    binding = system.norm_Bstar < system.sup_sqrt_b - 1e-12
    report = LocalizationReport(passed=offender is None, eigenvalue_count=count, max_violation=worst,
                                norm_Bstar=system.norm_Bstar, sup_sqrt_b=system.sup_sqrt_b,
                                truncated_bound_binding=binding, conjugate_symmetric=symmetric,
                                kernel_cluster=cluster, kernel=kern)
    if offender is not None and strict:
        raise LocalizationViolation(f"eigenvalue {offender} leaves the localization region by {worst:.3g}",
                                    eigenvalue=offender)
    return report


def distance_to_spectrum(system: TruncatedSystem, z: complex) -> float:
    return float(np.min(np.abs(system.spectrum() - z)))


def check_resolvent_identity(system: TruncatedSystem, z: complex) -> float:
    """Max entrywise relative gap between (z - G)^-1 and its block formula

    The formula is [[P^-1 (BB* + z), P^-1], [P^-1 (z BB* + z^2) - I, z P^-1]]
    with P = A + z^2 + z BB*, compared in energy-norm coordinates.
    """
    dist = distance_to_spectrum(system, z)
    if dist < NEAR_SPECTRUM:
        raise NearSpectrum(f"z={z} lies within {dist:.3g} of the spectrum", distance=dist)
    worst = 0.0
    for blk in system.blocks:
        d = blk.size
        w = blk.weight()
        left = la.inv(z * np.eye(2 * d) - blk.scaled_generator())
        Pinv = la.inv(blk.P(z))
        BB = blk.BB
        right = np.empty_like(left)
        right[:d, :d] = Pinv @ (BB + z * np.eye(d))
        right[:d, d:] = Pinv
        right[d:, :d] = Pinv @ (z * BB + z * z * np.eye(d)) - np.eye(d)
        right[d:, d:] = z * Pinv
        right = (w[:, None] * right) / w[None, :]
        worst = max(worst, float(np.max(np.abs(left - right)) / np.max(np.abs(left))))
    return worst


@dataclass
class SandwichReport:
    s_list: List[float]
    semigroup_norms: List[float]
    scaled_P_norms: List[float]
    constant: float

    def holds(self, C: float) -> bool:
        return self.constant <= C


def _sandwich_at(system: TruncatedSystem, s: float) -> Tuple[float, float]:
    R = 0.0
    Pn = 0.0
    for blk in system.blocks:
        d = blk.size
        R = max(R, np.linalg.norm(la.inv(1j * s * np.eye(2 * d) - blk.scaled_generator()), 2))
        Pn = max(Pn, np.linalg.norm(la.inv(blk.P(1j * s)), 2))
    return float(R), float(Pn)


def check_sandwich(system: TruncatedSystem, s_list: Sequence[float],
                   workers: Optional[int] = None) -> SandwichReport:
    """Smallest C with |s| ||P^-1|| / C <= ||(is - G)^-1|| <= C (1 + |s| ||P^-1||)"""
    s_list = [float(s) for s in s_list]
    if any(s == 0 for s in s_list):
        raise UsageError("sandwich frequencies must be nonzero")
    workers = worker_count(workers)
    if workers > 1 and len(s_list) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(lambda s: _sandwich_at(system, s), s_list))
    else:
        pairs = [_sandwich_at(system, s) for s in s_list]
    C = 1.0
    for s, (R, Pn) in zip(s_list, pairs):
        sP = abs(s) * Pn
        C = max(C, sP / R, R / (1.0 + sP))
    return SandwichReport(s_list=s_list, semigroup_norms=[p[0] for p in pairs],
                          scaled_P_norms=[abs(s) * p[1] for s, p in zip(s_list, pairs)], constant=C)


@dataclass
class GapReport:
    exponent: float
    min_product: float
    argmin: Optional[complex]
    count: int


def check_gap_region(system: TruncatedSystem, alpha: float = 2.0 / 3.0, eps: float = 0.0,
                     im_min: float = 10.0) -> GapReport:
    """min of |Re z| |Im z|^(1/alpha - eps) over eigenvalues with |Im z| >= im_min"""
    p = 1.0 / alpha - eps
    eigs = system.spectrum()
    eigs = eigs[np.abs(eigs.imag) >= im_min]
    if eigs.size == 0:
        return GapReport(exponent=p, min_product=math.inf, argmin=None, count=0)
    prod = np.abs(eigs.real) * np.abs(eigs.imag) ** p
    i = int(np.argmin(prod))
    return GapReport(exponent=p, min_product=float(prod[i]), argmin=complex(eigs[i]), count=int(eigs.size))


def check_observability_ingredient(system: TruncatedSystem, s_list: Sequence[float]) -> List[float]:
    """Smallest C(s) with ||u||^2 <= C (||P(is)u||^2 + s^2 ||BB* u||^2 + ||B* u||^2)"""
    out = []
    for s in s_list:
        worst = 0.0
        for blk in system.blocks:
            P = blk.P(1j * s)
            BB = blk.BB
            Q = P.conj().T @ P + s * s * (BB @ BB) + BB
            lam_min = float(np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))[0])
            worst = max(worst, math.inf if lam_min <= 0 else 1.0 / lam_min)
        out.append(worst)
    return out


def truncation_drift(coarse: TruncatedSystem, fine: TruncatedSystem,
                     box: Tuple[float, float, float, float]) -> float:
    """Largest distance from a coarse eigenvalue in the box to the fine spectrum"""
    re_lo, re_hi, im_lo, im_hi = box
    a = coarse.spectrum()
    a = a[(a.real >= re_lo) & (a.real <= re_hi) & (a.imag >= im_lo) & (a.imag <= im_hi)]
    if a.size == 0:
        return 0.0
    b = fine.spectrum()
    return float(max(np.min(np.abs(b - z)) for z in a))
