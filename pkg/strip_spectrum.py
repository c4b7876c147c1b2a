"""
Closed-form spectral solver for the strip damping b = Btilde on |x| > sigma.

Eigenvalues are written z = i(1/h + zt) and modes u = e^{2 i pi n y} v(x).
Inside the undamped strip v oscillates with wavevector k, outside with k'
where (hk)^2 = E and (hk')^2 = E - i h B. Matching v and v' at x = sigma
gives a tangent quantization condition solved here by Newton on k, with an
outer fixed point on the coupling B = Btilde (1 + h zt).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from core import Boundary, Parity, Strip, csqrt_right
from errors import NoConvergence, OddMZero, ParityMismatch, PoleProximity, UsageError
from utils.geometry import piecewise_simpson

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
COUPLING_TOL = 1e-12
COUPLING_MAX_ITER = 50
POLE_TOL = 1e-12
# below this value of sigma' (Btilde / 2h)^(1/2) the mode is barely damped
WEAK_DAMPING_THRESHOLD = 0.5
WALK_START_RATIO = 32.0
WALK_RATIO = 2.0 ** 0.25
WALK_MIN_RATIO = 1.01


@dataclass(frozen=True)
class BranchParams:
    Btilde: float = 1.0
    sigma: float = 0.25
    parity: Parity = Parity.EVEN
    m: int = 0
    n: Optional[float] = None

    def __post_init__(self):
        Strip(self.Btilde, self.sigma)
        if self.m < 0:
            raise UsageError(f"m must be nonnegative, got {self.m}")

    @property
    def sigma_prime(self) -> float:
        return 0.5 - self.sigma

    @property
    def profile(self) -> Strip:
        return Strip(self.Btilde, self.sigma)

    def require_valid_parity(self):
        if self.parity is Parity.ODD and self.m == 0:
            raise OddMZero("odd parity with m=0 has no solution")

    def vertical_index(self, h: float, half_integers: bool = False) -> float:
        """n for this h: the fixed n if set, else the nearest to 1/(2 pi h)"""
        if self.n is not None:
            return float(self.n)
        if half_integers:
            return round(1.0 / (np.pi * h)) / 2.0
        return float(round(1.0 / (2.0 * np.pi * h)))


@dataclass
class QuantizationRoot:
    h: float
    k: complex
    kp: complex
    E: complex
    zeta: complex
    zeta_t: complex
    B: complex
    z: complex
    residual: float
    n: float = 0.0
    m: int = 0
    parity: Parity = Parity.EVEN
    iterations: int = 0

    @property
    def scaling_diagnostic(self) -> float:
        return abs(self.z.real) * abs(self.z.imag) ** 1.5


def wavevectors(E, h, B):
    """k = sqrt(E)/h and k' = sqrt(E - ihB)/h, both with Re >= 0"""
    if not h > 0:
        raise UsageError(f"h must be positive, got {h}")
    return csqrt_right(E) / h, csqrt_right(E - 1j * h * B) / h


def _kprime(k, h, B):
    return csqrt_right(k * k - 1j * B / h)


def quantization_residual(k, h, B, params: BranchParams):
    """Tangent matching condition F(k) at fixed coupling B"""
    return _residual_and_derivative(k, h, B, params)[0]


def _tan(w, k):
    """tan(w) = i s (1 - q)/(1 + q) with q = exp(2 i s w), s = sign(Im w), so |q| <= 1"""
    w = complex(w)
    s = 1.0 if w.imag >= 0 else -1.0
    q = np.exp(2j * s * w)
    if abs(1.0 + q) < 2.0 * POLE_TOL:
        raise PoleProximity(f"tangent pole near k={k}", k=k)
    return complex(1j * s * (1.0 - q) / (1.0 + q))


def _residual_and_derivative(k, h, B, params):
    sig, sigp = params.sigma, params.sigma_prime
    kp = _kprime(k, h, B)
    t_in = _tan(k * sig, k)
    t_out = _tan(kp * sigp, k)
    sec2_in = 1.0 + t_in * t_in
    sec2_out = 1.0 + t_out * t_out
    iBh = 1j * B / h
    if params.parity is Parity.EVEN:
        F = t_in + (kp / k) * t_out
        dF = sig * sec2_in + iBh / (kp * k * k) * t_out + sigp * sec2_out
    else:
        F = t_in + (k / kp) * t_out
        dF = sig * sec2_in - iBh / kp**3 * t_out + sigp * (k / kp) ** 2 * sec2_out
    return complex(F), complex(dF)


def asymptotic_im_zeta(params: BranchParams, h: float) -> float:
    """Leading-order Im zt of the branch, of size h^(3/2)"""
    params.require_valid_parity()
    return float(h**1.5 * scaling_constant(params))


def scaling_constant(params: BranchParams) -> float:
    """Limit of |Re z| (Im z)^(3/2) along the branch"""
    params.require_valid_parity()
    if params.parity is Parity.EVEN:
        q = np.pi * (params.m + 0.5)
    else:
        q = np.pi * params.m
    return float(q**2 / (params.sigma**3 * np.sqrt(2.0 * params.Btilde)))


def _quantum(params):
    if params.parity is Parity.EVEN:
        return np.pi * (params.m + 0.5) / params.sigma
    return np.pi * params.m / params.sigma


def asymptotic_seed(params: BranchParams, h: float) -> complex:
    params.require_valid_parity()
    shift = np.sqrt(h) * np.exp(0.75j * np.pi) / (params.sigma * np.sqrt(params.Btilde))
    return complex(_quantum(params) * (1.0 + shift))


def weak_damping_seed(params: BranchParams, h: float) -> complex:
    """Undamped wavevector 2 pi m with k^2 shifted by the mean coupling 2i sigma' Btilde / h"""
    params.require_valid_parity()
    k0 = 2.0 * np.pi * params.m
    return complex(csqrt_right(k0 * k0 + 2j * params.sigma_prime * params.Btilde / h))


def damping_strength(params: BranchParams, h: float) -> float:
    return float(params.sigma_prime * np.sqrt(params.Btilde / (2.0 * h)))


def boundary_amplitude_asymptotic(params: BranchParams, h: float) -> complex:
    """Leading v(sigma) for the even branch with v(0) = 1"""
    q = np.pi * (params.m + 0.5)
    return complex((-1) ** (params.m + 1) * np.exp(0.75j * np.pi) * np.sqrt(h) * q
                   / (params.sigma * np.sqrt(params.Btilde)))


def _newton_k(k0, h, B, params):
    """Damped Newton on k at fixed B. Returns (k, |F|, iterations)."""
    k = complex(k0)
    F, dF = _residual_and_derivative(k, h, B, params)
    for it in range(1, NEWTON_MAX_ITER + 1):
        if abs(F) <= NEWTON_TOL:
            return k, abs(F), it - 1
        step = F / dF
        lam = 1.0
        while True:
            trial = k - lam * step
            try:
                Ft, dFt = _residual_and_derivative(trial, h, B, params)
                if abs(Ft) < abs(F) or lam < 1e-6:
                    break
            except PoleProximity:
                if lam < 1e-6:
                    raise
            lam *= 0.5
        converged_step = abs(k - trial) <= 4e-16 * abs(trial)
        k, F, dF = trial, Ft, dFt
        if converged_step and abs(F) <= 1e3 * NEWTON_TOL:
            return k, abs(F), it
    if abs(F) <= 1e3 * NEWTON_TOL:
        return k, abs(F), NEWTON_MAX_ITER
    raise NoConvergence(f"Newton on k stalled at |F|={abs(F):.3e} for h={h}",
                        h=h, iterations=NEWTON_MAX_ITER, residual=abs(F))


def _zeta_from_k(k, h, n):
    E = (h * k) ** 2
    hn = 2.0 * np.pi * h * n
    zeta = (E + (hn - 1.0) * (hn + 1.0)) / (2.0 * h)
    zeta_t = 2.0 * zeta / (1.0 + csqrt_right(1.0 + 2.0 * h * zeta))
    return complex(E), complex(zeta), complex(zeta_t)


def _solve_coupled(k0, params, h, n):
    B = complex(params.Btilde)
    zeta_t_prev = None
    k = k0
    total_iters = 0
    tol = max(COUPLING_TOL, 64 * np.finfo(float).eps / h)
    for outer in range(COUPLING_MAX_ITER):
        k, res, iters = _newton_k(k, h, B, params)
        total_iters += iters
        E, zeta, zeta_t = _zeta_from_k(k, h, n)
        if zeta_t_prev is not None and abs(zeta_t - zeta_t_prev) <= tol:
            kp = _kprime(k, h, B)
            logger.debug("coupling converged after %d passes, h=%g k=%s", outer + 1, h, k)
            return QuantizationRoot(h=h, k=k, kp=complex(kp), E=E, zeta=zeta, zeta_t=zeta_t, B=B,
                                    z=complex(1j * (1.0 / h + zeta_t)), residual=res, n=n,
                                    m=params.m, parity=params.parity, iterations=total_iters)
        zeta_t_prev = zeta_t
        B = complex(params.Btilde * (1.0 + h * zeta_t))
    raise NoConvergence(f"coupling fixed point did not settle for h={h}", h=h,
                        iterations=COUPLING_MAX_ITER)


def solve_branch_at_h(params: BranchParams, h: float, seed: Optional[complex] = None,
                      half_integer_n: bool = False) -> QuantizationRoot:
    """Solve the quantization condition for one h.

    Args:
        params: branch parameters
        h: semiclassical parameter, Im z is close to 1/h
        seed: starting wavevector; defaults to the asymptotic seed, or to
            the weak-damping seed when the strip barely damps the mode
        half_integer_n: pick n in (1/2)N instead of N when n is automatic

    Returns:
        QuantizationRoot: converged root with the full consistency chain
    """
    params.require_valid_parity()
    if not h > 0:
        raise UsageError(f"h must be positive, got {h}")
    n = params.vertical_index(h, half_integers=half_integer_n)
    if seed is not None:
        return _solve_coupled(complex(seed), params, h, n)
    try:
        return _solve_from_seeds(params, h, n)
    except NoConvergence as e:
        logger.warning("%s; continuing up from h=%g", e, h / WALK_START_RATIO)
    return _walk_from_small_h(params, h, n)


def _in_label_window(k, params) -> bool:
    # every root has k sigma = quantum +- arctan(.), the principal arctan fixes m
    return abs((k * params.sigma).real - _quantum(params) * params.sigma) < 0.5 * np.pi


def _solve_from_seeds(params, h, n):
    seeds = [asymptotic_seed(params, h), weak_damping_seed(params, h)]
    if damping_strength(params, h) < WEAK_DAMPING_THRESHOLD:
        seeds.reverse()
    last_error = None
    for k0 in seeds:
        try:
            root = _solve_coupled(k0, params, h, n)
        except (NoConvergence, PoleProximity) as e:
            logger.debug("seed k0=%s failed at h=%g: %s", k0, h, e)
            last_error = e
            continue
        if _in_label_window(root.k, params):
            return root
        last_error = f"seed k0={k0} reached k={root.k} on a neighbouring branch"
        logger.debug("%s", last_error)
    raise NoConvergence(f"no seed converged at h={h}: {last_error}", h=h)


def _predict_k(roots, h, params):
    last = roots[-1]
    if len(roots) == 1:
        k_inf = _quantum(params)
        return k_inf + (last.k - k_inf) * np.sqrt(h / last.h)
    prev = roots[-2]
    s0, s1 = np.sqrt(prev.h), np.sqrt(last.h)
    return last.k + (last.k - prev.k) * (np.sqrt(h) - s1) / (s1 - s0)


def _walk_from_small_h(params, h, n):
    """Solve at h / WALK_START_RATIO, where the asymptotic seed is reliable, then continue up to h"""
    h0 = h / WALK_START_RATIO
    roots = [_solve_from_seeds(params, h0, params.vertical_index(h0))]
    ratio = WALK_RATIO
    while roots[-1].h < h:
        target = min(roots[-1].h * ratio, h)
        n_target = n if target == h else params.vertical_index(target)
        try:
            roots.append(_solve_coupled(_predict_k(roots, target, params), params, target, n_target))
        except (NoConvergence, PoleProximity) as e:
            if ratio < WALK_MIN_RATIO:
                raise NoConvergence(f"continuation stalled at h={target}: {e}", h=h)
            ratio = np.sqrt(ratio)
            continue
        roots = roots[-2:]
    logger.debug("reached h=%g by continuation, k=%s", h, roots[-1].k)
    return roots[-1]


def branch(params: BranchParams, h_list: List[float]) -> List[QuantizationRoot]:
    """Continue one branch along decreasing h, seeding each root from the last"""
    if any(a < b for a, b in zip(h_list, h_list[1:])):
        raise UsageError("h_list must be sorted in descending order")
    roots = []
    k_inf = _quantum(params)
    for h in h_list:
        seed = None
        if roots:
            prev = roots[-1]
            # the branch deviation from k_inf scales like h^(1/2)
            seed = k_inf + (prev.k - k_inf) * np.sqrt(h / prev.h)
        try:
            root = solve_branch_at_h(params, h, seed=seed)
        except NoConvergence as e:
            if seed is None:
                raise
            logger.warning("continuation seed failed at h=%g, reseeding: %s", h, e)
            root = solve_branch_at_h(params, h)
        logger.info("branch %s m=%d h=%g z=%s scaling=%.6g", params.parity.value, params.m, h,
                    root.z, root.scaling_diagnostic)
        roots.append(root)
    return roots


def mode_function(root: QuantizationRoot, params: BranchParams):
    """Vectorized v(x) with the v = cos(kx) (even) or sin(kx) (odd) normalization"""
    k, kp = root.k, root.kp
    sig, sigp = params.sigma, params.sigma_prime
    if params.parity is Parity.EVEN:
        denom = np.cos(kp * sigp)
        if abs(denom) < POLE_TOL:
            raise PoleProximity("cos(k' sigma') vanishes", k=k)
        beta = np.cos(k * sig) / denom

        def v(x):
            ax = np.abs(np.asarray(x, dtype=float))
            return np.where(ax <= sig, np.cos(k * ax), beta * np.cos(kp * (0.5 - ax)))
    else:
        denom = np.sin(kp * sigp)
        if abs(denom) < POLE_TOL:
            raise PoleProximity("sin(k' sigma') vanishes", k=k)
        beta = np.sin(k * sig) / denom

        def v(x):
            x = np.asarray(x, dtype=float)
            ax = np.abs(x)
            return np.where(ax <= sig, np.sin(k * x), np.sign(x) * beta * np.sin(kp * (0.5 - ax)))
    return v


def mode_profile(root: QuantizationRoot, params: BranchParams, samples: int = 4097):
    """Sample v on x_j = -1/2 + j/samples. Returns (x, v)."""
    x = -0.5 + np.arange(samples) / samples
    return x, mode_function(root, params)(x)


def interface_jump(root: QuantizationRoot, params: BranchParams):
    """Relative mismatch of (v, v') across x = sigma"""
    k, kp = root.k, root.kp
    sig, sigp = params.sigma, params.sigma_prime
    if params.parity is Parity.EVEN:
        beta = np.cos(k * sig) / np.cos(kp * sigp)
        v_in, d_in = np.cos(k * sig), -k * np.sin(k * sig)
        v_out, d_out = beta * np.cos(kp * sigp), beta * kp * np.sin(kp * sigp)
    else:
        beta = np.sin(k * sig) / np.sin(kp * sigp)
        v_in, d_in = np.sin(k * sig), k * np.cos(k * sig)
        v_out, d_out = beta * np.sin(kp * sigp), -beta * kp * np.cos(kp * sigp)
    scale_v = max(abs(v_in), abs(v_out), 1e-300)
    scale_d = max(abs(d_in), abs(d_out), 1e-300)
    return float(abs(v_in - v_out) / scale_v), float(abs(d_in - d_out) / scale_d)


def rayleigh_re_z(root: QuantizationRoot, params: BranchParams, points: int = 16385) -> float:
    """-(1/2) (v, bv) / ||v||^2 by piecewise Simpson on the mode"""
    v = mode_function(root, params)
    b = params.profile
    mass = piecewise_simpson(lambda x: np.abs(v(x)) ** 2, b.jump_points(), points)
    damped = piecewise_simpson(lambda x: b.values(x) * np.abs(v(x)) ** 2, b.jump_points(), points)
    return float(-0.5 * damped / mass)


def penetration_length(root: QuantizationRoot) -> float:
    """e-folding depth 1/|Im k'| of the mode inside the damped region"""
    return float(1.0 / abs(root.kp.imag))


def damped_mass_fraction(root: QuantizationRoot, params: BranchParams, points: int = 16385) -> float:
    v = mode_function(root, params)
    jumps = params.profile.jump_points()
    mass = piecewise_simpson(lambda x: np.abs(v(x)) ** 2, jumps, points)
    outside = piecewise_simpson(lambda x: (np.abs(x) > params.sigma) * np.abs(v(x)) ** 2, jumps, points)
    return float(outside / mass)


def square_spectrum(params: BranchParams, h: float, bc: Boundary) -> QuantizationRoot:
    """Square eigenvalue: dirichlet uses the odd branch, neumann the even one"""
    if bc is Boundary.DIRICHLET:
        forced = Parity.ODD
    elif bc is Boundary.NEUMANN:
        forced = Parity.EVEN
    else:
        raise UsageError("square spectrum needs a dirichlet or neumann boundary")
    if params.parity is not forced:
        raise ParityMismatch(f"{bc.value} square forces {forced.value} parity, got {params.parity.value}")
    params.require_valid_parity()
    n = params.vertical_index(h, half_integers=True)
    if bc is Boundary.DIRICHLET and n == 0:
        raise UsageError("dirichlet square excludes n = 0")
    return solve_branch_at_h(replace(params, n=n), h)
