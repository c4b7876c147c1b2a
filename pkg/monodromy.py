"""
General 1D eigensolver for y-invariant damping.

For the mode u = e^{2 i pi n y} v(x) the eigenvalue problem P(z)u = 0
becomes v'' = q(x) v with q = z b(x) + z^2 + 4 pi^2 n^2. The monodromy
matrix transports (v, v') from x = -1/2 to x = 1/2; its z-derivative comes
from the variational system with dq/dz = b + 2z. Both are integrated by
classical RK4 on a grid that puts every jump of b on a node.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from core import Boundary, Geometry, ModeIndex, Parity, csqrt_right
from errors import DegenerateDerivative, NoConvergence, WindingInconsistency

logger = logging.getLogger(__name__)

STEPS_PER_WAVENUMBER = 192
COUNT_STEPS_PER_WAVENUMBER = 64
MIN_STEPS = 256
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
DERIVATIVE_FLOOR = 1e-14
WINDING_POINTS = 4096
DEDUP_TOL = 1e-8
SPLIT_FRACTION = 0.5 + 0.0731
MAX_DEPTH = 40


@dataclass
class MonodromyResult:
    M: np.ndarray
    dM_dz: Optional[np.ndarray]
    steps: int
    overflow: bool = False

    @property
    def det(self):
        return self.M[0, 0] * self.M[1, 1] - self.M[0, 1] * self.M[1, 0]


@dataclass
class EigenSolution:
    z: complex
    n: ModeIndex
    mode: np.ndarray
    x: np.ndarray
    residual: float
    newton_iters: int
    multiplicity: int = 1
    parity: Optional[Parity] = None


@dataclass(frozen=True)
class Box:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    @property
    def center(self):
        return complex(0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi))

    def corners(self):
        return [complex(self.re_lo, self.im_lo), complex(self.re_hi, self.im_lo),
                complex(self.re_hi, self.im_hi), complex(self.re_lo, self.im_hi)]

    def contains(self, z, pad=0.0):
        return (self.re_lo - pad <= z.real <= self.re_hi + pad
                and self.im_lo - pad <= z.imag <= self.im_hi + pad)

    def split(self, fraction=SPLIT_FRACTION):
        if (self.re_hi - self.re_lo) >= (self.im_hi - self.im_lo):
            cut = self.re_lo + fraction * (self.re_hi - self.re_lo)
            return Box(self.re_lo, cut, self.im_lo, self.im_hi), Box(cut, self.re_hi, self.im_lo, self.im_hi)
        cut = self.im_lo + fraction * (self.im_hi - self.im_lo)
        return Box(self.re_lo, self.re_hi, self.im_lo, cut), Box(self.re_lo, self.re_hi, cut, self.im_hi)

    def size(self):
        return max(self.re_hi - self.re_lo, self.im_hi - self.im_lo)

    def sample_points(self):
        c = self.corners()
        mids = [0.5 * (a + b) for a, b in zip(c, c[1:] + c[:1])]
        return c + mids + [self.center]


def wavenumber_scale(z, n, profile):
    """Largest local wavenumber sqrt|q| over the given z points, used to size the grid

    q is affine in b, so its modulus peaks at b = 0 or b = max b.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    base = z * z + 4.0 * np.pi**2 * float(n) ** 2
    q = np.maximum(np.abs(base), np.abs(base + z * profile.max_value()))
    return float(np.sqrt(np.max(q))) + 1.0


def default_steps(z, n, profile, per_wavenumber=STEPS_PER_WAVENUMBER):
    steps = max(MIN_STEPS, int(math.ceil(per_wavenumber * wavenumber_scale(z, n, profile))))
    return steps + (steps % 2)


def _pieces(profile, steps):
    """Split [-1/2, 1/2] at the jumps, steps shared in proportion to length"""
    edges = [-0.5] + sorted(p for p in profile.jump_points() if -0.5 < p < 0.5) + [0.5]
    lengths = [b - a for a, b in zip(edges[:-1], edges[1:])]
    counts = [max(2, int(round(steps * L))) for L in lengths]
    return list(zip(edges[:-1], edges[1:], counts))


def _stage_samples(profile, steps):
    """Per step: dx, b at the left node, the midpoint and the right node"""
    dxs, b0s, bhs, b1s, nodes = [], [], [], [], [-0.5]
    pad = 1e-12
    for a, c, count in _pieces(profile, steps):
        dx = (c - a) / count
        left = a + dx * np.arange(count)
        right = left + dx
        b0 = profile.values(np.clip(left, a + pad, c - pad))
        bh = profile.values(left + 0.5 * dx)
        b1 = profile.values(np.clip(right, a + pad, c - pad))
        dxs.extend([dx] * count)
        b0s.extend(b0.tolist())
        bhs.extend(bh.tolist())
        b1s.extend(b1.tolist())
        nodes.extend(right.tolist())
    return dxs, b0s, bhs, b1s, np.array(nodes)


def _rhs(q, qz, s, with_derivative):
    if with_derivative:
        y0a, y1a, y0b, y1b, p0a, p1a, p0b, p1b = s
        return (y1a, q * y0a, y1b, q * y0b,
                p1a, q * p0a + qz * y0a, p1b, q * p0b + qz * y0b)
    y0a, y1a, y0b, y1b = s
    return (y1a, q * y0a, y1b, q * y0b)


def _transport(z, n, profile, steps, with_derivative=True, store=False):
    """RK4 transport of the fundamental matrix; works on complex scalars or arrays"""
    dxs, b0s, bhs, b1s, nodes = _stage_samples(profile, steps)
    shift = z * z + 4.0 * math.pi**2 * float(n) ** 2
    one = z * 0 + 1.0
    zero = z * 0
    state = (one, zero, zero, one)
    if with_derivative:
        state = state + (zero, zero, zero, zero)
    history = [state[:4]] if store else None
    overflow = False
    for i, dx in enumerate(dxs):
        q0, qh, q1 = z * b0s[i] + shift, z * bhs[i] + shift, z * b1s[i] + shift
        qz0, qzh, qz1 = b0s[i] + 2 * z, bhs[i] + 2 * z, b1s[i] + 2 * z
        k1 = _rhs(q0, qz0, state, with_derivative)
        k2 = _rhs(qh, qzh, tuple(s + 0.5 * dx * d for s, d in zip(state, k1)), with_derivative)
        k3 = _rhs(qh, qzh, tuple(s + 0.5 * dx * d for s, d in zip(state, k2)), with_derivative)
        k4 = _rhs(q1, qz1, tuple(s + dx * d for s, d in zip(state, k3)), with_derivative)
        state = tuple(s + dx / 6.0 * (a + 2 * b + 2 * c + d)
                      for s, a, b, c, d in zip(state, k1, k2, k3, k4))
        if store:
            history.append(state[:4])
        if i % 64 == 0 and not overflow:
            if max(np.max(np.abs(s)) for s in state) > 1e300:
                overflow = True
                logger.warning("monodromy entries exceed 1e300 at x=%g", nodes[i + 1])
    return state, overflow, nodes, history


def monodromy_matrix(z, n, profile, steps: Optional[int] = None) -> MonodromyResult:
    """Monodromy matrix M(z) over one period and its z-derivative"""
    z = complex(z)
    if steps is None:
        steps = default_steps(z, n, profile)
    if steps < 64 or steps % 2:
        raise ValueError(f"steps must be even and >= 64, got {steps}")
    state, overflow, _, _ = _transport(z, n, profile, steps)
    y0a, y1a, y0b, y1b, p0a, p1a, p0b, p1b = state
    M = np.array([[y0a, y0b], [y1a, y1b]], dtype=complex)
    dM = np.array([[p0a, p0b], [p1a, p1b]], dtype=complex)
    return MonodromyResult(M=M, dM_dz=dM, steps=steps, overflow=overflow)


def monodromy_many(zs, n, profile, steps):
    """Monodromy matrices for an array of z with one fixed step count, shape (P, 2, 2)"""
    zs = np.asarray(zs, dtype=complex)
    state, _, _, _ = _transport(zs, n, profile, steps, with_derivative=False)
    y0a, y1a, y0b, y1b = state
    return np.stack([np.stack([y0a, y0b], axis=-1), np.stack([y1a, y1b], axis=-1)], axis=-2)


def _characteristic_from_state(state, geometry):
    y0a, y1a, y0b, y1b, p0a, p1a, p0b, p1b = state
    if geometry.boundary is Boundary.PERIODIC:
        return 2.0 - (y0a + y1b), -(p0a + p1b)
    if geometry.boundary is Boundary.DIRICHLET:
        return y0b, p0b
    return y1a, p1a


def characteristic(z, n, profile, geometry: Geometry, steps: Optional[int] = None):
    """Boundary-condition determinant F(z) and dF/dz.

    Periodic: F = 2 - tr M. Dirichlet: F = M12, the value at x = 1/2 of the
    solution starting from (0, 1). Neumann: F = M21, the slope at x = 1/2 of
    the solution starting from (1, 0).
    """
    res = monodromy_matrix(z, n, profile, steps)
    state = (res.M[0, 0], res.M[1, 0], res.M[0, 1], res.M[1, 1],
             res.dM_dz[0, 0], res.dM_dz[1, 0], res.dM_dz[0, 1], res.dM_dz[1, 1])
    F, dF = _characteristic_from_state(state, geometry)
    return complex(F), complex(dF)


def characteristic_many(zs, n, profile, geometry, steps):
    """Vectorized F and dF/dz on an array of z with one fixed step count"""
    zs = np.asarray(zs, dtype=complex)
    state, _, _, _ = _transport(zs, n, profile, steps)
    return _characteristic_from_state(state, geometry)


def strip_transfer_matrix(z, n, profile):
    """Exact monodromy of a piecewise-constant profile as a product of blocks"""
    z = complex(z)
    edges = [-0.5] + sorted(p for p in profile.jump_points() if -0.5 < p < 0.5) + [0.5]
    M = np.eye(2, dtype=complex)
    for a, c in zip(edges[:-1], edges[1:]):
        L = c - a
        b = float(profile.values(np.array([0.5 * (a + c)]))[0])
        q = z * b + z * z + 4.0 * np.pi**2 * float(n) ** 2
        kappa = csqrt_right(q)
        ch = np.cosh(kappa * L)
        sh_over = np.sinh(kappa * L) / kappa if abs(kappa) > 1e-12 else L
        block = np.array([[ch, sh_over], [kappa * np.sinh(kappa * L), ch]], dtype=complex)
        M = block @ M
    return M


def _null_vector(N):
    if max(abs(N[0, 0]), abs(N[0, 1])) >= max(abs(N[1, 0]), abs(N[1, 1])):
        a, b = N[0, 0], N[0, 1]
    else:
        a, b = N[1, 0], N[1, 1]
    if abs(a) == 0 and abs(b) == 0:
        return np.array([1.0, 0.0], dtype=complex)
    v = np.array([b, -a], dtype=complex)
    return v / np.linalg.norm(v)


def reconstruct_mode(z, n, profile, geometry, steps=None):
    """Sample the eigenmode on the RK grid. Returns (x, v, boundary_error)."""
    z = complex(z)
    if steps is None:
        steps = default_steps(z, n, profile)
    state, _, nodes, history = _transport(z, n, profile, steps, with_derivative=False, store=True)
    y0a, y1a, y0b, y1b = state
    if geometry.boundary is Boundary.PERIODIC:
        c = _null_vector(np.array([[y0a, y0b], [y1a, y1b]]) - np.eye(2))
    elif geometry.boundary is Boundary.DIRICHLET:
        c = np.array([0.0, 1.0], dtype=complex)
    else:
        c = np.array([1.0, 0.0], dtype=complex)
    hist = np.array(history, dtype=complex)
    v = c[0] * hist[:, 0] + c[1] * hist[:, 2]
    dv = c[0] * hist[:, 1] + c[1] * hist[:, 3]
    scale = max(np.max(np.abs(v)), 1e-300)
    if geometry.boundary is Boundary.PERIODIC:
        err = max(abs(v[-1] - v[0]), abs(dv[-1] - dv[0]) / max(1.0, abs(z))) / scale
    elif geometry.boundary is Boundary.DIRICHLET:
        err = abs(v[-1]) / scale
    else:
        err = abs(dv[-1]) / (scale * max(1.0, abs(z)))
    return nodes, v / scale, float(err)


def detect_parity(v, profile, tol=1e-6):
    """EVEN/ODD for even profiles when the sampled mode is symmetric, else None"""
    if not profile.is_even():
        return None
    norm = np.linalg.norm(v)
    if norm == 0:
        return None
    if np.linalg.norm(v - v[::-1]) <= tol * norm:
        return Parity.EVEN
    if np.linalg.norm(v + v[::-1]) <= tol * norm:
        return Parity.ODD
    return None


def newton_refine(z0, n, profile, geometry: Geometry, multiplicity: int = 1,
                  steps: Optional[int] = None, m_hint: int = 0) -> EigenSolution:
    """Refine an eigenvalue by Newton on F, then reconstruct its mode.

    A root of known multiplicity uses the step z -> z - mult F/F', which
    restores quadratic convergence at exact degeneracies. Such roots get a
    few extra steps past the residual tolerance since |F| reaches it while
    z is still only sqrt(tol) accurate.
    """
    z = complex(z0)
    if steps is None:
        steps = default_steps(z, n, profile)
    F, dF = characteristic(z, n, profile, geometry, steps)
    iters = 0
    polish = 6 if multiplicity > 1 else 0
    while abs(F) > NEWTON_TOL or polish > 0:
        if abs(F) <= NEWTON_TOL:
            polish -= 1
            if F == 0:
                break
        if iters >= NEWTON_MAX_ITER:
            raise NoConvergence(f"Newton on F stalled at |F|={abs(F):.3e} near z={z}",
                                iterations=iters, residual=abs(F))
        if abs(dF) < DERIVATIVE_FLOOR:
            if abs(F) <= NEWTON_TOL:
                break
            raise DegenerateDerivative(f"|dF/dz| < {DERIVATIVE_FLOOR} at z={z}, possible multiple root", z=z)
        step = multiplicity * F / dF
        lam = 1.0
        while True:
            trial = z - lam * step
            Ft, dFt = characteristic(trial, n, profile, geometry, steps)
            if abs(Ft) < abs(F) or lam < 1e-4:
                break
            lam *= 0.5
        if abs(F) <= NEWTON_TOL and abs(Ft) > abs(F):
            break
        z, F, dF = trial, Ft, dFt
        iters += 1
    x, v, err = reconstruct_mode(z, n, profile, geometry, steps)
    if err > 1e-8:
        logger.warning("mode at z=%s misses its boundary condition by %.2e", z, err)
    parity = detect_parity(v, profile)
    index = ModeIndex(n=n, m=m_hint, parity=parity or Parity.EVEN)
    logger.debug("newton converged to z=%s in %d iterations", z, iters)
    return EigenSolution(z=z, n=index, mode=v, x=x, residual=abs(F), newton_iters=iters,
                         multiplicity=multiplicity, parity=parity)


def conjugate_solution(sol: EigenSolution) -> EigenSolution:
    """Sister eigenpair (conj z, conj v) of a real-valued profile"""
    return EigenSolution(z=sol.z.conjugate(), n=sol.n, mode=np.conj(sol.mode), x=sol.x,
                         residual=sol.residual, newton_iters=sol.newton_iters,
                         multiplicity=sol.multiplicity, parity=sol.parity)


def _contour(box, points):
    corners = box.corners() + [box.corners()[0]]
    sides = [abs(b - a) for a, b in zip(corners[:-1], corners[1:])]
    perimeter = sum(sides)
    zs, ws = [], []
    for (a, b), L in zip(zip(corners[:-1], corners[1:]), sides):
        count = max(8, int(round(points * L / perimeter)))
        t = np.linspace(0.0, 1.0, count + 1)
        w = np.full(count + 1, 1.0 / count)
        w[0] = w[-1] = 0.5 / count
        zs.append(a + (b - a) * t)
        ws.append(w * (b - a))
    return np.concatenate(zs), np.concatenate(ws)


@dataclass
class Winding:
    count: int
    first: complex
    second: complex

    def spread(self):
        """Standard deviation of the enclosed zeros, from the moment sums"""
        if self.count < 1:
            return 0.0
        mean = self.first / self.count
        return float(np.sqrt(abs(self.second / self.count - mean * mean)))


def winding(box, n, profile, geometry, steps, points=WINDING_POINTS) -> Winding:
    """Count zeros of F inside the box by the trapezoid rule on F'/F.

    The point count doubles until the count is an integer within 0.01.
    The first and second moment sums of the zeros come from the same pass.
    """
    for attempt in range(4):
        zs, ws = _contour(box, points)
        F, dF = characteristic_many(zs, n, profile, geometry, steps)
        if np.any(F == 0):
            raise WindingInconsistency(f"F vanishes on the boundary of {box}")
        integrand = ws * dF / F / (2j * np.pi)
        count = np.sum(integrand)
        nearest = round(count.real)
        if abs(count - nearest) < 0.01:
            return Winding(int(nearest), complex(np.sum(zs * integrand)), complex(np.sum(zs * zs * integrand)))
        logger.debug("winding %s not integral with %d points, doubling", count, points)
        points *= 2
    raise WindingInconsistency(f"winding number {count} not integral on {box}")


def _robust_winding(box, n, profile, geometry, steps):
    try:
        return winding(box, n, profile, geometry, steps)
    except WindingInconsistency:
        pad = 1e-6 * max(1.0, box.size())
        nudged = Box(box.re_lo - pad, box.re_hi + pad, box.im_lo - pad, box.im_hi + pad)
        logger.warning("nudging contour of %s by %g", box, pad)
        return winding(nudged, n, profile, geometry, steps)


def _isolate(box, wind, n, profile, geometry, steps, depth=0):
    """Subdivide until each cell holds one zero or one multiple zero"""
    if wind.count == 0:
        return []
    mean = wind.first / wind.count
    if wind.count == 1:
        seed = mean if box.contains(mean, pad=box.size()) else box.center
        return [(seed, 1)]
    if wind.spread() <= 1e-6 * max(1.0, box.size()) or depth >= MAX_DEPTH:
        logger.info("cell %s holds a zero of multiplicity %d near %s", box, wind.count, mean)
        return [(mean, wind.count)]
    for fraction in (SPLIT_FRACTION, 1.0 - SPLIT_FRACTION):
        children = box.split(fraction)
        winds = [_robust_winding(child, n, profile, geometry, steps) for child in children]
        if sum(w.count for w in winds) == wind.count:
            break
    else:
        raise WindingInconsistency(f"children of {box} hold {[w.count for w in winds]}, parent {wind.count}")
    found = []
    for child, w in zip(children, winds):
        found.extend(_isolate(child, w, n, profile, geometry, steps, depth + 1))
    return found


def _spectrum_for_mode(box, n, profile, geometry):
    steps = default_steps(box.sample_points(), n, profile, COUNT_STEPS_PER_WAVENUMBER)
    wind = _robust_winding(box, n, profile, geometry, steps)
    logger.info("n=%s: %d zeros in %s", n, wind.count, box)
    solutions = []
    for seed, mult in _isolate(box, wind, n, profile, geometry, steps):
        sol = newton_refine(seed, n, profile, geometry, multiplicity=mult)
        if not box.contains(sol.z, pad=1e-9):
            logger.debug("dropping root %s outside %s", sol.z, box)
            continue
        if any(abs(sol.z - other.z) <= DEDUP_TOL for other in solutions):
            continue
        solutions.append(sol)
    return solutions


def spectrum_in_box(region: Box, n_range: Sequence[float], profile, geometry: Geometry,
                    workers: int = 1) -> List[EigenSolution]:
    """All eigenvalues in the rectangle for each vertical index in n_range"""
    n_list = list(n_range)
    if workers > 1 and len(n_list) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(lambda n: _spectrum_for_mode(region, n, profile, geometry), n_list))
    else:
        batches = [_spectrum_for_mode(region, n, profile, geometry) for n in n_list]
    solutions = [s for batch in batches for s in batch]
    solutions.sort(key=lambda s: (s.z.imag, s.z.real, s.n.n))
    return solutions
