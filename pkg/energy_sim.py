"""
Time-domain damped wave equation on the torus, one vertical Fourier mode at a time.

Each mode u_n(x, t) obeys u_tt - u_xx + 4 pi^2 n^2 u + b u_t = 0 and is
advanced by Crank-Nicolson on (u, u_t). The scheme satisfies the discrete
balance E^{k+1} - E^k = -dt dx sum b |v^{k+1/2}|^2 exactly, which the state
accumulates next to a trapezoid integral of the sampled damping power.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from core import Geometry, Parity, Strip, csqrt_right
from errors import CFLViolation, FitUnstable, UsageError
from monodromy import Box, spectrum_in_box
from strip_spectrum import BranchParams, QuantizationRoot, solve_branch_at_h
from utils.geometry import aligned_grid_size, periodic_grid, periodic_laplacian, sample_damping

logger = logging.getLogger(__name__)

DEFAULT_GRID_N = 256
CFL_LIMIT = 0.5
DEFAULT_SAMPLES = 1000
MIN_FIT_POINTS = 20


class DecayModel(Enum):
    EXPONENTIAL = "exponential"
    POLYNOMIAL = "polynomial"


@dataclass
class SimState:
    x: np.ndarray
    dx: float
    b: np.ndarray
    u: Dict[int, np.ndarray]
    v: Dict[int, np.ndarray]
    coefficients: Dict[Tuple[int, int], complex]
    graph_norm: float
    t: float = 0.0
    dt: float = 0.0
    damping_midpoint: float = 0.0
    damping_trapezoid: float = 0.0
    _solvers: Dict = field(default_factory=dict, repr=False)

    @property
    def laplacian(self):
        if "K" not in self._solvers:
            self._solvers["K"] = periodic_laplacian(self.x.size, self.dx)
        return self._solvers["K"]

    def groups(self) -> Dict[int, List[int]]:
        """Vertical indices grouped by |n|, which share one operator"""
        out: Dict[int, List[int]] = {}
        for n in sorted(self.u):
            out.setdefault(abs(n), []).append(n)
        return out


@dataclass
class EnergyTrace:
    times: List[float]
    energies: List[float]
    damping_integrals: List[float] = field(default_factory=list)
    trapezoid_integrals: List[float] = field(default_factory=list)
    mode_energies: Dict[int, List[float]] = field(default_factory=dict)
    graph_norm: float = float("nan")

    @property
    def identity_residual(self) -> float:
        """max_t |E(t) - E(0) + int_0^t int b |u_t|^2| with the exact midpoint integral"""
        return _balance(self.energies, self.damping_integrals)

    @property
    def trapezoid_residual(self) -> float:
        return _balance(self.energies, self.trapezoid_integrals)


@dataclass
class DecayFit:
    model: DecayModel
    rate_or_exponent: float
    r2: float


def _balance(energies, integrals) -> float:
    if not integrals:
        return float("nan")
    E = np.asarray(energies)
    D = np.asarray(integrals)
    return float(np.max(np.abs(E - E[0] + D)))


def init_smooth_data(data_spec: Sequence[Tuple[int, int, complex]], grid_N: int = DEFAULT_GRID_N,
                     profile=None) -> SimState:
    """Real initial displacement sum a e^{2 i pi (m x + n y)} + c.c., zero velocity

    Args:
        data_spec: (n, m, amplitude) triples
        grid_N: requested grid size, realigned to the jumps of the profile
        profile: damping profile sampled onto the grid (b = 0 when None)

    Returns:
        SimState: per-mode arrays and the graph norm |A U0| computed from the
            continuum Fourier coefficients
    """
    jumps = list(profile.jump_points()) if profile is not None else []
    N = aligned_grid_size(grid_N, jumps)
    x, dx = periodic_grid(N)
    b = sample_damping(profile, x) if profile is not None else np.zeros(N)

    coefficients: Dict[Tuple[int, int], complex] = {}
    for n, m, a in data_spec:
        n, m, a = int(n), int(m), complex(a)
        coefficients[(n, m)] = coefficients.get((n, m), 0) + a
        coefficients[(-n, -m)] = coefficients.get((-n, -m), 0) + a.conjugate()

    u: Dict[int, np.ndarray] = {}
    for (n, m), c in coefficients.items():
        u.setdefault(n, np.zeros(N, dtype=complex))
        u[n] += c * np.exp(2j * math.pi * m * x)
    v = {n: np.zeros(N, dtype=complex) for n in u}

    graph = math.sqrt(sum((4 * math.pi**2 * (n * n + m * m)) ** 2 * abs(c) ** 2
                          for (n, m), c in coefficients.items()))
    return SimState(x=x, dx=dx, b=b, u=u, v=v, coefficients=coefficients, graph_norm=graph)


def mode_energy(state: SimState, n: int) -> float:
    """1/2 (||d_x u_n||^2 + 4 pi^2 n^2 ||u_n||^2 + ||v_n||^2) on the grid"""
    u, v = state.u[n], state.v[n]
    Ku = state.laplacian @ u + 4 * math.pi**2 * n * n * u
    return 0.5 * state.dx * float(np.real(np.vdot(u, Ku)) + np.real(np.vdot(v, v)))


def energy(state: SimState) -> float:
    return sum(mode_energy(state, n) for n in state.u)


def damping_power(state: SimState) -> float:
    """dx sum b |v|^2 over all modes"""
    return state.dx * sum(float(np.sum(state.b * np.abs(v) ** 2)) for v in state.v.values())


def _solver(state: SimState, a: int, dt: float):
    key = (a, dt)
    if key not in state._solvers:
        N = state.x.size
        K = state.laplacian + sp.identity(N) * (4 * math.pi**2 * a * a)
        M = 2.0 * sp.identity(N) + 0.5 * dt**2 * K + dt * sp.diags(state.b)
        state._solvers[key] = (K.tocsc(), splu(M.tocsc().astype(complex)))
    return state._solvers[key]


def step(state: SimState, dt: float) -> SimState:
    """One Crank-Nicolson step of every mode, in place

    With v_m = (v0 + v1)/2 the scheme reduces to
    (2 + dt^2/2 K + dt B) v_m = 2 v0 - dt K u0, then u1 = u0 + dt v_m
    and v1 = 2 v_m - v0.
    """
    if dt > CFL_LIMIT * state.dx:
        raise CFLViolation(f"dt={dt} exceeds {CFL_LIMIT} dx = {CFL_LIMIT * state.dx}",
                           dt=dt, limit=CFL_LIMIT * state.dx)
    p0 = damping_power(state)
    midpoint = 0.0
    for a, ns in state.groups().items():
        K, lu = _solver(state, a, dt)
        U = np.column_stack([state.u[n] for n in ns])
        V = np.column_stack([state.v[n] for n in ns])
        Vm = lu.solve(2.0 * V - dt * (K @ U))
        midpoint += float(np.sum(state.b[:, None] * np.abs(Vm) ** 2))
        U = U + dt * Vm
        V = 2.0 * Vm - V
        for j, n in enumerate(ns):
            state.u[n] = U[:, j]
            state.v[n] = V[:, j]
    state.damping_midpoint += dt * state.dx * midpoint
    state.damping_trapezoid += 0.5 * dt * (p0 + damping_power(state))
    state.t += dt
    state.dt = dt
    return state


def run(profile, data_spec, T_final: float, dt: float, grid_N: int = DEFAULT_GRID_N,
        samples: int = DEFAULT_SAMPLES, record_modes: bool = False) -> EnergyTrace:
    """Evolve smooth data to T_final and sample the energy balance

    Args:
        profile: damping profile
        data_spec: (n, m, amplitude) triples for init_smooth_data
        T_final: final time, a multiple of dt
        dt: time step, at most half the grid spacing
        grid_N: requested grid size
        samples: approximate number of trace samples after t = 0
        record_modes: also record the energy of each vertical mode

    Returns:
        EnergyTrace
    """
    steps = int(round(T_final / dt))
    if steps < 1 or abs(steps * dt - T_final) > 1e-9 * max(1.0, T_final):
        raise UsageError(f"T_final={T_final} is not a positive multiple of dt={dt}")
    state = init_smooth_data(data_spec, grid_N, profile)
    every = max(1, steps // max(1, samples))
    trace = EnergyTrace(times=[], energies=[], graph_norm=state.graph_norm)

    def record():
        trace.times.append(state.t)
        trace.energies.append(energy(state))
        trace.damping_integrals.append(state.damping_midpoint)
        trace.trapezoid_integrals.append(state.damping_trapezoid)
        if record_modes:
            for n in state.u:
                trace.mode_energies.setdefault(n, []).append(mode_energy(state, n))

    record()
    for k in range(1, steps + 1):
        step(state, dt)
        # t = k dt exactly
        state.t = k * dt
        if k % every == 0 or k == steps:
            record()
    logger.info("simulated %d steps to t=%g: E=%.6g, identity residual %.3g",
                steps, state.t, trace.energies[-1], trace.identity_residual)
    return trace


def fit_decay(trace: EnergyTrace, model: DecayModel, window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """Exponential: rate = -slope of log E vs t. Polynomial: exponent = slope of log E vs log t.

    The default window is the late half of the trace.
    """
    t = np.asarray(trace.times, dtype=float)
    E = np.asarray(trace.energies, dtype=float)
    lo, hi = window if window is not None else (0.5 * t[-1], t[-1])
    keep = (t >= lo) & (t <= hi) & (t > 0)
    if np.count_nonzero(keep) < MIN_FIT_POINTS:
        raise FitUnstable(f"only {np.count_nonzero(keep)} samples in fit window [{lo}, {hi}]")
    if np.any(E[keep] <= 0):
        raise FitUnstable("energy vanishes in the fit window")
    abscissa = t[keep] if model is DecayModel.EXPONENTIAL else np.log(t[keep])
    logE = np.log(E[keep])
    slope, intercept = np.polyfit(abscissa, logE, 1)
    ss_res = float(np.sum((logE - (slope * abscissa + intercept)) ** 2))
    ss_tot = float(np.sum((logE - logE.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    value = -slope if model is DecayModel.EXPONENTIAL else slope
    return DecayFit(model=model, rate_or_exponent=float(value), r2=float(r2))


def stable_at_rate_constant(trace: EnergyTrace, rate_fn: Callable[[float], float],
                            graph_norm: Optional[float] = None) -> float:
    """max over t > 0 of E(t)^(1/2) / (f(t) |A U0|)"""
    g = trace.graph_norm if graph_norm is None else graph_norm
    if not g > 0:
        raise UsageError("graph norm of the initial data must be positive")
    best = 0.0
    for t, E in zip(trace.times, trace.energies):
        if t > 0:
            best = max(best, math.sqrt(max(E, 0.0)) / (rate_fn(t) * g))
    return best


def modal_constant_damping_solution(c: float, lam: float, t):
    """(w, w') for w'' + c w' + lam w = 0, w(0) = 1, w'(0) = 0"""
    t = np.asarray(t, dtype=float)
    disc = np.sqrt(complex(0.25 * c * c - lam))
    if disc == 0:
        r = -0.5 * c
        w = np.exp(r * t) * (1 - r * t)
        dw = -r * r * t * np.exp(r * t)
        return w, dw
    rp, rm = -0.5 * c + disc, -0.5 * c - disc
    w = (rp * np.exp(rm * t) - rm * np.exp(rp * t)) / (rp - rm)
    dw = rp * rm * (np.exp(rm * t) - np.exp(rp * t)) / (rp - rm)
    return np.real(w), np.real(dw)


def modal_constant_damping_energy(c: float, lam: float, t, amplitude: complex = 1.0):
    """Energy 1/2 (lam |w|^2 + |w'|^2) of one Fourier coefficient under b = c"""
    w, dw = modal_constant_damping_solution(c, lam, t)
    return 0.5 * abs(amplitude) ** 2 * (lam * w**2 + dw**2)


@dataclass
class EnvelopeCheck:
    re_z: float
    constant: float
    worst_ratio: float

    def holds(self, slack: float = 0.5) -> bool:
        return self.worst_ratio >= slack


def envelope_lower_bound(trace: EnergyTrace, re_z: float, early: Optional[Tuple[float, float]] = None,
                         late: Optional[Tuple[float, float]] = None) -> EnvelopeCheck:
    """Compare E(t) against c e^{2 Re z t} with c fitted on the early window

    c is the minimum of E(t) e^{-2 Re z t} over the early window (default
    [T/4, T/2]); worst_ratio is the minimum over the late window (default
    [T/2, T]) of the same quantity divided by c.
    """
    t = np.asarray(trace.times, dtype=float)
    E = np.asarray(trace.energies, dtype=float)
    T = t[-1]
    early = early if early is not None else (0.25 * T, 0.5 * T)
    late = late if late is not None else (0.5 * T, T)

    def scaled(lo, hi):
        keep = (t >= lo) & (t <= hi)
        if not np.any(keep):
            raise FitUnstable(f"no samples in envelope window [{lo}, {hi}]")
        return E[keep] * np.exp(-2.0 * re_z * t[keep])

    c = float(np.min(scaled(*early)))
    if not c > 0:
        raise FitUnstable("energy vanishes in the early envelope window")
    worst = float(np.min(scaled(*late)) / c)
    logger.info("envelope Re z=%.6g: c=%.6g, worst late ratio %.4g", re_z, c, worst)
    return EnvelopeCheck(re_z=float(re_z), constant=c, worst_ratio=worst)


def _branch_label(k: complex, parity: Parity, sigma: float) -> int:
    if parity is Parity.EVEN:
        return max(0, int(round((k * sigma).real / math.pi - 0.5)))
    return max(1, int(round((k * sigma).real / math.pi)))


def excited_strip_roots(profile: Strip, data_spec: Sequence[Tuple[int, int, complex]],
                        margin: float = 2.0) -> List[QuantizationRoot]:
    """Strip quantization roots of every eigenvalue the data can reach

    For each |n| in the data the eigenvalues with 1 <= Im z <= (highest data
    frequency + margin) are located by the monodromy solver and re-solved by
    the strip quantization condition from k = sqrt(-(z^2 + 4 pi^2 n^2)).
    """
    tops: Dict[int, float] = {}
    for n, m, _ in data_spec:
        a = abs(int(n))
        tops[a] = max(tops.get(a, 0.0), 2 * math.pi * math.hypot(n, m) + margin)
    roots = []
    for n, top in sorted(tops.items()):
        box = Box(-profile.Btilde - 0.05, 0.01, 1.0, top)
        for sol in spectrum_in_box(box, [n], profile, Geometry()):
            if sol.parity is None:
                logger.warning("skipping eigenvalue %s with no definite parity", sol.z)
                continue
            k = complex(csqrt_right(-(sol.z**2 + 4 * math.pi**2 * n * n)))
            params = BranchParams(profile.Btilde, profile.sigma, sol.parity,
                                  _branch_label(k, sol.parity, profile.sigma), n=n)
            roots.append(solve_branch_at_h(params, 1.0 / sol.z.imag, seed=k))
    if not roots:
        raise FitUnstable("no strip eigenvalues below the data frequencies")
    return roots
