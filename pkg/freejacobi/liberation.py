"""
Liberation flow of a pair of symmetries R, S with traces α, β.

H(t, z), the Herglotz transform of the law ν_t of R U_t S U_t*, solves
∂_t H + z H ∂_z H = G(z). Along characteristics dw/ds = w H the pair
(w, H) obeys dH/ds = G(w), and K² = H² − V(w)² is conserved. The density
κ_t of ν_t is read off the characteristic that reaches e^{iθ} at time t.

Characteristics are located by Newton's method on the start point. On a
grid of angles the solve is continued in θ from a few cold starts, which
follow the radius outward from the fixed point 0. The exit chart (a fan of
characteristics with their exit times and angles) seeds single-angle
solves and bounds the support.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from enum import IntEnum
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import solve_ivp

from freejacobi import settings
from freejacobi.exceptions import (
    ChartFold,
    DomainError,
    ExteriorPoint,
    InconsistentInput,
    NumericError,
    PoleError,
    SingularApproach,
)
from freejacobi.initlaws import H0_derivative, H0_eval, InitialLaw, LawTag, track_sqrt
from freejacobi.measures import (
    BOUNDARY_RADIUS,
    TWO_PI,
    Atom,
    CircleMeasure,
    HerglotzEvaluator,
    atomic,
    circle_grid,
    merge_nodes,
    wrap_angle,
)

logger = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
EXIT_RADIUS = 1.0 - 1e-12
POLE_GUARD = 1e-9
SMALL_TIME = 1e-6
FALLBACK_RADIUS = 1.0 - 1e-5
CONTINUATION_START = 0.05
CONTINUATION_STEPS = 18
FINAL_STEPS = 6
NEWTON_TOL = 1e-12
MAX_NEWTON = 40
# preimages of the r* circle closer than this many (1 − r*) to the unit circle come from the boundary
EXTERIOR_MARGIN = 10.0
DENSITY_FLOOR = 1e-9
EDGE_TOL = 1e-6
CHUNK = 256
# boundary Newton: starts are kept CIRCLE_DEPTH inside the circle, seeds SEED_DEPTH inside
CIRCLE_DEPTH = 1e-10
CIRCLE_TOL = 1e-8
SEED_DEPTH = 1e-3
MAX_LOG_STEP = 0.5
EXTERIOR_DEPTH = EXTERIOR_MARGIN * (1.0 - BOUNDARY_RADIUS)
STRAND_LENGTH = 32
EDGE_NEWTON = 20
REPAIR_SWEEPS = 3


class AngleStatus(IntEnum):
    """How the density at a boundary angle was obtained."""
    SOLVED = 0
    EXTERIOR = 1
    FALLBACK = 2
    UNREACHED = 3
    POLE = 4


class LiberationParams(BaseModel):
    """Traces of the two symmetries and the quantities derived from them."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=-1.0, le=1.0, description="Trace of R")
    beta: float = Field(..., ge=-1.0, le=1.0, description="Trace of S")

    @property
    def a(self) -> float:
        return abs(self.alpha - self.beta) / 2.0

    @property
    def b(self) -> float:
        return abs(self.alpha + self.beta) / 2.0

    @property
    def r_plus(self) -> float:
        return -self.alpha * self.beta + math.sqrt(max(0.0, (1 - self.alpha ** 2) * (1 - self.beta ** 2)))

    @property
    def r_minus(self) -> float:
        return -self.alpha * self.beta - math.sqrt(max(0.0, (1 - self.alpha ** 2) * (1 - self.beta ** 2)))

    @property
    def theta_plus(self) -> float:
        return math.acos(min(1.0, max(-1.0, self.r_plus)))

    @property
    def theta_minus(self) -> float:
        return math.acos(min(1.0, max(-1.0, self.r_minus)))

    @property
    def degenerate(self) -> bool:
        """One of the symmetries is ±I."""
        return self.a + self.b >= 1.0 - 1e-12

    @classmethod
    def of_law(cls, law: InitialLaw) -> 'LiberationParams':
        return cls(alpha=law.alpha, beta=law.beta)


def V(w, p: LiberationParams):
    """a(1−w)/(1+w) + b(1+w)/(1−w)."""
    w_arr = np.asarray(w, dtype=complex)
    if (p.a and np.any(w_arr == -1)) or (p.b and np.any(w_arr == 1)):
        raise PoleError("V has poles at w = -1 (a > 0) and w = 1 (b > 0)")
    value = np.zeros(w_arr.shape, dtype=complex)
    if p.a:
        value = value + p.a * (1 - w_arr) / (1 + w_arr)
    if p.b:
        value = value + p.b * (1 + w_arr) / (1 - w_arr)
    return complex(value) if w_arr.ndim == 0 else value


def source_numerator(alpha: float, beta: float) -> Polynomial:
    """2w(αw²+2βw+α)(βw²+2αw+β), the numerator of the PDE source term."""
    return Polynomial([0.0, 2.0]) * Polynomial([alpha, 2 * beta, alpha]) * Polynomial([beta, 2 * alpha, beta])


def source_term(w, p: LiberationParams):
    """G(w) = N(w)/(1−w²)³, which equals w·V(w)·V′(w)."""
    w_arr = np.asarray(w, dtype=complex)
    value = source_numerator(p.alpha, p.beta)(w_arr) / (1 - w_arr ** 2) ** 3
    return complex(value) if w_arr.ndim == 0 else value


def boundary_bracket(theta, p: LiberationParams):
    """a·tan(θ/2) − b·cot(θ/2), the value of V(e^{iθ})/(−i)."""
    theta = np.asarray(theta, dtype=float)
    half = theta / 2.0
    value = np.zeros(theta.shape)
    with np.errstate(divide='ignore'):
        if p.a:
            value = value + p.a * np.tan(half)
        if p.b:
            value = value - p.b / np.tan(half)
    return value


def kappa_from_K(K, theta, p: LiberationParams):
    """Re √(K² − (a·tan(θ/2) − b·cot(θ/2))²); zero where the bracket diverges."""
    K = np.asarray(K, dtype=complex)
    bracket = boundary_bracket(theta, p)
    with np.errstate(invalid='ignore'):
        values = np.sqrt(K ** 2 - bracket ** 2).real
    values = np.where(np.isfinite(bracket), values, 0.0)
    return float(values) if values.ndim == 0 else values


def kappa_from_K_sine(K, theta, p: LiberationParams):
    """Re √(K² + (a+b)² − 1 − (cosθ−r₊)(cosθ−r₋)/sin²θ), for θ ∉ {0, π}."""
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)
    radicand = (np.asarray(K, dtype=complex) ** 2 + (p.a + p.b) ** 2 - 1
                - (c - p.r_plus) * (c - p.r_minus) / np.sin(theta) ** 2)
    values = np.sqrt(radicand).real
    return float(values) if values.ndim == 0 else values


def _check_pair(law: InitialLaw, p: LiberationParams) -> None:
    if abs(law.alpha - p.alpha) > 1e-12 or abs(law.beta - p.beta) > 1e-12:
        raise InconsistentInput(f"initial law traces ({law.alpha}, {law.beta}) differ from "
                                f"liberation parameters ({p.alpha}, {p.beta})")
    if not law.has_herglotz:
        raise DomainError("moment-only laws feed the moment flow only")


def _map_chunks(func: Callable[[np.ndarray], Tuple[np.ndarray, ...]], values: np.ndarray,
                chunk: int = CHUNK) -> Tuple[np.ndarray, ...]:
    """Apply func to consecutive slices on the worker pool and concatenate in order."""
    if values.size == 0:
        return func(values)
    pieces = [values[i:i + chunk] for i in range(0, values.size, chunk)]
    workers = max(1, min(settings.THREADS, len(pieces)))
    if workers == 1:
        results = [func(piece) for piece in pieces]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(func, pieces))
    return tuple(np.concatenate(parts) for parts in zip(*results))


def _integrate_batch(rhs, span: Tuple[float, float], blocks: List[np.ndarray],
                     params: Sequence[np.ndarray] = ()) -> List[np.ndarray]:
    """
    Integrate a batch of independent trajectories stored as state blocks.

    A failing batch is split in halves until the failing trajectories are
    isolated; those come back as NaN.
    """
    n = blocks[0].size
    if n == 0:
        return [np.empty(0, dtype=complex) for _ in blocks]
    finite = np.all([np.isfinite(b) for b in blocks], axis=0)
    if not np.all(finite):
        out = [np.full(n, np.nan + 0j) for _ in blocks]
        if np.any(finite):
            parts = _integrate_batch(rhs, span, [b[finite] for b in blocks], [q[finite] for q in params])
            for target, part in zip(out, parts):
                target[finite] = part
        return out
    sol = solve_ivp(lambda s, y: rhs(s, y, *params), span, np.concatenate(blocks).astype(complex),
                    method='DOP853', rtol=RTOL, atol=ATOL)
    if sol.success and np.all(np.isfinite(sol.y[:, -1])):
        end = sol.y[:, -1]
        return [end[i * n:(i + 1) * n] for i in range(len(blocks))]
    if n == 1:
        logger.debug(f"Characteristic integration failed: {sol.message}")
        return [np.full(1, np.nan + 0j) for _ in blocks]
    half = n // 2
    first = _integrate_batch(rhs, span, [b[:half] for b in blocks], [q[:half] for q in params])
    second = _integrate_batch(rhs, span, [b[half:] for b in blocks], [q[half:] for q in params])
    return [np.concatenate(pair) for pair in zip(first, second)]


class Continuation(NamedTuple):
    z0: np.ndarray
    H: np.ndarray
    ok: np.ndarray
    fallback_H: Optional[np.ndarray]
    fallback_ok: Optional[np.ndarray]


class CharacteristicFlow:
    """The characteristic map z₀ ↦ (w(t), H(t)) of one initial law and parameter pair."""

    def __init__(self, law: InitialLaw, p: LiberationParams):
        _check_pair(law, p)
        self.law = law
        self.p = p
        self.centered = p.a == 0 and p.b == 0
        self._numerator = source_numerator(p.alpha, p.beta)
        self._numerator_derivative = self._numerator.deriv()

    def source(self, w: np.ndarray) -> np.ndarray:
        return self._numerator(w) / (1 - w * w) ** 3

    def source_derivative(self, w: np.ndarray) -> np.ndarray:
        q = 1 - w * w
        return (self._numerator_derivative(w) * q + 6 * w * self._numerator(w)) / q ** 4

    def _tangent_rhs(self, s, y):
        n = y.size // 4
        w, H, dw, dH = y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:]
        return np.concatenate((w * H, self.source(w), dw * H + w * dH, self.source_derivative(w) * dw))

    def _exit_rhs(self, sigma, y, rho0):
        n = rho0.size
        phase, H = y[:n].real, y[n:2 * n]
        w = np.exp(rho0 * (1 - sigma) + 1j * phase)
        speed = -rho0 / np.maximum(H.real, 1e-300)
        return np.concatenate((speed * H.imag + 0j, speed * self.source(w), speed + 0j))

    def shoot(self, z0: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """w(t), H(t) and ∂w(t)/∂z₀ for each start point."""
        H0 = H0_eval(self.law, z0)
        dH0 = H0_derivative(self.law, z0)
        if self.centered:
            with np.errstate(over='ignore', invalid='ignore'):
                growth = np.exp(t * H0)
                return z0 * growth, H0, growth * (1 + t * z0 * dH0)
        w, H, dw, _ = _integrate_batch(self._tangent_rhs, (0.0, t),
                                       [z0, H0, np.ones(z0.size, dtype=complex), dH0])
        return w, H, dw

    def exit_data(self, z0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Exit time and unwrapped exit angle of characteristics started inside the disc."""
        rho0 = np.log(np.abs(z0))
        H0 = H0_eval(self.law, z0)
        if self.centered:
            times = -rho0 / H0.real
            return times, np.angle(z0) + times * H0.imag
        phase, _, times = _integrate_batch(self._exit_rhs, (0.0, 1.0),
                                           [np.angle(z0).astype(complex), H0, np.zeros(z0.size, dtype=complex)],
                                           [rho0])
        return times.real, phase.real

    def invert(self, t: float, targets: np.ndarray, z0: np.ndarray, tol: float = NEWTON_TOL,
               max_iter: int = MAX_NEWTON) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Newton on z₀ for w(t; z₀) = target; iterates stay inside the disc."""
        z0 = np.array(z0, dtype=complex)
        n = targets.size
        H_t = np.full(n, np.nan + 0j)
        converged = np.zeros(n, dtype=bool)
        last_step = np.zeros(n, dtype=complex)
        strikes = np.zeros(n, dtype=int)
        active = np.arange(n)
        for _ in range(max_iter):
            if active.size == 0:
                break
            w, H, dw = self.shoot(z0[active], t)
            with np.errstate(invalid='ignore', over='ignore'):
                residual = w / targets[active] - 1
            finite = np.isfinite(residual) & np.isfinite(dw) & (dw != 0)
            # failed shots retreat halfway along their last step
            failed = active[~finite]
            z0[failed] -= 0.5 * last_step[failed]
            last_step[failed] *= 0.5
            strikes[failed] += 1
            good = active[finite]
            H_t[good] = H[finite]
            strikes[good] = 0
            small = np.abs(residual[finite]) < tol
            converged[good[small]] = True
            moving = good[~small]
            step = -residual[finite][~small] * targets[moving] / dw[finite][~small]
            room = 0.5 * (1.0 - np.abs(z0[moving]))
            length = np.abs(step)
            step = np.where(length > room, step * room / np.maximum(length, 1e-300), step)
            z0[moving] += step
            last_step[moving] = step
            active = np.sort(np.concatenate((moving, failed[strikes[failed] < 4])))
        return z0, H_t, converged

    def invert_boundary(self, t: float, theta: np.ndarray, z0: np.ndarray, tol: float = NEWTON_TOL,
                        max_iter: int = MAX_NEWTON) -> Tuple[np.ndarray, np.ndarray]:
        """
        Newton on ζ = log z₀ for w(t; z₀) = e^{iθ}; returns the start points
        and which of them settled.

        Re ζ is capped just inside the unit circle. Starts of exterior angles
        settle there, on the characteristic that runs along the circle.
        """
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            zeta = np.log(np.asarray(z0, dtype=complex))
        n = theta.size
        settled = np.zeros(n, dtype=bool)
        last_step = np.zeros(n, dtype=complex)
        strikes = np.zeros(n, dtype=int)
        active = np.flatnonzero(np.isfinite(zeta))
        for _ in range(max_iter):
            if active.size == 0:
                break
            start = np.exp(zeta[active])
            w, _, dw = self.shoot(start, t)
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                residual = np.log(w) - 1j * theta[active]
                residual = residual.real + 1j * wrap_angle(residual.imag)
                slope = dw * start / w
            finite = np.isfinite(residual) & np.isfinite(slope) & (slope != 0)
            failed = active[~finite]
            zeta[failed] -= 0.5 * last_step[failed]
            last_step[failed] *= 0.5
            strikes[failed] += 1
            good = active[finite]
            strikes[good] = 0
            residual, slope = residual[finite], slope[finite]
            pinned = zeta[good].real > -2 * CIRCLE_DEPTH
            done = (np.abs(residual) < tol) | (pinned & (np.abs(residual.imag) < tol)
                                               & (np.abs(residual.real) < CIRCLE_TOL))
            settled[good[done]] = True
            moving = good[~done]
            step = -residual[~done] / slope[~done]
            length = np.abs(step)
            step = np.where(length > MAX_LOG_STEP, step * MAX_LOG_STEP / np.maximum(length, 1e-300), step)
            candidate = zeta[moving] + step
            candidate = np.minimum(candidate.real, -CIRCLE_DEPTH) + 1j * candidate.imag
            last_step[moving] = candidate - zeta[moving]
            zeta[moving] = candidate
            active = np.sort(np.concatenate((moving, failed[strikes[failed] < 4])))
        return np.exp(zeta), settled

    def continue_radially(self, t: float, directions: np.ndarray, radius,
                          fallback_radius: Optional[float] = None) -> Continuation:
        """
        Solve w(t; z₀) = radius·direction by following the radius outward
        from 0.05, uniformly in −log(1 − r).
        """
        d_start = -math.log1p(-CONTINUATION_START)
        d_end = -np.log1p(-np.asarray(radius, dtype=float))
        fallback_index = None
        if fallback_radius is not None:
            d_fallback = -math.log1p(-fallback_radius)
            depths = np.concatenate((np.linspace(d_start, d_fallback, CONTINUATION_STEPS),
                                     np.linspace(d_fallback, d_end, FINAL_STEPS + 1)[1:]))
            fallback_index = CONTINUATION_STEPS - 1
        else:
            depths = np.linspace(d_start, d_end, CONTINUATION_STEPS + FINAL_STEPS)
        depths = depths.reshape(depths.shape[0], -1) * np.ones((1, directions.size))
        z0 = CONTINUATION_START * directions * math.exp(-t)
        previous = None
        ok = np.ones(directions.size, dtype=bool)
        fallback_H = fallback_ok = None
        H = np.full(directions.size, np.nan + 0j)
        for k in range(depths.shape[0]):
            targets = -np.expm1(-depths[k]) * directions
            guess = z0
            if previous is not None:
                ratio = (depths[k] - depths[k - 1]) / np.maximum(depths[k - 1] - depths[k - 2], 1e-300) \
                    if k >= 2 else 1.0
                guess = z0 + ratio * (z0 - previous)
                outside = np.abs(guess) > np.abs(z0) + 0.5 * (1 - np.abs(z0))
                guess = np.where(outside, z0, guess)
            previous = z0
            final = k == depths.shape[0] - 1 or k == fallback_index
            z0, H, converged = self.invert(t, targets, guess, tol=NEWTON_TOL if final else 1e-8)
            ok &= converged
            if k == fallback_index:
                fallback_H, fallback_ok = H.copy(), ok.copy()
        return Continuation(z0=z0, H=H, ok=ok, fallback_H=fallback_H, fallback_ok=fallback_ok)


def K0_eval(law: InitialLaw, p: LiberationParams, z):
    """K(0, z) = √(H(0,z)² − V(z)²), continued along the radius from K(0,0) = √(1−(a+b)²)."""
    return track_sqrt(lambda u: H0_eval(law, u) ** 2 - V(u, p) ** 2, z)


class CharacteristicRecord(BaseModel):
    """One characteristic: start point, conserved value, sampled path and exit."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    z0: complex = Field(..., description="Start point in the open disc")
    K0: complex = Field(..., description="Conserved value K(0, z0)")
    exit_time: Optional[float] = Field(None, description="Time at which |w| reaches 1")
    exit_angle: Optional[float] = Field(None, description="Angle of w at the exit time")
    s: np.ndarray = Field(..., description="Sample times")
    w: np.ndarray = Field(..., description="Positions w(s)")
    H: np.ndarray = Field(..., description="Herglotz values H(s, w(s))")

    @model_validator(mode='after')
    def _check_exit(self) -> 'CharacteristicRecord':
        if (self.exit_time is None) != (self.exit_angle is None):
            raise ValueError("exit_angle is set exactly when exit_time is set")
        if np.any(np.diff(np.abs(self.w)) < -1e-10):
            raise ValueError("|w| must be nondecreasing along a characteristic")
        return self

    @property
    def trajectory(self) -> List[Tuple[float, complex]]:
        return [(float(s), complex(w)) for s, w in zip(self.s, self.w)]

    def conservation_defect(self, p: LiberationParams) -> float:
        """max over the path of |√(K0² + V(w)²) − H| for the matching sign."""
        root = np.sqrt(self.K0 ** 2 + np.asarray(V(self.w, p)) ** 2)
        return float(np.max(np.minimum(np.abs(root - self.H), np.abs(root + self.H))))


def characteristic_flow(z0: complex, t: float, law: InitialLaw, p: LiberationParams,
                        rtol: float = RTOL) -> CharacteristicRecord:
    """Integrate dw/ds = wH, dH/ds = G(w) from s = 0 until s = t or exit from the disc."""
    z0 = complex(z0)
    if abs(z0) >= 1:
        raise DomainError(f"start point must lie in the open disc, got {z0}")
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    flow = CharacteristicFlow(law, p)
    K0 = complex(K0_eval(law, p, z0))
    H0 = complex(H0_eval(law, z0))
    if z0 == 0:
        return CharacteristicRecord(z0=z0, K0=K0, s=np.array([0.0, t]), w=np.zeros(2, complex),
                                    H=np.full(2, H0))
    if t == 0:
        return CharacteristicRecord(z0=z0, K0=K0, s=np.zeros(1), w=np.array([z0]), H=np.array([H0]))
    if flow.centered:
        exit_time = (math.log(EXIT_RADIUS) - math.log(abs(z0))) / H0.real
        end = min(t, exit_time)
        s = np.linspace(0.0, end, 65)
        w = z0 * np.exp(s * H0)
        exited = exit_time <= t
        return CharacteristicRecord(z0=z0, K0=K0, s=s, w=w, H=np.full(s.size, H0),
                                    exit_time=exit_time if exited else None,
                                    exit_angle=float(np.angle(w[-1])) if exited else None)

    def rhs(s, y):
        return np.array([y[0] * y[1], flow.source(y[0])])

    def leave(s, y):
        return abs(y[0]) - EXIT_RADIUS
    leave.terminal, leave.direction = True, 1
    events = [leave]
    if p.b:
        def near_one(s, y):
            return abs(y[0] - 1) - POLE_GUARD
        near_one.terminal, near_one.direction = True, -1
        events.append(near_one)
    if p.a:
        def near_minus_one(s, y):
            return abs(y[0] + 1) - POLE_GUARD
        near_minus_one.terminal, near_minus_one.direction = True, -1
        events.append(near_minus_one)
    sol = solve_ivp(rhs, (0.0, t), np.array([z0, H0]), method='DOP853', rtol=rtol, atol=ATOL, events=events)
    last = {'s': float(sol.t[-1]), 'w': str(complex(sol.y[0, -1])), 'H': str(complex(sol.y[1, -1]))}
    if sol.status == -1 or any(len(sol.t_events[i]) for i in range(1, len(events))):
        logger.warning(f"Characteristic from {z0} approached a pole: {sol.message}")
        raise SingularApproach(f"characteristic from {z0} approached a pole of V", last_state=last)
    exited = len(sol.t_events[0]) > 0
    return CharacteristicRecord(
        z0=z0, K0=K0, s=sol.t, w=sol.y[0], H=sol.y[1],
        exit_time=float(sol.t_events[0][0]) if exited else None,
        exit_angle=float(np.angle(sol.y_events[0][0][0])) if exited else None,
    )


def flow_log_modulus(t: float, z0: complex, law: InitialLaw, p: LiberationParams) -> Optional[float]:
    """h_t with ln|φ_t(z₀)| = h_t·ln|z₀|; None when the characteristic leaves the disc before t."""
    record = characteristic_flow(z0, t, law, p)
    if record.exit_time is not None or z0 == 0:
        return None
    return float(math.log(abs(record.w[-1])) / math.log(abs(z0)))


class ExitChart(BaseModel):
    """Exit times and angles of a fan of characteristics, read at time t."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float = Field(..., ge=0.0)
    rays: np.ndarray = Field(..., description="Start angles of the fan")
    radii: np.ndarray = Field(..., description="Start radii, ascending, ending with 1")
    exit_time: np.ndarray = Field(..., description="Exit time per (ray, radius); NaN where integration failed")
    exit_phase: np.ndarray = Field(..., description="Unwrapped exit angle per (ray, radius)")
    K0: np.ndarray = Field(..., description="Conserved value per (ray, radius); NaN on the circle")

    def rows(self) -> List[Tuple[complex, complex, Optional[float], Optional[float]]]:
        """(z0, K0, exit_time, exit_angle) with the exit set only when it happens by time t."""
        out = []
        for j, ray in enumerate(self.rays):
            for k, radius in enumerate(self.radii):
                time = self.exit_time[j, k]
                exited = bool(np.isfinite(time) and time <= self.t)
                out.append((complex(radius * np.exp(1j * ray)), complex(self.K0[j, k]),
                            float(time) if exited else None,
                            wrap_angle(self.exit_phase[j, k]) if exited else None))
        return out

    def crossing(self) -> Tuple[np.ndarray, np.ndarray]:
        """R_t per ray (1 outside I_t) and the exit angle of the start point at R_t (NaN outside I_t)."""
        interior = self.radii[:-1]
        R = np.ones(self.rays.size)
        angle = np.full(self.rays.size, np.nan)
        for j in range(self.rays.size):
            times = self.exit_time[j, :-1]
            if not np.all(np.isfinite(times)):
                continue
            below = np.flatnonzero(times <= self.t)
            if below.size == 0:
                continue
            k = below[0]
            if k == 0:
                R[j], angle[j] = interior[0], self.exit_phase[j, 0]
                continue
            lam = (math.log(times[k - 1]) - math.log(self.t)) / (math.log(times[k - 1]) - math.log(times[k]))
            gap = (1 - lam) * math.log1p(-interior[k - 1]) + lam * math.log1p(-interior[k])
            R[j] = -math.expm1(gap)
            angle[j] = (1 - lam) * self.exit_phase[j, k - 1] + lam * self.exit_phase[j, k]
        return R, angle

    def _runs(self) -> List[np.ndarray]:
        R, _ = self.crossing()
        inside = R < 1
        if not np.any(inside):
            return []
        if np.all(inside):
            return [np.arange(self.rays.size)]
        start = int(np.flatnonzero(~inside)[0])
        order = np.roll(np.arange(self.rays.size), -start)
        runs, current = [], []
        for j in order:
            if inside[j]:
                current.append(j)
            elif current:
                runs.append(np.array(current))
                current = []
        if current:
            runs.append(np.array(current))
        return runs

    def image_intervals(self, pad: Optional[float] = None) -> List[Tuple[float, float]]:
        """Arcs (start, length) covered by exit angles at time t of starts on I_t."""
        _, angle = self.crossing()
        arcs = []
        for run in self._runs():
            phases = np.unwrap(angle[run])
            margin = pad if pad is not None else max(TWO_PI / self.rays.size,
                                                     float(np.max(np.diff(phases))) if run.size > 1 else 0.0)
            if run.size == self.rays.size:
                return [(-math.pi, TWO_PI)]
            low, high = float(np.min(phases)) - margin, float(np.max(phases)) + margin
            arcs.append((wrap_angle(low), min(TWO_PI, high - low)))
        return arcs

    def seed(self, theta: float) -> complex:
        """Start point whose exit at time t is near e^{iθ}, interpolated between fan rays."""
        R, angle = self.crossing()
        for run in self._runs():
            phases = np.unwrap(angle[run])
            starts = R[run] * np.exp(1j * self.rays[run])
            for j in range(run.size - 1):
                low = phases[j]
                target = low + wrap_angle(theta - low)
                if target < low:
                    target += TWO_PI
                if low <= target <= phases[j + 1]:
                    lam = (target - low) / max(phases[j + 1] - low, 1e-300)
                    return complex((1 - lam) * starts[j] + lam * starts[j + 1])
        raise ExteriorPoint(f"no characteristic reaches angle {theta:.6g} at time {self.t}")

    def to_csv(self, path: Path) -> None:
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(['z0_re', 'z0_im', 'K0_re', 'K0_im', 'exit_time', 'exit_angle'])
            for z0, K0, time, angle in self.rows():
                writer.writerow([format(z0.real, '.17g'), format(z0.imag, '.17g'),
                                 format(K0.real, '.17g'), format(K0.imag, '.17g'),
                                 '' if time is None else format(time, '.17g'),
                                 '' if angle is None else format(angle, '.17g')])


def _chart_radii(t: float, size: int) -> np.ndarray:
    inner = np.exp(-np.linspace(t + 3.0, 0.06, max(4, size // 2)))
    outer = 1.0 - np.geomspace(0.05, 1e-6, max(4, size - size // 2))
    return np.concatenate((np.unique(np.concatenate((inner, outer))), [1.0]))


def exit_chart(t: float, law: InitialLaw, p: LiberationParams, fan_size: Optional[int] = None,
               radial_size: int = 24) -> ExitChart:
    """Fan of characteristics on symmetric rays, with exit times and angles."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    flow = CharacteristicFlow(law, p)
    fan_size = fan_size or settings.FAN_SIZE
    rays = wrap_angle(-math.pi + TWO_PI * (np.arange(fan_size) + 0.5) / fan_size)
    for attempt in range(2):
        radii = _chart_radii(t, radial_size * (2 ** attempt))
        interior = radii[:-1]
        starts = (interior[None, :] * np.exp(1j * rays)[:, None]).reshape(-1)
        times, phases = _map_chunks(lambda z: flow.exit_data(z), starts, chunk=4 * CHUNK)
        times = times.reshape(fan_size, interior.size)
        phases = phases.reshape(fan_size, interior.size)
        increasing = np.diff(times, axis=1) > 1e-12 * np.abs(times[:, 1:])
        if not np.any(increasing & np.isfinite(times[:, 1:]) & np.isfinite(times[:, :-1])):
            break
        logger.warning(f"Exit chart at t={t} is not monotone along {int(np.sum(np.any(increasing, axis=1)))} rays; "
                       f"refining radii")
    else:
        raise ChartFold(f"exit times are not monotone along rays at t={t}",
                        diagnostics={'rays': int(np.sum(np.any(increasing, axis=1)))})
    K0 = K0_eval(law, p, starts).reshape(fan_size, interior.size)
    failed = int(np.sum(~np.isfinite(times)))
    if failed:
        logger.warning(f"Exit chart at t={t}: {failed} characteristics failed")
    exit_time = np.concatenate((times, np.zeros((fan_size, 1))), axis=1)
    exit_phase = np.concatenate((phases, rays[:, None]), axis=1)
    K0 = np.concatenate((K0, np.full((fan_size, 1), np.nan + 0j)), axis=1)
    return ExitChart(t=t, rays=rays, radii=radii, exit_time=exit_time, exit_phase=exit_phase, K0=K0)


def _bisect_start(flow: CharacteristicFlow, t: float, theta: float, chart: ExitChart,
                  iterations: int = 40) -> complex:
    """Two-parameter bisection: start radius for exit time t, then ray angle for exit angle θ."""
    R, angle = chart.crossing()
    target_phase = None
    bracket = None
    for run in chart._runs():
        phases = np.unwrap(angle[run])
        for j in range(run.size - 1):
            target = phases[j] + wrap_angle(theta - phases[j])
            if phases[j] <= target <= phases[j + 1]:
                bracket, target_phase = (run[j], run[j + 1]), target
                break
        if bracket:
            break
    if bracket is None:
        raise ExteriorPoint(f"no characteristic reaches angle {theta:.6g} at time {t}")
    psi_low = chart.rays[bracket[0]]
    psi_high = psi_low + wrap_angle(chart.rays[bracket[1]] - psi_low)

    def radius_for(psi: float) -> float:
        low, high = chart.radii[0], 1.0
        for _ in range(iterations):
            mid = 0.5 * (low + high)
            time, _ = flow.exit_data(np.array([mid * np.exp(1j * psi)]))
            if time[0] > t:
                low = mid
            else:
                high = mid
        return 0.5 * (low + high)

    for _ in range(iterations):
        psi = 0.5 * (psi_low + psi_high)
        radius = radius_for(psi)
        _, phase = flow.exit_data(np.array([radius * np.exp(1j * psi)]))
        reached = phase[0] + TWO_PI * round((target_phase - phase[0]) / TWO_PI)
        if reached < target_phase:
            psi_low = psi
        else:
            psi_high = psi
    psi = 0.5 * (psi_low + psi_high)
    return complex(radius_for(psi) * np.exp(1j * psi))


def boundary_K(t: float, theta: float, law: InitialLaw, p: LiberationParams,
               chart: Optional[ExitChart] = None) -> complex:
    """K(t, e^{iθ}) from the start point whose characteristic exits at e^{iθ} at time t."""
    if t <= 0:
        raise DomainError(f"time must be positive, got {t}")
    flow = CharacteristicFlow(law, p)
    if p.degenerate:
        return 0j
    theta = wrap_angle(theta)
    target = np.array([np.exp(1j * theta)])
    if chart is None:
        chart = exit_chart(t, law, p)
    guess = chart.seed(theta)
    z0, _, ok = flow.invert(t, target, np.array([guess]))
    if not ok[0] or abs(z0[0]) >= 1:
        logger.debug(f"Chart-seeded Newton failed at theta={theta:.6g}; continuing radially")
        result = flow.continue_radially(t, target, BOUNDARY_RADIUS)
        z0, _, ok = flow.invert(t, target, result.z0)
    if not ok[0] or abs(z0[0]) >= 1:
        logger.debug(f"Radial continuation failed at theta={theta:.6g}; bisecting")
        z0 = np.array([_bisect_start(flow, t, theta, chart)])
        w, _, _ = flow.shoot(z0, t)
        if abs(w[0] - target[0]) > 1e-8:
            raise NumericError(f"could not match exit angle {theta:.6g} at time {t}",
                               diagnostics={'theta': theta, 't': t, 'miss': float(abs(w[0] - target[0]))})
    return complex(K0_eval(law, p, z0)[0])


class _BoundarySolution(NamedTuple):
    kappa: np.ndarray
    z0: np.ndarray
    status: np.ndarray


def _pushed_inward(z0: np.ndarray) -> np.ndarray:
    """Seeds at least SEED_DEPTH inside the circle, so Newton can leave it for interior roots."""
    with np.errstate(divide='ignore', invalid='ignore'):
        zeta = np.log(np.asarray(z0, dtype=complex))
    return np.exp(np.minimum(zeta.real, -SEED_DEPTH) + 1j * zeta.imag)


def _classify(flow: CharacteristicFlow, theta: np.ndarray, z0: np.ndarray,
              settled: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Settled starts deeper than EXTERIOR_DEPTH give κ from K; shallower ones are exterior."""
    kappa = np.zeros(theta.size)
    status = np.full(theta.size, AngleStatus.UNREACHED, dtype=int)
    with np.errstate(divide='ignore', invalid='ignore'):
        depth = -np.log(np.abs(z0))
    interior = settled & (depth > EXTERIOR_DEPTH)
    status[settled & ~interior] = AngleStatus.EXTERIOR
    if np.any(interior):
        K = K0_eval(flow.law, flow.p, z0[interior])
        kappa[interior] = np.maximum(kappa_from_K(K, theta[interior], flow.p), 0.0)
        status[interior] = AngleStatus.SOLVED
    return kappa, status


def _cold_start(flow: CharacteristicFlow, t: float, theta: np.ndarray) -> _BoundarySolution:
    """Radial continuation from the fixed point 0, then the boundary Newton."""
    p = flow.p
    directions = np.exp(1j * theta)
    near = flow.continue_radially(t, directions, BOUNDARY_RADIUS, fallback_radius=FALLBACK_RADIUS)
    usable = np.isfinite(near.z0) & (np.abs(near.z0) < 1)
    seeds = np.where(usable, near.z0, CONTINUATION_START * directions)
    z0, settled = flow.invert_boundary(t, theta, _pushed_inward(seeds))
    kappa, status = _classify(flow, theta, z0, settled)
    # boundary Newton did not settle: classify by the preimage of r*, else use a Fatou value
    open_ = status == AngleStatus.UNREACHED
    hugging = near.ok & usable & (1 - np.abs(near.z0) <= EXTERIOR_DEPTH)
    status[open_ & hugging] = AngleStatus.EXTERIOR
    inner = np.flatnonzero(open_ & near.ok & ~hugging)
    kappa[inner] = np.maximum((near.H[inner] - V(BOUNDARY_RADIUS * directions[inner], p)).real, 0.0)
    status[inner] = AngleStatus.FALLBACK
    far = np.flatnonzero(open_ & ~near.ok & near.fallback_ok)
    kappa[far] = np.maximum((near.fallback_H[far] - V(FALLBACK_RADIUS * directions[far], p)).real, 0.0)
    status[far] = AngleStatus.FALLBACK
    return _BoundarySolution(kappa, z0, status)


def _secant_seed(theta: np.ndarray, last_theta: np.ndarray, last_z: np.ndarray,
                 prior_theta: np.ndarray, prior_z: np.ndarray) -> np.ndarray:
    """Start point predicted from the last two settled angles, linear in log z₀."""
    with np.errstate(divide='ignore', invalid='ignore'):
        zeta = np.log(last_z)
        ratio = (theta - last_theta) / (last_theta - prior_theta)
        trend = np.log(last_z / prior_z)
        usable = np.isfinite(ratio) & np.isfinite(trend) & (ratio <= 4.0)
    zeta = zeta + np.where(usable, ratio, 0.0) * np.where(usable, trend, 0.0)
    return _pushed_inward(np.exp(zeta))


def _march(flow: CharacteristicFlow, t: float, theta: np.ndarray) -> _BoundarySolution:
    """
    κ_t at ascending angles. The angles are cut into strands of
    STRAND_LENGTH; strand heads start cold and the rest follow their
    predecessor, all strands advancing together in one Newton batch.
    """
    m = theta.size
    kappa = np.zeros(m)
    z0 = np.full(m, np.nan + 0j)
    heads = np.arange(0, m, STRAND_LENGTH)
    kappa[heads], z0[heads], status_heads = _cold_start(flow, t, theta[heads])
    status = np.full(m, AngleStatus.UNREACHED, dtype=int)
    status[heads] = status_heads
    good = status_heads <= AngleStatus.EXTERIOR
    last_z = np.where(good, z0[heads], np.nan + 0j)
    last_theta = theta[heads].copy()
    prior_z = np.full(heads.size, np.nan + 0j)
    prior_theta = np.full(heads.size, np.nan)
    for offset in range(1, STRAND_LENGTH):
        members = heads + offset
        rows = np.flatnonzero((members < m) & np.isfinite(last_z))
        if rows.size == 0:
            continue
        index = members[rows]
        guess = _secant_seed(theta[index], last_theta[rows], last_z[rows], prior_theta[rows], prior_z[rows])
        found, settled = flow.invert_boundary(t, theta[index], guess)
        kappa[index], status[index] = _classify(flow, theta[index], found, settled)
        z0[index] = found
        moved = rows[settled]
        prior_z[moved], prior_theta[moved] = last_z[moved], last_theta[moved]
        last_z[moved], last_theta[moved] = found[settled], theta[index][settled]
    is_head = np.zeros(m, dtype=bool)
    is_head[heads] = True
    pending = np.flatnonzero((status == AngleStatus.UNREACHED) & ~is_head)
    if pending.size:
        logger.debug(f"{pending.size} angles at t={t} lost their strand; restarting from the origin")
        kappa[pending], z0[pending], status[pending] = _cold_start(flow, t, theta[pending])
    for _ in range(REPAIR_SWEEPS):
        pending = np.flatnonzero(status == AngleStatus.UNREACHED)
        known = np.flatnonzero(status <= AngleStatus.EXTERIOR)
        if pending.size == 0 or known.size == 0:
            break
        right = np.minimum(np.searchsorted(known, pending), known.size - 1)
        left = np.maximum(right - 1, 0)
        closer = np.abs(theta[known[left]] - theta[pending]) <= np.abs(theta[known[right]] - theta[pending])
        neighbour = np.where(closer, known[left], known[right])
        found, settled = flow.invert_boundary(t, theta[pending], _pushed_inward(z0[neighbour]))
        if not np.any(settled):
            break
        values, classes = _classify(flow, theta[pending], found, settled)
        fixed = pending[settled]
        kappa[fixed], status[fixed], z0[fixed] = values[settled], classes[settled], found[settled]
    return _BoundarySolution(kappa, z0, status)


def _boundary_density(flow: CharacteristicFlow, t: float, theta: np.ndarray) -> _BoundarySolution:
    """κ_t, start points and status at ascending angles in [0, π]; see nu_t."""
    p = flow.p
    n = theta.size
    kappa = np.zeros(n)
    z0 = np.full(n, np.nan + 0j)
    status = np.full(n, AngleStatus.POLE, dtype=int)
    pole = ((np.abs(theta) < 1e-15) & (p.b > 0)) | ((np.abs(np.abs(theta) - math.pi) < 1e-15) & (p.a > 0))
    work = np.flatnonzero(~pole)
    if work.size:
        kappa[work], z0[work], status[work] = _march(flow, t, theta[work])
    return _BoundarySolution(kappa, z0, status)


def _solve_angles(flow: CharacteristicFlow, t: float, theta: np.ndarray) -> _BoundarySolution:
    """Batched, parallel boundary solve on arbitrary angles using conjugation symmetry."""
    wrapped = np.atleast_1d(wrap_angle(theta))
    magnitudes, inverse = np.unique(np.abs(wrapped), return_inverse=True)
    workers = max(1, min(settings.THREADS, math.ceil(magnitudes.size / STRAND_LENGTH)))
    block = max(STRAND_LENGTH, math.ceil(magnitudes.size / workers))
    kappa, z0, status = _map_chunks(lambda chunk: tuple(_boundary_density(flow, t, chunk)), magnitudes, chunk=block)
    exterior = int(np.sum(status == AngleStatus.EXTERIOR))
    if exterior:
        logger.debug(f"Density at t={t}: {exterior} of {magnitudes.size} angles lie outside the support")
    fallback = int(np.sum(status == AngleStatus.FALLBACK))
    if fallback:
        logger.info(f"Density at t={t}: {fallback} of {magnitudes.size} angles used the Fatou fallback")
    lost = np.flatnonzero(status == AngleStatus.UNREACHED)
    if lost.size:
        logger.error(f"Density at t={t}: {lost.size} of {magnitudes.size} angles could not be reached")
        raise NumericError(f"no characteristic was found for {lost.size} angles at t={t}",
                           diagnostics={'t': t, 'angles': [float(a) for a in magnitudes[lost[:8]]],
                                        'unreached': int(lost.size)})
    inverse = inverse.reshape(-1)
    z0 = z0[inverse]
    return _BoundarySolution(kappa[inverse], np.where(wrapped < 0, np.conj(z0), z0), status[inverse])


def _density_on(flow: CharacteristicFlow, t: float, theta: np.ndarray) -> np.ndarray:
    return _solve_angles(flow, t, theta).kappa


def _locate_edges(flow: CharacteristicFlow, t: float, inner: np.ndarray, outer: np.ndarray,
                  start: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Bisect between angles with and without density until the bracket is
    below 1e−6, each midpoint solved from the start point of the inner end.
    """
    inner, outer = inner.astype(float).copy(), outer.astype(float).copy()
    if inner.size == 0:
        return inner
    if start is None:
        start = _solve_angles(flow, t, inner).z0
    while np.max(np.abs(inner - outer)) > EDGE_TOL:
        middle = 0.5 * (inner + outer)
        found, settled = flow.invert_boundary(t, middle, _pushed_inward(start), max_iter=EDGE_NEWTON)
        kappa, status = _classify(flow, middle, found, settled)
        positive = (status == AngleStatus.SOLVED) & (kappa > DENSITY_FLOOR)
        inner = np.where(positive, middle, inner)
        outer = np.where(positive, outer, middle)
        start = np.where(positive, found, start)
    return 0.5 * (inner + outer)


class _Transitions(NamedTuple):
    switch: np.ndarray
    inner_index: np.ndarray
    inner: np.ndarray
    outer: np.ndarray


def _transitions(theta: np.ndarray, positive: np.ndarray) -> _Transitions:
    """Adjacent node pairs (cyclic) where the density switches on or off; switch indexes the first node."""
    following = np.roll(np.arange(theta.size), -1)
    switch = np.flatnonzero(positive != positive[following])
    inner_index = np.where(positive[switch], switch, following[switch])
    outer_index = np.where(positive[switch], following[switch], switch)
    inner = theta[inner_index]
    outer = inner + wrap_angle(theta[outer_index] - inner)
    return _Transitions(switch, inner_index, inner, outer)


def stationary_measure(p: LiberationParams, grid: Optional[np.ndarray] = None,
                       n: Optional[int] = None) -> CircleMeasure:
    """ν_∞ = aδ_π + bδ_0 + √((r₊−cosθ)(cosθ−r₋))/|sinθ| on {r₋ < cosθ < r₊}."""
    atoms = [(math.pi, p.a), (0.0, p.b)]
    if p.degenerate or p.r_plus - p.r_minus < 1e-15:
        return atomic(atoms)
    if grid is None:
        edges = []
        if p.r_plus < 1 - 1e-14:
            edges += [p.theta_plus, -p.theta_plus]
        if p.r_minus > -1 + 1e-14:
            edges += [p.theta_minus, -p.theta_minus]
        grid = circle_grid(n, edges=edges)
    grid = np.asarray(grid, dtype=float)
    return CircleMeasure(atoms=tuple(Atom(angle=a, mass=m) for a, m in atoms if m > 0),
                         theta=grid, kappa=stationary_density(p, grid))


def stationary_density(p: LiberationParams, theta) -> np.ndarray:
    """Density of ν_∞ against dθ/2π at arbitrary angles."""
    theta = np.asarray(theta, dtype=float)
    r_plus, r_minus = p.r_plus, p.r_minus
    if p.degenerate or r_plus - r_minus < 1e-15:
        return np.zeros(theta.shape)
    full_top = r_plus >= 1 - 1e-14
    full_bottom = r_minus <= -1 + 1e-14
    c = np.cos(theta)
    inside = (c > r_minus if not full_bottom else c >= -1.0) & (c < r_plus if not full_top else c <= 1.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        top = np.ones_like(c) if full_top else (r_plus - c) / (1 - c)
        bottom = np.ones_like(c) if full_bottom else (c - r_minus) / (1 + c)
        return np.where(inside, np.sqrt(np.maximum(top * bottom, 0.0)), 0.0)


def stationary_support(p: LiberationParams) -> List[Tuple[float, float]]:
    """Arcs (start, length) of {r₋ < cosθ < r₊}, the support of the density of ν_∞."""
    if p.degenerate or p.r_plus - p.r_minus < 1e-15:
        return []
    top, bottom = p.r_plus >= 1 - 1e-14, p.r_minus <= -1 + 1e-14
    if top and bottom:
        return [(-math.pi, TWO_PI)]
    if top:
        return [(-p.theta_minus, 2 * p.theta_minus)]
    if bottom:
        return [(p.theta_plus, 2 * (math.pi - p.theta_plus))]
    width = p.theta_minus - p.theta_plus
    return [(-p.theta_minus, width), (p.theta_plus, width)]


def initial_measure(law: InitialLaw, p: Optional[LiberationParams] = None,
                    grid: Optional[np.ndarray] = None) -> CircleMeasure:
    """ν₀ for every law with a Herglotz form."""
    p = p or LiberationParams.of_law(law)
    if law.tag == LawTag.FREE:
        return stationary_measure(p, grid)
    if law.tag == LawTag.CLASSICAL:
        product = law.alpha * law.beta
        return atomic([(0.0, (1 + product) / 2), (math.pi, (1 - product) / 2)])
    if law.tag == LawTag.BOOLEAN:
        return atomic([(0.0, 1 / 3), (TWO_PI / 3, 1 / 3), (-TWO_PI / 3, 1 / 3)])
    if law.tag == LawTag.MONOTONE:
        return atomic([(0.0, 0.25), (math.pi / 2, 0.25), (math.pi, 0.25), (-math.pi / 2, 0.25)])
    if law.tag == LawTag.CENTERED:
        return law.nu0
    raise DomainError("moment-only laws have no initial measure")


def kappa_density(t: float, theta: float, law: InitialLaw, p: LiberationParams,
                  chart: Optional[ExitChart] = None) -> float:
    """κ_t(θ) at one angle, with the square-root branch checked against the interior value."""
    if t <= 0:
        raise DomainError(f"time must be positive, got {t}")
    flow = CharacteristicFlow(law, p)
    theta = wrap_angle(theta)
    if p.degenerate:
        return 0.0
    if (theta == 0 and p.b > 0) or (theta == math.pi and p.a > 0):
        return 0.0
    try:
        K = boundary_K(t, theta, law, p, chart)
    except ExteriorPoint:
        return 0.0
    kappa = float(kappa_from_K(K, theta, p))
    direction = np.array([np.exp(1j * theta)])
    near = flow.continue_radially(t, direction, BOUNDARY_RADIUS)
    if near.ok[0]:
        interior = float((near.H[0] - V(BOUNDARY_RADIUS * direction[0], p)).real)
        if abs(kappa - interior) > 1e-3:
            logger.warning(f"Density at theta={theta:.6g}, t={t}: boundary value {kappa:.6g} "
                           f"disagrees with interior value {interior:.6g}")
    return kappa


def nu_t(t: float, law: InitialLaw, p: LiberationParams, grid: Optional[np.ndarray] = None,
         n: Optional[int] = None, refine_edges: bool = True) -> CircleMeasure:
    """ν_t = aδ_π + bδ_0 + κ_t dm on a grid, refined around the support edges it finds."""
    _check_pair(law, p)
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    if t <= SMALL_TIME:
        return initial_measure(law, p, grid)
    if p.degenerate:
        return stationary_measure(p, grid)
    flow = CharacteristicFlow(law, p)
    base = circle_grid(n) if grid is None else merge_nodes(np.asarray(grid, dtype=float))
    solution = _solve_angles(flow, t, base)
    kappa = solution.kappa
    theta = base
    if refine_edges and grid is None:
        switching = _transitions(base, kappa > DENSITY_FLOOR)
        if switching.inner.size:
            edges = _locate_edges(flow, t, switching.inner, switching.outer, solution.z0[switching.inner_index])
            refined = circle_grid(n, edges=edges)
            extra = refined[~np.isin(refined, base)]
            kappa = np.concatenate((kappa, _density_on(flow, t, extra)))
            theta = np.concatenate((base, extra))
            order = np.argsort(theta)
            theta, kappa = theta[order], kappa[order]
            logger.debug(f"nu_t at t={t}: {edges.size} edges, {extra.size} refinement nodes")
    atoms = tuple(Atom(angle=a, mass=m) for a, m in ((math.pi, p.a), (0.0, p.b)) if m > 0)
    density_mass = float(np.sum(np.diff(np.append(theta, theta[0] + TWO_PI)) * (kappa + np.roll(kappa, -1)))
                         / (2 * TWO_PI))
    defect = abs(p.a + p.b + density_mass - 1.0)
    if defect > settings.MASS_TOLERANCE:
        raise NumericError(f"nu_t at t={t} has mass defect {defect:.3e}",
                           diagnostics={'t': t, 'alpha': p.alpha, 'beta': p.beta, 'defect': defect,
                                        'law': law.tag.value})
    logger.info(f"Computed nu_t at t={t} for {law.tag.value} law ({theta.size} nodes, mass defect {defect:.2e})")
    return CircleMeasure(atoms=atoms, theta=theta, kappa=kappa)


def density_values(t: float, law: InitialLaw, p: LiberationParams, theta) -> np.ndarray:
    """κ_t at arbitrary angles, without assembling (or mass-checking) a measure."""
    _check_pair(law, p)
    if t <= 0:
        raise DomainError(f"time must be positive, got {t}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if p.degenerate:
        return np.zeros(theta.shape)
    return _density_on(CharacteristicFlow(law, p), t, theta)


def herglotz_flow(t: float, law: InitialLaw, p: LiberationParams) -> HerglotzEvaluator:
    """H(t, ·) on the open disc by inverting the characteristic map."""
    flow = CharacteristicFlow(law, p)
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")

    def evaluate(z: np.ndarray) -> np.ndarray:
        if t <= SMALL_TIME:
            return H0_eval(law, z)
        out = np.ones(z.shape, dtype=complex)
        moving = np.flatnonzero(z != 0)
        if moving.size:
            result = flow.continue_radially(t, np.exp(1j * np.angle(z[moving])), np.abs(z[moving]))
            if not np.all(result.ok):
                bad = z[moving][~result.ok]
                raise NumericError(f"could not invert the characteristic map at {bad.size} points",
                                   diagnostics={'points': [str(complex(v)) for v in bad[:5]], 't': t})
            out[moving] = result.H
        return out

    return HerglotzEvaluator(func=evaluate, label=f"H_nu_{t:g}")


def _arcs_from_mask(theta: np.ndarray, positive: np.ndarray, edges: dict) -> List[Tuple[float, float]]:
    if not np.any(positive):
        return []
    if np.all(positive):
        return [(-math.pi, TWO_PI)]
    arcs = []
    n = theta.size
    start = int(np.flatnonzero(~positive)[0])
    j = 0
    while j < n:
        index = (start + j) % n
        if positive[index]:
            first = index
            while j < n and positive[(start + j) % n]:
                j += 1
            last = (start + j - 1) % n
            low = edges.get((('on', first)), theta[first])
            high = edges.get((('off', last)), theta[last])
            arcs.append((wrap_angle(low), float(wrap_angle(high - low) % TWO_PI)))
        else:
            j += 1
    return sorted(arcs)


def support_estimate(t: float, law: InitialLaw, p: LiberationParams, n: int = 1024,
                     chart: Optional[ExitChart] = None) -> List[Tuple[float, float]]:
    """
    Support arcs of κ_t as (start, length) pairs: where κ_t > 1e−9 inside the
    image of the exit chart, with edges bisected to 1e−6.
    """
    if t <= 0:
        raise DomainError(f"time must be positive, got {t}")
    flow = CharacteristicFlow(law, p)
    if p.degenerate:
        return []
    theta = circle_grid(n)
    solution = _solve_angles(flow, t, theta)
    if chart is None:
        chart = exit_chart(t, law, p, fan_size=min(settings.FAN_SIZE, n // 2))
    image = chart.image_intervals()
    in_image = np.zeros(theta.size, dtype=bool)
    for start, length in image:
        in_image |= np.mod(theta - start, TWO_PI) <= length
    positive = (solution.kappa > DENSITY_FLOOR) & in_image
    switching = _transitions(theta, positive)
    located = _locate_edges(flow, t, switching.inner, switching.outer, solution.z0[switching.inner_index])
    following = np.roll(np.arange(theta.size), -1)
    edges = {}
    for index, edge in zip(switching.switch, located):
        if positive[index]:
            edges[('off', int(index))] = edge
        else:
            edges[('on', int(following[index]))] = edge
    arcs = _arcs_from_mask(theta, positive, edges)
    logger.info(f"Support at t={t}: {len(arcs)} arcs")
    return arcs
