"""
The spectral law λ_t of the free unitary Brownian motion.

Moments come from the closed finite sum; the density is Re h_t(e^{iθ}) where
h = h_t(e^{iθ}) is the root with positive real part of
(h−1)/(h+1)·e^{th/2} = e^{iθ}, followed in θ from the real root at θ = 0.
"""

import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import brentq

from freejacobi.exceptions import DomainError, NoSolution, NumericError
from freejacobi.measures import (
    CircleMeasure,
    HerglotzEvaluator,
    circle_grid,
    wrap_angle,
)

logger = logging.getLogger(__name__)

MAX_MOMENT_ORDER = 64
FULL_CIRCLE_TIME = 4.0
RESIDUAL_TOL = 1e-12
MAX_NEWTON_STEPS = 60
RESTART_SUBSTEPS = 16


class FubmTime(BaseModel):
    """Time parameter of λ_t."""
    model_config = ConfigDict(frozen=True)

    t: float = Field(..., ge=0.0, description="Time of the free unitary Brownian motion")


def fubm_moment(t: float, k: int) -> float:
    """τ(U_t^k) = e^{−kt/2} Σ_{j<k} (−t)^j/j! · C(k, j+1) · k^{j−1}."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    if k < 0 or k > MAX_MOMENT_ORDER:
        raise DomainError(f"moment order must lie in [0, {MAX_MOMENT_ORDER}], got {k}")
    if k == 0:
        return 1.0
    terms = [(-t) ** j / math.factorial(j) * math.comb(k, j + 1) * float(k) ** (j - 1) for j in range(k)]
    return math.exp(-k * t / 2.0) * math.fsum(terms)


def support_edge(t: float) -> float:
    """Half-width g(t) of the support arc; π from t = 4 on."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    if t >= FULL_CIRCLE_TIME:
        return math.pi
    return 0.5 * math.sqrt(t * (4.0 - t)) + math.acos(1.0 - t / 2.0)


def edge_root(t: float) -> complex:
    """The double root i√(4/t − 1) reached at θ = g(t) for t < 4."""
    return 1j * math.sqrt(4.0 / t - 1.0)


def boundary_residual(t: float, theta: float, z: complex) -> float:
    return abs((z - 1) / (z + 1) * np.exp(t * z / 2) - np.exp(1j * theta))


def _log_form(t: float, theta: float, u: complex) -> complex:
    # relative in u = z − 1; for large t the root sits within e^{−t/2} of 1
    value = np.log(u / (u + 2.0)) + t * (1.0 + u) / 2.0 - 1j * theta
    return complex(value.real, wrap_angle(value.imag))


def _residual_tol(t: float) -> float:
    return RESIDUAL_TOL * max(1.0, t / 2.0)


def _real_root(t: float) -> complex:
    """u = h − 1 at θ = 0."""
    f = lambda u: math.log(u / (u + 2.0)) + t * (1.0 + u) / 2.0
    u = brentq(f, 1e-300, 8.0 / t + 4.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return complex(u, 0.0)


def _newton(t: float, theta: float, u: complex) -> complex:
    residual = _log_form(t, theta, u)
    for _ in range(MAX_NEWTON_STEPS):
        if abs(residual) < 1e-15:
            break
        derivative = 2.0 / (u * (u + 2.0)) + t / 2.0
        step = -residual / derivative
        damping = 1.0
        while damping > 1e-6:
            candidate = u + damping * step
            trial = _log_form(t, theta, candidate)
            if abs(trial) < abs(residual):
                break
            damping /= 2.0
        else:
            break
        if abs(candidate - u) < 1e-16 * abs(u):
            u, residual = candidate, trial
            break
        u, residual = candidate, trial
    if u.real < -1.0:
        # the mirror root −conj(z) of the left half-plane
        u = -2.0 - u.conjugate()
    return u


def _solve(t: float, theta: float, guess: complex, previous_theta: float) -> complex:
    tol = _residual_tol(t)
    u = _newton(t, theta, guess)
    if abs(_log_form(t, theta, u)) < tol:
        return u
    # continuation restart on a finer path from the last good angle
    logger.debug(f"Biane Newton restart at t={t}, theta={theta:.6g}")
    u = guess
    for sub in np.linspace(previous_theta, theta, RESTART_SUBSTEPS + 1)[1:]:
        u = _newton(t, sub, u)
    residual = abs(_log_form(t, theta, u))
    if residual >= tol:
        raise NumericError(f"Biane equation did not converge at t={t}, theta={theta}",
                           diagnostics={'t': t, 'theta': theta, 'residual': residual, 'u': str(u)})
    return u


def biane_h(t: float, theta: float) -> complex:
    """Root with positive real part of (z−1)/(z+1)·e^{tz/2} = e^{iθ}."""
    if t <= 0:
        raise DomainError(f"time must be positive, got {t}")
    theta = wrap_angle(theta)
    edge = support_edge(t)
    magnitude = abs(theta)
    if t < FULL_CIRCLE_TIME and magnitude > edge:
        raise NoSolution(f"angle {theta:.6g} lies outside the support arc |theta| <= {edge:.6g}")
    if t < FULL_CIRCLE_TIME and magnitude == edge:
        u = edge_root(t) - 1.0
    else:
        u = _real_root(t)
        path = np.linspace(0.0, magnitude, max(8, int(math.ceil(magnitude / 0.02))) + 1)
        for previous, current in zip(path[:-1], path[1:]):
            u = _solve(t, current, u, previous)
    z = 1.0 + u
    return z.conjugate() if theta < 0 else z


def fubm_kappa(t: float, theta) -> np.ndarray:
    """Density of λ_t against dθ/2π at arbitrary angles (zero off the support arc)."""
    if t <= 0:
        raise DomainError(f"t > 0 required, got {t}")
    grid = np.asarray(theta, dtype=float)
    edge = support_edge(t)
    full = t >= FULL_CIRCLE_TIME
    magnitudes = np.abs(grid)
    inside = np.ones(grid.shape, dtype=bool) if full else magnitudes < edge
    kappa = np.zeros(grid.shape)
    targets = np.unique(magnitudes[inside])
    values = np.empty(targets.shape)
    u = _real_root(t)
    previous = 0.0
    for index, angle in enumerate(targets):
        u = _solve(t, angle, u, previous)
        values[index] = 1.0 + u.real
        previous = angle
    kappa[inside] = values[np.searchsorted(targets, magnitudes[inside])]
    logger.debug(f"Free unitary Brownian density at t={t}: {targets.size} angles solved")
    return np.maximum(kappa, 0.0)


def fubm_density(t: float, grid: Optional[np.ndarray] = None, n: Optional[int] = None) -> CircleMeasure:
    """λ_t as a CircleMeasure with density Re h_t on the grid (refined at the edges by default)."""
    if t <= 0:
        raise DomainError(f"t > 0 required, got {t}")
    if grid is None:
        edge = support_edge(t)
        grid = circle_grid(n, edges=() if t >= FULL_CIRCLE_TIME else (-edge, edge))
    grid = np.asarray(grid, dtype=float)
    return CircleMeasure(theta=grid, kappa=fubm_kappa(t, grid))


def fubm_herglotz(t: float) -> HerglotzEvaluator:
    """
    H_{λ_t} on the disc: h solving (h−1)·e^{th/2} = z·(h+1), followed
    radially from h(0) = 1.
    """
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")

    def evaluate(z: np.ndarray) -> np.ndarray:
        if t == 0:
            return (1 + z) / (1 - z)
        depth = -np.log1p(-np.abs(z))
        direction = np.exp(1j * np.angle(z))
        h = np.ones(z.shape, dtype=complex)
        steps = 32
        for k in range(1, steps + 1):
            target = (1.0 - np.exp(-depth * k / steps)) * direction
            for _ in range(MAX_NEWTON_STEPS):
                growth = np.exp(t * h / 2)
                value = (h - 1) * growth - target * (h + 1)
                derivative = growth * (1 + t * (h - 1) / 2) - target
                step = value / derivative
                h = h - step
                if np.all(np.abs(step) < 1e-14 * np.maximum(1.0, np.abs(h))):
                    break
        return h

    return HerglotzEvaluator(func=evaluate, label=f"H_lambda_{t:g}")
