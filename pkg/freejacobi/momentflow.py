"""
Moment hierarchy of the liberation flow.

Writing H(t, z) = 1 + 2Σ m_k(t) z^k and matching powers of z in
∂_t H + z H ∂_z H = G(z) gives the triangular system

    m_k' = −k·m_k − k·Σ_{j=1}^{k−1} m_j m_{k−j} + ½·G_k,

where G_k are the Taylor coefficients of the source term. The system is
integrated with fixed-step RK4 so results are reproducible bit for bit.
"""

import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from freejacobi.exceptions import DomainError, InstabilityError
from freejacobi.initlaws import MAX_SERIES_ORDER, InitialLaw, initial_moments
from freejacobi.liberation import LiberationParams, _check_pair, nu_t, source_numerator
from freejacobi.measures import _frozen, circle_moment, write_rows

logger = logging.getLogger(__name__)

BASE_STEP = 1e-3
INSTABILITY_BOUND = 1.0 + 1e-6


class MomentState(BaseModel):
    """Moments m_0 = 1, m_1, ..., m_N of ν_t."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: float = Field(..., ge=0.0)
    m: np.ndarray = Field(..., description="Moments indexed from 0")
    alpha: float = Field(..., ge=-1.0, le=1.0)
    beta: float = Field(..., ge=-1.0, le=1.0)

    @field_validator('m', mode='before')
    @classmethod
    def _as_array(cls, value):
        return _frozen(value)

    @model_validator(mode='after')
    def _check_bounds(self) -> 'MomentState':
        if self.m.size == 0 or abs(self.m[0] - 1.0) > 1e-12:
            raise ValueError("m_0 must equal 1")
        if np.any(np.abs(self.m) > INSTABILITY_BOUND):
            raise ValueError("moments of a law on the circle are bounded by 1")
        return self

    @property
    def order(self) -> int:
        return self.m.size - 1

    def rows(self) -> List[tuple]:
        return [(k, float(v)) for k, v in enumerate(self.m)]


def rhs_series(alpha: float, beta: float, N: int) -> np.ndarray:
    """Taylor coefficients G_0..G_N of 2z(αz²+2βz+α)(βz²+2αz+β)/(1−z²)³."""
    if N < 0 or N > MAX_SERIES_ORDER:
        raise DomainError(f"order must lie in [0, {MAX_SERIES_ORDER}], got {N}")
    numerator = np.zeros(N + 1)
    coefficients = source_numerator(alpha, beta).coef[:N + 1]
    numerator[:coefficients.size] = coefficients
    # (1 − z²)^{−3} = Σ C(n+2, 2) z^{2n}
    denominator = np.zeros(N + 1)
    half = np.arange(N // 2 + 1)
    denominator[::2] = (half + 1) * (half + 2) / 2
    return np.convolve(numerator, denominator)[:N + 1]


def _derivative(m: np.ndarray, source: np.ndarray, k: np.ndarray) -> np.ndarray:
    tail = m[1:]
    products = np.zeros(m.size)
    if tail.size > 1:
        products[2:] = np.convolve(tail, tail)[:m.size - 2]
    out = -k * m - k * products + 0.5 * source
    out[0] = 0.0
    return out


def _prepare(init: Sequence[float], N: Optional[int]) -> np.ndarray:
    values = np.asarray(init)
    if np.iscomplexobj(values):
        if np.any(np.abs(values.imag) > 0):
            raise DomainError("initial moments must be real")
        values = values.real
    values = values.astype(float)
    N = values.size - 1 if N is None else N
    if N < 1 or N > MAX_SERIES_ORDER:
        raise DomainError(f"order must lie in [1, {MAX_SERIES_ORDER}], got {N}")
    if values.size < N + 1:
        raise DomainError(f"{values.size} initial moments given, m_0..m_{N} needed")
    if abs(values[0] - 1.0) > 1e-12:
        raise DomainError(f"m_0 must equal 1, got {values[0]}")
    if np.any(np.abs(values[:N + 1]) > INSTABILITY_BOUND):
        raise InstabilityError("initial moments exceed 1 in modulus")
    return values[:N + 1].copy()


def evolve_moments(init: Sequence[float], alpha: float, beta: float, t: float,
                   N: Optional[int] = None, step: Optional[float] = None) -> np.ndarray:
    """m_0..m_N at time t from m_0..m_N at time 0 (RK4, step 1e−3·min(1, 1/N))."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    m = _prepare(init, N)
    N = m.size - 1
    source = rhs_series(alpha, beta, N)
    k = np.arange(N + 1, dtype=float)
    step = step or BASE_STEP * min(1.0, 1.0 / N)
    count = int(math.ceil(t / step - 1e-12)) if t > 0 else 0
    if count == 0:
        return m
    h = t / count
    for index in range(count):
        k1 = _derivative(m, source, k)
        k2 = _derivative(m + 0.5 * h * k1, source, k)
        k3 = _derivative(m + 0.5 * h * k2, source, k)
        k4 = _derivative(m + h * k3, source, k)
        m = m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        worst = int(np.argmax(np.abs(m)))
        if abs(m[worst]) > INSTABILITY_BOUND or not np.all(np.isfinite(m)):
            raise InstabilityError(f"moment m_{worst} left the unit interval at t={(index + 1) * h:.6g}",
                                   diagnostics={'t': (index + 1) * h, 'k': worst, 'value': float(m[worst])})
    logger.debug(f"Moment flow to t={t}: {count} RK4 steps, order {N}")
    return m


def evolve_states(init: Sequence[float], alpha: float, beta: float, times: Iterable[float],
                  N: Optional[int] = None) -> List[MomentState]:
    """Moment states at increasing times, integrating from one to the next."""
    m = _prepare(init, N)
    states, current = [], 0.0
    for t in sorted(times):
        m = evolve_moments(m, alpha, beta, t - current, N)
        current = t
        states.append(MomentState(t=t, m=m, alpha=alpha, beta=beta))
    return states


def crosscheck(t: float, law: InitialLaw, p: LiberationParams, K_max: int = 8,
               n: Optional[int] = None) -> float:
    """max_{k ≤ K_max} |m_k from the moment flow − k-th circle moment of nu_t|."""
    _check_pair(law, p)
    init = initial_moments(law, K_max)
    evolved = evolve_moments(init, p.alpha, p.beta, t, K_max)
    measure = nu_t(t, law, p, n=n)
    analytic = np.array([circle_moment(measure, k).real for k in range(1, K_max + 1)])
    discrepancy = float(np.max(np.abs(evolved[1:] - analytic)))
    logger.info(f"Moment crosscheck at t={t} ({law.tag.value}): max discrepancy {discrepancy:.3e}")
    return discrepancy


def write_moments(path: Path, state: MomentState) -> None:
    write_rows(path, ['k', 'm_k'], state.rows())
