"""
Initial conditions H(0, ·) of the liberation flow and the transform
arithmetic (ψ, χ, F, Σ) behind the boolean, monotone and free
multiplicative convolutions.
"""

import logging
from enum import Enum
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from freejacobi import settings
from freejacobi.exceptions import DomainError, NumericError, PoleError
from freejacobi.measures import (
    Atom,
    CircleMeasure,
    circle_moment,
    herglotz_eval,
)

logger = logging.getLogger(__name__)

MAX_SERIES_ORDER = 64
BRANCH_STEPS = 32


class LawTag(str, Enum):
    FREE = "free"
    CLASSICAL = "classical"
    BOOLEAN = "boolean"
    MONOTONE = "monotone"
    CENTERED = "centered"
    MOMENTS = "moments"


class InitialLaw(BaseModel):
    """Distribution of RS at time 0, described by its Herglotz transform or its moments."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tag: LawTag = Field(..., description="Independence structure of the initial pair")
    alpha: float = Field(0.0, ge=-1.0, le=1.0, description="Trace of R")
    beta: float = Field(0.0, ge=-1.0, le=1.0, description="Trace of S")
    nu0: Optional[CircleMeasure] = Field(None, description="Initial law for centered initial conditions")
    moments: Optional[Tuple[float, ...]] = Field(None, description="m_1, m_2, ... for moment-only laws")

    @model_validator(mode='after')
    def _check_tag(self) -> 'InitialLaw':
        if self.tag in (LawTag.BOOLEAN, LawTag.MONOTONE, LawTag.CENTERED) and (self.alpha or self.beta):
            raise ValueError(f"{self.tag.value} initial laws require alpha = beta = 0")
        if self.tag == LawTag.CENTERED:
            if self.nu0 is None:
                raise ValueError("centered initial laws need nu0")
            if any(abs(circle_moment(self.nu0, k).imag) > 1e-8 for k in range(1, 5)):
                raise ValueError("nu0 must have real moments")
        if self.tag == LawTag.MOMENTS:
            if not self.moments:
                raise ValueError("moment-only laws need a moment list")
            if len(self.moments) > MAX_SERIES_ORDER:
                raise ValueError(f"at most {MAX_SERIES_ORDER} moments are supported")
            if any(abs(m) > 1.0 + 1e-9 for m in self.moments):
                raise ValueError("moments of a law on the circle are bounded by 1")
        return self

    @property
    def a(self) -> float:
        return abs(self.alpha - self.beta) / 2.0

    @property
    def b(self) -> float:
        return abs(self.alpha + self.beta) / 2.0

    @property
    def has_herglotz(self) -> bool:
        return self.tag != LawTag.MOMENTS

    @classmethod
    def free(cls, alpha: float = 0.0, beta: float = 0.0) -> 'InitialLaw':
        return cls(tag=LawTag.FREE, alpha=alpha, beta=beta)

    @classmethod
    def classical(cls, alpha: float = 0.0, beta: float = 0.0) -> 'InitialLaw':
        return cls(tag=LawTag.CLASSICAL, alpha=alpha, beta=beta)

    @classmethod
    def boolean(cls) -> 'InitialLaw':
        return cls(tag=LawTag.BOOLEAN)

    @classmethod
    def monotone(cls) -> 'InitialLaw':
        return cls(tag=LawTag.MONOTONE)

    @classmethod
    def centered(cls, nu0: CircleMeasure) -> 'InitialLaw':
        return cls(tag=LawTag.CENTERED, nu0=nu0)

    @classmethod
    def from_moments(cls, moments: Sequence[float], alpha: float = 0.0, beta: float = 0.0) -> 'InitialLaw':
        return cls(tag=LawTag.MOMENTS, moments=tuple(float(m) for m in moments), alpha=alpha, beta=beta)

    @classmethod
    def from_config(cls, config: dict, alpha: Optional[float] = None, beta: Optional[float] = None) -> 'InitialLaw':
        """
        Build a law from its JSON form, e.g. {"tag": "classical", "alpha": 0.3}.

        Missing alpha/beta fall back to the given values; centered laws take
        their initial measure from "atoms": [{"angle": .., "mass": ..}].
        """
        data = dict(config)
        tag = LawTag(data.get('tag', ''))
        if tag not in (LawTag.BOOLEAN, LawTag.MONOTONE, LawTag.CENTERED):
            data.setdefault('alpha', alpha if alpha is not None else 0.0)
            data.setdefault('beta', beta if beta is not None else 0.0)
        if tag == LawTag.CENTERED and 'nu0' not in data:
            data['nu0'] = CircleMeasure(atoms=tuple(Atom(**a) for a in data.pop('atoms', [])))
        return cls(**data)

    def to_config(self) -> dict:
        config = {'tag': self.tag.value, 'alpha': self.alpha, 'beta': self.beta}
        if self.nu0 is not None:
            config['atoms'] = [{'angle': a.angle, 'mass': a.mass} for a in self.nu0.atoms]
            if self.nu0.theta.size:
                config['density_nodes'] = int(self.nu0.theta.size)
        if self.moments is not None:
            config['moments'] = list(self.moments)
        return config


def track_sqrt(radicand: Callable[[np.ndarray], np.ndarray], z: np.ndarray,
               steps: int = BRANCH_STEPS) -> np.ndarray:
    """
    Square root of radicand(z) continued along the segment from 0 to z.

    The root at 0 is the principal one; each step keeps the sign closest to
    the previous value.
    """
    z = np.asarray(z, dtype=complex)
    root = np.sqrt(np.asarray(radicand(np.zeros_like(z)), dtype=complex))
    scale = np.maximum(np.abs(root), 1.0)
    for k in range(1, steps + 1):
        value = np.asarray(radicand(z * k / steps), dtype=complex)
        if np.any(np.abs(value) < 1e-14 * scale ** 2) and k < steps:
            bad = z.reshape(-1)[np.argmin(np.abs(value).reshape(-1))]
            raise NumericError("square-root branch is ambiguous at an interior zero",
                               diagnostics={'z': str(complex(bad))})
        candidate = np.sqrt(value)
        flip = np.abs(candidate + root) < np.abs(candidate - root)
        root = np.where(flip, -candidate, candidate)
    return root


def _free_radicand(a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: 1 + 4 * z * (b * b / (1 - z) ** 2 - a * a / (1 + z) ** 2)


def H0_eval(law: InitialLaw, z):
    """H(0, z) for |z| < 1."""
    z_arr = np.asarray(z, dtype=complex)
    flat = z_arr.reshape(-1)
    if np.any(np.abs(flat) >= 1.0):
        raise DomainError("initial Herglotz transforms are evaluated on the open disc only")
    if law.tag == LawTag.FREE:
        values = track_sqrt(_free_radicand(law.a, law.b), flat) if (law.a or law.b) else np.ones(flat.shape, complex)
    elif law.tag == LawTag.CLASSICAL:
        values = (1 + flat ** 2 + 2 * flat * law.alpha * law.beta) / (1 - flat ** 2)
    elif law.tag == LawTag.BOOLEAN:
        values = (1 + flat ** 3) / (1 - flat ** 3)
    elif law.tag == LawTag.MONOTONE:
        values = (1 + flat ** 4) / (1 - flat ** 4)
    elif law.tag == LawTag.CENTERED:
        values = herglotz_eval(law.nu0, flat)
    else:
        raise DomainError("moment-only laws have no Herglotz evaluation")
    values = np.asarray(values, dtype=complex)
    return complex(values[0]) if z_arr.ndim == 0 else values.reshape(z_arr.shape)


def H0_derivative(law: InitialLaw, z):
    """∂_z H(0, z); closed forms where available, central differences otherwise."""
    z_arr = np.asarray(z, dtype=complex)
    flat = z_arr.reshape(-1)
    if law.tag == LawTag.CLASSICAL:
        c = law.alpha * law.beta
        values = (4 * flat + 2 * c + 2 * c * flat ** 2) / (1 - flat ** 2) ** 2
    elif law.tag == LawTag.BOOLEAN:
        values = 6 * flat ** 2 / (1 - flat ** 3) ** 2
    elif law.tag == LawTag.MONOTONE:
        values = 8 * flat ** 3 / (1 - flat ** 4) ** 2
    elif law.tag == LawTag.FREE and not (law.a or law.b):
        values = np.zeros(flat.shape, complex)
    else:
        h = np.minimum(1e-6, (1.0 - np.abs(flat)) / 4.0)
        values = (H0_eval(law, flat + h) - H0_eval(law, flat - h)) / (2 * h)
    values = np.asarray(values, dtype=complex)
    return complex(values[0]) if z_arr.ndim == 0 else values.reshape(z_arr.shape)


SeriesKind = Literal["psi", "chi", "F", "H", "sigma", "generic"]


class TransformSeries(BaseModel):
    """Truncated power series c_0 + c_1 z + ... + c_N z^N."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coefficients: np.ndarray = Field(..., description="Complex coefficients, index = power")
    kind: SeriesKind = Field("generic", description="Which transform the series represents")

    @field_validator('coefficients', mode='before')
    @classmethod
    def _as_array(cls, value):
        array = np.array(value, dtype=complex).reshape(-1)
        if array.size == 0:
            raise ValueError("a series needs at least one coefficient")
        array.setflags(write=False)
        return array

    @model_validator(mode='after')
    def _check_origin(self) -> 'TransformSeries':
        if self.kind in ("psi", "chi") and abs(self.coefficients[0]) > 1e-14:
            raise ValueError(f"{self.kind} series must vanish at 0")
        return self

    @classmethod
    def polynomial(cls, coefficients: Sequence[complex], kind: SeriesKind = "generic",
                   order: Optional[int] = None) -> 'TransformSeries':
        """Zero-pad the given coefficients to the truncation order."""
        order = settings.SERIES_ORDER if order is None else order
        padded = np.zeros(order + 1, dtype=complex)
        given = np.asarray(coefficients, dtype=complex)[:order + 1]
        padded[:given.size] = given
        return cls(coefficients=padded, kind=kind)

    @property
    def order(self) -> int:
        return self.coefficients.size - 1

    def __getitem__(self, k: int) -> complex:
        return complex(self.coefficients[k]) if k <= self.order else 0j

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coefficients)

    def as_kind(self, kind: SeriesKind) -> 'TransformSeries':
        return TransformSeries(coefficients=self.coefficients, kind=kind)


def _mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a[:order + 1], b[:order + 1])[:order + 1]


def _reciprocal(a: np.ndarray) -> np.ndarray:
    if abs(a[0]) == 0:
        raise DomainError("series with zero constant term has no reciprocal")
    out = np.zeros_like(a)
    out[0] = 1 / a[0]
    for n in range(1, a.size):
        out[n] = -np.dot(a[1:n + 1], out[n - 1::-1]) / a[0]
    return out


def _sqrt(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = np.sqrt(a[0])
    if out[0] == 0:
        raise DomainError("series square root needs a nonzero constant term")
    for n in range(1, a.size):
        out[n] = (a[n] - np.dot(out[1:n], out[n - 1:0:-1])) / (2 * out[0])
    return out


def _exp(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    k = np.arange(a.size)
    for n in range(1, a.size):
        out[n] = np.dot(k[1:n + 1] * a[1:n + 1], out[n - 1::-1]) / n
    return out


def _compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    if abs(inner[0]) > 1e-14:
        raise DomainError("composition needs an inner series vanishing at 0")
    order = inner.size - 1
    out = np.zeros(order + 1, dtype=complex)
    for coefficient in outer[::-1]:
        out = _mul(out, inner, order)
        out[0] += coefficient
    return out


def _reverse(a: np.ndarray) -> np.ndarray:
    """Compositional inverse g with a(g(z)) = z."""
    if abs(a[0]) > 1e-14 or abs(a[1]) == 0:
        raise DomainError("series reversion needs a(0) = 0 and a'(0) != 0")
    order = a.size - 1
    g = np.zeros(order + 1, dtype=complex)
    g[1] = 1 / a[1]
    for n in range(2, order + 1):
        g[n] = -_compose(a, g)[n] / a[1]
    return g


def _check_order(order: int) -> int:
    if order < 1 or order > MAX_SERIES_ORDER:
        raise DomainError(f"truncation order must lie in [1, {MAX_SERIES_ORDER}], got {order}")
    return order


def psi_series(law: InitialLaw, order: Optional[int] = None) -> TransformSeries:
    """ψ(z) = Σ_{k≥1} m_k z^k of the initial law."""
    order = _check_order(settings.SERIES_ORDER if order is None else order)
    n = np.arange(order + 1)
    if law.tag == LawTag.FREE:
        inverse_sq_minus = (n + 1).astype(complex)
        inverse_sq_plus = ((-1.0) ** n * (n + 1)).astype(complex)
        radicand = np.zeros(order + 1, dtype=complex)
        radicand[0] = 1
        radicand[1:] = 4 * (law.b ** 2 * inverse_sq_minus - law.a ** 2 * inverse_sq_plus)[:order]
        H = _sqrt(radicand)
    elif law.tag == LawTag.CLASSICAL:
        numerator = np.zeros(order + 1, dtype=complex)
        numerator[:3] = [1, 2 * law.alpha * law.beta, 1][:order + 1]
        H = _mul(numerator, (n % 2 == 0).astype(complex), order)
    elif law.tag in (LawTag.BOOLEAN, LawTag.MONOTONE):
        period = 3 if law.tag == LawTag.BOOLEAN else 4
        H = np.where(n % period == 0, 2.0, 0.0).astype(complex)
        H[0] = 1
    elif law.tag == LawTag.CENTERED:
        H = np.array([1] + [2 * np.conj(circle_moment(law.nu0, k)) for k in range(1, order + 1)])
    else:
        if order > len(law.moments):
            raise DomainError(f"law provides {len(law.moments)} moments, {order} requested")
        H = np.array([1] + [2 * m for m in law.moments[:order]], dtype=complex)
    psi = H / 2
    psi[0] = 0
    return TransformSeries(coefficients=psi, kind="psi")


def initial_moments(law: InitialLaw, order: Optional[int] = None) -> np.ndarray:
    """Real moments m_0 = 1, m_1, ..., m_N of the initial law."""
    psi = psi_series(law, order)
    if np.any(np.abs(psi.coefficients.imag) > 1e-12):
        raise DomainError("initial law has complex moments")
    moments = psi.coefficients.real.copy()
    moments[0] = 1.0
    return moments


def chi_from_psi(psi: TransformSeries) -> TransformSeries:
    """χ = ψ/(1+ψ)."""
    one_plus = psi.coefficients.copy()
    one_plus[0] += 1
    return TransformSeries(coefficients=_mul(psi.coefficients, _reciprocal(one_plus), psi.order), kind="chi")


def psi_from_chi(chi: TransformSeries) -> TransformSeries:
    """ψ = χ/(1−χ)."""
    one_minus = -chi.coefficients
    one_minus[0] += 1
    return TransformSeries(coefficients=_mul(chi.coefficients, _reciprocal(one_minus), chi.order), kind="psi")


def f_from_chi(chi: TransformSeries) -> TransformSeries:
    """F = χ/z; the result is one order shorter."""
    if abs(chi.coefficients[0]) > 1e-14:
        raise DomainError("chi must vanish at 0")
    return TransformSeries(coefficients=chi.coefficients[1:], kind="F")


def chi_from_f(F: TransformSeries) -> TransformSeries:
    return TransformSeries(coefficients=np.concatenate(([0], F.coefficients)), kind="chi")


def boolean_convolve_F(F1: TransformSeries, F2: TransformSeries) -> TransformSeries:
    """F of the multiplicative boolean convolution: F1·F2."""
    order = min(F1.order, F2.order)
    return TransformSeries(coefficients=_mul(F1.coefficients, F2.coefficients, order), kind="F")


def monotone_convolve_chi(chi1: TransformSeries, chi2: TransformSeries) -> TransformSeries:
    """χ of the multiplicative monotone convolution: χ1∘χ2."""
    if abs(chi2.coefficients[0]) > 1e-14:
        raise DomainError("inner chi must vanish at 0")
    order = min(chi1.order, chi2.order)
    return TransformSeries(coefficients=_compose(chi1.coefficients[:order + 1], chi2.coefficients[:order + 1]),
                           kind="chi")


def sigma_lambda(t: float, z):
    """Σ_{λ_t}(z) = exp((t/2)(1+z)/(1−z))."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr == 1):
        raise PoleError("sigma transform of the free unitary Brownian motion has a pole at z = 1")
    values = np.exp(t / 2 * (1 + z_arr) / (1 - z_arr))
    return complex(values) if z_arr.ndim == 0 else values


def sigma_lambda_series(t: float, order: Optional[int] = None) -> TransformSeries:
    """Taylor coefficients of Σ_{λ_t} at 0."""
    order = _check_order(settings.SERIES_ORDER if order is None else order)
    exponent = np.full(order + 1, t, dtype=complex)
    exponent[0] = t / 2
    return TransformSeries(coefficients=_exp(exponent), kind="sigma")


def sigma_series(chi: TransformSeries) -> TransformSeries:
    """Σ(z) = χ^{−1}(z)/z for a law with nonzero mean; one order shorter than χ."""
    if abs(chi.coefficients[1]) < 1e-14:
        raise DomainError("the sigma transform needs a law with nonzero mean")
    inverse = _reverse(chi.coefficients)
    return TransformSeries(coefficients=inverse[1:], kind="sigma")
