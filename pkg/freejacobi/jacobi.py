"""
From ν_t on the circle to the free Jacobi law μ_t on [0, 1].

With R = 2P − I and S = 2Q − I, the change of variables x = cos²(θ/2)
carries the symmetric part of ν_t to μ_t:

    μ_t = (1 − min{τP, τQ})δ_0 + max{τP + τQ − 1, 0}δ_1
          + κ_t(2 arccos √x) / (2π √(x(1−x))) dx,

with κ_t the density of ν_t against dθ/2π. Uniform θ nodes map to
x nodes clustered toward 0 and 1, where the density has its 1/√ growth.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from freejacobi.exceptions import DomainError, InconsistentInput, PoleError
from freejacobi.initlaws import InitialLaw
from freejacobi.liberation import LiberationParams, nu_t, stationary_measure
from freejacobi.measures import (
    TWO_PI,
    Atom,
    CircleMeasure,
    HerglotzEvaluator,
    IntervalMeasure,
    _frozen,
)

logger = logging.getLogger(__name__)

ATOM_MATCH_TOL = 1e-9


class ProjectionPair(BaseModel):
    """Traces of the projections P and Q."""
    model_config = ConfigDict(frozen=True)

    trP: float = Field(..., gt=0.0, le=1.0, description="Normalized trace of P")
    trQ: float = Field(..., gt=0.0, le=1.0, description="Normalized trace of Q")

    @property
    def alpha(self) -> float:
        return 2.0 * self.trP - 1.0

    @property
    def beta(self) -> float:
        return 2.0 * self.trQ - 1.0

    @property
    def mass_at_zero(self) -> float:
        return 1.0 - min(self.trP, self.trQ)

    @property
    def mass_at_one(self) -> float:
        return max(self.trP + self.trQ - 1.0, 0.0)

    def params(self) -> LiberationParams:
        return LiberationParams(alpha=self.alpha, beta=self.beta)

    def mass_balance(self) -> dict:
        """The three parts of μ_t's mass; they sum to 1."""
        p = self.params()
        parts = {'zero': self.mass_at_zero, 'one': self.mass_at_one, 'density': (1.0 - p.a - p.b) / 2.0}
        parts['total'] = parts['zero'] + parts['one'] + parts['density']
        return parts


class HalfCircleMeasure(BaseModel):
    """
    A positive measure on [0, π]: atoms plus density samples against dθ/2π
    at interior nodes. The density is extended to 0 and π by its nearest
    sample.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    atoms: Tuple[Atom, ...] = Field(default=())
    theta: np.ndarray = Field(default_factory=lambda: _frozen([]), description="Increasing nodes in (0, π)")
    kappa: np.ndarray = Field(default_factory=lambda: _frozen([]))

    @field_validator('theta', 'kappa', mode='before')
    @classmethod
    def _as_array(cls, value):
        return _frozen(value)

    @model_validator(mode='after')
    def _check_nodes(self) -> 'HalfCircleMeasure':
        if self.theta.shape != self.kappa.shape:
            raise ValueError("theta and kappa must have the same length")
        if self.theta.size and (np.any(np.diff(self.theta) <= 0) or self.theta[0] <= 0 or self.theta[-1] >= math.pi):
            raise ValueError("density nodes must be increasing inside (0, pi)")
        if np.any(self.kappa < 0):
            raise ValueError("density values must be nonnegative")
        if any(a.angle < 0 for a in self.atoms):
            raise ValueError("atoms must lie in [0, pi]")
        return self

    def weights(self) -> np.ndarray:
        if self.theta.size == 0:
            return np.empty(0)
        padded = np.concatenate(([0.0], self.theta, [math.pi]))
        w = 0.5 * (padded[2:] - padded[:-2])
        w[0] += 0.5 * self.theta[0]
        w[-1] += 0.5 * (math.pi - self.theta[-1])
        return w

    def density_mass(self) -> float:
        return float(self.weights() @ self.kappa / TWO_PI) if self.theta.size else 0.0

    def mass(self) -> float:
        return sum(a.mass for a in self.atoms) + self.density_mass()

    def interior_mass(self) -> float:
        """Mass carried by (0, π)."""
        inner = sum(a.mass for a in self.atoms if 0.0 < a.angle < math.pi)
        return inner + self.density_mass()


def _check_atoms(nu: CircleMeasure, p: LiberationParams) -> None:
    expected = {math.pi: p.a, 0.0: p.b}
    for angle, mass in expected.items():
        if abs(nu.atom_at(angle) - mass) > ATOM_MATCH_TOL:
            raise InconsistentInput(f"nu has mass {nu.atom_at(angle):.12g} at angle {angle:.6g}, "
                                    f"the projection pair requires {mass:.12g}",
                                    diagnostics={'angle': angle, 'found': nu.atom_at(angle), 'expected': mass})
    stray = [a for a in nu.atoms if min(abs(a.angle), abs(abs(a.angle) - math.pi)) > 1e-12]
    if stray:
        raise InconsistentInput(f"nu has {len(stray)} atoms away from 0 and pi")


def szego_to_interval(nu: CircleMeasure, pp: ProjectionPair) -> IntervalMeasure:
    """μ on [0, 1] from ν on the circle (nodes of ν inside (0, π) become x nodes)."""
    _check_atoms(nu, pp.params())
    inside = (nu.theta > 0) & (nu.theta < math.pi)
    theta = nu.theta[inside][::-1]
    kappa = nu.kappa[inside][::-1]
    x = np.cos(theta / 2.0) ** 2
    density = kappa / (math.pi * np.sin(theta))
    order = np.flatnonzero(np.diff(x, prepend=-1.0) > 0)
    mu = IntervalMeasure(mass_at_zero=pp.mass_at_zero, mass_at_one=pp.mass_at_one,
                         x=x[order], density=density[order])
    logger.debug(f"Szego transform: {x.size} nodes, density mass {mu.density_mass():.12g}")
    return mu


def interval_to_halfcircle(mu: IntervalMeasure) -> HalfCircleMeasure:
    """Image of μ under x ↦ θ = 2 arccos √x, with density against dθ/2π."""
    theta = 2.0 * np.arccos(np.sqrt(mu.x))
    atoms = tuple(Atom(angle=angle, mass=mass) for angle, mass in ((0.0, mu.mass_at_one), (math.pi, mu.mass_at_zero))
                  if mass > 0)
    return HalfCircleMeasure(atoms=atoms, theta=theta[::-1], kappa=(mu.density * math.pi * np.sin(theta))[::-1])


def symmetrize_halfcircle(mu_tilde: HalfCircleMeasure) -> CircleMeasure:
    """½(μ̃ + mirror image of μ̃ restricted to (0, π))."""
    atoms = []
    for atom in mu_tilde.atoms:
        if 0.0 < atom.angle < math.pi:
            atoms += [Atom(angle=atom.angle, mass=atom.mass / 2), Atom(angle=-atom.angle, mass=atom.mass / 2)]
        else:
            atoms.append(Atom(angle=atom.angle, mass=atom.mass / 2))
    theta = np.concatenate((-mu_tilde.theta[::-1], mu_tilde.theta))
    kappa = np.concatenate((mu_tilde.kappa[::-1], mu_tilde.kappa)) / 2.0
    expected = 0.5 * (mu_tilde.mass() + mu_tilde.interior_mass())
    return CircleMeasure(atoms=tuple(atoms), theta=theta, kappa=kappa, total_mass=expected)


def nu_from_mu(mu: IntervalMeasure, pp: ProjectionPair) -> CircleMeasure:
    """ν = 2μ̂ with the endpoint atoms corrected to a at π and b at 0."""
    p = pp.params()
    hat = symmetrize_halfcircle(interval_to_halfcircle(mu))
    atoms = tuple(Atom(angle=angle, mass=mass) for angle, mass in ((math.pi, p.a), (0.0, p.b)) if mass > 0)
    interior = [Atom(angle=a.angle, mass=2 * a.mass) for a in hat.atoms
                if min(abs(a.angle), abs(abs(a.angle) - math.pi)) > 1e-12]
    return CircleMeasure(atoms=atoms + tuple(interior), theta=hat.theta, kappa=2.0 * hat.kappa)


def interval_moment(mu: IntervalMeasure, k: int) -> float:
    """∫ x^k dμ."""
    return mu.moment(k)


def interval_herglotz(mu: IntervalMeasure) -> HerglotzEvaluator:
    """
    H_μ(w) = ∫ (1+wx)/(1−wx) dμ(x). The function is analytic off [1, ∞),
    so callers outside the disc go through `.func`.
    """
    weights = mu.weights() * mu.density

    def evaluate(w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        if np.any((np.abs(w.imag) < 1e-15) & (w.real >= 1.0)):
            raise DomainError("H_mu is evaluated off the cut [1, inf)")
        value = mu.mass_at_zero + mu.mass_at_one * (1 + w) / (1 - w)
        if mu.x.size:
            wx = w[..., None] * mu.x
            value = value + ((1 + wx) / (1 - wx)) @ weights
        return value

    return HerglotzEvaluator(func=evaluate, label="H_mu")


def herglotz_nu_from_mu(Hmu: HerglotzEvaluator, pp: ProjectionPair, z):
    """H_ν(z) = ((1−z)/(1+z))·H_μ(4z/(1+z)²) − 2(α+β)z/(1−z²)."""
    z_arr = np.asarray(z, dtype=complex)
    if np.any(np.abs(z_arr) >= 1):
        raise DomainError("z must lie in the open disc")
    if np.any(np.abs(z_arr ** 2 - 1) == 0):
        raise PoleError("the relationship has poles at z = 1 and z = -1")
    flat = z_arr.reshape(-1)
    w = 4 * flat / (1 + flat) ** 2
    values = (1 - flat) / (1 + flat) * np.asarray(Hmu.func(w)) - 2 * (pp.alpha + pp.beta) * flat / (1 - flat ** 2)
    return complex(values[0]) if z_arr.ndim == 0 else values.reshape(z_arr.shape)


def jacobi_measure(t: float, law: InitialLaw, pp: ProjectionPair, n: Optional[int] = None) -> IntervalMeasure:
    """μ_t for the given initial law."""
    nu = nu_t(t, law, pp.params(), n=n)
    mu = szego_to_interval(nu, pp)
    logger.info(f"Free Jacobi law at t={t}: atoms {mu.mass_at_zero:.6g} at 0, {mu.mass_at_one:.6g} at 1")
    return mu


def limit_interval_measure(pp: ProjectionPair, n: Optional[int] = None) -> IntervalMeasure:
    """μ_∞, the law of P and a free copy of Q."""
    return szego_to_interval(stationary_measure(pp.params(), n=n), pp)
