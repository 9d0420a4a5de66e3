"""
Measures on the unit circle and on [0, 1], and their Herglotz transforms.

Circle densities are stored against normalized arclength dθ/2π and are
piecewise linear between nodes; integrals use the periodic trapezoid rule,
which is exact for that interpretation.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from freejacobi import settings
from freejacobi.exceptions import DomainError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# Radius used for boundary values, and the radii of the atom extrapolation
BOUNDARY_RADIUS = 1.0 - 1e-7
RICHARDSON_RADII = (0.9, 0.99, 0.999, 0.9999)
ATOM_SPREAD_LIMIT = 1e-4

# Points closer to the circle than this many grid gaps get a locally refined quadrature
LOCAL_RANGE = 64
LOCAL_NODES = 1000

ATOM_ANGLE_TOL = 1e-12
EXACT_MASS_TOL = 1e-8

ComplexLike = Union[complex, float, np.ndarray]


def wrap_angle(theta):
    """Map angles into (−π, π]."""
    values = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), TWO_PI)
    return float(values) if values.ndim == 0 else values


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


def periodic_weights(theta: np.ndarray) -> np.ndarray:
    """Trapezoid weights (in radians) for sorted nodes on the circle."""
    n = theta.size
    if n == 0:
        return np.empty(0)
    if n == 1:
        return np.array([TWO_PI])
    gaps = np.diff(np.append(theta, theta[0] + TWO_PI))
    return 0.5 * (gaps + np.roll(gaps, 1))


def merge_nodes(theta: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Sort angles on the circle and drop near-duplicates, including across ±π."""
    nodes = np.sort(np.atleast_1d(wrap_angle(np.fromiter(theta, dtype=float))))
    if nodes.size == 0:
        return nodes
    keep = np.concatenate(([True], np.diff(nodes) > tol))
    nodes = nodes[keep]
    if nodes.size > 1 and nodes[0] + TWO_PI - nodes[-1] <= tol:
        nodes = nodes[1:]
    return nodes


def circle_grid(n: Optional[int] = None, edges: Sequence[float] = (),
                refine: Optional[int] = None) -> np.ndarray:
    """
    Density grid: n uniform angles in (−π, π] plus every edge and a zone of
    `refine` grid steps on each side of it, graded quadratically toward the
    edge. The graded spacing meets the uniform one at the zone boundary and
    the edge cell gets about 2·√refine nodes, so root-type edges do not
    spoil the trapezoid rule.
    """
    n = n or settings.GRID_SIZE
    refine = refine or settings.EDGE_REFINEMENT
    if n < 4:
        raise DomainError(f"grid size must be at least 4, got {n}")
    step = TWO_PI / n
    parts = [-np.pi + step * (np.arange(n) + 1)]
    # 2·refine nodes per side: spacing 2W/R equals the grid step at the zone boundary
    ramp = np.arange(-2 * refine, 2 * refine + 1) / (2 * refine)
    offsets = refine * step * np.sign(ramp) * ramp ** 2
    for edge in edges:
        parts.append(wrap_angle(edge + offsets))
    return merge_nodes(np.concatenate(parts), tol=step * 1e-9)


class Atom(BaseModel):
    """A point mass on the unit circle."""
    model_config = ConfigDict(frozen=True)

    angle: float = Field(..., description="Position in (−π, π]")
    mass: float = Field(..., ge=0.0, le=1.0 + 1e-12, description="Point mass")

    @field_validator('angle')
    @classmethod
    def _wrap(cls, value: float) -> float:
        return wrap_angle(value)


class CircleMeasure(BaseModel):
    """Atoms plus a sampled density with respect to dθ/2π."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    atoms: Tuple[Atom, ...] = Field(default=(), description="Point masses, distinct angles")
    theta: np.ndarray = Field(default_factory=lambda: _frozen([]), description="Sorted density nodes in (−π, π]")
    kappa: np.ndarray = Field(default_factory=lambda: _frozen([]), description="Density values at the nodes")
    total_mass: float = Field(1.0, description="Expected total mass")

    @field_validator('theta', 'kappa', mode='before')
    @classmethod
    def _as_array(cls, value):
        return _frozen(value)

    @field_validator('atoms', mode='before')
    @classmethod
    def _as_atoms(cls, value):
        return tuple(a if isinstance(a, Atom) else Atom(**a) if isinstance(a, dict) else Atom(angle=a[0], mass=a[1])
                     for a in value)

    @model_validator(mode='after')
    def _check_invariants(self) -> 'CircleMeasure':
        if self.theta.shape != self.kappa.shape:
            raise ValueError("theta and kappa must have the same length")
        if self.theta.size:
            if np.any(np.diff(self.theta) <= 0):
                raise ValueError("density nodes must be strictly increasing")
            if self.theta[0] <= -np.pi or self.theta[-1] > np.pi:
                raise ValueError("density nodes must lie in (-pi, pi]")
            if np.any(~np.isfinite(self.kappa)) or np.any(self.kappa < 0):
                raise ValueError("density values must be finite and nonnegative")
        angles = np.sort([a.angle for a in self.atoms])
        if angles.size > 1 and np.any(np.diff(angles) <= ATOM_ANGLE_TOL):
            raise ValueError("two atoms share an angle")
        tol = EXACT_MASS_TOL if self.theta.size == 0 else max(settings.MASS_TOLERANCE, EXACT_MASS_TOL)
        defect = abs(self.mass() - self.total_mass)
        if defect > tol:
            raise ValueError(f"total mass {self.mass():.12g} differs from {self.total_mass} by {defect:.3e}")
        return self

    def atom_total(self) -> float:
        return float(sum(a.mass for a in self.atoms))

    def density_mass(self) -> float:
        """Trapezoidal integral of κ against dθ/2π."""
        if self.theta.size == 0:
            return 0.0
        return float(periodic_weights(self.theta) @ self.kappa / TWO_PI)

    def mass(self) -> float:
        return self.atom_total() + self.density_mass()

    def atom_at(self, angle: float, tol: float = 1e-9) -> float:
        """Mass of the atom at the given angle, 0 if none."""
        target = wrap_angle(angle)
        for atom in self.atoms:
            if abs(wrap_angle(atom.angle - target)) <= tol:
                return atom.mass
        return 0.0

    def density_at(self, angles) -> np.ndarray:
        """Piecewise-linear density at arbitrary angles."""
        angles = np.asarray(angles, dtype=float)
        if self.theta.size == 0:
            return np.zeros(angles.shape)
        return np.interp(angles, self.theta, self.kappa, period=TWO_PI)

    def grid_gap(self) -> float:
        if self.theta.size < 2:
            return TWO_PI
        return float(np.max(np.diff(np.append(self.theta, self.theta[0] + TWO_PI))))

    def reflection_defect(self) -> float:
        """sup |κ(θ) − κ(−θ)| over the nodes."""
        if self.theta.size == 0:
            return 0.0
        return float(np.max(np.abs(self.kappa - self.density_at(-self.theta))))


def dirac(angle: float) -> CircleMeasure:
    return CircleMeasure(atoms=(Atom(angle=angle, mass=1.0),))


def atomic(pairs: Iterable[Tuple[float, float]]) -> CircleMeasure:
    """Purely atomic measure from (angle, mass) pairs; zero masses are dropped."""
    return CircleMeasure(atoms=tuple(Atom(angle=a, mass=m) for a, m in pairs if m > 0))


def uniform(n: Optional[int] = None) -> CircleMeasure:
    theta = circle_grid(n)
    return CircleMeasure(theta=theta, kappa=np.ones_like(theta))


def psi_from_herglotz(H: ComplexLike) -> ComplexLike:
    return (H - 1) / 2


def herglotz_from_psi(psi: ComplexLike) -> ComplexLike:
    return 1 + 2 * psi


def _check_disc(z: np.ndarray) -> None:
    if np.any(~np.isfinite(z)) or np.any(np.abs(z) >= 1.0):
        raise DomainError("Herglotz transforms are evaluated on the open unit disc only",
                          diagnostics={'max_modulus': float(np.max(np.abs(z))) if z.size else 0.0})


def _local_herglotz(theta: np.ndarray, kappa: np.ndarray, z: complex) -> complex:
    """Kernel integral against the piecewise-linear density, refined geometrically around arg z."""
    depth = 1.0 - abs(z)
    offsets = depth * np.geomspace(1e-3, np.pi / depth, LOCAL_NODES)
    local = np.angle(z) + np.concatenate((-offsets[::-1], [0.0], offsets))
    nodes = merge_nodes(np.concatenate((theta, wrap_angle(local))), tol=depth * 1e-6)
    values = np.interp(nodes, theta, kappa, period=TWO_PI)
    zeta = np.exp(1j * nodes)
    return complex(np.sum((zeta + z) / (zeta - z) * periodic_weights(nodes) * values) / TWO_PI)


def _density_herglotz(theta: np.ndarray, kappa: np.ndarray, z: np.ndarray) -> np.ndarray:
    weights = periodic_weights(theta) * kappa / TWO_PI
    zeta = np.exp(1j * theta)
    gap = float(np.max(np.diff(np.append(theta, theta[0] + TWO_PI)))) if theta.size > 1 else TWO_PI
    near = (1.0 - np.abs(z)) < LOCAL_RANGE * gap
    out = np.empty(z.shape, dtype=complex)
    far = np.flatnonzero(~near)
    for chunk in np.array_split(far, max(1, far.size // 256)):
        if chunk.size:
            zz = z[chunk][:, None]
            out[chunk] = ((zeta + zz) / (zeta - zz)) @ weights
    for index in np.flatnonzero(near):
        out[index] = _local_herglotz(theta, kappa, complex(z[index]))
    return out


def herglotz_eval(m: CircleMeasure, z: ComplexLike) -> ComplexLike:
    """H_m(z) = ∫ (ζ+z)/(ζ−z) dm(ζ) on the open disc."""
    z_arr = np.asarray(z, dtype=complex)
    flat = z_arr.reshape(-1)
    _check_disc(flat)
    out = np.zeros(flat.shape, dtype=complex)
    for atom in m.atoms:
        zeta = np.exp(1j * atom.angle)
        out += atom.mass * (zeta + flat) / (zeta - flat)
    if m.theta.size:
        out += _density_herglotz(m.theta, m.kappa, flat)
    if z_arr.ndim == 0:
        return complex(out[0])
    return out.reshape(z_arr.shape)


class HerglotzEvaluator(BaseModel):
    """An analytic function on the disc with nonnegative real part."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    func: Callable[[np.ndarray], np.ndarray] = Field(..., description="Vectorized evaluation on the open disc")
    label: str = Field("H", description="Name used in log messages")

    def __call__(self, z: ComplexLike) -> ComplexLike:
        z_arr = np.asarray(z, dtype=complex)
        _check_disc(z_arr.reshape(-1))
        values = np.asarray(self.func(z_arr.reshape(-1)), dtype=complex).reshape(z_arr.shape)
        return complex(values) if values.ndim == 0 else values

    @classmethod
    def of_measure(cls, m: CircleMeasure, label: str = "H") -> 'HerglotzEvaluator':
        return cls(func=lambda z: herglotz_eval(m, z), label=label)

    def min_real_part(self, size: int = 64) -> float:
        """Smallest Re H over a size × size polar grid of the disc."""
        radii = np.arange(1, size + 1) / (size + 1)
        angles = wrap_angle(TWO_PI * (np.arange(size) + 0.5) / size)
        grid = radii[:, None] * np.exp(1j * angles)[None, :]
        return float(np.min(self(grid).real))


class AtomEstimate(BaseModel):
    """Extrapolated radial limit at one angle."""
    model_config = ConfigDict(frozen=True)

    angle: float
    mass: float = Field(..., ge=0.0)
    spread: float = Field(..., description="Disagreement between the full and the reduced extrapolation")
    flagged: bool = Field(False, description="True when the spread exceeds the convergence limit")


def _extrapolate_to_zero(x: np.ndarray, y: np.ndarray) -> float:
    # Neville's scheme evaluated at x = 0
    p = [float(v) for v in y]
    n = len(p)
    for level in range(1, n):
        for i in range(n - level):
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i])
    return p[0]


def estimate_atom(H: Callable[[np.ndarray], np.ndarray], angle: float) -> AtomEstimate:
    """½ · lim (1−r) H(r e^{iθ}) by Richardson extrapolation over r → 1."""
    eps = 1.0 - np.array(RICHARDSON_RADII)
    samples = eps * np.real(np.asarray(H((1.0 - eps) * np.exp(1j * angle)), dtype=complex))
    full = _extrapolate_to_zero(eps, samples)
    reduced = _extrapolate_to_zero(eps[1:], samples[1:])
    spread = 0.5 * abs(full - reduced)
    flagged = spread > ATOM_SPREAD_LIMIT or not np.isfinite(full)
    if flagged:
        logger.warning(f"Atom extrapolation at angle {angle:.6g} did not settle (spread {spread:.3e})")
    return AtomEstimate(angle=wrap_angle(angle), mass=max(0.5 * full, 0.0) if np.isfinite(full) else 0.0,
                        spread=spread, flagged=bool(flagged))


def atom_mass(H: Callable[[np.ndarray], np.ndarray], angle: float) -> float:
    return estimate_atom(H, angle).mass


def density_from_boundary(H: Callable[[np.ndarray], np.ndarray], grid: np.ndarray) -> np.ndarray:
    """Re H at radius 1 − 1e−7 on the given angles, clamped at zero."""
    grid = np.asarray(grid, dtype=float)
    values = np.real(np.asarray(H(BOUNDARY_RADIUS * np.exp(1j * grid)), dtype=complex))
    if np.any(values < -1e-6):
        logger.warning(f"Boundary density dipped to {values.min():.3e} before clamping")
    return np.maximum(values, 0.0)


def circle_moment(m: CircleMeasure, k: int) -> complex:
    """∫ e^{ikθ} dm(θ)."""
    if k < 0:
        raise DomainError(f"moment order must be nonnegative, got {k}")
    value = sum(a.mass * np.exp(1j * k * a.angle) for a in m.atoms)
    if m.theta.size:
        value += np.sum(periodic_weights(m.theta) * m.kappa * np.exp(1j * k * m.theta)) / TWO_PI
    return complex(value)


def push_forward_power(m: CircleMeasure, p: int) -> CircleMeasure:
    """Image of m under z ↦ z^p."""
    if p < 1:
        raise DomainError(f"power must be a positive integer, got {p}")
    if p == 1:
        return m
    masses = {}
    for atom in m.atoms:
        angle = wrap_angle(p * atom.angle)
        key = next((k for k in masses if abs(wrap_angle(k - angle)) <= ATOM_ANGLE_TOL * p), angle)
        masses[key] = masses.get(key, 0.0) + atom.mass
    theta = np.empty(0)
    kappa = np.empty(0)
    if m.theta.size:
        theta = merge_nodes(p * m.theta, tol=1e-9 * m.grid_gap())
        kappa = sum(m.density_at((theta + TWO_PI * j) / p) for j in range(p)) / p
    return CircleMeasure(atoms=tuple(Atom(angle=a, mass=v) for a, v in sorted(masses.items())),
                         theta=theta, kappa=kappa, total_mass=m.total_mass)


class IntervalMeasure(BaseModel):
    """Atoms at 0 and 1 plus a sampled density on (0, 1) with respect to dx."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mass_at_zero: float = Field(..., ge=0.0, le=1.0 + 1e-12)
    mass_at_one: float = Field(..., ge=0.0, le=1.0 + 1e-12)
    x: np.ndarray = Field(default_factory=lambda: _frozen([]), description="Sorted nodes in the open interval")
    density: np.ndarray = Field(default_factory=lambda: _frozen([]), description="Density values at the nodes")

    @field_validator('x', 'density', mode='before')
    @classmethod
    def _as_array(cls, value):
        return _frozen(value)

    @model_validator(mode='after')
    def _check_invariants(self) -> 'IntervalMeasure':
        if self.x.shape != self.density.shape:
            raise ValueError("x and density must have the same length")
        if self.x.size:
            if np.any(np.diff(self.x) <= 0) or self.x[0] <= 0 or self.x[-1] >= 1:
                raise ValueError("density nodes must be increasing inside (0, 1)")
            if np.any(~np.isfinite(self.density)) or np.any(self.density < 0):
                raise ValueError("density values must be finite and nonnegative")
        tol = EXACT_MASS_TOL if self.x.size == 0 else max(settings.MASS_TOLERANCE, EXACT_MASS_TOL)
        defect = abs(self.mass() - 1.0)
        if defect > tol:
            raise ValueError(f"total mass {self.mass():.12g} differs from 1 by {defect:.3e}")
        return self

    def weights(self) -> np.ndarray:
        return self.node_weights(self.x)

    @staticmethod
    def node_weights(x: np.ndarray) -> np.ndarray:
        """
        Quadrature weights for ∫ f dx on sorted nodes in (0, 1).

        The rule is the trapezoid in u = arccos(1 − 2x) applied to f·sin(u)/2,
        extended to u = 0 and u = π by the nearest value, so densities with
        1/√(x(1−x)) endpoint behaviour integrate to the same accuracy as
        smooth ones.
        """
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return np.empty(0)
        u = np.arccos(1.0 - 2.0 * x)
        padded = np.concatenate(([0.0], u, [np.pi]))
        w = 0.5 * (padded[2:] - padded[:-2])
        w[0] += 0.5 * u[0]
        w[-1] += 0.5 * (np.pi - u[-1])
        return w * np.sin(u) / 2.0

    def density_mass(self) -> float:
        return float(self.weights() @ self.density) if self.x.size else 0.0

    def mass(self) -> float:
        return self.mass_at_zero + self.mass_at_one + self.density_mass()

    def moment(self, k: int) -> float:
        """∫ x^k dμ."""
        if k < 0:
            raise DomainError(f"moment order must be nonnegative, got {k}")
        value = self.mass_at_one + (self.mass_at_zero if k == 0 else 0.0)
        if self.x.size:
            value += float(self.weights() @ (self.density * self.x ** k))
        return value

    def cdf(self, points) -> np.ndarray:
        """μ([0, x]) at the given points."""
        points = np.asarray(points, dtype=float)
        cumulative = np.cumsum(self.weights() * self.density) if self.x.size else np.empty(0)
        inside = np.interp(points, self.x, cumulative, left=0.0) if self.x.size else np.zeros(points.shape)
        values = self.mass_at_zero * (points >= 0) + inside + self.mass_at_one * (points >= 1)
        return np.where(points < 0, 0.0, values)


def _fmt(value: float) -> str:
    return format(float(value), '.17g')


def write_circle_measure(m: CircleMeasure, csv_path: Path, json_path: Path,
                         metadata: Optional[dict] = None) -> None:
    """CSV `theta,kappa` plus atoms JSON sidecar."""
    with open(csv_path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['theta', 'kappa'])
        writer.writerows([_fmt(a), _fmt(k)] for a, k in zip(m.theta, m.kappa))
    payload = {'atoms': [{'angle': a.angle, 'mass': a.mass} for a in m.atoms]}
    if metadata:
        payload.update(metadata)
    write_json(json_path, payload)


def read_circle_measure(csv_path: Path, json_path: Path) -> CircleMeasure:
    with open(csv_path, newline='') as handle:
        rows = list(csv.DictReader(handle))
    with open(json_path) as handle:
        atoms = json.load(handle).get('atoms', [])
    return CircleMeasure(atoms=tuple(Atom(**a) for a in atoms),
                         theta=[float(r['theta']) for r in rows],
                         kappa=[float(r['kappa']) for r in rows])


def write_interval_measure(mu: IntervalMeasure, csv_path: Path, json_path: Path,
                           metadata: Optional[dict] = None) -> None:
    """CSV `x,density` plus atoms JSON sidecar keyed by position."""
    with open(csv_path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['x', 'density'])
        writer.writerows([_fmt(x), _fmt(f)] for x, f in zip(mu.x, mu.density))
    payload = {'atoms': {'0': mu.mass_at_zero, '1': mu.mass_at_one}}
    if metadata:
        payload.update(metadata)
    write_json(json_path, payload)


def write_json(path: Path, payload: dict) -> None:
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    with open(path, 'w') as handle:
        json.dump(_plain(payload), handle, indent=2, sort_keys=True)
        handle.write('\n')


def write_rows(path: Path, header: List[str], rows: Iterable[Sequence]) -> None:
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _plain(value):
    # numpy scalars and tuples are not JSON-native
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value
