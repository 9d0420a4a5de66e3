"""
Monte Carlo model of the liberation at finite size d.

U_t is Brownian motion on U(d), built from geodesic increments
exp(i√δ·G) with GUE G normalized by (1/d)E tr G² = 1, so that
(1/d)E tr U_t → e^{−t/2}. Replicas draw from independent streams
spawned from one seed and are reduced in order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg
from scipy.stats import unitary_group

from freejacobi import settings
from freejacobi.measures import TWO_PI, Atom, CircleMeasure, IntervalMeasure

logger = logging.getLogger(__name__)

REUNITARIZE_EVERY = 64


class Structure(str, Enum):
    FREE_PAIR = "free_pair"
    COMMUTING_CLASSICAL = "commuting_classical"


class McConfig(BaseModel):
    """One Monte Carlo experiment. trP/trQ, when given, fix alpha/beta."""
    model_config = ConfigDict(frozen=True)

    d: int = Field(..., ge=2, description="Matrix dimension")
    t: float = Field(..., ge=0.0, description="Time of the unitary Brownian motion")
    steps: Optional[int] = Field(None, ge=1, description="Increments from 0 to t; at least 100·t")
    replicas: int = Field(20, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    alpha: float = Field(0.0, ge=-1.0, le=1.0)
    beta: float = Field(0.0, ge=-1.0, le=1.0)
    trP: Optional[float] = Field(None, gt=0.0, le=1.0)
    trQ: Optional[float] = Field(None, gt=0.0, le=1.0)
    structure: Structure = Structure.FREE_PAIR
    bins: int = Field(32, ge=4, description="Histogram bins, even so that 0 and pi are bin centers")

    @model_validator(mode='before')
    @classmethod
    def _fill(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            if data.get('trP') is not None:
                data['alpha'] = 2.0 * data['trP'] - 1.0
            if data.get('trQ') is not None:
                data['beta'] = 2.0 * data['trQ'] - 1.0
            if data.get('steps') is None and 't' in data:
                data['steps'] = max(1, math.ceil(100 * float(data['t'])))
        return data

    @model_validator(mode='after')
    def _check_steps(self) -> 'McConfig':
        if self.steps < 100 * self.t:
            raise ValueError(f"steps must be at least 100*t = {100 * self.t:g}")
        if self.bins % 2:
            raise ValueError("the number of histogram bins must be even")
        return self


class McSample(BaseModel):
    """Pooled eigenvalue data of the replicas that succeeded."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    d: int
    used: int = Field(..., ge=0)
    failed: int = Field(0, ge=0)


def gue_increment(d: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian G with (1/d)E tr G² = 1."""
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (A + A.conj().T) / (2.0 * math.sqrt(d))


def sample_unitary_bm(d: int, t: float, steps: int, rng: np.random.Generator) -> np.ndarray:
    U = np.eye(d, dtype=complex)
    if t == 0:
        return U
    root = math.sqrt(t / steps)
    for k in range(steps):
        eigenvalues, vectors = linalg.eigh(gue_increment(d, rng))
        U = (vectors * np.exp(1j * root * eigenvalues)) @ (vectors.conj().T @ U)
        if (k + 1) % REUNITARIZE_EVERY == 0:
            U = linalg.polar(U)[0]
    return linalg.polar(U)[0]


def _signs(d: int, trace: float) -> np.ndarray:
    plus = int(round(d * (1 + trace) / 2))
    return np.concatenate((np.ones(plus), -np.ones(d - plus)))


def make_symmetry_pair(d: int, alpha: float, beta: float, structure: Structure,
                       rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetries R, S with normalized traces near α and β."""
    if structure == Structure.COMMUTING_CLASSICAL:
        r = np.where(rng.random(d) < (1 + alpha) / 2, 1.0, -1.0)
        s = np.where(rng.random(d) < (1 + beta) / 2, 1.0, -1.0)
        return np.diag(r).astype(complex), np.diag(s).astype(complex)
    R = np.diag(_signs(d, alpha)).astype(complex)
    W = unitary_group.rvs(d, random_state=rng)
    S = (W * _signs(d, beta)) @ W.conj().T
    return R, (S + S.conj().T) / 2


def _replica_streams(cfg: McConfig) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(cfg.seed).spawn(cfg.replicas)


def _run(cfg: McConfig, job) -> McSample:
    def guarded(stream):
        rng = np.random.default_rng(stream)
        try:
            return job(rng)
        except np.linalg.LinAlgError as e:
            logger.warning(f"Replica skipped after eigensolver failure: {e}")
            return None

    workers = max(1, min(settings.THREADS, cfg.replicas))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(guarded, _replica_streams(cfg)))
    kept = [r for r in results if r is not None]
    failed = len(results) - len(kept)
    if failed:
        logger.warning(f"{failed} of {cfg.replicas} replicas failed")
    values = np.concatenate(kept) if kept else np.empty(0)
    return McSample(values=values, d=cfg.d, used=len(kept), failed=failed)


def simulate_nu(cfg: McConfig) -> McSample:
    """Pooled eigenvalue angles of R U_t S U_t*."""
    def job(rng):
        R, S = make_symmetry_pair(cfg.d, cfg.alpha, cfg.beta, cfg.structure, rng)
        U = sample_unitary_bm(cfg.d, cfg.t, cfg.steps, rng)
        return np.angle(np.linalg.eigvals(R @ U @ S @ U.conj().T))

    sample = _run(cfg, job)
    logger.info(f"Simulated {sample.used} replicas of R U S U* at d={cfg.d}, t={cfg.t}")
    return sample


def simulate_jacobi(cfg: McConfig) -> McSample:
    """Pooled eigenvalues of P U_t Q U_t* P on range(P), plus one zero per dimension of ker P."""
    def job(rng):
        R, S = make_symmetry_pair(cfg.d, cfg.alpha, cfg.beta, cfg.structure, rng)
        U = sample_unitary_bm(cfg.d, cfg.t, cfg.steps, rng)
        support = np.flatnonzero(np.real(np.diag(R)) > 0)
        Q = (np.eye(cfg.d) + U @ S @ U.conj().T) / 2
        compressed = Q[np.ix_(support, support)]
        eigenvalues = np.clip(np.linalg.eigvalsh((compressed + compressed.conj().T) / 2), 0.0, 1.0)
        return np.concatenate((eigenvalues, np.zeros(cfg.d - support.size)))

    sample = _run(cfg, job)
    logger.info(f"Simulated {sample.used} replicas of P U Q U* P at d={cfg.d}, t={cfg.t}")
    return sample


def unitary_trace_moments(cfg: McConfig, K: int = 4) -> np.ndarray:
    """Replica mean of (1/d) tr U_t^k for k = 1..K."""
    def job(rng):
        U = sample_unitary_bm(cfg.d, cfg.t, cfg.steps, rng)
        power, out = np.eye(cfg.d, dtype=complex), []
        for _ in range(K):
            power = power @ U
            out.append(np.trace(power) / cfg.d)
        return np.array(out)

    sample = _run(cfg, job)
    if sample.used == 0:
        return np.full(K, np.nan + 0j)
    return sample.values.reshape(sample.used, K).mean(axis=0)


def circle_histogram(sample: McSample, bins: int) -> Tuple[CircleMeasure, List[tuple]]:
    """
    Histogram with bins centered on multiples of 2π/bins, so 0 and π are
    bin centers. Angles within 2π/d of 0 or π are reported as atoms, less
    the density the window would carry.
    """
    total = sample.values.size
    if total == 0:
        raise ValueError("no eigenvalues to bin")
    width = TWO_PI / bins
    window = TWO_PI / sample.d
    if 2 * window >= width:
        raise ValueError(f"dimension {sample.d} is too small for {bins} bins")
    angles = sample.values
    near_zero = np.abs(angles) <= window
    near_pi = np.abs(np.abs(angles) - math.pi) <= window
    rest = angles[~(near_zero | near_pi)]
    index = np.mod(np.rint((rest + math.pi) / width).astype(int), bins)
    counts = np.bincount(index, minlength=bins)
    centers = -math.pi + width * np.arange(bins)
    centers[0] = math.pi
    zero_bin, pi_bin = bins // 2, 0
    effective = np.full(bins, width)
    raw = {zero_bin: near_zero.sum() / total, pi_bin: near_pi.sum() / total}
    masses = counts / total
    kappa = masses * TWO_PI / effective
    atoms = {}
    for bin_index, atom_raw in raw.items():
        effective[bin_index] = width - 2 * window
        kappa[bin_index] = masses[bin_index] * TWO_PI / effective[bin_index]
        atom = atom_raw - kappa[bin_index] * 2 * window / TWO_PI
        if atom < 0:
            kappa[bin_index] = (masses[bin_index] + atom_raw) * TWO_PI / width
            atom = 0.0
        atoms[float(centers[bin_index])] = float(atom)
    order = np.argsort(centers)
    measure = CircleMeasure(atoms=tuple(Atom(angle=a, mass=m) for a, m in atoms.items() if m > 0),
                            theta=centers[order], kappa=kappa[order])
    rows = [(float(centers[j]), int(counts[j]), float(kappa[j] * width / TWO_PI)) for j in order]
    return measure, rows


def interval_histogram(sample: McSample, bins: int) -> Tuple[IntervalMeasure, List[tuple]]:
    """Histogram in u = arccos(1 − 2x); values within 2/d of 0 or 1 are atoms."""
    total = sample.values.size
    if total == 0:
        raise ValueError("no eigenvalues to bin")
    window = 2.0 / sample.d
    x = sample.values
    at_zero = x <= window
    at_one = x >= 1 - window
    rest = x[~(at_zero | at_one)]
    low, high = math.acos(1 - 2 * window), math.acos(-1 + 2 * window)
    edges = np.linspace(low, high, bins + 1)
    counts, _ = np.histogram(np.arccos(1 - 2 * rest), bins=edges)
    centers = (1 - np.cos(0.5 * (edges[1:] + edges[:-1]))) / 2
    masses = counts / total
    density = masses / IntervalMeasure.node_weights(centers)
    measure = IntervalMeasure(mass_at_zero=float(at_zero.sum() / total), mass_at_one=float(at_one.sum() / total),
                              x=centers, density=density)
    rows = [(float(c), int(n), float(m)) for c, n, m in zip(centers, counts, masses)]
    return measure, rows


def empirical_nu(cfg: McConfig) -> CircleMeasure:
    return circle_histogram(simulate_nu(cfg), cfg.bins)[0]


def empirical_jacobi(cfg: McConfig) -> IntervalMeasure:
    return interval_histogram(simulate_jacobi(cfg), cfg.bins)[0]


def empirical_circle_moments(sample: McSample, K: int = 4) -> np.ndarray:
    """Circle moments k = 1..K straight from the pooled angles."""
    return np.array([np.mean(np.exp(1j * k * sample.values)) for k in range(1, K + 1)])


def histogram_rows(cfg: McConfig, kind: str = "nu") -> List[tuple]:
    """`bin_center,count,mass` rows for the ν or the μ histogram."""
    if kind == "nu":
        return circle_histogram(simulate_nu(cfg), cfg.bins)[1]
    if kind == "jacobi":
        return interval_histogram(simulate_jacobi(cfg), cfg.bins)[1]
    raise ValueError(f"unknown histogram kind {kind!r}")
