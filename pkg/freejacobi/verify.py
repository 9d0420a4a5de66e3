"""
Acceptance suites run by `freejacobi verify`.

Each suite returns a list of checks (measured value, tolerance, verdict).
Reports contain no timings so that a fixed seed gives identical output.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from freejacobi import settings
from freejacobi.fubm import FULL_CIRCLE_TIME, fubm_density, fubm_kappa, fubm_moment, support_edge
from freejacobi.initlaws import InitialLaw, initial_moments
from freejacobi.jacobi import (
    ProjectionPair,
    herglotz_nu_from_mu,
    interval_herglotz,
    szego_to_interval,
)
from freejacobi.liberation import (
    LiberationParams,
    density_values,
    herglotz_flow,
    nu_t,
    stationary_density,
    stationary_measure,
    support_estimate,
)
from freejacobi.measures import (
    TWO_PI,
    circle_grid,
    circle_moment,
    dirac,
    estimate_atom,
    herglotz_eval,
    wrap_angle,
)
from freejacobi.momentflow import crosscheck, evolve_moments
from freejacobi.rmt_oracle import (
    McConfig,
    Structure,
    circle_histogram,
    empirical_circle_moments,
    interval_histogram,
    simulate_jacobi,
    simulate_nu,
    unitary_trace_moments,
)

logger = logging.getLogger(__name__)

MC_GRID = 1024
PUSH_FORWARD_NODES = 1008

# CSV tables a suite leaves behind, keyed by name; rows are `bin_center,count,mass`
Tables = Dict[str, List[tuple]]


class Check(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    measured: float
    tolerance: float
    passed: bool


class McOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(7, ge=0)
    d: int = Field(300, ge=2)
    replicas: int = Field(20, ge=1)


def _check(name: str, measured: float, tolerance: float) -> Check:
    passed = bool(np.isfinite(measured) and measured <= tolerance)
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, f"{'PASS' if passed else 'FAIL'} {name}: {measured:.3e} (tolerance {tolerance:.1e})")
    return Check(name=name, measured=float(measured), tolerance=tolerance, passed=passed)


def _sup_on(nu, reference: np.ndarray) -> float:
    """sup |κ − reference| over the density nodes of nu; reference holds values at those nodes."""
    values = np.abs(nu.kappa - reference)
    return float(np.max(values)) if values.size else 0.0


def _pushed_density(theta: np.ndarray, kappa: np.ndarray, power: int) -> Tuple[np.ndarray, np.ndarray]:
    """Density of the image under z ↦ z^p, for n uniform nodes with p dividing n."""
    n = theta.size
    slots = n // power
    step = TWO_PI * power / n
    index = np.mod(np.rint((wrap_angle(power * theta) + math.pi) / step).astype(int), slots)
    image = np.bincount(index, weights=kappa, minlength=slots) / np.bincount(index, minlength=slots)
    angles = wrap_angle(-math.pi + step * np.arange(slots))
    order = np.argsort(angles)
    return angles[order], image[order]


def suite_fubm(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    for t in (0.25, 1.0, 2.0, 4.0, 8.0):
        measure = fubm_density(t)
        worst = max(abs(circle_moment(measure, k).real - fubm_moment(t, k)) for k in range(1, 11))
        checks.append(_check(f"fubm moments t={t:g}", worst, 1e-6))
    return checks


def suite_centered(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    law = InitialLaw.centered(dirac(0.0))
    p = LiberationParams(alpha=0.0, beta=0.0)
    for t in (0.3, 1.0, 2.5):
        measure = nu_t(t, law, p)
        checks.append(_check(f"centered delta t={t:g}", _sup_on(measure, fubm_kappa(2 * t, measure.theta)), 1e-4))
    return checks


def suite_closed_forms(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    cases = ((InitialLaw.classical(), 2), (InitialLaw.boolean(), 3), (InitialLaw.monotone(), 4))
    p = LiberationParams(alpha=0.0, beta=0.0)
    for law, power in cases:
        theta = circle_grid(PUSH_FORWARD_NODES * power)
        for t in (0.2, 0.5):
            angles, pushed = _pushed_density(theta, density_values(t, law, p, theta), power)
            checks.append(_check(f"{law.tag.value} push-forward p={power} t={t:g}",
                                 float(np.max(np.abs(pushed - fubm_kappa(2 * power * t, angles)))), 1e-4))
            arcs = support_estimate(t, law, p)
            half_width = support_edge(2 * power * t) / power
            widths = [length / 2 for _, length in arcs]
            if 2 * power * t >= FULL_CIRCLE_TIME:
                # the arcs touch and cover the circle
                miss = abs(sum(length for _, length in arcs) - TWO_PI)
            else:
                miss = max(abs(w - half_width) for w in widths) if len(widths) == power else math.inf
            checks.append(_check(f"{law.tag.value} support half-width t={t:g}", miss, 1e-4))
    for alpha, beta in ((0.6, 0.2), (0.3, -0.5)):
        law = InitialLaw.free(alpha, beta)
        p = LiberationParams(alpha=alpha, beta=beta)
        reference = stationary_measure(p)
        for t in (0.1, 1.0, 10.0):
            values = density_values(t, law, p, reference.theta)
            checks.append(_check(f"free law stays stationary alpha={alpha:g} beta={beta:g} t={t:g}",
                                 float(np.max(np.abs(values - reference.kappa))), 1e-4))
    return checks


def suite_moments(options: McOptions, tables: Tables) -> List[Check]:
    cases = (
        (InitialLaw.classical(0.6, 0.2), 0.5),
        (InitialLaw.classical(0.4, 0.4), 1.0),
        (InitialLaw.free(0.3, -0.5), 1.0),
        (InitialLaw.boolean(), 0.3),
        (InitialLaw.monotone(), 0.3),
        (InitialLaw.centered(dirac(0.0)), 1.0),
    )
    checks = []
    for law, t in cases:
        p = LiberationParams.of_law(law)
        checks.append(_check(f"moment crosscheck {law.tag.value} alpha={law.alpha:g} beta={law.beta:g} t={t:g}",
                             crosscheck(t, law, p, 8), 1e-5))
    return checks


def suite_structure(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    law = InitialLaw.classical(0.6, 0.2)
    p = LiberationParams.of_law(law)
    for t in (0.5, 2.0):
        flow = herglotz_flow(t, law, p)
        checks.append(_check(f"atom at pi t={t:g}", abs(estimate_atom(flow, math.pi).mass - p.a), 1e-3))
        checks.append(_check(f"atom at 0 t={t:g}", abs(estimate_atom(flow, 0.0).mass - p.b), 1e-3))
        measure = nu_t(t, law, p)
        checks.append(_check(f"density mass t={t:g}", abs(measure.density_mass() - (1 - p.a - p.b)), 1e-6))
        finer = nu_t(t, law, p, n=2 * settings.GRID_SIZE)
        peak = float(np.max(measure.kappa))
        checks.append(_check(f"density peak under grid doubling t={t:g}",
                             abs(float(np.max(finer.kappa)) - peak) / max(peak, 1e-300), 1e-2))
    return checks


def suite_jacobi(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    sweep = (0.2, 0.4, 0.5, 0.8, 1.0)
    worst = max(abs(ProjectionPair(trP=a, trQ=b).mass_balance()['total'] - 1.0) for a in sweep for b in sweep)
    checks.append(_check("mass identity sweep", worst, 1e-12))
    for trP, trQ in ((0.5, 0.5), (0.8, 0.6), (0.3, 0.7)):
        pp = ProjectionPair(trP=trP, trQ=trQ)
        law = InitialLaw.classical(pp.alpha, pp.beta)
        for t in (0.5, 1.0):
            nu = nu_t(t, law, pp.params())
            mu = szego_to_interval(nu, pp)
            checks.append(_check(f"mu mass trP={trP:g} trQ={trQ:g} t={t:g}", abs(mu.mass() - 1.0), 1e-6))
            radii = np.linspace(0.1, 0.6, 4)
            angles = wrap_angle(2 * math.pi * (np.arange(5) + 0.25) / 5)
            z = (radii[:, None] * np.exp(1j * angles)[None, :]).reshape(-1)
            gap = np.abs(herglotz_nu_from_mu(interval_herglotz(mu), pp, z) - herglotz_eval(nu, z))
            checks.append(_check(f"Herglotz relationship trP={trP:g} trQ={trQ:g} t={t:g}",
                                 float(np.max(gap)), 1e-6))
    return checks


def suite_stationary(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    law = InitialLaw.classical(0.3, 0.3)
    p = LiberationParams.of_law(law)
    measure = nu_t(8.0, law, p)
    checks.append(_check("classical t=8 near stationary",
                         _sup_on(measure, stationary_density(p, measure.theta)), 1e-2))
    uniform = stationary_measure(LiberationParams(alpha=0.0, beta=0.0))
    checks.append(_check("alpha=beta=0 stationary is uniform", float(np.max(np.abs(uniform.kappa - 1.0))), 1e-14))
    return checks


def suite_mc(options: McOptions, tables: Tables) -> List[Check]:
    checks = []
    base = {'d': options.d, 'replicas': options.replicas, 'seed': options.seed}
    trace = unitary_trace_moments(McConfig(t=1.0, **base), K=1)[0]
    checks.append(_check("trace of U_1", abs(trace.real - math.exp(-0.5)), 0.02))
    free = McConfig(t=1.0, structure=Structure.FREE_PAIR, **base)
    measured = empirical_circle_moments(simulate_nu(free), 4)
    analytic = evolve_moments(initial_moments(InitialLaw.free(), 4), 0.0, 0.0, 1.0)[1:]
    checks.append(_check("free pair moments t=1", float(np.max(np.abs(measured - analytic))), 0.03))
    classical = McConfig(t=0.5, structure=Structure.COMMUTING_CLASSICAL, **base)
    sample = simulate_nu(classical)
    measured = empirical_circle_moments(sample, 4)
    analytic = evolve_moments(initial_moments(InitialLaw.classical(), 4), 0.0, 0.0, 0.5)[1:]
    checks.append(_check("commuting classical moments t=0.5", float(np.max(np.abs(measured - analytic))), 0.03))
    reference = nu_t(0.5, InitialLaw.classical(), LiberationParams(alpha=0.0, beta=0.0), n=MC_GRID)
    computed = np.array([circle_moment(reference, k) for k in range(1, 5)])
    checks.append(_check("commuting classical moments against nu_t t=0.5",
                         float(np.max(np.abs(measured - computed))), 0.03))
    if sample.values.size:
        tables['nu_histogram'] = circle_histogram(sample, classical.bins)[1]
    jacobi = McConfig(t=1.0, trP=0.8, trQ=0.6, **base)
    mu, tables['jacobi_histogram'] = interval_histogram(simulate_jacobi(jacobi), jacobi.bins)
    checks.append(_check("jacobi atom at 0", abs(mu.mass_at_zero - 0.4), 0.05))
    checks.append(_check("jacobi atom at 1", abs(mu.mass_at_one - 0.4), 0.05))
    return checks


SUITES: Dict[str, Callable[[McOptions, Tables], List[Check]]] = {
    'closed-forms': suite_closed_forms,
    'fubm': suite_fubm,
    'centered': suite_centered,
    'moments': suite_moments,
    'structure': suite_structure,
    'jacobi': suite_jacobi,
    'stationary': suite_stationary,
    'mc': suite_mc,
}


def run_suite(name: str, options: Optional[McOptions] = None, tables: Optional[Tables] = None) -> dict:
    """Run one suite (or 'all') and return the report payload; histogram tables go into `tables`."""
    options = options or McOptions()
    tables = {} if tables is None else tables
    names = list(SUITES) if name == 'all' else [name]
    if any(n not in SUITES for n in names):
        raise KeyError(name)
    checks = []
    for suite in names:
        logger.info(f"Running suite {suite}")
        checks += [dict(c.model_dump(), suite=suite) for c in SUITES[suite](options, tables)]
    return {
        'suite': name,
        'parameters': options.model_dump(),
        'checks': checks,
        'passed': all(c['passed'] for c in checks),
    }
