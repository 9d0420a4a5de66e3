"""
Command-line entry point.

    freejacobi fubm --t 1.0 --grid 4096 --out d.csv
    freejacobi liberation --t 1 --alpha 0 --beta 0 --init '{"tag": "classical"}' --out runs/
    freejacobi jacobi --t 1 --trP 0.8 --trQ 0.6
    freejacobi stationary --alpha 0.3 --beta -0.5
    freejacobi moments --t 0.5 1 2 --alpha 0.6 --beta 0.2 --order 8
    freejacobi verify --suite mc --d 300 --replicas 20 --seed 7

Curves are written as CSV, atoms and metadata as a JSON file next to them.
Exit codes: 0 success, 1 failed verification, 2 bad parameters, 3 numeric failure.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from freejacobi import settings
from freejacobi.exceptions import FreeJacobiError, InconsistentInput
from freejacobi.fubm import FULL_CIRCLE_TIME, fubm_density, fubm_kappa, fubm_moment, support_edge
from freejacobi.initlaws import MAX_SERIES_ORDER, InitialLaw, LawTag, initial_moments
from freejacobi.jacobi import ProjectionPair, jacobi_measure
from freejacobi.liberation import (
    SMALL_TIME,
    LiberationParams,
    nu_t,
    stationary_measure,
    stationary_support,
    support_estimate,
)
from freejacobi.measures import (
    circle_grid,
    circle_moment,
    write_circle_measure,
    write_interval_measure,
    write_json,
    write_rows,
)
from freejacobi.momentflow import evolve_moments, evolve_states, write_moments
from freejacobi.verify import SUITES, McOptions, run_suite

logger = logging.getLogger(__name__)

CROSSCHECK_ORDER = 8
DEFAULT_INIT = '{"tag": "classical"}'


class RunSpec(BaseModel):
    """Validated parameters of one CLI invocation."""
    model_config = ConfigDict(frozen=True)

    command: Literal['fubm', 'liberation', 'jacobi', 'stationary', 'moments', 'verify']
    t: Optional[float] = Field(None, ge=0.0, description="Time")
    times: Tuple[float, ...] = Field(default=(), description="Times of the moments command")
    alpha: float = Field(0.0, ge=-1.0, le=1.0, description="Normalized trace of R")
    beta: float = Field(0.0, ge=-1.0, le=1.0, description="Normalized trace of S")
    trP: Optional[float] = Field(None, gt=0.0, le=1.0, description="Normalized trace of P")
    trQ: Optional[float] = Field(None, gt=0.0, le=1.0, description="Normalized trace of Q")
    init: Optional[str] = Field(None, description="Initial law as JSON")
    grid: int = Field(default_factory=lambda: settings.GRID_SIZE, ge=16, description="Density grid size")
    order: int = Field(CROSSCHECK_ORDER, ge=1, le=MAX_SERIES_ORDER, description="Moment truncation order")
    suite: Optional[str] = None
    seed: int = Field(7, ge=0)
    d: int = Field(300, ge=2, description="Matrix dimension of the Monte Carlo suite")
    replicas: int = Field(20, ge=1)
    out: Optional[Path] = None

    @model_validator(mode='after')
    def _check_command(self) -> 'RunSpec':
        if self.command in ('fubm', 'liberation', 'jacobi') and self.t is None:
            raise ValueError(f"{self.command} needs --t")
        if self.command == 'moments' and not self.times:
            raise ValueError("moments needs at least one --t")
        if any(not math.isfinite(t) or t < 0 for t in self.times):
            raise ValueError("times must be finite and nonnegative")
        if self.command == 'jacobi' and (self.trP is None or self.trQ is None):
            raise ValueError("jacobi needs --trP and --trQ")
        return self

    def metadata(self) -> dict:
        """Every parameter the result depends on, defaults included."""
        return {'run': self.model_dump(mode='json', exclude={'out'}, exclude_none=True)}


def output_paths(out: Optional[Path], stem: str, suffix: str = '.csv') -> Tuple[Path, Path]:
    """(data file, JSON sidecar). `out` is a directory, or a file whose sidecar sits beside it."""
    if out is not None and out.suffix in ('.csv', '.json'):
        out.parent.mkdir(parents=True, exist_ok=True)
        return out.with_suffix(suffix), out.with_suffix('.json')
    directory = out or Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    return directory / f"{stem}{suffix}", directory / f"{stem}.json"


def _law(spec: RunSpec, alpha: float, beta: float) -> InitialLaw:
    try:
        config = json.loads(spec.init or DEFAULT_INIT)
    except json.JSONDecodeError as e:
        raise InconsistentInput(f"--init is not valid JSON: {e}")
    if not isinstance(config, dict):
        raise InconsistentInput("--init must be a JSON object")
    return InitialLaw.from_config(config, alpha=alpha, beta=beta)


def _arcs(arcs: List[Tuple[float, float]]) -> List[dict]:
    return [{'start': start, 'length': length} for start, length in arcs]


def cmd_fubm(spec: RunSpec) -> int:
    # Rows sit on the uniform grid; the edge-refined measure only feeds the mass line
    theta = circle_grid(spec.grid)
    kappa = fubm_kappa(spec.t, theta)
    csv_path, json_path = output_paths(spec.out, f"fubm_t{spec.t:g}")
    write_rows(csv_path, ['theta', 'kappa'], zip(theta, kappa))
    metadata = spec.metadata()
    metadata.update({
        'atoms': [],
        't': spec.t,
        'g': support_edge(spec.t),
        'support': 'full-circle' if spec.t >= FULL_CIRCLE_TIME else 'arc',
        'moments': {str(k): fubm_moment(spec.t, k) for k in range(1, 11)},
        'density_mass': fubm_density(spec.t, n=spec.grid).density_mass(),
    })
    write_json(json_path, metadata)
    logger.info(f"Wrote {theta.size} density rows to {csv_path}")
    return 0


def cmd_liberation(spec: RunSpec) -> int:
    params = LiberationParams(alpha=spec.alpha, beta=spec.beta)
    law = _law(spec, spec.alpha, spec.beta)
    measure = nu_t(spec.t, law, params, n=spec.grid)
    if spec.t > SMALL_TIME:
        support = support_estimate(spec.t, law, params)
    else:
        support = stationary_support(params) if law.tag == LawTag.FREE else []
    # Crosscheck against the moment hierarchy on the measure already computed
    evolved = evolve_moments(initial_moments(law, spec.order), params.alpha, params.beta, spec.t, spec.order)
    quadrature = [circle_moment(measure, k).real for k in range(1, spec.order + 1)]
    error = max(abs(e - q) for e, q in zip(evolved[1:], quadrature))
    csv_path, json_path = output_paths(spec.out, f"nu_t{spec.t:g}")
    metadata = spec.metadata()
    metadata.update({
        't': spec.t,
        'law': law.to_config(),
        'support': _arcs(support),
        'density_mass': measure.density_mass(),
        'crosscheck': {'order': spec.order, 'max_error': error,
                       'moment_flow': list(evolved[1:]), 'quadrature': quadrature},
    })
    write_circle_measure(measure, csv_path, json_path, metadata)
    logger.info(f"Wrote nu_t to {csv_path}; moment crosscheck error {error:.3e}")
    return 0


def cmd_jacobi(spec: RunSpec) -> int:
    pair = ProjectionPair(trP=spec.trP, trQ=spec.trQ)
    law = _law(spec, pair.alpha, pair.beta)
    mu = jacobi_measure(spec.t, law, pair, n=spec.grid)
    csv_path, json_path = output_paths(spec.out, f"mu_t{spec.t:g}")
    metadata = spec.metadata()
    metadata.update({
        't': spec.t,
        'law': law.to_config(),
        'mass_balance': pair.mass_balance(),
        'mass': mu.mass(),
    })
    write_interval_measure(mu, csv_path, json_path, metadata)
    logger.info(f"Wrote mu_t to {csv_path}: atoms {mu.mass_at_zero:.6g} at 0, {mu.mass_at_one:.6g} at 1")
    return 0


def cmd_stationary(spec: RunSpec) -> int:
    params = LiberationParams(alpha=spec.alpha, beta=spec.beta)
    measure = stationary_measure(params, n=spec.grid)
    csv_path, json_path = output_paths(spec.out, "nu_inf")
    metadata = spec.metadata()
    metadata.update({
        'r_plus': params.r_plus,
        'r_minus': params.r_minus,
        'support': _arcs(stationary_support(params)),
    })
    write_circle_measure(measure, csv_path, json_path, metadata)
    logger.info(f"Wrote the stationary law to {csv_path}")
    return 0


def cmd_moments(spec: RunSpec) -> int:
    law = _law(spec, spec.alpha, spec.beta)
    if (law.alpha, law.beta) != (spec.alpha, spec.beta):
        raise InconsistentInput(f"the {law.tag.value} law has traces ({law.alpha:g}, {law.beta:g}), "
                                f"not ({spec.alpha:g}, {spec.beta:g})")
    states = evolve_states(initial_moments(law, spec.order), spec.alpha, spec.beta, spec.times, spec.order)
    csv_path, json_path = output_paths(spec.out, "moments")
    files = {}
    for state in states:
        path = csv_path if len(states) == 1 else csv_path.with_name(f"{csv_path.stem}_t{state.t:g}.csv")
        write_moments(path, state)
        files[f"{state.t:g}"] = path.name
    metadata = spec.metadata()
    metadata.update({'law': law.to_config(), 'files': files})
    write_json(json_path, metadata)
    logger.info(f"Wrote {len(states)} moment tables next to {json_path}")
    return 0


def cmd_verify(spec: RunSpec) -> int:
    options = McOptions(seed=spec.seed, d=spec.d, replicas=spec.replicas)
    tables = {}
    report = run_suite(spec.suite, options, tables)
    _, json_path = output_paths(spec.out, f"verify_{spec.suite}", suffix='.json')
    report['histograms'] = {}
    for name, rows in tables.items():
        csv_path = json_path.with_name(f"{json_path.stem}_{name}.csv")
        write_rows(csv_path, ['bin_center', 'count', 'mass'], rows)
        report['histograms'][name] = csv_path.name
    write_json(json_path, report)
    for check in report['checks']:
        verdict = 'PASS' if check['passed'] else 'FAIL'
        print(f"{verdict}  {check['suite']:<13} {check['name']:<60} {check['measured']:.3e} <= {check['tolerance']:.0e}")
    failed = sum(not c['passed'] for c in report['checks'])
    print(f"{len(report['checks']) - failed} passed, {failed} failed; report in {json_path}")
    return 0 if report['passed'] else 1


HANDLERS = {
    'fubm': cmd_fubm,
    'liberation': cmd_liberation,
    'jacobi': cmd_jacobi,
    'stationary': cmd_stationary,
    'moments': cmd_moments,
    'verify': cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='freejacobi',
                                     description="Spectral laws of liberated symmetry and projection pairs.")
    parser.add_argument('--threads', type=int, default=None,
                        help="Worker cap (default: FREEJACOBI_THREADS, else the CPU count)")
    parser.add_argument('--log-level', default=None, choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    commands = parser.add_subparsers(dest='command', required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument('--out', type=Path, default=None,
                         help="Output directory, or a .csv/.json file whose sidecar goes next to it")
        return sub

    def add_grid(sub: argparse.ArgumentParser) -> None:
        sub.add_argument('--grid', type=int, default=None, help=f"Density grid size (default {settings.GRID_SIZE})")

    def add_traces(sub: argparse.ArgumentParser) -> None:
        sub.add_argument('--alpha', type=float, default=0.0, help="Normalized trace of R, in [-1, 1]")
        sub.add_argument('--beta', type=float, default=0.0, help="Normalized trace of S, in [-1, 1]")

    def add_init(sub: argparse.ArgumentParser) -> None:
        sub.add_argument('--init', default=None,
                         help='Initial law as JSON, e.g. \'{"tag": "free"}\' (default: classical)')

    sub = add('fubm', "Density of the free unitary Brownian motion")
    sub.add_argument('--t', type=float, required=True)
    add_grid(sub)

    sub = add('liberation', "Spectral law of R U_t S U_t*")
    sub.add_argument('--t', type=float, required=True)
    add_traces(sub)
    add_init(sub)
    add_grid(sub)
    sub.add_argument('--order', type=int, default=CROSSCHECK_ORDER, help="Moments in the crosscheck")

    sub = add('jacobi', "Free Jacobi law of P U_t Q U_t* P")
    sub.add_argument('--t', type=float, required=True)
    sub.add_argument('--trP', type=float, required=True)
    sub.add_argument('--trQ', type=float, required=True)
    add_init(sub)
    add_grid(sub)

    sub = add('stationary', "Limit law of R U_t S U_t* as t grows")
    add_traces(sub)
    add_grid(sub)

    sub = add('moments', "Moment hierarchy m_0..m_N at the given times")
    sub.add_argument('--t', type=float, nargs='+', required=True, dest='times')
    add_traces(sub)
    add_init(sub)
    sub.add_argument('--order', type=int, default=CROSSCHECK_ORDER, help="Highest moment N")

    sub = add('verify', "Run acceptance suites")
    sub.add_argument('--suite', default='all', choices=['all'] + sorted(SUITES))
    sub.add_argument('--seed', type=int, default=7)
    sub.add_argument('--d', type=int, default=300)
    sub.add_argument('--replicas', type=int, default=20)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings.configure_logging(args.log_level)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        settings.THREADS = args.threads
    values = {k: v for k, v in vars(args).items() if k not in ('threads', 'log_level') and v is not None}
    try:
        spec = RunSpec(**values)
        return HANDLERS[spec.command](spec)
    except ValidationError as e:
        logger.error(f"Invalid parameters: {e}")
        return 2
    except FreeJacobiError as e:
        logger.error(f"{type(e).__name__}: {e}")
        if e.diagnostics:
            logger.error(f"Diagnostics: {json.dumps(e.diagnostics, default=str, sort_keys=True)}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"Invalid parameters: {e}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
