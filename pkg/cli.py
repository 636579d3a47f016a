#!/usr/bin/env python3
"""
Command-line front end of the trigonometric equivalence lab.

Every command reads and writes files only, records the seed and tolerance
in its outputs, and exits 0 when all checks pass, 1 when an invariant
fails (with a report naming it) and 2 on usage errors.
"""

import functools
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import click
from colorama import Fore, Style

import config as lab_config
from config import Config
from engines.crt_construction import CoprimeModuli
from engines.reduction import MODES, RC, ReductionPlan
from engines.weights import WeightSequence
from main import (
    configure_logging,
    harmonic_coefficients,
    load_sequence,
    parse_coefficients,
    run_certificates,
    run_coeffs,
    run_crt_map,
    run_dts,
    run_maxima,
    run_reduce,
    run_verify_all,
    run_verify_equiv,
    run_weight_check,
    sample_sequence,
)
from utils.errors import ArtifactError, ConsistencyError, DomainError
from utils.json_validator import build_metadata, dumps_artifact, export_validated_json, load_and_validate_json
from utils.report_export import export_decay_plot, export_maxima_csv, export_maxima_xlsx, read_maxima_csv

EXIT_FAILED = 1
EXIT_USAGE = 2


class LabUsageError(click.ClickException):
    exit_code = EXIT_USAGE


class InvariantFailure(click.ClickException):
    exit_code = EXIT_FAILED


@dataclass
class RunConfig:
    """Flags of one command plus the configuration they run under"""
    command: str
    inputs: Dict[str, Optional[str]] = field(default_factory=dict)
    outputs: Dict[str, Optional[str]] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = field(default_factory=lambda: Config.DEFAULT_SEED)
    tolerance: float = field(default_factory=lambda: Config.SERIES_TOLERANCE)

    def validate_paths(self) -> None:
        for role, path in self.inputs.items():
            if path is not None and not os.path.isfile(path):
                raise ArtifactError(f"Input file for --{role} not found: {path}")
        for role, path in self.outputs.items():
            if path is None:
                continue
            if os.path.isdir(path):
                raise ArtifactError(f"Output path for --{role} is a directory: {path}")
            folder = os.path.dirname(path)
            if folder and os.path.exists(folder) and not os.path.isdir(folder):
                raise ArtifactError(f"Output folder for --{role} is not a directory: {folder}")

    def metadata(self, kind: str) -> Dict[str, Any]:
        return build_metadata(kind, self.command, self.seed, self.tolerance, parameters=self.params)

    def emit(self, data: Any, kind: str, path: Optional[str]) -> None:
        """Write an artifact to `path`, or print it when no path was given"""
        if path is None:
            click.echo(dumps_artifact(data, self.metadata(kind)), nl=False)
        else:
            export_validated_json(data, path, self.metadata(kind))


def lab_command(func: Callable) -> Callable:
    """Map lab exceptions onto the exit code contract"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ArtifactError, DomainError) as e:
            raise LabUsageError(str(e)) from e
        except ConsistencyError as e:
            raise InvariantFailure(f"consistency: {e}") from e

    return wrapper


def verdict(passed: bool, message: str) -> None:
    color = Fore.GREEN if passed else Fore.RED
    label = 'PASS' if passed else 'FAIL'
    click.echo(f"{color}{label}{Style.RESET_ALL}: {message}")


def finish(passed: bool, message: str, failures: Optional[List[str]] = None) -> None:
    verdict(passed, message)
    for failure in failures or []:
        click.echo(f"  - {failure}")
    if not passed:
        sys.exit(EXIT_FAILED)


def parse_moduli(text: str) -> CoprimeModuli:
    return CoprimeModuli.parse(text)


def parse_orders(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.split(','))
    except ValueError as e:
        raise LabUsageError(f"Orders must be comma-separated integers, got '{text}'") from e


def read_coefficients(path: Optional[str], size: int) -> list:
    """Coefficients a_1..a_size from a JSON list (default a_n = 1/n); extra entries are ignored"""
    if path is None:
        return list(harmonic_coefficients(size))
    a = parse_coefficients(load_and_validate_json(path, 'coefficients'))
    return list(a[:size])


def read_plan(path: str) -> ReductionPlan:
    return ReductionPlan.from_json(load_and_validate_json(path, 'plan'))


@click.group()
@click.option('--log-level', default=None, help='Logging level (defaults to LOG_LEVEL)')
@click.option('--profile', type=click.Choice(sorted(lab_config.config)), default=None,
              help='Configuration profile')
def cli(log_level: Optional[str], profile: Optional[str]) -> None:
    """Trigonometric equivalence lab: DTS tables, CRT maps, reductions and block maxima."""
    if profile:
        lab_config.activate(profile)
    configure_logging(log_level)


@cli.command('dts')
@click.option('--order', type=int, default=None, help='Order l of a one-dimensional DTS')
@click.option('--moduli', default=None, help='Per-axis orders p_1,..,p_d of a multiple DTS')
@click.option('--coeffs', 'with_coeffs', is_flag=True, help='Include Fourier coefficient tables')
@click.option('--mmax', type=int, default=4, show_default=True, help='Coefficient range |m| <= mmax')
@click.option('--half-width', type=int, default=2, show_default=True, help='Spectrum listing half-width')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Output JSON (stdout when omitted)')
@lab_command
def dts_command(order, moduli, with_coeffs, mmax, half_width, out):
    """Tabulate a DTS: exact cell values, coefficients and spectra."""
    if (order is None) == (moduli is None):
        raise LabUsageError("Give exactly one of --order or --moduli")
    orders = (order,) if order is not None else parse_orders(moduli)
    run = RunConfig('dts', outputs={'out': out},
                    params={'orders': list(orders), 'coeffs': with_coeffs, 'mmax': mmax, 'half_width': half_width})
    run.validate_paths()
    result = run_dts(orders, with_coeffs, mmax, half_width)
    run.emit(result, 'dts', out)


@cli.command('crt-map')
@click.option('--moduli', required=True, help='Pairwise coprime moduli, e.g. 3,5')
@click.option('--emit', 'emit_path', type=click.Path(dir_okay=False), default=None,
              help='Cell bijection JSON (stdout when omitted)')
@click.option('--report', type=click.Path(dir_okay=False), default=None, help='MP-map axiom report JSON')
@click.option('--seed', type=int, default=None, help='Seed for sampled axiom checks')
@lab_command
def crt_map_command(moduli, emit_path, report, seed):
    """Emit Theta as the cell bijection [{from:[u1,..,ud], to:u}]."""
    moduli = parse_moduli(moduli)
    run = RunConfig('crt-map', outputs={'emit': emit_path, 'report': report},
                    params={'moduli': list(moduli.moduli)}, seed=Config.DEFAULT_SEED if seed is None else seed)
    run.validate_paths()
    theta, axioms = run_crt_map(moduli, run.seed)
    run.emit(theta.to_json(), 'cell_map', emit_path)
    if report is not None:
        export_validated_json(axioms.to_json(), report, run.metadata('report'))
    if emit_path is not None or not axioms.passed:
        finish(axioms.passed, f"Theta on {moduli.product} cells, {axioms.checked_pairs} axiom pairs checked",
               [f"{f['identity']}: {f}" for f in axioms.failures[:5]])


@cli.command('verify-equiv')
@click.option('--moduli', default=None, help='Pairwise coprime moduli, e.g. 3,5')
@click.option('--all-below', type=int, default=None,
              help='Sweep every tuple of 2 to 4 distinct primes <= 31 with product <= this bound')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Report JSON')
@click.option('--distribution', type=click.Path(dir_okay=False), default=None,
              help='Joint distribution of the reindexed one-dimensional system (p <= 210)')
@lab_command
def verify_equiv_command(moduli, all_below, out, distribution):
    """Exhaustively verify the CRT correspondence of multiple and one-dimensional DTS."""
    if (moduli is None) == (all_below is None):
        raise LabUsageError("Give exactly one of --moduli or --all-below")
    run = RunConfig('verify-equiv', outputs={'out': out, 'distribution': distribution},
                    params={'moduli': moduli, 'all_below': all_below})
    run.validate_paths()

    if all_below is not None:
        reports = run_verify_all(all_below)
        failed = [r for r in reports if not r.passed]
        if out is not None:
            data = {'passed': not failed, 'tuples': [r.to_json() for r in reports]}
            export_validated_json(data, out, run.metadata('report'))
        finish(not failed, f"{len(reports)} moduli tuples, {sum(r.cells_checked for r in reports)} cells checked",
               [f"moduli {r.moduli}" for r in failed])
        return

    moduli = parse_moduli(moduli)
    report, dist = run_verify_equiv(moduli, with_distribution=distribution is not None)
    if out is not None:
        export_validated_json(report.to_json(), out, run.metadata('report'))
    if dist is not None:
        export_validated_json(dist, distribution, run.metadata('distribution'))
    failures = []
    if not report.tau_bijective:
        failures.append('tau_bijective')
    if not report.tau_bar_bijective:
        failures.append('tau_bar_bijective')
    if report.congruence_failures:
        failures.append(f"exponent_congruence: {report.congruence_failures} pairs")
    if report.prob_equiv is False:
        failures.append('probabilistic_equivalence')
    if report.eps_equiv is False:
        failures.append(f"eps_equivalence: witness distance {report.witness_distance:.3e}")
    finish(report.passed, f"{report.cells_checked} cells checked", failures)


@cli.command('reduce')
@click.option('--input', 'input_path', type=click.Path(dir_okay=False), default=None,
              help='Multi-index (RC) or polynomial (SRC) input JSON; a seeded sample when omitted')
@click.option('--n', 'N', type=int, required=True, help='Number of members to reduce')
@click.option('--mode', type=click.Choice(MODES), default=RC, show_default=True)
@click.option('--dim', type=int, default=2, show_default=True, help='Dimension of sampled inputs')
@click.option('--bound', type=int, default=None, help='Coordinate bound of sampled inputs')
@click.option('--terms', type=int, default=3, show_default=True, help='Terms per sampled SRC polynomial')
@click.option('--seed', type=int, default=None, help='Seed of sampled inputs')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Plan JSON (stdout when omitted)')
@click.option('--audit', 'audit_path', type=click.Path(dir_okay=False), default=None, help='Audit report JSON')
@click.option('--certificates', type=click.Path(dir_okay=False), default=None,
              help='Block equivalence certificates JSON')
@lab_command
def reduce_command(input_path, N, mode, dim, bound, terms, seed, out, audit_path, certificates):
    """Build the reduction plan: moduli, shifts, offsets, coefficients and frequencies."""
    run = RunConfig('reduce', inputs={'input': input_path},
                    outputs={'out': out, 'audit': audit_path, 'certificates': certificates},
                    params={'n': N, 'mode': mode, 'dim': dim, 'bound': bound, 'terms': terms},
                    seed=Config.DEFAULT_SEED if seed is None else seed)
    run.validate_paths()
    if input_path is not None:
        sequence = load_sequence(load_and_validate_json(input_path, 'indices'), mode)
    else:
        sequence = sample_sequence(mode, N, dim, run.seed, bound, terms)

    plan, audit = run_reduce(sequence, N)
    run.emit(plan.to_json(), 'plan', out)
    if audit_path is not None:
        export_validated_json(audit.to_json(), audit_path, run.metadata('report'))

    failures = [f"{v['invariant']}: {v['detail']}" for v in audit.violations]
    if certificates is not None:
        certs = run_certificates(plan)
        passed = all(c['holds'] for c in certs)
        export_validated_json({'passed': passed, 'blocks': certs}, certificates, run.metadata('report'))
        failures += [f"error_law: block {c['k']} eps {c['eps']:.3e} > {c['bound']:.3e}"
                     for c in certs if not c['holds']]
    if out is not None or failures:
        finish(not failures, f"plan with {plan.size} slots, {plan.total_terms} terms, "
                             f"{len(audit.checks)} structural checks", failures)


@cli.command('coeffs')
@click.option('--plan', 'plan_path', type=click.Path(dir_okay=False), required=True, help='Plan JSON')
@click.option('--coeffs', 'coeffs_path', type=click.Path(dir_okay=False), default=None,
              help='Coefficients a_n as a JSON list (default a_n = 1/n)')
@click.option('--w', 'weight', default='log2', show_default=True, help='Weight preset: log, log2, pow:a, const:c, table:file')
@click.option('--grid', type=int, default=1024, show_default=True, help='Grid of the series identity check')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Transfer report JSON')
@lab_command
def coeffs_command(plan_path, coeffs_path, weight, grid, out):
    """Map a_n to c_s = a_n b_s and check the weight transfer inequality."""
    run = RunConfig('coeffs', inputs={'plan': plan_path, 'coeffs': coeffs_path}, outputs={'out': out},
                    params={'w': weight, 'grid': grid})
    run.validate_paths()
    plan = read_plan(plan_path)
    a = read_coefficients(coeffs_path, plan.size)
    result = run_coeffs(plan, a, WeightSequence.parse(weight), grid)
    run.emit(result, 'report', out)

    transfer = result['transfer']
    failures = []
    if not transfer['holds']:
        failures.append(f"weight_transfer: {transfer['lhs']:.6g} > {transfer['c_star']:.4f} x {transfer['rhs']:.6g}")
    identity = result.get('series_identity')
    if identity and not identity['holds']:
        failures.append(f"series_identity: gap {identity['max_gap']:.3e} on grid {identity['grid']}")
    if out is not None or failures:
        finish(result['passed'], f"C*={transfer['c_star']:.4f}, LHS={transfer['lhs']:.6g}, RHS={transfer['rhs']:.6g}",
               failures)


@cli.command('maxima')
@click.option('--plan', 'plan_path', type=click.Path(dir_okay=False), required=True, help='Plan JSON')
@click.option('--coeffs', 'coeffs_path', type=click.Path(dir_okay=False), default=None,
              help='Coefficients a_n as a JSON list (default a_n = 1/n)')
@click.option('--kmax', type=int, required=True, help='Largest block index')
@click.option('--grid', type=int, default=512, show_default=True, help='Grid resolution')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='CSV report')
@click.option('--json', 'json_path', type=click.Path(dir_okay=False), default=None, help='JSON report')
@click.option('--xlsx', type=click.Path(dir_okay=False), default=None, help='Spreadsheet report')
@click.option('--plot', type=click.Path(dir_okay=False), default=None, help='SVG decay chart')
@lab_command
def maxima_command(plan_path, coeffs_path, kmax, grid, out, json_path, xlsx, plot):
    """Dyadic block maxima of the reduced series on a uniform grid."""
    run = RunConfig('maxima', inputs={'plan': plan_path, 'coeffs': coeffs_path},
                    outputs={'out': out, 'json': json_path, 'xlsx': xlsx, 'plot': plot},
                    params={'kmax': kmax, 'grid': grid})
    run.validate_paths()
    plan = read_plan(plan_path)
    a = read_coefficients(coeffs_path, plan.size)
    report = run_maxima(plan, a, kmax, grid)

    export_maxima_csv(report, out)
    if json_path is not None:
        export_validated_json(report.to_json(), json_path, run.metadata('maxima'))
    if xlsx is not None:
        export_maxima_xlsx(report, xlsx, run.metadata('maxima'))
    if plot is not None:
        eps = {block.k: block.eps for block in plan.blocks if block.k <= kmax}
        export_decay_plot(report, plot, eps)
    written = read_maxima_csv(out)
    csv_ok = written == report.rows()
    finish(csv_ok, f"block maxima for k <= {kmax} on a {grid}-point grid written to {out}",
           [] if csv_ok else [f"csv_round_trip: {out} does not read back as the computed maxima"])


@cli.command('weight-check')
@click.option('--w', 'weight', required=True, help='Weight preset: log, log2, pow:a, const:c, table:file')
@click.option('--n', 'N', type=int, required=True, help='Range 1..N to scan')
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Report JSON')
@lab_command
def weight_check_command(weight, N, out):
    """Admissibility diagnostics of a weight sequence."""
    run = RunConfig('weight-check', outputs={'out': out}, params={'w': weight, 'n': N})
    run.validate_paths()
    report = run_weight_check(WeightSequence.parse(weight), N)
    if out is not None:
        export_validated_json(report.to_json(), out, run.metadata('report'))
    failures = []
    if report.monotonicity_violations:
        failures.append(f"monotonicity: {report.monotonicity_violations} decreasing steps, first at {report.first_violations}")
    if not report.increases:
        failures.append("growth: w(N) <= w(1)")
    if not report.doubling_ok:
        failures.append(f"doubling: C(N) = {report.doubling_constant:.4g} > {report.doubling_limit:.4g}")
    finish(report.passed, f"{report.weight}: C(N) = {report.doubling_constant:.4f} on N = {N}", failures)


if __name__ == '__main__':
    cli()
