# cli.py
"""Command-line front end: classify ambients, compute measure families, check them by counting."""
import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .cartan import (AmbientGroup, AmbientKind, CartanParams, ambient_order, cartan_unit_count,
                     normalize_params, normalizer_coset_rep)
from .config import DB_PATH, DEFAULT_A_MAX, DEFAULT_B_MAX, LOG_FORMAT
from .db import RunStore
from .errors import EigenmeasureError, InvalidRingError, PreconditionError, ResourceError, SpecError
from .measure import CheckRecord, MeasureFamily, evaluate, family, total_mass, verify_family
from .modarith import MatMod, as_prime, format_rat
from .report import ReportTemplateHandler
from .subgroup import FiniteSubgroup, SubgroupSpec, close, index_and_level

SPEC_KEYS = {'ell', 'ambient', 'level', 'generators', 'budget'}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SPEC = 2
EXIT_RESOURCE = 3
EXIT_MISMATCH = 4


# Problem files

def _int_field(data: Dict[str, Any], key: str, default: Optional[int] = None) -> Optional[int]:
    value = data.get(key, default)
    if value is None:
        if default is None and key in ('ell', 'd'):
            raise SpecError(f"missing field '{key}'")
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"field '{key}' must be an integer, got {value!r}")
    return value


def _parse_ambient(data: Any, ell: int) -> Tuple[AmbientGroup, bool]:
    """The ambient and whether its parameters were already in normal form."""
    if not isinstance(data, dict) or 'kind' not in data:
        raise SpecError("ambient must be an object with a 'kind'")
    try:
        kind = AmbientKind(data['kind'])
    except ValueError:
        raise SpecError(f"unknown ambient kind {data['kind']!r}")
    if kind == AmbientKind.GL2:
        return AmbientGroup.gl2(ell), True
    c0 = _int_field(data, 'c', 0)
    d0 = _int_field(data, 'd')
    params = normalize_params(c0, d0, ell)
    if kind == AmbientKind.CARTAN:
        return AmbientGroup.cartan(params, ell), params == CartanParams(c0, d0)
    return AmbientGroup.normalizer(params, ell), params == CartanParams(c0, d0)


def parse_problem(text: str) -> SubgroupSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid problem file: {e.msg}", e.lineno, e.colno)
    if not isinstance(data, dict):
        raise SpecError("a problem file holds a single object")
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise SpecError(f"unknown field(s): {', '.join(sorted(unknown))}")

    try:
        ell = int(as_prime(_int_field(data, 'ell')))
    except PreconditionError as e:
        raise SpecError(str(e))
    ambient, normal = _parse_ambient(data.get('ambient', {'kind': 'gl2'}), ell)
    generators = data.get('generators', [])
    if not isinstance(generators, list):
        raise SpecError("generators must be a list of matrices")
    if generators and not normal:
        raise SpecError(f"parameters of {ambient} were normalised; generators would be in another model")
    level = _int_field(data, 'level', ambient.min_level)

    try:
        mats = tuple(MatMod.from_ints(g, ell, level) for g in generators)
    except (PreconditionError, TypeError, KeyError) as e:
        raise SpecError(f"bad generator: {str(e)}")
    return SubgroupSpec(ambient, level, mats, _int_field(data, 'budget'))


def load_problem(path: Path) -> SubgroupSpec:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror}")
    return parse_problem(text)


def problem_to_dict(spec: SubgroupSpec) -> Dict[str, Any]:
    amb = spec.ambient
    ambient = {'kind': amb.kind.value}
    if amb.params is not None:
        ambient.update(c=amb.params.c, d=amb.params.d)
    data = {
        'ell': amb.ell,
        'ambient': ambient,
        'level': spec.level,
        'generators': [g.rows for g in spec.generators],
    }
    if spec.budget is not None:
        data['budget'] = spec.budget
    return data


# Commands

def _tangent_label(t) -> str:
    return f"𝕋=({t.t_all},{t.t_units},{t.t_sing_nonzero})"


def cmd_classify(spec: SubgroupSpec, reports: ReportTemplateHandler, jobs: Optional[int] = None) -> str:
    amb = spec.ambient
    context = {'ambient': str(amb), 'ell': amb.ell, 'params': amb.params, 'tangent': amb.tangent, 'group': None}
    if amb.kind == AmbientKind.GL2:
        context['summary'] = f"GL2, #G(1)={ambient_order(amb, 1)}, {_tangent_label(amb.tangent)}"
    else:
        ctype = amb.cartan_type
        unit_count = cartan_unit_count(ctype, amb.ell)
        context.update(
            ctype=ctype.value,
            unit_count=unit_count,
            coset_rep=normalizer_coset_rep(amb.params, amb.ell).rows,
            summary=f"{ctype.value}, #C(1)={unit_count}, {_tangent_label(amb.tangent)}",
        )
    if spec.generators:
        G = close(spec, jobs)
        index, level = index_and_level(G)
        context['group'] = {'order': G.order, 'index': index, 'level': level}
    return reports.format_template('classify', **context)


def cell_records(fam: MeasureFamily) -> List[Dict[str, str]]:
    return [{
        'a_set': str(c.a_set),
        'b_set': str(c.b_set),
        'constant': format_rat(c.constant),
        'law': fam.law(c),
        'provenance': c.provenance,
    } for c in fam.cells]


def measure_table(fam: MeasureFamily, a_max: int, b_max: int) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['a', 'b', 'mu'])
    for a in range(a_max + 1):
        for b in range(b_max + 1):
            writer.writerow([a, b, format_rat(evaluate(fam, a, b))])
    return out.getvalue()


def cmd_measure(spec: SubgroupSpec, reports: ReportTemplateHandler, a_max: int, b_max: int,
                jobs: Optional[int] = None) -> Tuple[MeasureFamily, str, str]:
    G = close(spec, jobs)
    fam = family(G)
    text = reports.format_template('family', group=str(G), ell=fam.ell, dim=fam.dim,
                                   mass=format_rat(total_mass(fam)), cells=cell_records(fam))
    return fam, text, measure_table(fam, a_max, b_max)


def cmd_verify(spec: SubgroupSpec, reports: ReportTemplateHandler, a_max: int, b_max: int,
               jobs: Optional[int] = None,
               family_fn: Callable[[FiniteSubgroup], MeasureFamily] = family) -> Tuple[List[CheckRecord], str]:
    G = close(spec, jobs)
    records = verify_family(family_fn(G), G, a_max, b_max)
    checks = [{'a': r.a, 'b': r.b, 'expected': format_rat(r.expected), 'observed': format_rat(r.observed),
               'passed': r.passed} for r in records]
    failed = [f"({r.a}, {r.b})" for r in records if not r.passed]
    text = reports.format_template('verify', group=str(G), checks=checks,
                                   passed=len(checks) - len(failed), failed=failed)
    return records, text


def cmd_runs(store: RunStore) -> str:
    lines = [f"{run['id']}  {run['command']:<8}  {run['status']:<9}  {run['created_at']}"
             for run in store.get_all_runs()]
    return '\n'.join(lines) if lines else "No recorded runs"


# Entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", "-j", type=int, default=None, help="Worker threads for counting scans")
    common.add_argument("--budget", type=int, default=None, help="Enumeration budget in matrix entries")
    common.add_argument("--dump-spec", type=Path, default=None, help="Write the normalised problem file here")
    common.add_argument("--db", type=Path, default=None, help="Record the run in this sqlite store")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    common.add_argument("--quiet", "-q", action="store_true", help="Warnings only")

    ranged = argparse.ArgumentParser(add_help=False)
    ranged.add_argument("--a-max", type=int, default=DEFAULT_A_MAX)
    ranged.add_argument("--b-max", type=int, default=DEFAULT_B_MAX)

    parser = argparse.ArgumentParser(prog="eigenmeasure",
                                     description="Haar measures of 1-eigenspace strata in open subgroups of GL2(Z_l)")
    commands = parser.add_subparsers(dest="command", required=True)
    p = commands.add_parser("classify", parents=[common], help="Classify the ambient group")
    p.add_argument("spec", type=Path)
    p = commands.add_parser("measure", parents=[common, ranged], help="Compute the measure family")
    p.add_argument("spec", type=Path)
    p.add_argument("--csv", type=Path, default=None, help="Write the sample table here instead of stdout")
    p = commands.add_parser("verify", parents=[common, ranged], help="Check the family against direct counts")
    p.add_argument("spec", type=Path)
    commands.add_parser("runs", parents=[common], help="List recorded runs")
    return parser


def _exit_code(e: EigenmeasureError) -> int:
    if isinstance(e, (SpecError, InvalidRingError)):
        return EXIT_SPEC
    if isinstance(e, ResourceError):
        return EXIT_RESOURCE
    return EXIT_ERROR


def _run(args: argparse.Namespace, store: Optional[RunStore], run_id: Optional[str]) -> int:
    reports = ReportTemplateHandler()
    spec = load_problem(args.spec)
    if args.budget is not None:
        spec = dataclasses.replace(spec, budget=args.budget)
    if args.dump_spec:
        args.dump_spec.write_text(json.dumps(problem_to_dict(spec), indent=2) + "\n", encoding='utf-8')
        logging.info(f"Wrote normalised problem to {args.dump_spec}")
    if store:
        store.update_run(run_id, {'spec': json.dumps(problem_to_dict(spec)), 'status': 'running'})

    if args.command == "classify":
        print(cmd_classify(spec, reports, args.jobs))
        summary, status = "classified", 'completed'
    elif args.command == "measure":
        fam, text, table = cmd_measure(spec, reports, args.a_max, args.b_max, args.jobs)
        print(text)
        if args.csv:
            args.csv.write_text(table, encoding='utf-8')
            logging.info(f"Wrote {args.csv}")
        else:
            print(table, end='')
        if store:
            store.add_cells(run_id, cell_records(fam))
        summary, status = f"{len(fam.cells)} cells", 'completed'
    else:
        records, text = cmd_verify(spec, reports, args.a_max, args.b_max, args.jobs)
        print(text)
        if store:
            store.add_checks(run_id, [{'a': r.a, 'b': r.b, 'expected': format_rat(r.expected),
                                       'observed': format_rat(r.observed), 'passed': r.passed}
                                      for r in records])
        failures = sum(not r.passed for r in records)
        summary = f"{len(records) - failures}/{len(records)} pairs agree"
        status = 'mismatch' if failures else 'completed'

    if store:
        store.update_run(run_id, {'status': status, 'summary': summary})
    return EXIT_MISMATCH if status == 'mismatch' else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)

    store, run_id = None, None
    try:
        if args.command == "runs":
            print(cmd_runs(RunStore(args.db or DB_PATH)))
            return EXIT_OK
        if args.db:
            store = RunStore(args.db)
            run_id = store.create_run(args.command)
        return _run(args, store, run_id)
    except EigenmeasureError as e:
        logging.error(f"{args.command} failed: {str(e)}")
        if store:
            store.update_run(run_id, {'status': 'error', 'summary': str(e)})
        print(f"Error: {e}", file=sys.stderr)
        return _exit_code(e)
