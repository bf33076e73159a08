import json
from dataclasses import replace
from functools import partial

import pytest

from eigenmeasure import cli
from eigenmeasure.cli import cmd_verify, load_problem, main, parse_problem, problem_to_dict
from eigenmeasure.config import SPECS_DIR
from eigenmeasure.db import RunStore
from eigenmeasure.errors import InvalidRingError, SpecError
from eigenmeasure.measure import MeasureFamily, family
from eigenmeasure.report import ReportTemplateHandler


def spec_path(name):
    return str(SPECS_DIR / f"{name}.json")


@pytest.fixture
def write_spec(tmp_path):
    def write(data, name="problem.json"):
        path = tmp_path / name
        path.write_text(data if isinstance(data, str) else json.dumps(data), encoding='utf-8')
        return str(path)
    return write


def corrupt(G) -> MeasureFamily:
    fam = family(G)
    cells = tuple(replace(c, constant=c.constant * 2) if c.region.contains(0, 0) else c for c in fam.cells)
    return MeasureFamily(fam.ell, fam.ambient, cells)


def test_parse_defaults():
    spec = parse_problem('{"ell": 3, "ambient": {"kind": "cartan", "d": 2}}')
    assert spec.level == 1
    assert spec.generators == ()
    assert spec.ambient.params.c == 0


def test_parse_flat_and_nested_generators_agree():
    flat = parse_problem('{"ell": 3, "generators": [[1, 1, 0, 1], [2, 0, 0, 1]]}')
    nested = parse_problem('{"ell": 3, "generators": [[[1, 1], [0, 1]], [[2, 0], [0, 1]]]}')
    assert flat == nested


@pytest.mark.parametrize("text", [
    '{"ell": 3, "ambient": {"kind": "cartan"}}',
    '{"ell": 4}',
    '{"ell": 3, "colour": "red"}',
    '{"ell": 3, "ambient": {"kind": "torus", "d": 2}}',
    '{"ell": 3, "generators": [[1, 0, 0]]}',
    '{"ell": 3, "ambient": {"kind": "cartan", "d": 2}, "generators": [[1, 1, 0, 1]]}',
    '{"ell": 3, "ambient": {"kind": "cartan", "c": 2, "d": 1}, "generators": [[1, 0, 0, 1]]}',
    '[1, 2]',
])
def test_parse_rejects(text):
    with pytest.raises(SpecError):
        parse_problem(text)


def test_parse_reports_json_position():
    with pytest.raises(SpecError) as err:
        parse_problem('{"ell": 3,\n "level": }')
    assert err.value.line == 2


def test_zero_parameters_are_not_a_ring():
    with pytest.raises(InvalidRingError):
        parse_problem('{"ell": 3, "ambient": {"kind": "cartan", "c": 0, "d": 0}}')


def test_dump_round_trip(tmp_path):
    spec = load_problem(SPECS_DIR / "normalizer_nonsplit_l3_dihedral.json")
    assert parse_problem(json.dumps(problem_to_dict(spec))) == spec
    out = tmp_path / "dumped.json"
    assert main(["classify", spec_path("gl2_l3_borel"), "--dump-spec", str(out), "-q"]) == 0
    assert load_problem(out) == load_problem(SPECS_DIR / "gl2_l3_borel.json")


def test_classify_nonsplit(write_spec, capsys):
    path = write_spec({"ell": 5, "ambient": {"kind": "cartan", "c": 0, "d": 2}})
    assert main(["classify", path]) == 0
    out = capsys.readouterr().out
    assert "nonsplit, #C(1)=24, 𝕋=(25,24,0)" in out


def test_classify_subgroup(capsys):
    assert main(["classify", spec_path("gl2_l2_index8")]) == 0
    out = capsys.readouterr().out
    assert "GL2, #G(1)=6, 𝕋=(16,6,9)" in out
    assert "index 8" in out


@pytest.mark.parametrize("data", [
    {"ell": 3, "ambient": {"kind": "cartan", "c": 0, "d": 0}},
    '{"ell": 3',
    {"ell": 3, "shape": "round"},
])
def test_bad_problem_exits_2(write_spec, capsys, data):
    assert main(["measure", write_spec(data)]) == 2
    assert "Error: " in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert main(["classify", str(tmp_path / "absent.json")]) == 2


def test_measure_prints_family_and_table(capsys):
    assert main(["measure", spec_path("gl2_l2"), "--a-max", "1", "--b-max", "1"]) == 0
    out = capsys.readouterr().out
    assert "total mass 1/1" in out
    assert "a,b,mu\n" in out
    assert "0,0,1/3\n" in out


def test_measure_writes_csv(tmp_path, capsys):
    target = tmp_path / "table.csv"
    assert main(["measure", spec_path("nonsplit_l3"), "--csv", str(target)]) == 0
    assert "a,b,mu" not in capsys.readouterr().out
    rows = target.read_text(encoding='utf-8').splitlines()
    assert rows[0] == "a,b,mu"
    assert len(rows) == 1 + (2 + 1) * (3 + 1)
    assert "0,0,7/8" in rows
    assert "0,1,0/1" in rows


def test_verify_passes(capsys):
    assert main(["verify", spec_path("split_l3"), "--a-max", "1", "--b-max", "2"]) == 0
    out = capsys.readouterr().out
    assert "6/6 pairs agree." in out
    assert "FAIL" not in out


def test_verify_reports_mismatch():
    spec = load_problem(SPECS_DIR / "split_l3.json")
    records, text = cmd_verify(spec, ReportTemplateHandler(), 1, 1, family_fn=corrupt)
    assert [(r.a, r.b) for r in records if not r.passed] == [(0, 0)]
    assert "FAIL (0, 0)" in text
    assert "mismatches at (0, 0)" in text


def test_mismatch_exit_code_and_store(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "cmd_verify", partial(cmd_verify, family_fn=corrupt))
    db = tmp_path / "runs.db"
    assert main(["verify", spec_path("split_l3"), "--a-max", "1", "--b-max", "1", "--db", str(db)]) == 4
    run = RunStore(db).get_all_runs()[0]
    assert run['status'] == 'mismatch'
    assert run['summary'] == "3/4 pairs agree"


def test_budget_exceeded_exits_3(capsys):
    assert main(["measure", spec_path("gl2_l3"), "--budget", "10"]) == 3
    assert "budget" in capsys.readouterr().err


def test_runs_are_recorded(tmp_path, capsys):
    db = tmp_path / "store" / "runs.db"
    assert main(["runs", "--db", str(db)]) == 0
    assert "No recorded runs" in capsys.readouterr().out

    assert main(["measure", spec_path("split_l3"), "--db", str(db), "-q"]) == 0
    assert main(["classify", spec_path("gl2_l3"), "--db", str(db), "-q"]) == 0
    capsys.readouterr()
    assert main(["runs", "--db", str(db)]) == 0
    out = capsys.readouterr().out
    assert "measure" in out and "classify" in out
    assert out.count("completed") == 2

    store = RunStore(db)
    measured = next(r for r in store.get_all_runs() if r['command'] == 'measure')
    info = store.get_run_info(measured['id'])
    assert info['cells']
    assert json.loads(info['spec'])['ambient'] == {'kind': 'cartan', 'c': 0, 'd': 1}


def test_failed_run_is_recorded(tmp_path):
    db = tmp_path / "runs.db"
    assert main(["measure", spec_path("gl2_l3"), "--budget", "10", "--db", str(db)]) == 3
    run = RunStore(db).get_all_runs()[0]
    assert run['status'] == 'error'
    assert "budget" in run['summary']
