import sqlite3

import pytest

from eigenmeasure.db import RunStore


@pytest.fixture
def store(tmp_path):
    return RunStore(tmp_path / "data" / "runs.db")


def test_new_run_is_pending(store):
    run_id = store.create_run("measure", '{"ell": 3}')
    info = store.get_run_info(run_id)
    assert info['status'] == 'pending'
    assert info['command'] == 'measure'
    assert info['spec'] == '{"ell": 3}'
    assert info['cells'] == [] and info['checks'] == []


def test_cells_and_checks_round_trip(store):
    run_id = store.create_run("verify")
    cells = [
        {'a_set': '{0}', 'b_set': '{0}', 'constant': '1/4', 'law': '1/4 * 3^-(2a+b)', 'provenance': 'counted'},
        {'a_set': '[1,inf)', 'b_set': '[1,inf)', 'constant': '2/1', 'law': '2/1 * 3^-(2a+b)'},
    ]
    assert store.add_cells(run_id, cells) == 2
    checks = [
        {'a': 1, 'b': 0, 'expected': '1/9', 'observed': '1/9', 'passed': True},
        {'a': 0, 'b': 0, 'expected': '1/2', 'observed': '1/4', 'passed': False},
    ]
    assert store.add_checks(run_id, checks) == 2

    info = store.get_run_info(run_id)
    assert [c['constant'] for c in info['cells']] == ['1/4', '2/1']
    assert info['cells'][1]['provenance'] is None
    assert [(c['a'], c['b'], c['passed']) for c in info['checks']] == [(0, 0, False), (1, 0, True)]


def test_update_run(store):
    run_id = store.create_run("classify")
    store.update_run(run_id, {'status': 'completed', 'summary': 'classified', 'ignored': 1})
    info = store.get_run_info(run_id)
    assert info['status'] == 'completed'
    assert info['summary'] == 'classified'
    with pytest.raises(ValueError):
        store.update_run(run_id, {'status': 'finished'})


def test_schema_rejects_unknown_status(store):
    run_id = store.create_run("classify")
    with store.get_connection() as conn:
        with pytest.raises(sqlite3.IntegrityError):
            conn.execute("UPDATE Runs SET status = 'lost' WHERE id = ?", (run_id,))


def test_listing_and_delete(store):
    first = store.create_run("measure")
    second = store.create_run("verify")
    store.add_cells(first, [{'a_set': '{0}', 'b_set': '{0}', 'constant': '1/1', 'law': '1/1 * 2^-(4a+b)'}])
    assert [r['id'] for r in store.get_all_runs()] == [second, first]

    assert store.delete_run(first)
    assert store.get_run_info(first) is None
    assert not store.delete_run(first)
    with store.get_connection() as conn:
        assert conn.execute("SELECT COUNT(*) FROM Cells").fetchone()[0] == 0
    assert [r['id'] for r in store.get_all_runs()] == [second]


def test_reopening_keeps_runs(tmp_path):
    path = tmp_path / "runs.db"
    run_id = RunStore(path).create_run("measure")
    assert RunStore(path).get_run_info(run_id)['command'] == 'measure'
