import pytest

from eigenmeasure.report import ReportTemplateHandler


@pytest.fixture
def reports():
    return ReportTemplateHandler()


def test_loads_the_report_templates(reports):
    assert set(reports.templates) == {'classify', 'family', 'verify'}
    assert reports.get_template('absent') is None


def test_verify_report(reports):
    checks = [
        {'a': 0, 'b': 0, 'expected': '1/4', 'observed': '1/4', 'passed': True},
        {'a': 0, 'b': 1, 'expected': '1/3', 'observed': '1/6', 'passed': False},
    ]
    text = reports.format_template('verify', group="G(1)", checks=checks, passed=1, failed=["(0, 1)"])
    assert "PASS (0, 0): family 1/4, count 1/4" in text
    assert "FAIL (0, 1): family 1/3, count 1/6" in text
    assert "1/2 pairs agree; mismatches at (0, 1)." in text


def test_family_report_lists_cells(reports):
    cells = [{'a_set': '{0}', 'b_set': '[1,inf)', 'constant': '5/6', 'law': '5/6 * 3^-(4a+b)',
              'provenance': 'counted'}]
    text = reports.format_template('family', group="G(1)", ell=3, dim=4, mass="1/1", cells=cells)
    assert "| {0} | [1,inf) | 5/6 | 5/6 * 3^-(4a+b) | counted |" in text
    assert "3^-(4a+b) on each cell; total mass 1/1" in text


def test_unknown_template(reports):
    with pytest.raises(ValueError, match="not found"):
        reports.format_template('absent')


def test_missing_variable_fails(reports):
    with pytest.raises(ValueError, match="verify"):
        reports.format_template('verify', group="G(1)")


def test_custom_directory(tmp_path):
    (tmp_path / "note.md").write_text("ell = {{ ell }}\n", encoding='utf-8')
    handler = ReportTemplateHandler(tmp_path)
    assert handler.format_template('note', ell=7).strip() == "ell = 7"
