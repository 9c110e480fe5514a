from __future__ import annotations

import csv
import io
import json

import pytest

from ssoeval.cli import main
from ssoeval.report import parse


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_run_all_matches():
    code, out, _ = run("run-all")
    assert code == 0
    assert out.endswith("MATCH\n")


def test_run_all_single_scheme():
    code, out, _ = run("run-all", "--scheme", "oauth2")
    assert code == 0
    assert len(parse(out, "markdown").rows) == 1


def test_run_all_csv_is_parseable():
    code, out, err = run("run-all", "--format", "csv", "--scheme", "saw,securekey")
    assert code == 0 and err == "MATCH\n"
    rows = list(csv.reader(io.StringIO(out)))
    assert [r[0] for r in rows[1:]] == ["saw", "securekey"]


def test_run_all_json_and_augmented():
    code, out, _ = run("run-all", "--format", "json", "--augmented", "--scheme", "saw-augmented")
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"][0]["cells"]["B11"]["verdict"] == "Partial"


def test_feature_override_produces_mismatch():
    code, out, _ = run("run-all", "--scheme", "shibboleth", "--feature", "pairwise_ids=false")
    assert code == 1
    assert "shibboleth B13" in out


def test_unrated_scheme_is_shown_not_compared():
    code, out, err = run("run-all", "--scheme", "mobile-connect-loa2")
    assert code == 0 and "not compared" in err


def test_eval_prints_trace_and_witness():
    code, out, _ = run("eval", "--scheme", "sync20", "--benefit", "B8c")
    assert code == 0
    assert out.startswith("[sync20] B8c: Partial")
    assert "guess-stretched" in out and "trace:" in out


def test_eval_without_trace():
    code, out, _ = run("eval", "--scheme", "uaf-attested", "--benefit", "B8a", "--trace", "none")
    assert code == 0 and "trace:" not in out


def test_eval_reports_expected_on_mismatch():
    code, out, _ = run("eval", "--scheme", "persona", "--benefit", "B4", "--feature", "cert_lifetime=100000000")
    assert code == 1 and "expected: Partial" in out


def test_classify_all_rows_match():
    code, out, _ = run("classify")
    assert code == 0
    lines = out.splitlines()[1:]
    assert len(lines) == 14 and not any("MISMATCH" in ln for ln in lines)


def test_classify_impostor():
    code, out, _ = run("classify", "--scheme", "impostor")
    assert out.splitlines()[1] == "impostor A5 G4 C2 T1 M1 | A5 G4 C2 T1 M1"


def test_classify_verbose_evidence():
    _, out, _ = run("classify", "--scheme", "saw", "-v")
    assert "  G=G3:" in out


def test_trace_from_scenario_document(tmp_path):
    doc = {"scheme": "oauth2", "faults": [{"kind": "Outage", "targets": ["idp1"], "activation": "authenticate"}]}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run("trace", "--scenario", str(path))
    assert code == 0
    assert "# alice@sp1: failed" in out


def test_trace_state_dump():
    code, out, _ = run("trace", "--scheme", "saw", "--state")
    assert code == 0 and "[sp1] role=SP" in out


@pytest.mark.parametrize(
    "argv",
    [
        ("run-all", "--scheme", "kerberos"),
        ("eval", "--scheme", "saw", "--benefit", "B99"),
        ("eval", "--benefit", "B1"),
        ("trace",),
        ("run-all", "--feature", "warp=9"),
        ("run-all", "--format", "xml"),
        ("frobnicate",),
        ("run-all", "--feature", "novalue"),
    ],
)
def test_usage_errors(argv):
    code, out, _ = run(*argv)
    assert code == 2 and out == ""


def test_bad_scenario_document(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run("trace", "--scenario", str(path))[0] == 2


def test_engine_error_exit_code(monkeypatch):
    from ssoeval import evaluator

    def boom(driver, sc):
        raise RuntimeError("kaput")

    monkeypatch.setitem(evaluator.RECIPES, "B2", boom)
    code, _, err = run("run-all", "--scheme", "saw")
    assert code == 3 and "(saw, B2)" in err


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("SSOEVAL_SEED", "41")
    a = run("trace", "--scheme", "persona")[1]
    b = run("trace", "--scheme", "persona", "--seed", "41")[1]
    c = run("trace", "--scheme", "persona", "--seed", "0")[1]
    assert a == b != c


def test_bad_seed_environment(monkeypatch):
    monkeypatch.setenv("SSOEVAL_SEED", "many")
    assert run("trace", "--scheme", "saw")[0] == 2


def test_output_is_deterministic():
    assert run("run-all", "--scheme", "securekey,sync20") == run("run-all", "--scheme", "securekey,sync20")
