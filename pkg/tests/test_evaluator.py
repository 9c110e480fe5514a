from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from ssoeval.evaluator import (
    CellError,
    EvaluationError,
    evaluate,
    evaluate_matrix,
    classify,
    impersonate,
    prepare,
)
from ssoeval.report import BENEFITS, Cell, Footnote, Verdict
from ssoeval.schemes import get_driver
from ssoeval.terms import WeakSecret
from ssoeval.world import Annotation, Fault, FaultKind, Scenario

P, H, N = Verdict.PROVIDED, Verdict.PARTIAL, Verdict.NOT_PROVIDED
SECURITY = ("B7", "B8a", "B8b", "B8c", "B11")


def _prep(name, **features):
    driver = get_driver(name, **features)
    return driver, prepare(driver, Scenario(name))


@pytest.mark.parametrize(
    "scheme, benefit, verdict",
    [
        ("sync15", "B11", P),
        ("sync20", "B11", H),
        ("oauth2", "B12", N),
        ("securekey", "B13", P),
        ("saw-augmented", "B11", H),
        ("securekey", "B12", P),
        ("sync20", "B8c", H),
        ("uaf-attested", "B8a", P),
    ],
)
def test_documented_verdicts(scheme, benefit, verdict):
    assert evaluate(scheme, benefit).cell.verdict is verdict


def test_saw_augmented_detectability_witness():
    ev = evaluate("saw-augmented", "B11")
    assert any(e.annotation is Annotation.USER_NOTIFICATION for e in ev.trace)


def test_mobile_connect_augmented_detectability_witness():
    ev = evaluate("mobile-connect-augmented", "B11")
    assert ev.cell == Cell(H)
    assert any(e.annotation is Annotation.KEY_REVOCATION for e in ev.trace)


def test_sync20_b8c_witness_guesses_the_stretched_password():
    ev = evaluate("sync20", "B8c")
    assert any(w.startswith("guess-stretched") for w in ev.witness)


def test_two_third_parties_footnote():
    for scheme in ("securekey", "persona-fallback"):
        assert evaluate(scheme, "B11").cell == Cell(N, Footnote.TWO_THIRD_PARTIES)
    assert evaluate("oauth2", "B11").cell == Cell(N)


def test_optional_feature_footnote_only_when_enabled():
    assert evaluate("shibboleth", "B13").cell == Cell(P, Footnote.OPTIONAL_FEATURE)
    assert evaluate("shibboleth", "B13", features={"pairwise_ids": False}).cell == Cell(N)


def test_b1_switch_impossible_is_not_provided():
    ev = evaluate("uaf-attested", "B1")
    assert ev.cell == Cell(N) and "impossible" in ev.notes[0]


def test_b10_without_visible_idp_is_not_provided():
    assert evaluate("uaf-nonattested", "B10").cell == Cell(N)
    assert evaluate("uaf-attested", "B10").cell == Cell(P)


def test_oauth_idp_leak_yields_impersonation_by_guessing():
    driver, prep = _prep("oauth2")
    w = prep.world
    imp = impersonate(driver, w, "alice", "sp1", w.leak("idp1"))
    assert imp.success and not imp.needs_stretched
    # the IdP keeps only a hash, so the password must be guessed offline
    assert any(s.startswith("guess:") for s in imp.witness)


def test_uaf_attested_device_leak_does_not_help():
    driver, prep = _prep("uaf-attested")
    w = prep.world
    assert not impersonate(driver, w, "alice", "sp1", w.leak("alice-laptop")).success


def test_unknown_benefit():
    with pytest.raises(KeyError):
        evaluate("saw", "B99")


def test_prepare_raises_when_honest_run_fails():
    driver = get_driver("oauth2")
    sc = Scenario("oauth2", faults=(Fault(FaultKind.OUTAGE, ("idp1",), "authenticate"),))
    with pytest.raises(EvaluationError):
        prepare(driver, sc)


@pytest.mark.parametrize("scheme", ["openid2", "oauth2", "persona", "saw", "securekey", "sync20", "impostor"])
def test_non_provided_security_verdicts_carry_a_witness(scheme):
    for b in SECURITY:
        ev = evaluate(scheme, b)
        if ev.cell.verdict is not P:
            assert ev.witness or ev.trace, (scheme, b)


@pytest.mark.parametrize("scheme", ["openid2", "saw", "sync15"])
def test_every_evidence_renders(scheme):
    for b in BENEFITS:
        text = evaluate(scheme, b).render()
        assert text.startswith(f"{b}: ")


@pytest.mark.parametrize(
    "scheme, coords",
    [
        ("persona", {"A": "A1", "G": "G2", "C": "C2", "M": "M1"}),
        ("impostor", {"A": "A5", "G": "G4", "C": "C2", "M": "M1"}),
        ("uaf-attested", {"A": "A6", "G": "G1", "C": "C2", "T": "T2b", "M": "M3"}),
        ("mobile-connect-loa3", {"A": "A3", "T": "T1b-ii", "M": "M2"}),
        ("sync15", {"A": "A5", "G": "G3", "T": "T2a", "M": "M4"}),
    ],
)
def test_classifier_examples(scheme, coords):
    got = classify(scheme).coords
    assert {k: got[k] for k in coords} == coords


def test_classifier_reports_evidence_for_every_axis():
    res = classify("saw")
    assert set(res.evidence) == {"A", "G", "C", "T", "M"}
    assert all(res.evidence.values())


def test_classifier_ignores_declared_descriptor(monkeypatch):
    driver = get_driver("oauth2")
    monkeypatch.setattr(type(driver), "descriptor", None)
    assert classify(driver).coords["A"] == "A2"


def test_mobile_connect_loa2_is_single_factor():
    assert classify("mobile-connect-loa2").coords["T"] == "T1a"


def test_matrix_for_two_schemes():
    m, evidence = evaluate_matrix(["saw", "oauth2"])
    assert m.rows == ["saw", "oauth2"]
    m.check_populated()
    assert ("saw", "B1") in evidence


def test_engine_errors_name_the_cell(monkeypatch):
    from ssoeval import evaluator

    def boom(driver, sc):
        raise RuntimeError("kaput")

    monkeypatch.setitem(evaluator.RECIPES, "B3", boom)
    with pytest.raises(CellError) as info:
        evaluate_matrix(["saw"])
    assert info.value.scheme == "saw" and info.value.column == "B3"


# -- impersonation is monotone in attacker knowledge ----------------------

_MONO = ["oauth2", "sync20", "persona-fallback", "securekey", "saw-augmented"]
_CACHE: dict = {}


def _pool(name):
    if name not in _CACHE:
        driver, prep = _prep(name)
        w = prep.world
        pool = set()
        for pid in w.principals:
            pool |= w.leak(pid)
        _CACHE[name] = (driver, w, sorted(pool, key=lambda t: t.render()))
    return _CACHE[name]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_MONO), st.data())
def test_impersonation_is_monotone(name, data):
    driver, w, pool = _pool(name)
    small = data.draw(st.sets(st.sampled_from(pool), max_size=6))
    extra = data.draw(st.sets(st.sampled_from(pool), max_size=6))
    if impersonate(driver, w, "alice", "sp1", small).success:
        assert impersonate(driver, w, "alice", "sp1", small | extra).success


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(_MONO), st.data())
def test_detectable_success_names_the_event(name, data):
    driver, w, pool = _pool(name)
    k = data.draw(st.sets(st.sampled_from(pool), max_size=8))
    imp = impersonate(driver, w, "alice", "sp1", k)
    if imp.needs_detectable:
        assert imp.success and imp.detections


def test_known_password_alone_suffices_for_password_schemes():
    driver, prep = _prep("impostor")
    w = prep.world
    pw = w["alice"].config["creds"]["sp1"][1]
    assert isinstance(pw, WeakSecret)
    assert impersonate(driver, w, "alice", "sp1", [pw]).success
