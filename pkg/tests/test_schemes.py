from __future__ import annotations

from pathlib import Path

import pytest

from ssoeval.cli import main
from ssoeval.evaluator import prepare, run_scenario
from ssoeval.schemes import (
    REGISTRY,
    SetupImpossible,
    SwitchImpossible,
    UnknownScheme,
    get_driver,
)
from ssoeval.schemes.base import sp_atom
from ssoeval.terms import Atom, PrivKey, Strength, SymKey, subterms
from ssoeval.world import Annotation, Fault, FaultKind, Kind, Role, Scenario

GOLDEN = Path(__file__).parent / "golden"
ALL = sorted(REGISTRY)


def _prep(name, **features):
    driver = get_driver(name, **features)
    return driver, prepare(driver, Scenario(name))


def test_registry_names():
    assert len(REGISTRY) == 17
    assert {"saw-augmented", "mobile-connect-augmented", "uaf-attested"} <= set(REGISTRY)


def test_unknown_scheme():
    with pytest.raises(UnknownScheme):
        get_driver("kerberos")


def test_unknown_feature_rejected():
    with pytest.raises(ValueError):
        get_driver("persona", pairwise_ids=True)


@pytest.mark.parametrize("name", ALL)
def test_honest_run_succeeds_everywhere(name):
    driver, prep = _prep(name)
    w = prep.world
    assert set(prep.logins) == {"sp1", "sp2"}
    # the account each SP bound is the one the driver reports
    for sp in prep.sps:
        assert w.accounts[("alice", sp)] == driver.identity(w, "alice", sp)


@pytest.mark.parametrize("name", ALL)
def test_golden_trace_is_stable(name, capsys):
    assert main(["trace", "--scheme", name]) == 0
    got = capsys.readouterr().out
    assert got == (GOLDEN / f"{name}.trace").read_text(encoding="utf-8")


@pytest.mark.parametrize("name", ALL)
def test_descriptor_is_well_formed(name):
    d = REGISTRY[name].descriptor
    assert d.name == name
    assert set(d.coords()) == {"A", "G", "C", "T", "M"}


@pytest.mark.parametrize("name", ALL)
def test_acceptance_is_not_met_by_empty_knowledge(name):
    from ssoeval.evaluator import impersonate

    driver, prep = _prep(name)
    assert not impersonate(driver, prep.world, "alice", "sp1", []).success


def test_outage_makes_remote_login_fail():
    driver = get_driver("oauth2")
    sc = Scenario("oauth2", faults=(Fault(FaultKind.OUTAGE, ("idp1",), "authenticate"),))
    _, outcomes = run_scenario(driver, sc)
    assert all("failed" in o for o in outcomes)


def test_persona_certificate_expires():
    driver, prep = _prep("persona")
    w = prep.world
    w.inject(Fault(FaultKind.OUTAGE, ("idp1", "idp2")))
    assert driver.authenticate(w, "alice", "sp1").success
    w.advance(10**6)
    assert not driver.authenticate(w, "alice", "sp1").success


def test_persona_cert_lifetime_feature():
    driver, prep = _prep("persona", cert_lifetime=10**7)
    w = prep.world
    w.inject(Fault(FaultKind.OUTAGE, ("idp1", "idp2")))
    w.advance(10**6)
    assert driver.authenticate(w, "alice", "sp1").success


def test_oauth_pairwise_ids_unlink_accounts():
    _, plain = _prep("oidc")
    _, pairwise = _prep("oidc", pairwise_ids=True)
    assert plain.world.accounts[("alice", "sp1")] == plain.world.accounts[("alice", "sp2")]
    assert pairwise.world.accounts[("alice", "sp1")] != pairwise.world.accounts[("alice", "sp2")]


def test_oauth_shares_profile_data_only_with_scope():
    def shared(**f):
        _, prep = _prep("oauth2", **f)
        return any(e.annotation is Annotation.PROFILE_DATA_SHARED for e in prep.world.trace)

    assert shared()
    assert not shared(profile_scope=False)


def test_securekey_banks_never_see_sp_identifiers():
    _, prep = _prep("securekey")
    w = prep.world
    for bank in ("bank1", "bank2"):
        seen = {s for t in w.observe(bank) for s in subterms(t)}
        assert sp_atom("sp1") not in seen and sp_atom("sp2") not in seen


def test_securekey_pseudonyms_differ_per_sp():
    _, prep = _prep("securekey")
    assert prep.world.accounts[("alice", "sp1")] != prep.world.accounts[("alice", "sp2")]


def test_mobile_connect_sim_key_is_hardware_bound():
    _, prep = _prep("mobile-connect-loa3")
    w = prep.world
    sim = [t for t in w["alice-phone"].store() if isinstance(t, PrivKey)]
    assert sim and all(not w.classes[k.id].extractable for k in sim)


def test_mobile_connect_loa2_uses_otp():
    _, prep = _prep("mobile-connect-loa2")
    ev = [e for e in prep.logins["sp1"] if e.annotation is Annotation.OOB_VERIFICATION]
    assert ev and all(e.channel.kind is Kind.SMS for e in ev)


def test_uaf_attested_cannot_switch():
    driver, prep = _prep("uaf-attested")
    with pytest.raises(SwitchImpossible):
        driver.switch_idp(prep.world, "alice")


def test_uaf_nonattested_switch_keeps_accounts():
    driver, prep = _prep("uaf-nonattested")
    res = driver.switch_idp(prep.world, "alice")
    assert res.updated == []
    assert driver.authenticate(prep.world, "alice", "sp1").success


def test_sync15_setup_pairs_devices():
    driver, prep = _prep("sync15")
    events = driver.setup_device(prep.world, "alice", "alice-phone")
    assert any(e.channel.kind is Kind.PAIRING_OOB for e in events)
    assert driver.authenticate(prep.world, "alice", "sp1", "alice-phone").success


def test_sync20_setup_is_one_password():
    driver, prep = _prep("sync20")
    events = driver.setup_device(prep.world, "alice", "alice-phone")
    typed = [e for e in events if e.annotation is Annotation.USER_ACTION]
    assert len(typed) == 1


def test_sync20_vault_key_is_password_derived():
    _, prep = _prep("sync20")
    w = prep.world
    weak = [s for t in w["sync"].store() for s in subterms(t) if getattr(s, "id", None) in w.classes]
    assert any(w.classes[s.id].strength is Strength.WEAK for s in weak)


def test_saw_switch_forwards_mail():
    driver, prep = _prep("saw")
    res = driver.switch_idp(prep.world, "alice")
    assert res.interim_forwarding and res.updated


def test_saw_augmented_notifies_on_new_device():
    driver, prep = _prep("saw-augmented")
    notes = [e for e in prep.world.trace if e.annotation is Annotation.USER_NOTIFICATION]
    assert notes and all(e.channel.dst == "alice" for e in notes)
    # a known browser is not reported twice
    before = len(notes)
    driver.authenticate(prep.world, "alice", "sp1")
    after = [e for e in prep.world.trace if e.annotation is Annotation.USER_NOTIFICATION]
    assert len(after) == before


def test_shibboleth_without_discovery_registers_per_idp():
    def per_idp(**f):
        driver, prep = _prep("shibboleth", **f)
        w = prep.world
        return [
            e for e in prep.registration
            if e.annotation is Annotation.MANUAL_REGISTRATION and w[e.channel.dst].role is Role.IDP
        ]

    assert not per_idp()
    assert per_idp(discovery_service=False)


def test_impostor_terminal_keeps_no_site_password():
    _, prep = _prep("impostor")
    w = prep.world
    laptop = {s for t in w["alice-laptop"].store() for s in subterms(t)}
    assert not any(getattr(s, "id", "").startswith("sitepw") for s in laptop)


def test_impostor_proxy_fronts_every_sp_event():
    _, prep = _prep("impostor")
    for e in prep.logins["sp1"]:
        if "sp1" in (e.channel.src, e.channel.dst):
            assert {e.channel.src, e.channel.dst} == {"sp1", "impostor1"}


def test_setup_device_creates_a_user_owned_device():
    driver, prep = _prep("persona")
    driver.setup_device(prep.world, "alice", "alice-tablet")
    dev = prep.world["alice-tablet"]
    assert dev.role is Role.DEVICE and dev.owner == "alice"


def test_persona_fallback_bridge_and_mail_both_vouch():
    driver, prep = _prep("persona-fallback")
    assert driver.idps_of(prep.world, "alice") == ["fallback", "mail1"]


@pytest.mark.parametrize("name", ALL)
def test_no_attacker_key_in_honest_runs(name):
    _, prep = _prep(name)
    w = prep.world
    for p in w.principals.values():
        if p.id == "attacker":
            continue
        assert not any(s == PrivKey("attacker-key") for t in p.store() for s in subterms(t))


def test_symmetric_keys_are_classified_everywhere():
    for name in ALL:
        _, prep = _prep(name)
        w = prep.world
        for p in w.principals.values():
            for t in p.store():
                for s in subterms(t):
                    if isinstance(s, (SymKey, PrivKey)):
                        assert s.id in w.classes


def test_atoms_render():
    assert Atom("x").render() == "(atom x)"


def test_setup_impossible_is_an_exception():
    assert issubclass(SetupImpossible, Exception)
