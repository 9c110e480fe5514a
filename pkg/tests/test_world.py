from __future__ import annotations

import json

import pytest

from ssoeval.terms import Atom, ClassificationMissing, Hash, Nonce, Scope, SymKey, tup
from ssoeval.world import (
    ATTACKER,
    Annotation,
    DeliveryFailure,
    Fault,
    FaultKind,
    Kind,
    Principal,
    Role,
    Scenario,
    UnknownPrincipal,
    World,
    mentions,
)


@pytest.fixture
def world():
    w = World(seed=7)
    w.add(Principal("alice", Role.USER))
    w.add(Principal("laptop", Role.DEVICE, owner="alice"))
    w.add(Principal("token", Role.DEVICE, owner="alice", hardware_token=True))
    w.add(Principal("idp", Role.IDP))
    w.add(Principal("sp", Role.SP))
    return w


def test_send_records_trace_and_knowledge(world):
    n = world.nonce("sp")
    ev = world.send("sp", "laptop", n)
    assert ev.seq == 0 and world.trace == [ev]
    assert n in world["laptop"].knowledge and n in world["sp"].sent


def test_redirect_must_go_through_a_device(world):
    with pytest.raises(ValueError):
        world.send("sp", "idp", Atom("x"), Kind.REDIRECT)
    with pytest.raises(ValueError):
        world.send("sp", "idp", Atom("x"), Kind.REDIRECT, via="sp")
    ev = world.send("sp", "idp", Atom("x"), Kind.REDIRECT, via="laptop")
    assert Atom("x") in world["laptop"].knowledge
    assert "sp->laptop->idp" in ev.render()


def test_email_is_not_confidential(world):
    world.send("sp", "idp", Atom("mail"), Kind.EMAIL)
    world.send("sp", "idp", Atom("web"))
    assert world.observer == {Atom("mail")}


def test_unclassified_secret_is_rejected(world):
    with pytest.raises(ClassificationMissing):
        world.send("sp", "idp", Nonce("stray"))


def test_unknown_principal(world):
    with pytest.raises(UnknownPrincipal):
        world["nobody"]


def test_duplicate_principal_rejected(world):
    with pytest.raises(ValueError):
        world.add(Principal("sp", Role.SP))


def test_outage_blocks_delivery(world):
    world.inject(Fault(FaultKind.OUTAGE, ("idp",)))
    with pytest.raises(DeliveryFailure):
        world.send("laptop", "idp", Atom("hello"))
    world.clear_outage("idp")
    world.send("laptop", "idp", Atom("hello"))


def test_scheduled_fault_waits_for_its_phase(world):
    world.schedule(Fault(FaultKind.OUTAGE, ("idp",), activation="authenticate"))
    assert world["idp"].online
    world.phase("authenticate")
    assert not world["idp"].online


def test_leak_withholds_hardware_and_server_secrets(world):
    hw = world.keypair("token", "hw", extractable=False)
    srv = world.symkey("idp", "srv", scope=Scope.SERVER)
    soft = world.symkey("idp", "soft")
    for k, t in (("hw", hw), ("srv", srv), ("soft", soft)):
        world.put("idp", k, t)
    assert world.leak("idp") == {soft}


def test_leak_scrubs_withheld_secret_out_of_a_stored_message(world):
    srv = world.symkey("idp", "srv", scope=Scope.SERVER)
    world.send("idp", "sp", tup(Atom("associate"), srv))
    assert world.leak("sp") == {Atom("associate")}
    # inside a one-way function the key cannot be read, so the term stays
    world.send("idp", "sp", Hash(srv))
    assert Hash(srv) in world.leak("sp")


def test_insider_view_keeps_own_server_secrets(world):
    srv = world.symkey("idp", "srv", scope=Scope.SERVER)
    world.put("idp", "srv", srv)
    assert srv in world.insider_view("idp")
    assert srv not in world.leak("idp")


def test_insider_view_drops_foreign_hardware_keys(world):
    hw = world.keypair("token", "hw", extractable=False)
    world.put("idp", "odd", hw)
    assert hw not in world.insider_view("idp")


def test_store_leak_fault_feeds_attacker(world):
    pw = world.password("alice")
    world.put("sp", "pw", Hash(pw))
    world.inject(Fault(FaultKind.STORE_LEAK, ("sp",)))
    assert Hash(pw) in world[ATTACKER].knowledge


def test_collusion_requires_sps(world):
    with pytest.raises(ValueError):
        world.inject(Fault(FaultKind.COLLUSION_OF_SPS, ("idp",)))


def test_forget_drops_transient_knowledge(world):
    world.send("alice", "laptop", Atom("typed"), annotation=Annotation.USER_ACTION)
    world.forget("laptop", Atom("typed"))
    assert Atom("typed") not in world["laptop"].store()


def test_fresh_is_seeded():
    a, b = World(seed=3), World(seed=3)
    for w in (a, b):
        w.add(Principal("p", Role.IDP))
    assert [a.nonce("p") for _ in range(5)] == [b.nonce("p") for _ in range(5)]


def test_fresh_rejects_non_secret_types(world):
    with pytest.raises(TypeError):
        world.fresh(Atom, "idp", "x")


def test_mint_keeps_first_issuer(world):
    ident = Atom("user:alice")
    world.mint("idp", ident)
    world.mint("sp", ident)
    assert world.minted[ident] == "idp"


def test_advance_moves_the_clock(world):
    before = world.step
    world.advance(100)
    assert world.step == before + 100


def test_mentions():
    assert mentions([tup(Atom("a"), SymKey("k"))], Atom("a"))
    assert not mentions([Atom("b")], Atom("a"))


def test_scenario_document_roundtrip(tmp_path):
    doc = {
        "scheme": "oauth2",
        "seed": 5,
        "faults": [{"kind": "Outage", "targets": ["idp1"], "activation": "authenticate"}],
    }
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    sc = Scenario.load(str(path))
    assert sc.seed == 5 and sc.users == ("alice",)
    assert sc.faults == (Fault(FaultKind.OUTAGE, ("idp1",), "authenticate"),)


def test_scenario_rejects_unknown_keys():
    with pytest.raises(ValueError):
        Scenario.from_dict({"scheme": "saw", "colour": "blue"})
