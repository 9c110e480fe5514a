"""Benefit recipes, the attacker search and the taxonomy classifier.

Every benefit is decided by a fixed, deterministic scenario run in a fresh
world.  Security benefits reduce to :func:`impersonate`: starting from some
attacker knowledge, saturate it under the derivation rules and the
driver's honest services until one of the SP's acceptance sets is
synthesisable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .report import (
    AXES,
    BENEFITS,
    Cell,
    EvaluationMatrix,
    Footnote,
    Verdict,
)
from .schemes import Driver, SetupImpossible, SwitchImpossible, get_driver
from .schemes.base import ATTACKER_KEY, Service, sp_atom
from .terms import (
    Atom,
    Derivation,
    PrivKey,
    PubKey,
    SECRET_TYPES,
    Sign,
    SymKey,
    Term,
    WeakSecret,
    can_derive,
    secret_material,
    subterms,
    tup,
)
from .world import (
    ATTACKER,
    REMOTE_ROLES,
    Annotation,
    Fault,
    FaultKind,
    Kind,
    Role,
    Scenario,
    TraceEvent,
    World,
)

A = Annotation
P, H, N = Verdict.PROVIDED, Verdict.PARTIAL, Verdict.NOT_PROVIDED


class EvaluationError(RuntimeError):
    """The honest baseline of a scenario did not complete."""


class ClassificationAmbiguous(RuntimeError):
    pass


class CellError(RuntimeError):
    """An engine failure while computing one (scheme, column) cell."""

    def __init__(self, scheme: str, column: str, cause: BaseException):
        super().__init__(f"({scheme}, {column}): {type(cause).__name__}: {cause}")
        self.scheme, self.column, self.cause = scheme, column, cause


# -- impersonation ----------------------------------------------------------


@dataclass
class Impersonation:
    success: bool
    needs_detectable: bool = False
    needs_stretched: bool = False
    services: list[Service] = field(default_factory=list)
    witness: list[str] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return self.success and (self.needs_detectable or self.needs_stretched)

    @property
    def detections(self) -> list[Annotation]:
        return [s.detectable for s in self.services if s.detectable is not None]


def _attempt(world, services, targets, knowledge, *, detectable: bool, stretched: bool):
    have = set(knowledge) | {ATTACKER_KEY}
    used: list[Service] = []
    pending = [s for s in services if detectable or s.detectable is None]
    while True:
        d = Derivation(have, world.classes, stretched_guessing=stretched)
        for alt in targets:
            if all(t in d for t in alt):
                return d, alt, used
        progressed = False
        for s in list(pending):
            if all(r in d for r in s.requires):
                have.update(s.yields)
                used.append(s)
                pending.remove(s)
                progressed = True
        if not progressed:
            return d, None, used


def impersonate(driver: Driver, world: World, victim: str, sp: str, knowledge: Iterable[Term]) -> Impersonation:
    """Can an attacker holding ``knowledge`` open a session as ``victim``?

    The search is exhaustive over the driver's acceptance sets; honest
    services are queried whenever their inputs are derivable.  The result
    also records whether success hinged on a service the victim would
    notice, or on guessing a key-stretched password.
    """
    knowledge = set(knowledge)
    targets = driver.acceptance(world, victim, sp)
    services = driver.services(world, victim, sp)
    d, alt, used = _attempt(world, services, targets, knowledge, detectable=True, stretched=True)
    if alt is None:
        return Impersonation(False, witness=["no acceptance set is derivable"])
    quiet = _attempt(world, services, targets, knowledge, detectable=False, stretched=True)[1] is not None
    fast = _attempt(world, services, targets, knowledge, detectable=True, stretched=False)[1] is not None
    witness = []
    for s in used:
        for r in s.requires:
            witness.extend(d.explain(r))
        witness.append(f"service {s.provider}:{s.name}" + (f" [{s.detectable.value}]" if s.detectable else ""))
    for t in alt:
        witness.extend(d.explain(t))
    return Impersonation(True, not quiet, not fast, used, witness)


def replay(world: World, victim: str, imp: Impersonation) -> list[TraceEvent]:
    """Act out the service calls of a successful impersonation in ``world``."""
    mark = len(world.trace)
    world.phase("attack")
    for s in imp.services:
        world.send(ATTACKER, s.provider, tup(Atom("request"), *s.requires))
        world.send(s.provider, ATTACKER, tup(*s.yields))
        if s.detectable is not None:
            world.send(s.provider, victim, Atom(f"notice:{s.name}"), Kind.SMS, s.detectable)
    return world.trace[mark:]


# -- evidence ---------------------------------------------------------------


@dataclass
class Evidence:
    benefit: str
    cell: Cell
    notes: list[str] = field(default_factory=list)
    trace: list[TraceEvent] = field(default_factory=list)
    witness: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [f"{self.benefit}: {self.cell}"]
        lines += [f"  note: {n}" for n in self.notes]
        if self.witness:
            lines.append("  witness:")
            lines += [f"    {w}" for w in self.witness]
        if self.trace:
            lines.append("  trace:")
            lines += [f"    {ev.render()}" for ev in self.trace]
        return "\n".join(lines) + "\n"


@dataclass
class Prepared:
    world: World
    victim: str
    sps: list[str]
    registration: list[TraceEvent]
    logins: dict[str, list[TraceEvent]]


def prepare(driver: Driver, scenario: Scenario) -> Prepared:
    """Deploy, register every SP and log the victim in to every SP once."""
    world = driver.deploy(scenario)
    sps = sorted(p.id for p in world.by_role(Role.SP))
    reg: list[TraceEvent] = []
    world.phase("register")
    for sp in sps:
        reg += driver.register_sp(world, sp)
    victim = scenario.users[0]
    logins = {}
    for user in scenario.users:
        for sp in sps:
            out = driver.authenticate(world, user, sp)
            if not out.success:
                raise EvaluationError(f"{driver.name}: honest login of {user} at {sp} failed: {out.failure}")
            if user == victim:
                logins[sp] = out.trace
    return Prepared(world, victim, sps, reg, logins)


def run_scenario(driver: Driver, scenario: Scenario) -> tuple[World, list[str]]:
    """Deploy, register every SP and log every user in everywhere.

    Unlike :func:`prepare` this never raises on a failed login; outcomes are
    returned as text so scenario documents with faults can be inspected.
    """
    world = driver.deploy(scenario)
    sps = sorted(p.id for p in world.by_role(Role.SP))
    world.phase("register")
    for sp in sps:
        driver.register_sp(world, sp)
    outcomes = []
    for user in scenario.users:
        for sp in sps:
            out = driver.authenticate(world, user, sp)
            outcomes.append(f"{user}@{sp}: " + ("ok" if out.success else f"failed: {out.failure}"))
    return world, outcomes


def _user_side(world: World, user: str) -> set[str]:
    return {user} | {d.id for d in world.devices_of(user)}


def _remote(world: World) -> list[str]:
    return sorted(p.id for p in world.principals.values() if p.role in REMOTE_ROLES)


def _vetting(events: Iterable[TraceEvent], world: World) -> list[TraceEvent]:
    return [
        e for e in events
        if e.annotation is A.MANUAL_REGISTRATION
        and world[e.channel.dst].role is Role.FEDERATION_OPERATOR
        and world[e.channel.src].role is not Role.SP
    ]


def _rooted(world: World, key: PrivKey, certs: set[Term], seen: frozenset = frozenset()) -> bool:
    """Does ``key`` chain up to a federation operator's signing key?"""
    owner = world.generator.get(key.id)
    if owner is not None and world[owner].role is Role.FEDERATION_OPERATOR:
        return True
    pub = PubKey(key.id)
    for c in certs:
        if not isinstance(c, Sign) or c.privkey == key or c.privkey in seen:
            continue
        if any(s == pub for s in subterms(c.payload)):
            if _rooted(world, c.privkey, certs, seen | {key}):
                return True
    return False


def _signs(terms: Iterable[Term]) -> set[Sign]:
    return {s for t in terms for s in subterms(t) if isinstance(s, Sign)}


# -- recipes ----------------------------------------------------------------

Recipe = Callable[[Driver, Scenario], Evidence]


def _b1(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    try:
        res = driver.switch_idp(w, prep.victim)
    except SwitchImpossible as exc:
        return Evidence("B1", Cell(N), [f"switch impossible: {exc}"])
    for sp in prep.sps:
        out = driver.authenticate(w, prep.victim, sp)
        if not out.success:
            return Evidence("B1", Cell(N), [f"login at {sp} fails after the switch: {out.failure}"], res.trace)
    notes = [f"switched {res.old_idp} -> {res.new_idp}; per-SP updates: {res.updated or 'none'}"]
    vetted = bool(_vetting(w.trace, w)) and any(e.channel.src == res.new_idp for e in _vetting(w.trace, w))
    if not res.updated:
        if vetted:
            notes.append(f"{res.new_idp} is vetted by the same federation operator (intra-federation switch)")
            return Evidence("B1", Cell(H), notes, res.trace)
        return Evidence("B1", Cell(P), notes, res.trace)
    if res.interim_forwarding:
        notes.append("old identity keeps working through forwarding while SPs are updated")
        return Evidence("B1", Cell(H), notes, res.trace)
    return Evidence("B1", Cell(N), notes, res.trace)


def _b2(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    device = f"{prep.victim}-fresh"
    try:
        events = driver.setup_device(w, prep.victim, device)
    except SetupImpossible as exc:
        return Evidence("B2", Cell(N), [f"setup impossible: {exc}"])
    out = driver.authenticate(w, prep.victim, prep.sps[0], device)
    if not out.success:
        return Evidence("B2", Cell(N), [f"fresh device cannot log in: {out.failure}"], events)
    if not events:
        return Evidence("B2", Cell(P), ["setup trace is empty"], out.trace)
    typed = [
        e for e in events
        if e.annotation is A.USER_ACTION and any(isinstance(s, WeakSecret) for s in subterms(e.payload))
    ]
    pairing = [e for e in events if e.channel.kind is Kind.PAIRING_OOB]
    enrol = [e for e in events if w[e.channel.dst].role is Role.SP]
    keys = [e for e in events if any(isinstance(s, (SymKey, PrivKey)) for s in secret_material(e.payload))]
    if len(typed) == 1 and not (pairing or enrol or keys):
        return Evidence("B2", Cell(H), ["setup is a single password entry"], events)
    notes = [f"setup: {len(events)} events, {len(pairing)} pairing, {len(enrol)} SP enrolments"]
    return Evidence("B2", Cell(N), notes, events)


def _b3(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    out = driver.authenticate(w, prep.victim, prep.sps[0])
    tokens = {d.id for d in w.devices_of(prep.victim) if d.hardware_token}
    touched = [e for e in out.trace if tokens & {e.channel.src, e.channel.dst, e.channel.via}]
    if touched:
        return Evidence("B3", Cell(N), [f"hardware token on the login path: {sorted(tokens)}"], touched)
    return Evidence("B3", Cell(P), ["no hardware token on the login path"], out.trace)


def _b4(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    remote = _remote(w)
    w.inject(Fault(FaultKind.OUTAGE, tuple(remote)))
    out = driver.authenticate(w, prep.victim, prep.sps[0])
    notes = [f"outage of {', '.join(remote) or 'nothing'}"]
    if not out.success:
        return Evidence("B4", Cell(N), notes + [f"login fails: {out.failure}"], out.trace)
    w.advance(10**6)
    later = driver.authenticate(w, prep.victim, prep.sps[0])
    if not later.success:
        notes.append(f"login works only within a validity window: {later.failure}")
        return Evidence("B4", Cell(H), notes, out.trace + later.trace)
    return Evidence("B4", Cell(P), notes, out.trace)


def _b5(driver, sc):
    w = driver.deploy(sc)
    vet = _vetting(w.trace, w)
    if vet:
        return Evidence("B5", Cell(N), ["IdPs are vetted by a federation operator"], vet)
    return Evidence("B5", Cell(P), ["no vetting events at deploy"], list(w.trace))


def _b6(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    per_idp = [
        e for e in prep.registration
        if e.annotation is A.MANUAL_REGISTRATION
        and w[e.channel.dst].role in (Role.IDP, Role.MAIL_PROVIDER, Role.BRIDGE_IDP)
    ]
    if per_idp:
        return Evidence("B6", Cell(N), [f"{len(per_idp)} per-IdP registrations"], per_idp)
    return Evidence("B6", Cell(P), ["no per-IdP registration"], prep.registration)


def _b7(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    mine = _user_side(w, prep.victim)
    held = []
    for sp in prep.sps:
        for key, val in sorted(w[sp].records.items()):
            for s in secret_material(val):
                if isinstance(s, SECRET_TYPES) and w.generator.get(s.id) in mine:
                    held.append(f"{sp}.{key} holds {s.render()}")
    if held:
        return Evidence("B7", Cell(N), sorted(set(held)), prep.registration + prep.logins[prep.sps[0]])
    imp = impersonate(driver, w, prep.victim, prep.sps[0], w.leak(prep.sps[0]))
    if imp.success:
        return Evidence("B7", Cell(N), ["leaked SP store suffices to log in"], prep.logins[prep.sps[0]], imp.witness)
    return Evidence("B7", Cell(P), ["SP stores no user secret and its store does not let an attacker in"], prep.logins[prep.sps[0]])


def _leak_verdict(benefit: str, driver: Driver, sc: Scenario, pick) -> Evidence:
    prep = prepare(driver, sc)
    w = prep.world
    targets = pick(w, prep.victim)
    if benefit == "B8a":
        groups = [("+".join(targets), targets)]
    else:
        groups = [(t, [t]) for t in targets]
    results = []
    for label, group in groups:
        known = set()
        for t in group:
            known |= w.leak(t)
        results.append((label, impersonate(driver, w, prep.victim, prep.sps[0], known)))
    wins = [(lbl, r) for lbl, r in results if r.success]
    if not wins:
        return Evidence(benefit, Cell(P), [f"leak of {', '.join(l for l, _ in results)} does not suffice"], prep.logins[prep.sps[0]])
    witness = [f"leak of {wins[0][0]}:"] + wins[0][1].witness
    trace = prep.logins[prep.sps[0]]
    if all(r.needs_stretched for _, r in wins):
        return Evidence(benefit, Cell(H), ["only offline guessing of a stretched password succeeds"], trace, witness)
    return Evidence(benefit, Cell(N), [f"impersonation after leak of {', '.join(l for l, _ in wins)}"], trace, witness)


def _b8a(driver, sc):
    return _leak_verdict("B8a", driver, sc, lambda w, v: sorted(d.id for d in w.devices_of(v)))


def _b8b(driver, sc):
    return _leak_verdict("B8b", driver, sc, lambda w, v: sorted(p.id for p in w.by_role(Role.SP)))


def _b8c(driver, sc):
    return _leak_verdict("B8c", driver, sc, lambda w, v: _remote(w))


def _b9(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    sp = prep.sps[0]
    delivered = [e.payload for e in prep.logins[sp] if e.channel.dst == sp]
    certs = set(_signs(delivered)) | _signs(w[sp].store())
    for p in w.by_role(Role.FEDERATION_OPERATOR):
        certs |= _signs(p.store() | p.sent)
    for s in sorted(_signs(delivered), key=lambda x: x.render()):
        if not any(isinstance(a, Atom) and a.name.startswith("loa:") for a in subterms(s.payload)):
            continue
        if _rooted(w, s.privkey, certs):
            return Evidence("B9", Cell(P), [f"LoA signed by {w.generator[s.privkey.id]}, rooted in a vetted key"],
                            [e for e in prep.logins[sp] if e.channel.dst == sp and s in set(subterms(e.payload))])
    return Evidence("B9", Cell(N), ["no LoA statement rooted in a vetted key"], prep.logins[sp])


def _b10(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    sp = prep.sps[0]
    blocked = driver.idp_domains(w, prep.victim)
    if not blocked:
        return Evidence("B10", Cell(N), ["the SP cannot tell which IdP vouches for the user"])
    w[sp].config["blocked"] = set(blocked)
    out = driver.authenticate(w, prep.victim, sp)
    if out.success:
        return Evidence("B10", Cell(N), [f"blacklisting {sorted(blocked)} does not stop the login"], out.trace)
    return Evidence("B10", Cell(P), [f"blacklist of {sorted(blocked)} rejects the login: {out.failure}"], out.trace)


def _b11(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    results = {p: impersonate(driver, w, prep.victim, prep.sps[0], w.insider_view(p)) for p in _remote(w)}
    wins = {p: r for p, r in results.items() if r.success}
    if not wins:
        return Evidence("B11", Cell(P), [f"no insider among {', '.join(results) or 'none'} can log in as the user"])
    full = sorted(p for p, r in wins.items() if not r.partial)
    foot = Footnote.TWO_THIRD_PARTIES if len(full) >= 2 else Footnote.NONE
    first = full[0] if full else sorted(wins)[0]
    witness = [f"insider {first}:"] + wins[first].witness
    trace = replay(w, prep.victim, wins[first])
    if not full:
        kinds = sorted({a.value for r in wins.values() for a in r.detections})
        why = f"detectable ({', '.join(kinds)})" if kinds else "needs offline guessing of a stretched password"
        return Evidence("B11", Cell(H), [f"insider impersonation by {', '.join(sorted(wins))} is {why}"], trace, witness)
    return Evidence("B11", Cell(N, foot), [f"insiders able to impersonate: {', '.join(full)}"], trace, witness)


def _b12(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    idps = driver.idps_of(w, prep.victim)
    if all(w[i].local_idp for i in idps):
        return Evidence("B12", Cell(P), ["the IdP is a user-controlled device"], prep.logins[prep.sps[0]])
    sp_ids = {sp_atom(sp) for sp in prep.sps}
    seen = sorted({f"{i} sees {s.render()}" for i in idps for t in w.observe(i) for s in subterms(t) if s in sp_ids})
    if seen:
        return Evidence("B12", Cell(N), seen, prep.logins[prep.sps[0]])
    return Evidence("B12", Cell(P), [f"{', '.join(idps)} never saw an SP identifier"], prep.logins[prep.sps[0]])


def _b13(driver, sc):
    prep = prepare(driver, sc)
    w = prep.world
    a, b = prep.sps[:2]
    w.inject(Fault(FaultKind.COLLUSION_OF_SPS, (a, b)))
    ida, idb = w.accounts[(prep.victim, a)], w.accounts[(prep.victim, b)]
    notes = [f"{a}: {ida.render()}", f"{b}: {idb.render()}"]

    def derivable(store, t):
        return not can_derive([], t, w.classes) and can_derive(store, t, w.classes)

    if ida == idb or derivable(w[a].store(), idb) or derivable(w[b].store(), ida):
        return Evidence("B13", Cell(N), notes + ["identifiers are linkable"], prep.logins[a] + prep.logins[b])
    return Evidence("B13", Cell(P), notes + ["identifiers are unlinkable"], prep.logins[a] + prep.logins[b])


def _b14(driver, sc):
    prep = prepare(driver, sc)
    shared = [e for e in prep.world.trace if e.annotation is A.PROFILE_DATA_SHARED]
    if shared:
        return Evidence("B14", Cell(N), ["profile data is released to SPs"], shared)
    return Evidence("B14", Cell(P), ["no profile data released"], prep.logins[prep.sps[0]])


RECIPES: dict[str, Recipe] = {
    "B1": _b1, "B2": _b2, "B3": _b3, "B4": _b4, "B5": _b5, "B6": _b6, "B7": _b7,
    "B8a": _b8a, "B8b": _b8b, "B8c": _b8c,
    "B9": _b9, "B10": _b10, "B11": _b11, "B12": _b12, "B13": _b13, "B14": _b14,
}


def evaluate(scheme: str | Driver, benefit: str, *, seed: int = 0, features: dict | None = None) -> Evidence:
    driver = scheme if isinstance(scheme, Driver) else get_driver(scheme, **(features or {}))
    if benefit not in RECIPES:
        raise KeyError(f"unknown benefit {benefit!r}")
    sc = Scenario(driver.name, seed=seed)
    ev = RECIPES[benefit](driver, sc)
    if ev.cell.verdict is P and ev.cell.footnote is Footnote.NONE:
        for feat in sorted(driver.optional_features):
            if not driver.features.get(feat):
                continue
            alt = type(driver)(**{**driver.features, feat: False})
            off = RECIPES[benefit](alt, sc)
            if off.cell.verdict.rank() < ev.cell.verdict.rank():
                ev.cell = Cell(ev.cell.verdict, Footnote.OPTIONAL_FEATURE)
                ev.notes.append(f"without {feat}: {off.cell.verdict.value}")
    return ev


# -- classifier -------------------------------------------------------------


@dataclass
class Classification:
    coords: dict[str, str]
    evidence: dict[str, str]


def classify(scheme: str | Driver, *, seed: int = 0, features: dict | None = None) -> Classification:
    driver = scheme if isinstance(scheme, Driver) else get_driver(scheme, **(features or {}))
    sc = Scenario(driver.name, seed=seed)
    prep = prepare(driver, sc)
    w, victim, sp = prep.world, prep.victim, prep.sps[0]
    login = prep.logins[sp]
    coords, why = {}, {}
    coords["A"], why["A"] = _axis_a(w, victim, sp, login, prep.registration)
    coords["G"], why["G"] = _axis_g(w, sp, login)
    coords["C"], why["C"] = _axis_c(sp, login)
    coords["T"], why["T"] = _axis_t(driver, w, victim, login)
    fresh = prepare(driver, sc)
    try:
        setup = driver.setup_device(fresh.world, victim, f"{victim}-fresh")
    except SetupImpossible:
        setup = []
    coords["M"], why["M"] = _axis_m(fresh.world, setup, login)
    return Classification(coords, why)


def _axis_a(w, victim, sp, login, registration):
    account = w.accounts[(victim, sp)]
    minter = w.minted.get(account)
    if minter in _user_side(w, victim):
        certs = _signs(w[sp].store())
        for p in w.by_role(Role.FEDERATION_OPERATOR):
            certs |= _signs(p.store() | p.sent)
        if any(_rooted(w, s.privkey, certs) for s in _signs(w[sp].records.values())):
            return "A6", f"account key minted by {minter}, attestation rooted in a federation key"
        return "A5", f"account identifier minted by {minter}"
    for e in login:
        if e.channel.dst == sp and e.annotation is A.ASSERTION_ISSUED:
            if w[e.channel.src].role in (Role.FEDERATION_OPERATOR, Role.BRIDGE_IDP):
                return "A4", f"assertion issued by intermediary {e.channel.src}"
            for s in _signs([e.payload]):
                signer = w.generator.get(s.privkey.id)
                if signer and w[signer].role in (Role.FEDERATION_OPERATOR, Role.BRIDGE_IDP) and any(
                    x == account for x in subterms(s.payload)
                ):
                    return "A4", f"identity certified by intermediary {signer}"
        if (
            e.channel.src == sp
            and e.annotation is A.IDP_QUERIED
            and e.channel.kind is Kind.EMAIL
            and w[e.channel.dst].role is Role.MAIL_PROVIDER
        ):
            return "A4", "the SP verifies control of the email namespace itself"
    fed = [e for e in registration if e.annotation is A.MANUAL_REGISTRATION and w[e.channel.dst].role is Role.FEDERATION_OPERATOR]
    if fed:
        return "A3", f"SP registers with federation operator {fed[0].channel.dst}"
    per_idp = [e for e in registration if e.annotation is A.MANUAL_REGISTRATION]
    if per_idp:
        return "A2", f"{len(per_idp)} per-IdP registrations"
    return "A1", "no registration and no intermediary"


def _axis_g(w, sp, login):
    around = [e for e in login if sp in (e.channel.src, e.channel.dst)]
    parties = {e.channel.dst if e.channel.src == sp else e.channel.src for e in around}
    if around and not any(e.channel.via for e in around) and all(w[p].role is Role.IDP for p in parties):
        return "G4", "every SP event is exchanged with the IdP proxy"
    issued = [e for e in login if e.channel.dst == sp and e.annotation is A.ASSERTION_ISSUED]
    if not issued:
        return "G3", "the SP receives a raw credential"
    e = issued[-1]
    src = w[e.channel.src]
    if src.role is not Role.DEVICE or src.local_idp:
        return "G1", f"assertion produced by {src.id}"
    signs = _signs([e.payload])
    own = [s for s in signs if w.generator.get(s.privkey.id) == src.id]
    for s in own:
        pub = PubKey(s.privkey.id)
        if any(c is not s and any(x == pub for x in subterms(c.payload)) for c in signs):
            return "G2", "browser-signed assertion with a key certified elsewhere"
    raise ClassificationAmbiguous("G: device assertion without certificate (G2 or G3)")


def _axis_c(sp, login):
    q = [e for e in login if e.channel.src == sp and e.annotation is A.IDP_QUERIED]
    if q:
        return "C1", f"the SP queries {q[0].channel.dst}"
    return "C2", "assertion verified locally"


def _axis_t(driver, w, victim, login):
    idps = driver.idps_of(w, victim)
    if all(w[i].local_idp for i in idps):
        unlock = [
            e for e in login
            if e.annotation is A.USER_ACTION and e.channel.dst in idps
            and any(isinstance(s, WeakSecret) for s in subterms(e.payload))
        ]
        return ("T2b", "local unlock on the device") if unlock else ("T2a", "device acts without user input")
    tokens = {d.id for d in w.devices_of(victim) if d.hardware_token}
    knowledge = any(
        e.channel.dst in idps and any(isinstance(s, WeakSecret) and w.generator.get(s.id) == victim for s in subterms(e.payload))
        for e in login
    )
    possession = any(
        (e.annotation is A.OOB_VERIFICATION and tokens & {e.channel.src, e.channel.dst})
        or (e.channel.dst in idps and any(w.generator.get(s.privkey.id) in tokens for s in _signs([e.payload])))
        for e in login
    )
    local = any(
        e.annotation is A.USER_ACTION and e.channel.dst in tokens
        and any(isinstance(s, WeakSecret) for s in subterms(e.payload))
        for e in login
    )
    if possession and local:
        return "T1b-ii", "token unlocked locally, then proven to the IdP"
    if possession and knowledge:
        return "T1b-i", "password and token both checked by the IdP"
    return "T1a", "single factor checked by the remote IdP"


def _axis_m(w, setup, login):
    if any(e.annotation is A.DEVICE_SETUP and w[e.channel.dst].role is Role.SP for e in setup):
        return "M3", "per-SP enrolment for a new device"
    if setup:
        return "M4", f"{len(setup)} setup events for a new device"
    reach = [
        e for e in login
        if e.channel.kind is Kind.SMS and w[e.channel.src].role in REMOTE_ROLES
        and w[e.channel.dst].role is Role.DEVICE and w[e.channel.dst].hardware_token
    ]
    if reach:
        return "M2", f"IdP reaches the user's handset {reach[0].channel.dst}"
    return "M1", "nothing to set up on a new device"


# -- matrix -----------------------------------------------------------------


@dataclass
class SchemeResult:
    name: str
    coords: dict[str, str]
    cells: dict[str, Cell]
    evidence: dict[str, Evidence]
    axis_evidence: dict[str, str]


def evaluate_scheme(name: str, *, seed: int = 0, features: dict | None = None, benefits=BENEFITS) -> SchemeResult:
    driver = get_driver(name, **(features or {}))
    try:
        cls = classify(driver, seed=seed)
    except ClassificationAmbiguous:
        raise
    except Exception as exc:
        raise CellError(name, "classify", exc) from exc
    ev = {}
    for b in benefits:
        try:
            ev[b] = evaluate(driver, b, seed=seed)
        except Exception as exc:
            raise CellError(name, b, exc) from exc
    return SchemeResult(name, cls.coords, {b: e.cell for b, e in ev.items()}, ev, cls.evidence)


def evaluate_matrix(schemes: Iterable[str], *, seed: int = 0, features: dict | None = None) -> tuple[EvaluationMatrix, dict]:
    m = EvaluationMatrix([])
    evidence = {}
    for name in schemes:
        r = evaluate_scheme(name, seed=seed, features=features)
        m.rows.append(name)
        m.coords[name] = {a: r.coords[a] for a in AXES}
        m.cells[name] = dict(r.cells)
        for b, e in r.evidence.items():
            evidence[(name, b)] = "; ".join(e.notes)
        for a in AXES:
            evidence[(name, a)] = r.axis_evidence[a]
    return m, evidence
