"""Deterministic simulated network of principals.

A :class:`World` is a single-threaded, discrete-step message scheduler.
Every inter-principal transfer goes through :meth:`World.send` and is
recorded as exactly one :class:`TraceEvent`.  Fresh secrets come from a
seeded generator, so the same scenario and seed always produce the same
trace.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator

from .terms import (
    SECRET_TYPES,
    Atom,
    Nonce,
    Pair,
    PrivKey,
    Scope,
    SecretClass,
    Strength,
    SymKey,
    Term,
    WeakSecret,
    check_classified,
    render_set,
    subterms,
)


class Role(str, Enum):
    USER = "User"
    DEVICE = "Device"
    IDP = "IdP"
    SP = "SP"
    FEDERATION_OPERATOR = "FederationOperator"
    SYNC_SERVER = "SyncServer"
    MAIL_PROVIDER = "MailProvider"
    BRIDGE_IDP = "BridgeIdP"
    ATTACKER = "Attacker"


REMOTE_ROLES = frozenset(
    {Role.IDP, Role.FEDERATION_OPERATOR, Role.SYNC_SERVER, Role.MAIL_PROVIDER, Role.BRIDGE_IDP}
)


class Kind(str, Enum):
    WEB = "Web"
    REDIRECT = "Redirect"
    EMAIL = "Email"
    SMS = "Sms"
    PAIRING_OOB = "PairingOob"
    DIRECT_BACKCHANNEL = "DirectBackchannel"


class Annotation(str, Enum):
    NONE = "None"
    MANUAL_REGISTRATION = "ManualRegistration"
    USER_ACTION = "UserAction"
    DEVICE_SETUP = "DeviceSetup"
    OOB_VERIFICATION = "OobVerification"
    ASSERTION_ISSUED = "AssertionIssued"
    ASSERTION_VERIFIED_LOCALLY = "AssertionVerifiedLocally"
    IDP_QUERIED = "IdPQueried"
    PROFILE_DATA_SHARED = "ProfileDataShared"
    LOA_SIGNALLED = "LoASignalled"
    IDP_SELECTED = "IdPSelected"
    KEY_REVOCATION = "KeyRevocation"
    USER_NOTIFICATION = "UserNotification"


class DeliveryFailure(Exception):
    """A message could not be delivered because an endpoint is offline."""

    def __init__(self, channel: Channel, offline: str):
        super().__init__(f"{channel.src}->{channel.dst}: {offline} is offline")
        self.channel = channel
        self.offline = offline


class UnknownPrincipal(KeyError):
    pass


@dataclass
class Principal:
    id: str
    role: Role
    owner: str | None = None  # devices are bound to exactly one user
    hardware_token: bool = False
    local_idp: bool = False  # a user device acting as the user's IdP
    online: bool = True
    records: dict[str, Term] = field(default_factory=dict)
    knowledge: set[Term] = field(default_factory=set)
    sent: set[Term] = field(default_factory=set)
    config: dict[str, Any] = field(default_factory=dict)

    def store(self) -> set[Term]:
        return set(self.records.values()) | self.knowledge


@dataclass(frozen=True)
class Channel:
    src: str
    dst: str
    kind: Kind = Kind.WEB
    confidential: bool = True
    authentic: bool = True
    via: str | None = None  # the browser for redirects


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    channel: Channel
    payload: Term
    annotation: Annotation = Annotation.NONE
    phase: str = ""

    def render(self) -> str:
        ch = self.channel
        route = f"{ch.src}->{ch.dst}" if ch.via is None else f"{ch.src}->{ch.via}->{ch.dst}"
        return f"{self.seq} | {route} | {ch.kind.value} | {self.annotation.value} | {self.payload.render()}"


class FaultKind(str, Enum):
    OUTAGE = "Outage"
    STORE_LEAK = "StoreLeak"
    MALICIOUS_INSIDER = "MaliciousInsider"
    COLLUSION_OF_SPS = "CollusionOfSPs"


@dataclass(frozen=True)
class Fault:
    kind: FaultKind
    targets: tuple[str, ...]
    activation: str | None = None  # phase name; None means immediately

    @classmethod
    def from_dict(cls, d: dict) -> Fault:
        targets = d.get("targets", d.get("target"))
        if isinstance(targets, str):
            targets = (targets,)
        return cls(FaultKind(d["kind"]), tuple(targets), d.get("activation"))


@dataclass
class Scenario:
    """Declarative scenario document."""

    scheme: str
    seed: int = 0
    users: tuple[str, ...] = ("alice",)
    idps: int = 2
    sps: int = 2
    features: dict[str, Any] = field(default_factory=dict)
    faults: tuple[Fault, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        known = {"scheme", "seed", "users", "idps", "sps", "features", "faults"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown scenario keys: {sorted(extra)}")
        return cls(
            scheme=d["scheme"],
            seed=int(d.get("seed", 0)),
            users=tuple(d.get("users", ("alice",))),
            idps=int(d.get("idps", 2)),
            sps=int(d.get("sps", 2)),
            features=dict(d.get("features", {})),
            faults=tuple(Fault.from_dict(f) for f in d.get("faults", ())),
        )

    @classmethod
    def load(cls, path: str) -> Scenario:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


ATTACKER = "attacker"


class World:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = random.Random(seed)
        self.principals: dict[str, Principal] = {}
        self.classes: dict[str, SecretClass] = {}
        self.generator: dict[str, str] = {}  # secret id -> generating principal
        self.trace: list[TraceEvent] = []
        self.mutations: list[tuple[int, str, str, Term]] = []
        self.observer: set[Term] = set()
        self.insiders: set[str] = set()
        self.pooled: set[Term] = set()
        self.minted: dict[Term, str] = {}  # identifier -> issuing principal
        self.accounts: dict[tuple[str, str], Term] = {}  # (user, sp) -> account id
        self.pending: list[Fault] = []
        self.phase_name = "deploy"
        self._advanced = 0
        self.add(Principal(ATTACKER, Role.ATTACKER))

    # -- principals ---------------------------------------------------------

    def add(self, p: Principal) -> Principal:
        if p.id in self.principals:
            raise ValueError(f"duplicate principal {p.id}")
        if p.role is Role.DEVICE and p.owner is None:
            raise ValueError(f"device {p.id} must be bound to a user")
        self.principals[p.id] = p
        return p

    def __getitem__(self, pid: str) -> Principal:
        try:
            return self.principals[pid]
        except KeyError:
            raise UnknownPrincipal(pid) from None

    def __contains__(self, pid: str) -> bool:
        return pid in self.principals

    def by_role(self, *roles: Role) -> list[Principal]:
        return [p for p in self.principals.values() if p.role in roles]

    def devices_of(self, user: str) -> list[Principal]:
        return [p for p in self.principals.values() if p.role is Role.DEVICE and p.owner == user]

    # -- secrets ------------------------------------------------------------

    def fresh(
        self,
        kind: type,
        owner: str,
        prefix: str,
        *,
        weak: bool = False,
        extractable: bool = True,
        scope: Scope = Scope.USER,
    ) -> Term:
        """Mint a classified secret generated by ``owner``."""
        if kind not in SECRET_TYPES:
            raise TypeError(f"{kind.__name__} is not a secret type")
        ident = f"{prefix}#{self._rng.getrandbits(24):06x}"
        while ident in self.classes:
            ident = f"{prefix}#{self._rng.getrandbits(24):06x}"
        strength = Strength.WEAK if weak else Strength.STRONG
        self.classes[ident] = SecretClass(ident, strength, extractable, scope)
        self.generator[ident] = owner
        return kind(ident)

    def nonce(self, owner: str, prefix: str = "n") -> Nonce:
        return self.fresh(Nonce, owner, prefix)

    def password(self, owner: str, prefix: str = "pw") -> WeakSecret:
        return self.fresh(WeakSecret, owner, prefix, weak=True)

    def keypair(self, owner: str, prefix: str, *, extractable: bool = True, scope: Scope = Scope.USER) -> PrivKey:
        return self.fresh(PrivKey, owner, prefix, extractable=extractable, scope=scope)

    def symkey(self, owner: str, prefix: str, *, scope: Scope = Scope.USER) -> SymKey:
        return self.fresh(SymKey, owner, prefix, scope=scope)

    def mint(self, issuer: str, ident: Term) -> Term:
        """Record ``issuer`` as the authority that assigned identifier ``ident``."""
        self.minted.setdefault(ident, issuer)
        return ident

    # -- state --------------------------------------------------------------

    def put(self, pid: str, key: str, value: Term) -> None:
        check_classified([value], self.classes)
        p = self[pid]
        p.records[key] = value
        self.mutations.append((len(self.trace), pid, key, value))

    def learn(self, pid: str, *terms: Term) -> None:
        """Terms a principal generates or is told locally (not a transfer)."""
        check_classified(terms, self.classes)
        self[pid].knowledge.update(terms)

    def forget(self, pid: str, *terms: Term) -> None:
        """Drop transient messages a principal does not retain."""
        self[pid].knowledge.difference_update(terms)

    @property
    def step(self) -> int:
        return len(self.trace) + self._advanced

    def advance(self, steps: int) -> None:
        self._advanced += steps

    def phase(self, name: str) -> None:
        """Enter a named phase, activating any faults scheduled for it."""
        self.phase_name = name
        due = [f for f in self.pending if f.activation == name]
        self.pending = [f for f in self.pending if f.activation != name]
        for f in due:
            self.inject(f)

    # -- messaging ----------------------------------------------------------

    def send(
        self,
        src: str,
        dst: str,
        payload: Term,
        kind: Kind = Kind.WEB,
        annotation: Annotation = Annotation.NONE,
        *,
        via: str | None = None,
        confidential: bool | None = None,
    ) -> TraceEvent:
        if confidential is None:
            confidential = kind is not Kind.EMAIL
        if kind is Kind.REDIRECT:
            if via is None or self[via].role is not Role.DEVICE:
                raise ValueError("redirects must pass through a device")
        ch = Channel(src, dst, kind, confidential, True, via)
        for pid in (src, via, dst):
            if pid is not None and not self[pid].online:
                raise DeliveryFailure(ch, pid)
        check_classified([payload], self.classes)
        self[src].sent.add(payload)
        self[dst].knowledge.add(payload)
        if via is not None:
            self[via].knowledge.add(payload)
        if not confidential:
            self.observer.add(payload)
        ev = TraceEvent(len(self.trace), ch, payload, annotation, self.phase_name)
        self.trace.append(ev)
        return ev

    # -- faults -------------------------------------------------------------

    def schedule(self, fault: Fault) -> None:
        for t in fault.targets:
            self[t]
        if fault.activation is None:
            self.inject(fault)
        else:
            self.pending.append(fault)

    def inject(self, fault: Fault) -> World:
        for t in fault.targets:
            self[t]
        attacker = self[ATTACKER]
        if fault.kind is FaultKind.OUTAGE:
            for t in fault.targets:
                self[t].online = False
        elif fault.kind is FaultKind.STORE_LEAK:
            for t in fault.targets:
                attacker.knowledge |= self.leak(t)
        elif fault.kind is FaultKind.MALICIOUS_INSIDER:
            for t in fault.targets:
                attacker.knowledge |= self.insider_view(t)
                self.insiders.add(t)
        elif fault.kind is FaultKind.COLLUSION_OF_SPS:
            for t in fault.targets:
                if self[t].role is not Role.SP:
                    raise ValueError(f"{t} is not an SP")
                self.pooled |= self[t].store()
        return self

    def clear_outage(self, *pids: str) -> None:
        for pid in pids:
            self[pid].online = True

    def _hardware_held(self, t: Term) -> bool:
        return isinstance(t, SECRET_TYPES) and not self.classes[t.id].extractable

    def _withheld(self, t: Term) -> bool:
        if not isinstance(t, SECRET_TYPES):
            return False
        cls = self.classes[t.id]
        return not cls.extractable or cls.scope is Scope.SERVER

    def _scrub(self, t: Term) -> Iterator[Term]:
        if self._withheld(t):
            return
        if isinstance(t, Pair) and any(self._withheld(c) for c in _clear(t)):
            yield from self._scrub(t.left)
            yield from self._scrub(t.right)
            return
        yield t

    def leak(self, pid: str) -> frozenset[Term]:
        """What a store snapshot of ``pid`` yields.

        Hardware-held secrets (not extractable) and server-scope operational
        capabilities are excluded, also when a stored message carries them
        in the clear; everything else, including messages kept in memory,
        is exposed.
        """
        return frozenset(x for t in self[pid].store() for x in self._scrub(t))

    def insider_view(self, pid: str) -> frozenset[Term]:
        """Full store of ``pid`` minus hardware-held terms generated elsewhere."""
        return frozenset(
            t
            for t in self[pid].store()
            if not (self._hardware_held(t) and self.generator.get(t.id) != pid)
        )

    def observe(self, pid: str) -> frozenset[Term]:
        p = self[pid]
        return frozenset(p.store() | p.sent)

    # -- rendering ----------------------------------------------------------

    def dump_trace(self, events: Iterable[TraceEvent] | None = None) -> str:
        events = self.trace if events is None else events
        return "".join(ev.render() + "\n" for ev in events)

    def dump_state(self) -> str:
        lines = []
        for p in self.principals.values():
            lines.append(f"[{p.id}] role={p.role.value} online={p.online}")
            for k in sorted(p.records):
                lines.append(f"  {k} = {p.records[k].render()}")
            for t in render_set(p.knowledge):
                lines.append(f"  knows {t}")
        return "\n".join(lines) + "\n"


def mentions(terms: Iterable[Term], atom: Atom) -> bool:
    return any(s == atom for t in terms for s in subterms(t))


def _clear(t: Term) -> Iterator[Term]:
    """Components reachable from ``t`` by unpairing alone."""
    yield t
    if isinstance(t, Pair):
        yield from _clear(t.left)
        yield from _clear(t.right)
