"""Driver interface shared by every scheme model.

A driver builds a :class:`~ssoeval.world.World` for a scenario and runs
the scheme's flows in it.  Beside the honest flows, each driver describes
how an attacker could obtain a session at an SP:

* :meth:`Driver.acceptance` lists alternative sets of terms that make an
  SP open a session for the victim's account when presented together.
* :meth:`Driver.services` lists honest principals acting as oracles:
  given the required terms, the provider hands out the yielded terms.
  Yielded terms are bound to :data:`FRESH`, the attacker's own session
  handle, so replaying old protocol messages is never enough.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, ClassVar

from ..terms import Atom, PrivKey, SecretClass, Term, subterms, tup
from ..world import (
    ATTACKER,
    Annotation,
    DeliveryFailure,
    Principal,
    Role,
    Scenario,
    TraceEvent,
    World,
)

FRESH = Atom("attack-session")
ATTACKER_KEY = PrivKey("attacker-key")


class SetupImpossible(Exception):
    """The scheme cannot provision another device for this user."""


class SwitchImpossible(Exception):
    """The scheme offers no way to move to another identity provider."""


@dataclass(frozen=True)
class SchemeDescriptor:
    name: str
    association: str
    conveyance: str
    verification: str
    auth_type: str
    multi_device: str
    summary: str = ""

    def coords(self) -> dict[str, str]:
        return {
            "A": self.association,
            "G": self.conveyance,
            "C": self.verification,
            "T": self.auth_type,
            "M": self.multi_device,
        }


@dataclass
class AuthOutcome:
    success: bool
    trace: list[TraceEvent]
    account: Term | None = None
    failure: str | None = None


@dataclass
class SwitchResult:
    old_idp: str
    new_idp: str
    updated: list[str]  # SPs where the user had to change the account binding
    trace: list[TraceEvent]
    interim_forwarding: bool = False


@dataclass(frozen=True)
class Service:
    """An honest principal that answers requests an attacker can make."""

    name: str
    provider: str
    requires: tuple[Term, ...]
    yields: tuple[Term, ...]
    detectable: Annotation | None = None  # event the victim would see


def domain(pid: str) -> Atom:
    return Atom(f"domain:{pid}")


def sp_atom(pid: str) -> Atom:
    return Atom(f"sp:{pid}")


class Driver:
    """Base class; subclasses fill in the flows."""

    name: ClassVar[str]
    descriptor: ClassVar[SchemeDescriptor]
    defaults: ClassVar[dict[str, Any]] = {}
    optional_features: ClassVar[frozenset[str]] = frozenset()
    local_idp_devices: ClassVar[bool] = False

    def __init__(self, **features: Any):
        unknown = set(features) - set(self.defaults)
        if unknown:
            raise ValueError(f"{self.name}: unknown features {sorted(unknown)}")
        self.features = {**self.defaults, **features}

    # -- deployment -----------------------------------------------------

    def deploy(self, scenario: Scenario) -> World:
        world = World(scenario.seed)
        world.classes[ATTACKER_KEY.id] = SecretClass(ATTACKER_KEY.id)
        world.generator[ATTACKER_KEY.id] = ATTACKER
        world.learn(ATTACKER, ATTACKER_KEY)
        world.phase("deploy")
        self._infrastructure(world, scenario)
        for i in range(1, scenario.sps + 1):
            world.add(Principal(f"sp{i}", Role.SP))
        for user in scenario.users:
            world.add(Principal(user, Role.USER))
            self._enroll_user(world, user)
        for f in scenario.faults:
            world.schedule(f)
        return world

    def _infrastructure(self, world: World, scenario: Scenario) -> None:
        raise NotImplementedError

    def _enroll_user(self, world: World, user: str) -> None:
        raise NotImplementedError

    def register_sp(self, world: World, sp: str) -> list[TraceEvent]:
        return []

    def setup_device(self, world: World, user: str, device: str) -> list[TraceEvent]:
        """Provision ``device`` (created if missing) for ``user``."""
        mark = len(world.trace)
        if device not in world:
            world.add(Principal(device, Role.DEVICE, owner=user, local_idp=self.local_idp_devices))
        self._setup_device(world, user, device)
        return world.trace[mark:]

    def _setup_device(self, world: World, user: str, device: str) -> None:
        pass

    def authenticate(self, world: World, user: str, sp: str, device: str | None = None) -> AuthOutcome:
        device = device or self.primary_device(world, user)
        mark = len(world.trace)
        world.phase("authenticate")
        try:
            account = self._authenticate(world, user, sp, device)
        except (AuthFailed, DeliveryFailure) as exc:
            return AuthOutcome(False, world.trace[mark:], failure=str(exc))
        return AuthOutcome(True, world.trace[mark:], account=account)

    def _authenticate(self, world: World, user: str, sp: str, device: str) -> Term:
        raise NotImplementedError

    def switch_idp(self, world: World, user: str) -> SwitchResult:
        """Move ``user`` to another IdP and repair every SP account."""
        mark = len(world.trace)
        world.phase("switch")
        old = self.idps_of(world, user)[0]
        before = {sp: acct for (u, sp), acct in world.accounts.items() if u == user}
        new, forwarding = self._migrate(world, user)
        updated = []
        for sp in sorted(before):
            out = self.authenticate(world, user, sp)
            if out.success and out.account == before[sp]:
                continue
            self._repair(world, user, sp, before[sp], out.account if out.success else None)
            updated.append(sp)
        return SwitchResult(old, new, updated, world.trace[mark:], forwarding)

    def _repair(self, world: World, user: str, sp: str, old: Term, seen: Term | None) -> None:
        """Per-SP manual step after a switch: rebind the old account."""
        fresh_id = seen if seen is not None else self.identity(world, user, sp)
        dev = self.primary_device(world, user)
        world.send(user, dev, tup(Atom("update-account"), fresh_id), annotation=Annotation.USER_ACTION)
        world.send(dev, sp, tup(Atom("update-account"), old, fresh_id))
        world.put(sp, f"rebind:{user}", tup(old, fresh_id))
        world.accounts[(user, sp)] = fresh_id

    def _migrate(self, world: World, user: str) -> tuple[str, bool]:
        raise SwitchImpossible(self.name)

    # -- facts the evaluator asks about -----------------------------------

    def primary_device(self, world: World, user: str) -> str:
        return f"{user}-laptop"

    def idps_of(self, world: World, user: str) -> list[str]:
        """Principals that vouch for the user's identity (the user's IdP)."""
        raise NotImplementedError

    def idp_domains(self, world: World, user: str) -> set[str]:
        """Atom names an SP would blacklist to refuse the user's IdP."""
        return {domain(i).name for i in self.idps_of(world, user)}

    def identity(self, world: World, user: str, sp: str) -> Term:
        """The identifier the SP would learn for ``user`` right now."""
        raise NotImplementedError

    def services(self, world: World, victim: str, sp: str) -> list[Service]:
        return []

    def acceptance(self, world: World, victim: str, sp: str) -> list[tuple[Term, ...]]:
        raise NotImplementedError

    # -- helpers for subclasses --------------------------------------------

    @staticmethod
    def open_session(world: World, user: str, sp: str, device: str, account: Term, visible: tuple[Term, ...] = ()) -> Term:
        """SP-side policy check, account lookup and session creation."""
        blocked = world[sp].config.get("blocked", set())
        for t in visible:
            for a in _atoms(t):
                if a.name in blocked:
                    raise AuthFailed(f"{sp} does not accept identities from {a.name}")
        known = world.accounts.get((user, sp))
        if known is None:
            world.accounts[(user, sp)] = account
            world.put(sp, f"account:{len(world[sp].records)}", account)
        n = sum(1 for k in world[sp].records if k.startswith("session:"))
        world.put(sp, f"session:{n}", tup(Atom("session"), account, Atom(device)))
        return account

    @staticmethod
    def welcome(world: World, sp: str, device: str, account: Term, *, local: bool) -> None:
        ann = Annotation.ASSERTION_VERIFIED_LOCALLY if local else Annotation.NONE
        world.send(sp, device, tup(Atom("welcome"), account), annotation=ann)

    @staticmethod
    def type_password(world: World, user: str, device: str, dst: str, ident: Term, pw: Term) -> None:
        world.send(user, device, pw, annotation=Annotation.USER_ACTION)
        msg = world.send(device, dst, tup(Atom("login"), ident, pw)).payload
        if world[dst].role is not Role.DEVICE:
            # a server checks the password against its verifier and drops it
            world.forget(dst, msg)


class AuthFailed(Exception):
    pass


def _atoms(t: Term):
    return (s for s in subterms(t) if isinstance(s, Atom))
