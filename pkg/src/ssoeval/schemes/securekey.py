"""SecureKey Concierge: a broker between banks (IdPs) and SPs.

The broker maps each bank's meaningless user handle to an internal
identifier and derives a different pseudonym for every SP, so banks never
learn which SP is being visited and SPs never learn the bank.
"""

from __future__ import annotations

from ..terms import Atom, Hash, Mac, Nonce, Scope, Sign, Term, tup
from ..world import Annotation, Kind, Principal, Role, World
from .base import FRESH, AuthFailed, SchemeDescriptor, Service, domain, sp_atom
from .common import RemoteIdPDriver
from .federated import signing_key, token_key, vet

A = Annotation
REDIRECT = Kind.REDIRECT


class SecureKey(RemoteIdPDriver):
    name = "securekey"
    descriptor = SchemeDescriptor(
        "securekey", "A4", "G1", "C1", "T1a", "M1",
        "Broker with per-SP pseudonyms; banks authenticate the user.",
    )
    idp_prefix = "bank"
    broker = "securekey"

    def _infrastructure(self, world, scenario):
        world.add(Principal(self.broker, Role.FEDERATION_OPERATOR))
        world.put(self.broker, "signing-key", world.keypair(self.broker, "sk-sig", scope=Scope.SERVER))
        world.put(self.broker, "token-key", world.symkey(self.broker, "sk-tok", scope=Scope.SERVER))
        super()._infrastructure(world, scenario)

    def _make_idp(self, world, pid):
        p = super()._make_idp(world, pid)
        world.put(pid, "signing-key", world.keypair(pid, f"{pid}-sig", scope=Scope.SERVER))
        vet(world, pid, self.broker)
        return p

    def signup(self, world, user, idp):
        ident = super().signup(world, user, idp)
        world.put(idp, f"mbun:{user}", world.nonce(idp, "mbun"))
        return ident

    def register_sp(self, world, sp):
        mark = len(world.trace)
        world.send(sp, self.broker, tup(Atom("onboard"), sp_atom(sp)), annotation=A.MANUAL_REGISTRATION)
        world.send(self.broker, sp, tup(Atom("onboarded"), domain(self.broker)), Kind.DIRECT_BACKCHANNEL)
        return world.trace[mark:]

    def mbun(self, world: World, user: str, bank: str | None = None) -> Nonce:
        return world[bank or self.home(world, user)].records[f"mbun:{user}"]

    def _ipai(self, world: World, user: str) -> Nonce:
        rec = world[self.broker].records
        ipai = rec.get(f"ipai:{user}")
        if ipai is None:
            ipai = world.nonce(self.broker, "ipai")
            world.put(self.broker, f"ipai:{user}", ipai)
        return ipai

    def pseudonym(self, world: World, user: str, sp: str) -> Term:
        return world.mint(self.broker, Hash(tup(self._ipai(world, user), sp_atom(sp))))

    def identity(self, world, user, sp):
        return self.pseudonym(world, user, sp)

    def _bank_assertion(self, world: World, user: str, bank: str, n: Term) -> Term:
        return Sign(signing_key(world, bank), tup(self.mbun(world, user, bank), n))

    def _artifact(self, world: World, user: str, sp: str, n: Term) -> Term:
        return Mac(token_key(world, self.broker), tup(Atom("artifact"), self.pseudonym(world, user, sp), sp_atom(sp), n))

    def _bank_round(self, world: World, user: str, device: str, bank: str) -> None:
        n = world.nonce(self.broker, "sk")
        world.send(self.broker, bank, tup(Atom("authn"), Atom("rp:securekey"), n), REDIRECT, via=device)
        self.idp_login(world, user, device, bank)
        world.send(bank, self.broker, self._bank_assertion(world, user, bank, n), REDIRECT, A.ASSERTION_ISSUED, via=device)

    def _authenticate(self, world, user, sp, device):
        bank = self.home(world, user)
        world.send(device, sp, Atom("login"))
        n = world.nonce(sp, "rp")
        world.send(sp, self.broker, tup(Atom("authn"), sp_atom(sp), n), REDIRECT, via=device)
        world.send(user, device, domain(bank), annotation=A.USER_ACTION)
        world.send(device, self.broker, domain(bank), annotation=A.IDP_SELECTED)
        # the broker enforces each SP's bank policy
        if domain(bank).name in world[sp].config.get("blocked", set()):
            raise AuthFailed(f"{sp} does not accept {bank}")
        self._bank_round(world, user, device, bank)
        art = self._artifact(world, user, sp, n)
        world.send(self.broker, sp, tup(Atom("artifact"), art), REDIRECT, A.ASSERTION_ISSUED, via=device)
        world.send(sp, self.broker, tup(Atom("resolve"), art), Kind.DIRECT_BACKCHANNEL, A.IDP_QUERIED)
        sub = self.pseudonym(world, user, sp)
        stmt = Sign(signing_key(world, self.broker), tup(domain(self.broker), sub, Atom("loa:2"), sp_atom(sp), n))
        world.send(self.broker, sp, stmt, Kind.DIRECT_BACKCHANNEL, A.LOA_SIGNALLED)
        self.open_session(world, user, sp, device, sub, (stmt,))
        self.welcome(world, sp, device, sub, local=False)
        return sub

    def acceptance(self, world, victim, sp):
        return [(self._artifact(world, victim, sp, FRESH),)]

    def services(self, world, victim, sp):
        bank = self.home(world, victim)
        proof = self._bank_assertion(world, victim, bank, FRESH)
        return [
            Service("bank-login", bank, (self.password_of(world, victim),), (proof,)),
            Service("broker-session", self.broker, (proof,), (self._artifact(world, victim, sp, FRESH),)),
        ]

    def _migrate(self, world, user):
        old = self.home(world, user)
        new = self._next_idp(world, user)
        dev = self.primary_device(world, user)
        # sign in with both banks once so the broker links the new handle
        world.send(dev, self.broker, Atom("link-credential"))
        self._bank_round(world, user, dev, old)
        self.signup(world, user, new)
        self._bank_round(world, user, dev, new)
        world.put(self.broker, f"link:{user}", tup(self.mbun(world, user, new), self._ipai(world, user)))
        self.close_account(world, user, old)
        return new, False
