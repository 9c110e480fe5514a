"""Building blocks shared by the password-at-a-remote-IdP schemes."""

from __future__ import annotations

from ..terms import Atom, Hash, Scope, SymEnc, Term, WeakSecret, tup
from ..world import Annotation, Principal, Role, World
from .base import AuthFailed, Driver, Service, SwitchImpossible, domain


class RemoteIdPDriver(Driver):
    """A user holds a password account at one of several remote IdPs."""

    idp_role = Role.IDP
    idp_prefix = "idp"

    def _infrastructure(self, world, scenario):
        for i in range(1, scenario.idps + 1):
            self._make_idp(world, f"{self.idp_prefix}{i}")

    def _make_idp(self, world: World, pid: str) -> Principal:
        return world.add(Principal(pid, self.idp_role))

    def _enroll_user(self, world, user):
        dev = self.primary_device(world, user)
        world.add(Principal(dev, Role.DEVICE, owner=user))
        world[user].config["idp"] = None
        world[user].config["accounts"] = {}
        self.signup(world, user, f"{self.idp_prefix}1")

    def make_ident(self, world: World, user: str, idp: str) -> Term:
        return tup(Atom(f"user:{user}"), domain(idp))

    def signup(self, world: World, user: str, idp: str) -> Term:
        """Open a password account at ``idp`` and make it the user's home."""
        ident = world.mint(idp, self.make_ident(world, user, idp))
        pw = world.password(user)
        world.learn(user, pw)
        dev = self.primary_device(world, user)
        world.send(user, dev, pw, annotation=Annotation.USER_ACTION)
        msg = world.send(dev, idp, tup(Atom("signup"), ident, pw)).payload
        world.put(idp, f"pw:{user}", Hash(pw))
        world.forget(idp, msg)  # only the verifier is kept
        world.put(idp, f"ident:{user}", ident)
        world[user].config["accounts"][idp] = (ident, pw)
        world[user].config["idp"] = idp
        return ident

    def home(self, world: World, user: str) -> str:
        return world[user].config["idp"]

    def ident(self, world: World, user: str, idp: str | None = None) -> Term:
        return world[user].config["accounts"][idp or self.home(world, user)][0]

    def password_of(self, world: World, user: str, idp: str | None = None) -> WeakSecret:
        return world[user].config["accounts"][idp or self.home(world, user)][1]

    def idp_login(self, world: World, user: str, device: str, idp: str) -> None:
        if f"pw:{user}" not in world[idp].records:
            raise AuthFailed(f"{user} has no account at {idp}")
        self.type_password(world, user, device, idp, self.ident(world, user, idp), self.password_of(world, user, idp))

    def idps_of(self, world, user):
        return [self.home(world, user)]

    def identity(self, world, user, sp):
        return self.ident(world, user)

    def _next_idp(self, world: World, user: str) -> str:
        current = self.home(world, user)
        others = sorted(p.id for p in world.by_role(self.idp_role) if p.id != current)
        if not others:
            raise SwitchImpossible("no other identity provider is deployed")
        return others[0]

    def _migrate(self, world, user):
        old = self.home(world, user)
        new = self._next_idp(world, user)
        self.signup(world, user, new)
        self.close_account(world, user, old)
        return new, False

    @staticmethod
    def close_account(world: World, user: str, idp: str) -> None:
        recs = world[idp].records
        for key in [k for k in recs if k.endswith(f":{user}")]:
            del recs[key]


class MailboxMixin:
    """Email providers that keep one mailbox per user.

    A mailbox key held by the provider stands for the ability to read the
    mailbox; a message deposited for the user is modelled as encrypted
    under it.  The user reaches the key through a webmail login.
    """

    @staticmethod
    def open_mailbox(world: World, user: str, provider: str) -> None:
        world.put(provider, f"mailbox:{user}", world.symkey(provider, "mbox", scope=Scope.SERVER))

    @staticmethod
    def mailbox_key(world: World, user: str, provider: str):
        return world[provider].records[f"mailbox:{user}"]

    @staticmethod
    def deposit(world: World, user: str, provider: str, message: Term) -> Term:
        return SymEnc(MailboxMixin.mailbox_key(world, user, provider), message)

    def read_mail(self, world: World, user: str, device: str, provider: str, message: Term) -> None:
        """Webmail login followed by fetching ``message``."""
        self.idp_login(world, user, device, provider)
        world.send(provider, device, message)

    def webmail_service(self, world: World, victim: str, provider: str) -> Service:
        return Service(
            "webmail-login",
            provider,
            (self.password_of(world, victim, provider),),
            (self.mailbox_key(world, victim, provider),),
        )
