"""Simple Authentication for the Web: the SP emails a one-time login link."""

from __future__ import annotations

from ..terms import Atom, Mac, Scope, Term, tup
from ..world import Annotation, Kind, Role, World
from .base import FRESH, SchemeDescriptor, Service, sp_atom
from .common import MailboxMixin, RemoteIdPDriver

A = Annotation


class SAW(MailboxMixin, RemoteIdPDriver):
    """``notify_new_device`` sends an out-of-band notice whenever a login
    completes from a browser the SP has not seen before."""

    name = "saw"
    descriptor = SchemeDescriptor(
        "saw", "A4", "G3", "C1", "T1a", "M1",
        "Login link split between the browser and the user's mailbox.",
    )
    defaults = {"notify_new_device": False}
    idp_role = Role.MAIL_PROVIDER
    idp_prefix = "mail"

    def signup(self, world, user, idp):
        ident = super().signup(world, user, idp)
        self.open_mailbox(world, user, idp)
        return ident

    @staticmethod
    def sp_key(world: World, sp: str):
        key = world[sp].records.get("link-key")
        if key is None:
            key = world.symkey(sp, "link", scope=Scope.SERVER)
            world.put(sp, "link-key", key)
        return key

    def _link(self, world: World, sp: str, email: Term, browser: Term) -> Term:
        return Mac(self.sp_key(world, sp), tup(Atom("link"), email, browser))

    def _cookie(self, world: World, sp: str, email: Term, device: str) -> Term:
        return Mac(self.sp_key(world, sp), tup(Atom("known-device"), email, Atom(device)))

    def _authenticate(self, world, user, sp, device):
        email = self.ident(world, user)
        mail = self.home(world, user)
        world.send(user, device, email, annotation=A.USER_ACTION)
        browser = world.nonce(device, "bs")
        world.send(device, sp, tup(Atom("login"), email, browser))
        link = self._link(world, sp, email, browser)
        world.send(sp, mail, tup(Atom("from"), sp_atom(sp), email, link), Kind.EMAIL, A.IDP_QUERIED)
        self.read_mail(world, user, device, mail, link)
        world.send(device, sp, tup(link, browser), annotation=A.OOB_VERIFICATION)
        if self.features["notify_new_device"]:
            cookie = self._cookie(world, sp, email, device)
            if world[device].records.get(f"cookie:{sp}") != cookie:
                world.send(sp, user, tup(Atom("new-device-login"), sp_atom(sp)), Kind.SMS, A.USER_NOTIFICATION)
                world.send(sp, device, cookie)
                world.put(device, f"cookie:{sp}", cookie)
        self.open_session(world, user, sp, device, email, (email,))
        self.welcome(world, sp, device, email, local=False)
        return email

    def acceptance(self, world, victim, sp):
        return [(self._link(world, sp, self.ident(world, victim), FRESH),)]

    def services(self, world, victim, sp):
        email = self.ident(world, victim)
        mail = self.home(world, victim)
        drop = (self.deposit(world, victim, mail, self._link(world, sp, email, FRESH)),)
        notice = A.USER_NOTIFICATION if self.features["notify_new_device"] else None
        out = [Service("send-login-link", sp, (), drop, notice), self.webmail_service(world, victim, mail)]
        if self.features["notify_new_device"]:
            # a stolen known-device cookie suppresses the notice
            for dev in world.devices_of(victim):
                cookie = world[dev.id].records.get(f"cookie:{sp}")
                if cookie is not None:
                    out.append(Service("send-login-link-known-device", sp, (cookie,), drop))
        return out

    def _migrate(self, world, user):
        old = self.home(world, user)
        new = self._next_idp(world, user)
        self.signup(world, user, new)
        # the old provider relays mail while the user updates each SP
        world[old].config.setdefault("forward", {})[user] = new
        return new, True


class SAWAugmented(SAW):
    name = "saw-augmented"
    descriptor = SchemeDescriptor(
        "saw-augmented", "A4", "G3", "C1", "T1a", "M1",
        "SAW plus a new-device notification over a second channel.",
    )
    defaults = {"notify_new_device": True}
