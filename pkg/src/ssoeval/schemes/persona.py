"""Mozilla Persona (BrowserID) and its fallback bridge.

The email provider certifies a browser-generated key for a limited time;
the browser then signs an audience-bound assertion for each SP.  Email
domains without Persona support are served by a bridging IdP that
verifies control of the mailbox itself.
"""

from __future__ import annotations

from ..terms import Atom, Hash, Mac, PubKey, Scope, Sign, Term, tup
from ..world import Annotation, Kind, Principal, Role, World
from .base import ATTACKER_KEY, FRESH, SchemeDescriptor, Service, domain, sp_atom
from .common import MailboxMixin, RemoteIdPDriver
from .federated import signing_key, token_key

A = Annotation


class Persona(RemoteIdPDriver):
    name = "persona"
    descriptor = SchemeDescriptor(
        "persona", "A1", "G2", "C2", "T1a", "M1",
        "Email provider certifies a browser key; the browser signs assertions.",
    )
    defaults = {"cert_lifetime": 24}

    def _make_idp(self, world, pid):
        p = super()._make_idp(world, pid)
        world.put(pid, "signing-key", world.keypair(pid, f"{pid}-sig", scope=Scope.SERVER))
        return p

    # the principal that signs user certificates
    def certifier(self, world: World, user: str) -> str:
        return self.home(world, user)

    def _provision_login(self, world: World, user: str, device: str) -> None:
        self.idp_login(world, user, device, self.certifier(world, user))

    def _valid_cert(self, world: World, device: str, email: Term):
        d = world[device]
        expiry = d.config.get("cert-expiry", {}).get(email)
        if expiry is None or expiry < world.step:
            return None, None
        return d.records[f"cert:{email.render()}"], d.records[f"browser-key:{email.render()}"]

    def _authenticate(self, world, user, sp, device):
        email = self.ident(world, user)
        certifier = self.certifier(world, user)
        world.send(user, device, email, annotation=A.USER_ACTION)
        cert, key = self._valid_cert(world, device, email)
        if cert is None:
            world.send(device, certifier, tup(Atom("support-document"), domain(certifier)))
            self._provision_login(world, user, device)
            key = world.keypair(device, "browser")
            world.learn(device, key)
            expiry = world.step + int(self.features["cert_lifetime"])
            world.send(device, certifier, tup(Atom("cert-request"), email, PubKey(key.id)))
            cert = Sign(signing_key(world, certifier), tup(email, PubKey(key.id), Atom(f"exp:{expiry}")))
            world.send(certifier, device, cert)
            world.put(device, f"cert:{email.render()}", cert)
            world.put(device, f"browser-key:{email.render()}", key)
            world[device].config.setdefault("cert-expiry", {})[email] = expiry
        assertion = Sign(key, tup(sp_atom(sp), Atom(f"exp:{world.step + 2}")))
        world.send(device, sp, tup(cert, assertion), annotation=A.ASSERTION_ISSUED)
        if f"idp-key:{certifier}" not in world[sp].records:
            world.send(sp, certifier, Atom("support-document"), Kind.DIRECT_BACKCHANNEL)
            pub = PubKey(signing_key(world, certifier).id)
            world.send(certifier, sp, pub, Kind.DIRECT_BACKCHANNEL)
            world.put(sp, f"idp-key:{certifier}", pub)
        self.open_session(world, user, sp, device, email, (cert,))
        self.welcome(world, sp, device, email, local=True)
        return email

    def _fresh_cert(self, world: World, victim: str) -> Term:
        email = self.ident(world, victim)
        certifier = self.certifier(world, victim)
        return Sign(signing_key(world, certifier), tup(email, PubKey(ATTACKER_KEY.id), FRESH))

    def acceptance(self, world, victim, sp):
        email = self.ident(world, victim)
        alts = [(self._fresh_cert(world, victim), Sign(ATTACKER_KEY, tup(sp_atom(sp), FRESH)))]
        for dev in world.devices_of(victim):
            cert, key = self._valid_cert(world, dev.id, email)
            if cert is not None:
                alts.append((cert, Sign(key, tup(sp_atom(sp), FRESH))))
        return alts

    def services(self, world, victim, sp):
        return [
            Service(
                "cert-issuance",
                self.certifier(world, victim),
                (self.password_of(world, victim),),
                (self._fresh_cert(world, victim),),
            )
        ]


class PersonaFallback(MailboxMixin, Persona):
    """Bridging IdP for email domains without native support.

    ``mode`` ``"password"`` keeps a bridge password and proves mailbox
    control with an emailed link; ``"oauth"`` signs the user in at the
    email provider through OAuth instead.
    """

    name = "persona-fallback"
    descriptor = SchemeDescriptor(
        "persona-fallback", "A4", "G2", "C2", "T1a", "M1",
        "A bridge IdP certifies keys for any email address it has verified.",
    )
    defaults = {"cert_lifetime": 24, "mode": "password"}
    idp_role = Role.MAIL_PROVIDER
    idp_prefix = "mail"
    bridge = "fallback"

    def _infrastructure(self, world, scenario):
        world.add(Principal(self.bridge, Role.BRIDGE_IDP))
        world.put(self.bridge, "signing-key", world.keypair(self.bridge, "fallback-sig", scope=Scope.SERVER))
        world.put(self.bridge, "token-key", world.symkey(self.bridge, "fallback-tok", scope=Scope.SERVER))
        super()._infrastructure(world, scenario)

    def _make_idp(self, world, pid):
        p = world.add(Principal(pid, self.idp_role))
        world.put(pid, "token-key", world.symkey(pid, f"{pid}-tok", scope=Scope.SERVER))
        return p

    def signup(self, world, user, idp):
        ident = super().signup(world, user, idp)
        self.open_mailbox(world, user, idp)
        if self.features["mode"] == "password":
            self._bridge_signup(world, user, ident)
        return ident

    def _link(self, world: World, email: Term, n: Term) -> Term:
        return Mac(token_key(world, self.bridge), tup(Atom("verify"), email, n))

    def _bridge_signup(self, world: World, user: str, email: Term) -> None:
        dev = self.primary_device(world, user)
        mail = self.home(world, user)
        pw = world.password(user, "fbpw")
        world.learn(user, pw)
        world[user].config["bridge-pw"] = pw
        world.send(user, dev, pw, annotation=A.USER_ACTION)
        world.send(dev, self.bridge, tup(Atom("signup"), email, pw))
        link = self._link(world, email, world.nonce(self.bridge, "verify"))
        world.send(self.bridge, mail, tup(Atom("to"), email, link), Kind.EMAIL, A.OOB_VERIFICATION)
        self.read_mail(world, user, dev, mail, link)
        world.send(dev, self.bridge, link)
        world.put(self.bridge, f"pw:{user}", Hash(pw))
        world.put(self.bridge, f"email:{user}", email)

    def certifier(self, world, user):
        return self.bridge

    def _oauth_code(self, world: World, user: str, n: Term) -> Term:
        mail = self.home(world, user)
        return Mac(token_key(world, mail), tup(Atom("code"), self.ident(world, user), Atom("rp:fallback"), n))

    def _provision_login(self, world, user, device):
        if self.features["mode"] == "password":
            self.type_password(world, user, device, self.bridge, self.ident(world, user), world[user].config["bridge-pw"])
            return
        mail = self.home(world, user)
        n = world.nonce(self.bridge, "state")
        world.send(self.bridge, mail, tup(Atom("authorize"), Atom("rp:fallback"), n), Kind.REDIRECT, via=device)
        self.idp_login(world, user, device, mail)
        code = self._oauth_code(world, user, n)
        world.send(mail, self.bridge, code, Kind.REDIRECT, A.ASSERTION_ISSUED, via=device)
        world.send(self.bridge, mail, code, Kind.DIRECT_BACKCHANNEL, A.IDP_QUERIED)
        world.send(mail, self.bridge, self.ident(world, user), Kind.DIRECT_BACKCHANNEL)

    def idps_of(self, world, user):
        return [self.bridge, self.home(world, user)]

    def idp_domains(self, world, user):
        # the bridge is invisible to the SP; only the mail domain shows
        return {domain(self.home(world, user)).name}

    def services(self, world, victim, sp):
        mail = self.home(world, victim)
        email = self.ident(world, victim)
        cert = self._fresh_cert(world, victim)
        if self.features["mode"] == "oauth":
            code = self._oauth_code(world, victim, FRESH)
            return [
                Service("email-login", mail, (self.password_of(world, victim),), (code,)),
                Service("bridge-login", self.bridge, (code,), (cert,)),
            ]
        link = self._link(world, email, FRESH)
        return [
            Service("bridge-login", self.bridge, (world[victim].config["bridge-pw"],), (cert,)),
            Service("email-verification", self.bridge, (), (self.deposit(world, victim, mail, link),)),
            Service("verification-click", self.bridge, (link,), (cert,)),
            self.webmail_service(world, victim, mail),
        ]
