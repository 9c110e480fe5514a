"""Redirect-based federations: OpenID 2.0, OAuth 2.0 / OIDC, Mobile Connect
and Shibboleth."""

from __future__ import annotations

from ..terms import Atom, Hash, Mac, Nonce, PrivKey, PubKey, Scope, Sign, Term, tup
from ..world import Annotation, Kind, Principal, Role, World
from .base import ATTACKER_KEY, FRESH, AuthFailed, SchemeDescriptor, Service, domain, sp_atom
from .common import RemoteIdPDriver

A = Annotation
BACK = Kind.DIRECT_BACKCHANNEL
REDIRECT = Kind.REDIRECT


def _server_keys(world: World, pid: str) -> None:
    world.put(pid, "signing-key", world.keypair(pid, f"{pid}-sig", scope=Scope.SERVER))
    world.put(pid, "token-key", world.symkey(pid, f"{pid}-tok", scope=Scope.SERVER))


def signing_key(world: World, pid: str) -> PrivKey:
    return world[pid].records["signing-key"]


def token_key(world: World, pid: str):
    return world[pid].records["token-key"]


def vet(world: World, member: str, fedop: str) -> None:
    """Out-of-band vetting of ``member`` by a federation operator."""
    pub = PubKey(signing_key(world, member).id)
    world.send(member, fedop, tup(Atom("join"), domain(member), pub), annotation=A.MANUAL_REGISTRATION)
    cert = Sign(signing_key(world, fedop), tup(Atom("member"), domain(member), pub))
    world.put(fedop, f"member:{member}", cert)
    world.send(fedop, member, cert)
    world.put(member, "membership", cert)


# -- OpenID 2.0 -------------------------------------------------------------


class OpenID2(RemoteIdPDriver):
    name = "openid2"
    descriptor = SchemeDescriptor(
        "openid2", "A1", "G1", "C2", "T1a", "M1",
        "URL identifiers; the SP associates with any IdP it discovers.",
    )

    def _make_idp(self, world, pid):
        p = super()._make_idp(world, pid)
        _server_keys(world, pid)
        return p

    def _authenticate(self, world, user, sp, device):
        idp = self.home(world, user)
        ident = self.ident(world, user)
        world.send(user, device, ident, annotation=A.USER_ACTION)
        world.send(device, sp, tup(Atom("openid.identifier"), ident))
        world.send(sp, idp, tup(Atom("discover"), ident), BACK)
        world.send(idp, sp, tup(Atom("endpoint"), domain(idp)), BACK)
        key = world[sp].records.get(f"assoc:{idp}")
        if key is None:
            key = world.symkey(idp, "assoc", scope=Scope.SERVER)
            world.put(idp, f"assoc:{sp}", key)
            world.send(idp, sp, tup(Atom("associate"), key), BACK)
            world.put(sp, f"assoc:{idp}", key)
        n = world.nonce(sp, "rp")
        world.send(sp, idp, tup(Atom("checkid"), ident, sp_atom(sp), n), REDIRECT, via=device)
        self.idp_login(world, user, device, idp)
        body = tup(ident, sp_atom(sp), n)
        world.send(idp, sp, tup(body, Mac(key, body)), REDIRECT, A.ASSERTION_ISSUED, via=device)
        self.open_session(world, user, sp, device, ident, (ident,))
        self.welcome(world, sp, device, ident, local=True)
        return ident

    def _assertion(self, world, victim, sp):
        idp = self.home(world, victim)
        key = world[sp].records.get(f"assoc:{idp}")
        if key is None:
            return None
        return Mac(key, tup(self.ident(world, victim), sp_atom(sp), FRESH))

    def acceptance(self, world, victim, sp):
        a = self._assertion(world, victim, sp)
        return [] if a is None else [(a,)]

    def services(self, world, victim, sp):
        a = self._assertion(world, victim, sp)
        if a is None:
            return []
        return [Service("idp-login", self.home(world, victim), (self.password_of(world, victim),), (a,))]


# -- OAuth 2.0 / OpenID Connect ---------------------------------------------


class OAuth2(RemoteIdPDriver):
    """Authorization-code flow; ``oidc`` adds a signed ID token."""

    name = "oauth2"
    descriptor = SchemeDescriptor(
        "oauth2", "A2", "G1", "C1", "T1a", "M1",
        "Per-IdP client registration; the SP redeems a code at the IdP.",
    )
    defaults = {"oidc": False, "pairwise_ids": False, "profile_scope": True}

    def _make_idp(self, world, pid):
        p = super()._make_idp(world, pid)
        _server_keys(world, pid)
        world.put(pid, "pairwise-salt", world.fresh(Nonce, pid, "salt", scope=Scope.SERVER))
        return p

    def register_sp(self, world, sp):
        mark = len(world.trace)
        for idp in sorted(p.id for p in world.by_role(Role.IDP)):
            world.send(sp, idp, tup(Atom("register-client"), sp_atom(sp)), annotation=A.MANUAL_REGISTRATION)
            secret = world.symkey(idp, "client", scope=Scope.SERVER)
            world.put(idp, f"client:{sp}", secret)
            world.send(idp, sp, tup(Atom("client-secret"), secret), BACK)
            world.put(sp, f"client:{idp}", secret)
        return world.trace[mark:]

    def subject(self, world: World, user: str, sp: str) -> Term:
        idp = self.home(world, user)
        ident = self.ident(world, user)
        if not (self.features["oidc"] and self.features["pairwise_ids"]):
            return ident
        salt = world[idp].records["pairwise-salt"]
        return world.mint(idp, Hash(tup(ident, sp_atom(sp), salt)))

    def identity(self, world, user, sp):
        return self.subject(world, user, sp)

    def _code(self, world, user, sp, n):
        idp = self.home(world, user)
        return Mac(token_key(world, idp), tup(Atom("code"), self.subject(world, user, sp), sp_atom(sp), n))

    def _authenticate(self, world, user, sp, device):
        idp = self.home(world, user)
        secret = world[sp].records.get(f"client:{idp}")
        if secret is None:
            raise AuthFailed(f"{sp} is not registered with {idp}")
        world.send(user, device, domain(idp), annotation=A.USER_ACTION)
        world.send(device, sp, tup(Atom("login-with"), domain(idp)), annotation=A.IDP_SELECTED)
        n = world.nonce(sp, "state")
        world.send(sp, idp, tup(Atom("authorize"), sp_atom(sp), n), REDIRECT, via=device)
        self.idp_login(world, user, device, idp)
        world.send(user, device, Atom("approve"), annotation=A.USER_ACTION)
        world.send(device, idp, tup(Atom("consent"), sp_atom(sp)))
        code = self._code(world, user, sp, n)
        world.send(idp, sp, tup(Atom("code"), code, n), REDIRECT, A.ASSERTION_ISSUED, via=device)
        world.send(sp, idp, tup(Atom("token-request"), code, secret), BACK, A.IDP_QUERIED)
        sub = self.subject(world, user, sp)
        token = Mac(token_key(world, idp), tup(Atom("access"), sub, sp_atom(sp), n))
        world.send(idp, sp, tup(Atom("access-token"), token), BACK)
        world.send(sp, idp, tup(Atom("userinfo"), token), BACK, A.IDP_QUERIED)
        if self.features["oidc"]:
            claim = Sign(signing_key(world, idp), tup(domain(idp), sub, sp_atom(sp), n))
        else:
            claim = tup(domain(idp), sub)
        world.send(idp, sp, claim, BACK)
        if self.features["profile_scope"]:
            world.send(idp, sp, tup(Atom(f"profile:{user}"), sub), BACK, A.PROFILE_DATA_SHARED)
        self.open_session(world, user, sp, device, sub, (claim,))
        self.welcome(world, sp, device, sub, local=False)
        return sub

    def acceptance(self, world, victim, sp):
        return [(self._code(world, victim, sp, FRESH),)]

    def services(self, world, victim, sp):
        code = self._code(world, victim, sp, FRESH)
        return [Service("idp-login", self.home(world, victim), (self.password_of(world, victim),), (code,))]


class OIDC(OAuth2):
    name = "oidc"
    descriptor = SchemeDescriptor(
        "oidc", "A2", "G1", "C1", "T1a", "M1",
        "OAuth 2.0 plus a signed ID token; pairwise subjects are optional.",
    )
    defaults = {"oidc": True, "pairwise_ids": False, "profile_scope": True}
    optional_features = frozenset()


# -- Mobile Connect ---------------------------------------------------------


class MobileConnect(RemoteIdPDriver):
    """Operator-run IdPs under a GSMA-style federation.

    ``loa`` 2 confirms possession of the phone with an SMS one-time code;
    ``loa`` 3 uses a SIM-held signing key unlocked by a PIN.  ``per_sp_keys``
    adds SP-specific SIM keys certified by the operator (the augmented
    variant).
    """

    name = "mobile-connect-loa3"
    descriptor = SchemeDescriptor(
        "mobile-connect-loa3", "A3", "G1", "C1", "T1b-ii", "M2",
        "Operator IdPs discovered through a federation; SIM applet with PIN.",
    )
    defaults = {"loa": 3, "per_sp_keys": False}
    idp_prefix = "mno"
    fedop = "gsma"

    def _infrastructure(self, world, scenario):
        world.add(Principal(self.fedop, Role.FEDERATION_OPERATOR))
        _server_keys(world, self.fedop)
        super()._infrastructure(world, scenario)

    def _make_idp(self, world, pid):
        p = super()._make_idp(world, pid)
        _server_keys(world, pid)
        world.put(pid, "pairwise-salt", world.fresh(Nonce, pid, "salt", scope=Scope.SERVER))
        vet(world, pid, self.fedop)
        return p

    def phone(self, user: str) -> str:
        return f"{user}-phone"

    def _enroll_user(self, world, user):
        world.add(Principal(self.primary_device(world, user), Role.DEVICE, owner=user))
        world.add(Principal(self.phone(user), Role.DEVICE, owner=user, hardware_token=True))
        pin = world.password(user, "pin")
        world.learn(user, pin)
        world[user].config["pin"] = pin
        world[user].config["accounts"] = {}
        self.signup(world, user, f"{self.idp_prefix}1")

    def signup(self, world, user, idp):
        phone = self.phone(user)
        msisdn = world.mint(idp, tup(Atom(f"msisdn:{user}"), domain(idp)))
        sim = world.keypair(phone, "sim", extractable=False)
        world.learn(phone, sim)
        world.put(phone, "sim-key", sim)
        world.put(idp, f"msisdn:{user}", msisdn)
        world.put(idp, f"sim:{user}", PubKey(sim.id))
        world.send(idp, phone, tup(Atom("provision"), msisdn), Kind.SMS)
        world[user].config["accounts"][idp] = (msisdn, sim)
        world[user].config["idp"] = idp
        return msisdn

    def pseudonym(self, world: World, user: str, sp: str) -> Term:
        idp = self.home(world, user)
        salt = world[idp].records["pairwise-salt"]
        return world.mint(idp, Hash(tup(self.ident(world, user), sp_atom(sp), salt)))

    def identity(self, world, user, sp):
        return self.pseudonym(world, user, sp)

    def loa(self) -> Atom:
        return Atom(f"loa:{self.features['loa']}")

    def register_sp(self, world, sp):
        mark = len(world.trace)
        world.send(sp, self.fedop, tup(Atom("register-client"), sp_atom(sp)), annotation=A.MANUAL_REGISTRATION)
        secret = world.symkey(self.fedop, "client", scope=Scope.SERVER)
        world.send(self.fedop, sp, tup(Atom("client-secret"), secret), BACK)
        world.put(sp, "client-secret", secret)
        for mno in world.by_role(Role.IDP):
            # the federation distributes client credentials to every operator
            world.send(self.fedop, mno.id, tup(Atom("client"), sp_atom(sp), secret), BACK)
            world.put(mno.id, f"client:{sp}", secret)
        return world.trace[mark:]

    def _code(self, world, user, sp, n):
        idp = self.home(world, user)
        return Mac(token_key(world, idp), tup(Atom("code"), self.pseudonym(world, user, sp), sp_atom(sp), n))

    def _confirm(self, world, user, idp, n):
        phone = self.phone(user)
        if not world[phone].online:
            raise AuthFailed("phone unreachable")
        if self.features["loa"] >= 3:
            sim = world[phone].records["sim-key"]
            world.send(idp, phone, tup(Atom("mc-confirm"), n), Kind.SMS)
            world.send(user, phone, world[user].config["pin"], annotation=A.USER_ACTION)
            world.send(phone, idp, Sign(sim, tup(Atom("mc-confirm"), n)), Kind.SMS, A.OOB_VERIFICATION)
        else:
            otp = world.nonce(idp, "otp")
            world.send(idp, phone, tup(Atom("mc-otp"), otp), Kind.SMS, A.OOB_VERIFICATION)
            world.send(phone, user, otp)
            device = self.primary_device(world, user)
            world.send(user, device, otp, annotation=A.USER_ACTION)
            world.send(device, idp, tup(Atom("otp"), otp))

    def _authenticate(self, world, user, sp, device):
        secret = world[sp].records.get("client-secret")
        if secret is None:
            raise AuthFailed(f"{sp} is not registered with the federation")
        idp = self.home(world, user)
        msisdn = self.ident(world, user)
        world.send(device, sp, Atom("login"))
        world.send(sp, self.fedop, tup(Atom("discover"), sp_atom(sp)), REDIRECT, via=device)
        world.send(user, device, msisdn, annotation=A.USER_ACTION)
        world.send(device, self.fedop, tup(Atom("msisdn"), msisdn))
        world.send(self.fedop, sp, tup(Atom("operator"), domain(idp)), REDIRECT, A.IDP_SELECTED, via=device)
        n = world.nonce(sp, "state")
        world.send(sp, idp, tup(Atom("authorize"), sp_atom(sp), self.loa(), n), REDIRECT, via=device)
        self._confirm(world, user, idp, n)
        code = self._code(world, user, sp, n)
        world.send(idp, sp, tup(Atom("code"), code, n), REDIRECT, A.ASSERTION_ISSUED, via=device)
        world.send(sp, idp, tup(Atom("token-request"), code, secret), BACK, A.IDP_QUERIED)
        sub = self.pseudonym(world, user, sp)
        id_token = Sign(signing_key(world, idp), tup(domain(idp), sub, self.loa(), sp_atom(sp), n))
        world.send(idp, sp, tup(id_token, world[idp].records["membership"]), BACK, A.LOA_SIGNALLED)
        world.send(idp, sp, tup(Atom(f"profile:{user}"), sub), BACK, A.PROFILE_DATA_SHARED)
        if self.features["per_sp_keys"]:
            self._per_sp_key(world, user, sp, sub)
        self.open_session(world, user, sp, device, sub, (id_token,))
        self.welcome(world, sp, device, sub, local=False)
        return sub

    # -- augmented variant ------------------------------------------------

    def _per_sp_key(self, world, user, sp, sub):
        phone = self.phone(user)
        idp = self.home(world, user)
        key = world[phone].records.get(f"sp-key:{sp}")
        if key is None:
            key = world.keypair(phone, "spkey", extractable=False)
            world.learn(phone, key)
            world.put(phone, f"sp-key:{sp}", key)
            world.send(phone, idp, tup(Atom("certify"), PubKey(key.id), sp_atom(sp)), Kind.SMS)
            cert = Sign(signing_key(world, idp), tup(Atom("sp-key"), sub, PubKey(key.id), sp_atom(sp)))
            world.send(idp, phone, cert, Kind.SMS)
            world.put(phone, f"sp-cert:{sp}", cert)
        bound = world[sp].records.get(f"key:{sub.render()}")
        if bound is None:
            world.send(phone, sp, world[phone].records[f"sp-cert:{sp}"])
            world.put(sp, f"key:{sub.render()}", PubKey(key.id))
        c = world.nonce(sp, "chal")
        world.send(sp, phone, tup(Atom("sp-challenge"), c))
        world.send(phone, sp, Sign(key, tup(c, sp_atom(sp))))

    def _sp_binding(self, world, sp, sub):
        k = world[sp].records.get("binding-key")
        if k is None:
            k = world.symkey(sp, "binding", scope=Scope.SERVER)
            world.put(sp, "binding-key", k)
        return Mac(k, tup(Atom("bound"), sub, PubKey(ATTACKER_KEY.id)))

    def acceptance(self, world, victim, sp):
        code = self._code(world, victim, sp, FRESH)
        if not self.features["per_sp_keys"]:
            return [(code,)]
        sub = self.pseudonym(world, victim, sp)
        alts = []
        key = world[self.phone(victim)].records.get(f"sp-key:{sp}")
        if key is not None:
            alts.append((code, Sign(key, tup(FRESH, sp_atom(sp)))))
        alts.append((code, self._sp_binding(world, sp, sub), Sign(ATTACKER_KEY, tup(FRESH, sp_atom(sp)))))
        return alts

    def services(self, world, victim, sp):
        idp = self.home(world, victim)
        code = self._code(world, victim, sp, FRESH)
        if self.features["loa"] >= 3:
            sim = world[self.phone(victim)].records["sim-key"]
            proof = Sign(sim, tup(Atom("mc-confirm"), FRESH))
        else:
            # the one-time code only ever reaches the victim's handset
            proof = Mac(token_key(world, idp), tup(Atom("mc-otp"), FRESH))
        out = [Service("operator-login", idp, (proof,), (code,))]
        if self.features["per_sp_keys"]:
            sub = self.pseudonym(world, victim, sp)
            order = Sign(signing_key(world, idp), tup(Atom("rebind"), sub, PubKey(ATTACKER_KEY.id), sp_atom(sp)))
            out.append(
                Service("sp-key-rebind", sp, (order,), (self._sp_binding(world, sp, sub),), A.KEY_REVOCATION)
            )
        return out

    def _migrate(self, world, user):
        old = self.home(world, user)
        new = self._next_idp(world, user)
        self.signup(world, user, new)
        self.close_account(world, user, old)
        return new, False


class MobileConnectLoA2(MobileConnect):
    name = "mobile-connect-loa2"
    descriptor = SchemeDescriptor(
        "mobile-connect-loa2", "A3", "G1", "C1", "T1a", "M2",
        "Mobile Connect with an SMS one-time code.",
    )
    defaults = {"loa": 2, "per_sp_keys": False}


class MobileConnectAugmented(MobileConnect):
    name = "mobile-connect-augmented"
    descriptor = SchemeDescriptor(
        "mobile-connect-augmented", "A3", "G1", "C1", "T1b-ii", "M2",
        "LoA3 plus operator-certified per-SP SIM keys.",
    )
    defaults = {"loa": 3, "per_sp_keys": True}


# -- Shibboleth -------------------------------------------------------------


class Shibboleth(RemoteIdPDriver):
    name = "shibboleth"
    descriptor = SchemeDescriptor(
        "shibboleth", "A3", "G1", "C1", "T1a", "M1",
        "SAML federation with central metadata and a discovery service.",
    )
    defaults = {"discovery_service": True, "pairwise_ids": True, "federation_membership": True}
    optional_features = frozenset({"discovery_service", "pairwise_ids"})
    fedop = "federation"

    def _infrastructure(self, world, scenario):
        world.add(Principal(self.fedop, Role.FEDERATION_OPERATOR))
        _server_keys(world, self.fedop)
        super()._infrastructure(world, scenario)

    def _make_idp(self, world, pid):
        p = super()._make_idp(world, pid)
        _server_keys(world, pid)
        world.put(pid, "pairwise-salt", world.fresh(Nonce, pid, "salt", scope=Scope.SERVER))
        if self.features["federation_membership"]:
            vet(world, pid, self.fedop)
        return p

    def register_sp(self, world, sp):
        mark = len(world.trace)
        world.send(sp, self.fedop, tup(Atom("metadata"), sp_atom(sp)), annotation=A.MANUAL_REGISTRATION)
        world.send(self.fedop, sp, tup(Atom("federation-metadata"), domain(self.fedop)), BACK)
        if not self.features["discovery_service"]:
            # without central discovery the SP curates its own IdP list
            for idp in sorted(p.id for p in world.by_role(Role.IDP)):
                world.send(sp, idp, tup(Atom("trust"), sp_atom(sp)), annotation=A.MANUAL_REGISTRATION)
                world.send(idp, sp, tup(Atom("trust"), domain(idp)), BACK)
        return world.trace[mark:]

    def name_id(self, world: World, user: str, sp: str) -> Term:
        idp = self.home(world, user)
        ident = self.ident(world, user)
        if not self.features["pairwise_ids"]:
            return ident
        salt = world[idp].records["pairwise-salt"]
        return world.mint(idp, Hash(tup(ident, sp_atom(sp), salt)))

    def identity(self, world, user, sp):
        return self.name_id(world, user, sp)

    def _artifact(self, world, user, sp, n):
        idp = self.home(world, user)
        return Mac(token_key(world, idp), tup(Atom("artifact"), self.name_id(world, user, sp), sp_atom(sp), n))

    def _authenticate(self, world, user, sp, device):
        idp = self.home(world, user)
        world.send(device, sp, Atom("login"))
        world.send(user, device, domain(idp), annotation=A.USER_ACTION)
        if self.features["discovery_service"]:
            world.send(sp, self.fedop, tup(Atom("discover"), sp_atom(sp)), REDIRECT, via=device)
            world.send(device, self.fedop, domain(idp), annotation=A.IDP_SELECTED)
            world.send(self.fedop, sp, tup(Atom("selected"), domain(idp)), REDIRECT, via=device)
        else:
            world.send(device, sp, domain(idp), annotation=A.IDP_SELECTED)
        n = world.nonce(sp, "authn")
        world.send(sp, idp, tup(Atom("authn-request"), sp_atom(sp), n), REDIRECT, via=device)
        self.idp_login(world, user, device, idp)
        art = self._artifact(world, user, sp, n)
        world.send(idp, sp, tup(Atom("artifact"), art), REDIRECT, A.ASSERTION_ISSUED, via=device)
        world.send(sp, idp, tup(Atom("resolve"), art), BACK, A.IDP_QUERIED)
        sub = self.name_id(world, user, sp)
        stmt = Sign(signing_key(world, idp), tup(domain(idp), sub, Atom("loa:password"), sp_atom(sp), n))
        membership = world[idp].records.get("membership", Atom("no-membership"))
        world.send(idp, sp, tup(stmt, membership), BACK, A.LOA_SIGNALLED)
        world.send(idp, sp, tup(Atom(f"profile:{user}"), sub), BACK, A.PROFILE_DATA_SHARED)
        self.open_session(world, user, sp, device, sub, (stmt,))
        self.welcome(world, sp, device, sub, local=False)
        return sub

    def acceptance(self, world, victim, sp):
        return [(self._artifact(world, victim, sp, FRESH),)]

    def services(self, world, victim, sp):
        art = self._artifact(world, victim, sp, FRESH)
        return [Service("idp-login", self.home(world, victim), (self.password_of(world, victim),), (art,))]
