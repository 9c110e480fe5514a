"""Credential managers: the user's device (or a proxy) holds per-SP secrets.

* Firefox Sync 1.5 and 2.0 keep a password vault on each device and
  synchronise it through an encrypted server copy.
* FIDO UAF enrolls a per-SP key pair in an authenticator on the device.
* Impostor is a remote proxy that logs in on the user's behalf once the
  user answers a challenge with a hardware token.
"""

from __future__ import annotations

from ..terms import Atom, Hash, Kdf, Mac, PubKey, Scope, Sign, SymEnc, Term, tup
from ..world import Annotation, Kind, Principal, Role, World
from .base import FRESH, AuthFailed, Driver, SchemeDescriptor, Service, SetupImpossible, SwitchImpossible, domain, sp_atom
from .federated import signing_key

A = Annotation


class DeviceManagedDriver(Driver):
    """Devices are the user's IdPs; the first one is created at deploy."""

    local_idp_devices = True

    def primary_device(self, world, user):
        return world[user].config.get("primary", f"{user}-laptop")

    def _new_primary(self, world: World, user: str) -> str:
        n = len(world.devices_of(user)) + 1
        dev = f"{user}-device{n}"
        self.setup_device(world, user, dev)
        world[user].config["primary"] = dev
        return dev

    def idp_domains(self, world, user):
        return set()

    def idps_of(self, world, user):
        return [d.id for d in world.devices_of(user) if d.local_idp]

    def identity(self, world, user, sp):
        return world.accounts[(user, sp)]


# -- Firefox Sync -----------------------------------------------------------


class FirefoxSync(DeviceManagedDriver):
    """Version 1.5 pairs devices to move the vault key; version 2.0 derives
    both the server login and the vault key from the account password."""

    name = "sync15"
    descriptor = SchemeDescriptor(
        "sync15", "A5", "G3", "C2", "T2a", "M4",
        "Password vault synchronised under a device-held key.",
    )
    defaults = {"password_derived_keys": False}
    server = "sync"

    def _infrastructure(self, world, scenario):
        world.add(Principal(self.server, Role.SYNC_SERVER))

    def _keys(self, world: World, user: str):
        pw = world[user].config["sync-pw"]
        return Kdf(pw, Atom("auth")), Kdf(pw, Atom("enc"))

    def _enroll_user(self, world, user):
        dev = f"{user}-laptop"
        world.add(Principal(dev, Role.DEVICE, owner=user, local_idp=True))
        pw = world.password(user, "syncpw")
        world.learn(user, pw)
        acct = world.mint(self.server, tup(Atom(f"sync:{user}"), domain(self.server)))
        world[user].config.update({"sync-pw": pw, "sync-account": acct, "primary": dev})
        entries = []
        for sp in sorted(p.id for p in world.by_role(Role.SP)):
            uname = world.mint(user, Atom(f"acct:{user}@{sp}"))
            site_pw = world.password(user, "sitepw")
            world.learn(user, site_pw)
            world.send(user, dev, tup(uname, site_pw), annotation=A.USER_ACTION)
            world.send(dev, sp, tup(Atom("signup"), uname, site_pw))
            world.put(sp, f"pw:{uname.name}", Hash(site_pw))
            world.put(sp, f"account:{uname.name}", uname)
            world.accounts[(user, sp)] = uname
            entries.append(tup(sp_atom(sp), uname, site_pw))
            world.put(dev, f"entry:{sp}", tup(uname, site_pw))
        vault = tup(*entries) if entries else Atom("empty-vault")
        world.put(dev, "vault", vault)
        world.send(user, dev, pw, annotation=A.USER_ACTION)
        if self.features["password_derived_keys"]:
            k_auth, k_enc = self._keys(world, user)
            world.send(dev, self.server, tup(Atom("signup"), acct, k_auth))
            world.put(self.server, f"auth:{user}", Hash(k_auth))
            blob = SymEnc(k_enc, vault)
        else:
            key = world.symkey(dev, "vault")
            world.put(dev, "vault-key", key)
            world.send(dev, self.server, tup(Atom("signup"), acct, pw))
            world.put(self.server, f"auth:{user}", Hash(pw))
            blob = SymEnc(key, vault)
        world.send(dev, self.server, tup(Atom("upload"), blob))
        world.put(self.server, f"blob:{user}", blob)

    def _setup_device(self, world, user, device):
        source = next((d.id for d in world.devices_of(user) if "vault" in d.records), None)
        if source is None:
            raise SetupImpossible("no provisioned device to pair with")
        acct = world[user].config["sync-account"]
        pw = world[user].config["sync-pw"]
        blob = world[self.server].records[f"blob:{user}"]
        if self.features["password_derived_keys"]:
            k_auth, k_enc = self._keys(world, user)
            world.send(user, device, pw, annotation=A.USER_ACTION)
            world.send(device, self.server, tup(Atom("login"), acct, k_auth), annotation=A.DEVICE_SETUP)
        else:
            key = world[source].records["vault-key"]
            world.send(user, device, Atom("pairing-code"), annotation=A.USER_ACTION)
            world.send(source, device, key, Kind.PAIRING_OOB, A.DEVICE_SETUP)
            world.put(device, "vault-key", key)
            world.send(user, device, pw, annotation=A.USER_ACTION)
            world.send(device, self.server, tup(Atom("login"), acct, pw))
        world.send(self.server, device, blob)
        for key, value in world[source].records.items():
            if key == "vault" or key.startswith("entry:"):
                world.put(device, key, value)

    def _entry(self, world: World, device: str, sp: str):
        entry = world[device].records.get(f"entry:{sp}")
        if entry is None:
            raise AuthFailed(f"{device} holds no credential for {sp}")
        return entry.left, entry.right

    def _authenticate(self, world, user, sp, device):
        uname, pw = self._entry(world, device, sp)
        world.send(device, sp, tup(Atom("login"), uname, pw))
        if world[sp].records.get(f"pw:{uname.name}") != Hash(pw):
            raise AuthFailed("wrong password")
        self.open_session(world, user, sp, device, uname, (uname,))
        self.welcome(world, sp, device, uname, local=True)
        return uname

    def _site_password(self, world: World, victim: str, sp: str) -> Term:
        return self._entry(world, self.primary_device(world, victim), sp)[1]

    def acceptance(self, world, victim, sp):
        return [(self._site_password(world, victim, sp),)]

    def services(self, world, victim, sp):
        if self.features["password_derived_keys"]:
            cred = self._keys(world, victim)[0]
        else:
            cred = world[victim].config["sync-pw"]
        blob = world[self.server].records[f"blob:{victim}"]
        return [Service("sync-download", self.server, (cred,), (blob,))]

    def _migrate(self, world, user):
        return self._new_primary(world, user), False


class FirefoxSync20(FirefoxSync):
    name = "sync20"
    descriptor = SchemeDescriptor(
        "sync20", "A5", "G3", "C2", "T2a", "M4",
        "Vault key and server login both stretched from the account password.",
    )
    defaults = {"password_derived_keys": True}


# -- FIDO UAF ---------------------------------------------------------------


class UAF(DeviceManagedDriver):
    name = "uaf-attested"
    descriptor = SchemeDescriptor(
        "uaf-attested", "A6", "G1", "C2", "T2b", "M3",
        "Per-SP keys in a certified authenticator, unlocked with a PIN.",
    )
    defaults = {"attested": True}
    fedop = "fido"
    model = "authenticator-model"

    def idp_domains(self, world, user):
        # an SP can refuse an authenticator model only when it is certified
        return {domain(self.model).name} if self.features["attested"] else set()

    def _infrastructure(self, world, scenario):
        if self.features["attested"]:
            world.add(Principal(self.fedop, Role.FEDERATION_OPERATOR))
            world.put(self.fedop, "signing-key", world.keypair(self.fedop, "fido-sig", scope=Scope.SERVER))

    def _enroll_user(self, world, user):
        dev = f"{user}-laptop"
        world.add(Principal(dev, Role.DEVICE, owner=user, local_idp=True))
        pin = world.password(user, "pin")
        world.learn(user, pin)
        world[user].config.update({"pin": pin, "primary": dev})
        self._provision(world, dev)
        for sp in sorted(p.id for p in world.by_role(Role.SP)):
            self._enroll_at(world, user, dev, sp)

    def _provision(self, world: World, dev: str) -> None:
        """Give the device an authenticator (certified when attested)."""
        if not self.features["attested"]:
            return
        att = world.keypair(dev, "attest", extractable=False)
        world.learn(dev, att)
        world.put(dev, "attestation-key", att)
        pub = PubKey(att.id)
        world.send(dev, self.fedop, tup(Atom("certify"), domain(self.model), pub), annotation=A.MANUAL_REGISTRATION)
        cert = Sign(signing_key(world, self.fedop), tup(Atom("member"), domain(self.model), pub))
        world.send(self.fedop, dev, cert)
        world.put(dev, "attestation-cert", cert)

    def _enroll_at(self, world: World, user: str, dev: str, sp: str, authorizer: str | None = None) -> None:
        attested = self.features["attested"]
        key = world.keypair(dev, "uaf", extractable=not attested)
        world.learn(dev, key)
        world.put(dev, f"uaf-key:{sp}", key)
        pub = PubKey(key.id)
        world.send(user, dev, world[user].config["pin"], annotation=A.USER_ACTION)
        if authorizer is not None:
            old = world[authorizer].records[f"uaf-key:{sp}"]
            world.send(authorizer, sp, Sign(old, tup(Atom("add-key"), pub, sp_atom(sp))))
        if attested:
            stmt = tup(Sign(world[dev].records["attestation-key"], tup(Atom("attest"), pub)), world[dev].records["attestation-cert"])
        else:
            stmt = Sign(key, tup(Atom("attest"), pub))
        world.send(dev, sp, tup(Atom("uaf-register"), pub, stmt), annotation=A.DEVICE_SETUP)
        world.put(sp, f"key:{key.id}", pub)
        world.put(sp, f"attestation:{key.id}", stmt)
        if (user, sp) not in world.accounts:
            world.accounts[(user, sp)] = world.mint(dev, pub)
            world.put(sp, f"account:{key.id}", pub)

    def _setup_device(self, world, user, device):
        enrolled = [d.id for d in world.devices_of(user) if d.id != device and any(k.startswith("uaf-key:") for k in d.records)]
        source = enrolled[0] if enrolled else None
        if source is None:
            raise SetupImpossible("no enrolled device to authorize the new one")
        self._provision(world, device)
        for (u, sp) in sorted(world.accounts):
            if u == user:
                self._enroll_at(world, user, device, sp, authorizer=source)

    def loa(self) -> Atom:
        return Atom("loa:pin")

    def _authenticate(self, world, user, sp, device):
        key = world[device].records.get(f"uaf-key:{sp}")
        if key is None:
            raise AuthFailed(f"{device} has no key for {sp}")
        n = world.nonce(sp, "chal")
        world.send(sp, device, tup(Atom("uaf-challenge"), n, sp_atom(sp)))
        world.send(user, device, world[user].config["pin"], annotation=A.USER_ACTION)
        world.send(device, sp, Sign(key, tup(n, sp_atom(sp), self.loa())), annotation=A.ASSERTION_ISSUED)
        account = world.accounts[(user, sp)]
        self.open_session(world, user, sp, device, account, (world[sp].records[f"attestation:{key.id}"],))
        self.welcome(world, sp, device, account, local=True)
        return account

    def acceptance(self, world, victim, sp):
        alts = []
        for dev in world.devices_of(victim):
            key = dev.records.get(f"uaf-key:{sp}")
            if key is not None:
                alts.append((Sign(key, tup(FRESH, sp_atom(sp), self.loa())),))
        return alts

    def _migrate(self, world, user):
        if self.features["attested"]:
            raise SwitchImpossible("attested keys cannot leave the authenticator")
        old = self.primary_device(world, user)
        new = f"{user}-device{len(world.devices_of(user)) + 1}"
        world.add(Principal(new, Role.DEVICE, owner=user, local_idp=True))
        keys = {k: v for k, v in world[old].records.items() if k.startswith("uaf-key:")}
        world.send(old, new, tup(*keys.values()), Kind.PAIRING_OOB, A.DEVICE_SETUP)
        for k, v in keys.items():
            world.put(new, k, v)
        world[user].config["primary"] = new
        return new, False


class UAFNonAttested(UAF):
    name = "uaf-nonattested"
    descriptor = SchemeDescriptor(
        "uaf-nonattested", "A5", "G1", "C2", "T2b", "M3",
        "Per-SP software keys with self-signed attestation.",
    )
    defaults = {"attested": False}


# -- Impostor ---------------------------------------------------------------


class Impostor(Driver):
    name = "impostor"
    descriptor = SchemeDescriptor(
        "impostor", "A5", "G4", "C2", "T1a", "M1",
        "Remote proxy stores the user's passwords and logs in for them.",
    )
    idp_prefix = "impostor"

    def _infrastructure(self, world, scenario):
        for i in range(1, scenario.idps + 1):
            pid = f"{self.idp_prefix}{i}"
            world.add(Principal(pid, Role.IDP))
            world.put(pid, "token-key", world.symkey(pid, f"{pid}-tok", scope=Scope.SERVER))

    def token(self, user: str) -> str:
        return f"{user}-token"

    def home(self, world: World, user: str) -> str:
        return world[user].config["idp"]

    def _enroll_user(self, world, user):
        dev = self.primary_device(world, user)
        world.add(Principal(dev, Role.DEVICE, owner=user))
        tok = self.token(user)
        world.add(Principal(tok, Role.DEVICE, owner=user, hardware_token=True))
        key = world.keypair(tok, "token", extractable=False)
        world.learn(tok, key)
        world.put(tok, "token-key", key)
        world[user].config["creds"] = {}
        for sp in sorted(p.id for p in world.by_role(Role.SP)):
            uname = world.mint(user, Atom(f"acct:{user}@{sp}"))
            pw = world.password(user, "sitepw")
            world.learn(user, pw)
            world.send(user, dev, tup(uname, pw), annotation=A.USER_ACTION)
            world.send(dev, sp, tup(Atom("signup"), uname, pw))
            world.put(sp, f"pw:{uname.name}", Hash(pw))
            world.put(sp, f"account:{uname.name}", uname)
            world.accounts[(user, sp)] = uname
            world[user].config["creds"][sp] = (uname, pw)
        self._join(world, user, f"{self.idp_prefix}1")

    def _join(self, world: World, user: str, idp: str) -> None:
        dev = self.primary_device(world, user)
        world[user].config["idp"] = idp
        world.send(dev, idp, tup(Atom("register-token"), PubKey(world[self.token(user)].records["token-key"].id)))
        world.put(idp, f"token:{user}", PubKey(world[self.token(user)].records["token-key"].id))
        for sp in sorted(world[user].config["creds"]):
            self._store_credential(world, user, sp)

    def _store_credential(self, world: World, user: str, sp: str) -> None:
        idp = self.home(world, user)
        uname, pw = world[user].config["creds"][sp]
        dev = self.primary_device(world, user)
        world.send(user, dev, tup(uname, pw), annotation=A.USER_ACTION)
        msg = tup(Atom("store"), sp_atom(sp), uname, pw)
        world.send(dev, idp, msg)
        world.put(idp, f"cred:{sp}:{user}", tup(uname, pw))
        # the terminal only relays; it keeps nothing once the proxy holds it
        world.forget(dev, tup(uname, pw), msg, tup(Atom("signup"), uname, pw))

    def _response(self, world: World, user: str, n: Term) -> Term:
        return Sign(world[self.token(user)].records["token-key"], tup(Atom("impostor-challenge"), n))

    def _proxy_session(self, world: World, user: str, sp: str, n: Term) -> Term:
        idp = self.home(world, user)
        uname = world[user].config["creds"][sp][0]
        return Mac(world[idp].records["token-key"], tup(Atom("proxy"), uname, sp_atom(sp), n))

    def _authenticate(self, world, user, sp, device):
        idp = self.home(world, user)
        tok = self.token(user)
        cred = world[idp].records.get(f"cred:{sp}:{user}")
        if cred is None:
            raise AuthFailed(f"{idp} holds no credential for {sp}")
        world.send(device, idp, tup(Atom("proxy"), sp_atom(sp)))
        n = world.nonce(idp, "chal")
        world.send(idp, device, tup(Atom("challenge"), n))
        world.send(user, tok, n, annotation=A.USER_ACTION)
        resp = self._response(world, user, n)
        world.send(tok, user, resp)
        world.send(user, device, resp, annotation=A.USER_ACTION)
        world.send(device, idp, resp)
        world.send(idp, sp, tup(Atom("login"), cred))
        uname = cred.left
        self.open_session(world, user, sp, idp, uname, (uname,))
        world.send(sp, idp, tup(Atom("welcome"), uname), annotation=A.ASSERTION_VERIFIED_LOCALLY)
        world.send(idp, device, tup(Atom("proxied-page"), sp_atom(sp), self._proxy_session(world, user, sp, n)))
        return uname

    def idps_of(self, world, user):
        return [self.home(world, user)]

    def identity(self, world, user, sp):
        return world.accounts[(user, sp)]

    def acceptance(self, world, victim, sp):
        pw = world[victim].config["creds"][sp][1]
        return [(pw,), (self._proxy_session(world, victim, sp, FRESH),)]

    def services(self, world, victim, sp):
        proof = self._response(world, victim, FRESH)
        return [Service("proxy-login", self.home(world, victim), (proof,), (self._proxy_session(world, victim, sp, FRESH),))]

    def _migrate(self, world, user):
        old = self.home(world, user)
        others = sorted(p.id for p in world.by_role(Role.IDP) if p.id != old)
        if not others:
            raise SwitchImpossible("no other proxy deployed")
        dev = self.primary_device(world, user)
        world[user].config["idp"] = others[0]
        world.send(dev, others[0], tup(Atom("register-token"), PubKey(world[self.token(user)].records["token-key"].id)))
        world.put(others[0], f"token:{user}", PubKey(world[self.token(user)].records["token-key"].id))
        return others[0], False

    def _repair(self, world, user, sp, old, seen):
        # the new proxy must be given this SP's credential by hand
        self._store_credential(world, user, sp)
