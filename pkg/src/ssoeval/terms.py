"""Symbolic term algebra and the attacker derivation engine.

Terms are immutable trees compared structurally.  The attacker's knowledge
is represented by its *analysed* set: every term obtainable by taking
known terms apart.  Membership of anything else is decided by synthesis
(can it be built from the analysed set with the public constructors).
Atoms are public names and are always synthesisable.

Offline guessing: a ``WeakSecret`` whose class is ``Weak`` joins the
analysed set as soon as the attacker holds a *verifier* for it, i.e. a
one-way image (``Hash``, ``Kdf``, ``Mac`` or ``SymEnc``) containing the
secret that can be recomputed from the rest of its knowledge plus a guess.
A verifier in which every occurrence of the secret sits below a ``Kdf``
node is a *stretched* verifier (key-stretched password); callers can turn
guessing against those off to tell slowed guessing from plain cracking.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping


class TermError(ValueError):
    """A term violates a key-position constraint."""


class ClassificationMissing(KeyError):
    """A secret term was encountered that has no ``SecretClass`` entry."""


class Term:
    """Base class of every symbolic value."""

    __slots__ = ()

    def children(self) -> tuple[Term, ...]:
        return ()

    def render(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.render()


# -- leaves -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Atom(Term):
    name: str

    def render(self) -> str:
        return f"(atom {self.name})"


@dataclass(frozen=True, slots=True)
class Nonce(Term):
    id: str

    def render(self) -> str:
        return f"(nonce {self.id})"


@dataclass(frozen=True, slots=True)
class SymKey(Term):
    id: str

    def render(self) -> str:
        return f"(symkey {self.id})"


@dataclass(frozen=True, slots=True)
class PrivKey(Term):
    id: str

    def render(self) -> str:
        return f"(privkey {self.id})"


@dataclass(frozen=True, slots=True)
class PubKey(Term):
    id: str

    def render(self) -> str:
        return f"(pubkey {self.id})"


@dataclass(frozen=True, slots=True)
class WeakSecret(Term):
    id: str

    def render(self) -> str:
        return f"(weak {self.id})"


# -- constructors -----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Pair(Term):
    left: Term
    right: Term

    def children(self) -> tuple[Term, ...]:
        return (self.left, self.right)

    def render(self) -> str:
        return f"(pair {self.left.render()} {self.right.render()})"


@dataclass(frozen=True, slots=True)
class Hash(Term):
    payload: Term

    def children(self) -> tuple[Term, ...]:
        return (self.payload,)

    def render(self) -> str:
        return f"(hash {self.payload.render()})"


@dataclass(frozen=True, slots=True)
class Kdf(Term):
    secret: Term
    label: Atom

    def __post_init__(self) -> None:
        if not isinstance(self.label, Atom):
            raise TermError(f"Kdf label must be an Atom, got {self.label!r}")

    def children(self) -> tuple[Term, ...]:
        return (self.secret, self.label)

    def render(self) -> str:
        return f"(kdf {self.secret.render()} {self.label.render()})"


_SYM_KEY_TYPES = (SymKey, Kdf, WeakSecret)


@dataclass(frozen=True, slots=True)
class SymEnc(Term):
    key: Term
    payload: Term

    def __post_init__(self) -> None:
        if not isinstance(self.key, _SYM_KEY_TYPES):
            raise TermError(f"SymEnc key must be SymKey/Kdf/WeakSecret, got {self.key!r}")

    def children(self) -> tuple[Term, ...]:
        return (self.key, self.payload)

    def render(self) -> str:
        return f"(senc {self.key.render()} {self.payload.render()})"


@dataclass(frozen=True, slots=True)
class Mac(Term):
    key: Term
    payload: Term

    def __post_init__(self) -> None:
        if not isinstance(self.key, _SYM_KEY_TYPES):
            raise TermError(f"Mac key must be SymKey/Kdf/WeakSecret, got {self.key!r}")

    def children(self) -> tuple[Term, ...]:
        return (self.key, self.payload)

    def render(self) -> str:
        return f"(mac {self.key.render()} {self.payload.render()})"


@dataclass(frozen=True, slots=True)
class AsymEnc(Term):
    pubkey: Term
    payload: Term

    def __post_init__(self) -> None:
        if not isinstance(self.pubkey, PubKey):
            raise TermError(f"AsymEnc key must be PubKey, got {self.pubkey!r}")

    def children(self) -> tuple[Term, ...]:
        return (self.pubkey, self.payload)

    def render(self) -> str:
        return f"(aenc {self.pubkey.render()} {self.payload.render()})"


@dataclass(frozen=True, slots=True)
class Sign(Term):
    privkey: Term
    payload: Term

    def __post_init__(self) -> None:
        if not isinstance(self.privkey, PrivKey):
            raise TermError(f"Sign key must be PrivKey, got {self.privkey!r}")

    def children(self) -> tuple[Term, ...]:
        return (self.privkey, self.payload)

    def render(self) -> str:
        return f"(sign {self.privkey.render()} {self.payload.render()})"


SECRET_TYPES = (Nonce, SymKey, PrivKey, WeakSecret)
VERIFIER_TYPES = (Hash, Kdf, Mac, SymEnc)


def tup(*items: Term) -> Term:
    """Right-nested pairing: ``tup(a, b, c) == Pair(a, Pair(b, c))``."""
    if not items:
        raise TermError("tup() needs at least one term")
    out = items[-1]
    for item in reversed(items[:-1]):
        out = Pair(item, out)
    return out


# -- classification ---------------------------------------------------------


class Strength(str, Enum):
    WEAK = "Weak"
    STRONG = "Strong"


class Scope(str, Enum):
    USER = "user"  # user-specific data: exposed by a store snapshot
    SERVER = "server"  # operational capability (signing keys, live access)


@dataclass(frozen=True)
class SecretClass:
    secret_id: str
    strength: Strength = Strength.STRONG
    extractable: bool = True
    scope: Scope = Scope.USER


Classes = Mapping[str, SecretClass]


def subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(cur.children())


def secret_material(t: Term) -> Iterator[Term]:
    """Subterms that carry information about their contents.

    Signing key slots are skipped: a signature reveals nothing about the
    private key that made it.
    """
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, Sign):
            stack.append(cur.payload)
        else:
            stack.extend(cur.children())


def check_classified(terms: Iterable[Term], classes: Classes) -> None:
    for t in terms:
        for s in subterms(t):
            if isinstance(s, SECRET_TYPES) and s.id not in classes:
                raise ClassificationMissing(s.render())


def render_set(terms: Iterable[Term]) -> list[str]:
    return sorted(t.render() for t in terms)


# -- closure ----------------------------------------------------------------


def synth(target: Term, known: frozenset[Term] | set[Term]) -> bool:
    """Can ``target`` be built from ``known`` with public constructors?"""
    if target in known or isinstance(target, Atom):
        return True
    if isinstance(target, PubKey):
        return PrivKey(target.id) in known
    if isinstance(target, SECRET_TYPES):
        return False
    return all(synth(c, known) for c in target.children())


def _all_under_kdf(t: Term, s: Term) -> bool:
    if t == s:
        return False
    if isinstance(t, Kdf):
        return True
    return all(_all_under_kdf(c, s) for c in t.children() if _contains(c, s))


def _contains(t: Term, s: Term) -> bool:
    return any(x == s for x in subterms(t))


@dataclass(frozen=True)
class Step:
    """Why a term entered the analysed set."""

    rule: str
    premises: tuple[Term, ...] = ()


class Derivation:
    """Analysed attacker knowledge together with per-term provenance."""

    def __init__(self, initial: Iterable[Term], classes: Classes, *, stretched_guessing: bool = True):
        initial = list(initial)
        check_classified(initial, classes)
        self.classes = classes
        self.stretched_guessing = stretched_guessing
        self.provenance: dict[Term, Step] = {t: Step("given") for t in initial}
        self.known: set[Term] = set(initial)
        self._saturate()
        self.terms = frozenset(self.known)

    def _add(self, t: Term, step: Step) -> bool:
        if t in self.known:
            return False
        self.known.add(t)
        self.provenance[t] = step
        return True

    def _saturate(self) -> None:
        changed = True
        while changed:
            changed = False
            for t in list(self.known):
                changed |= self._decompose(t)
            if not changed:
                changed = self._guess()

    def _decompose(self, t: Term) -> bool:
        k = self.known
        if isinstance(t, Pair):
            a = self._add(t.left, Step("unpair", (t,)))
            b = self._add(t.right, Step("unpair", (t,)))
            return a or b
        if isinstance(t, SymEnc) and synth(t.key, k):
            return self._add(t.payload, Step("sdec", (t, t.key)))
        if isinstance(t, AsymEnc) and PrivKey(t.pubkey.id) in k:
            return self._add(t.payload, Step("adec", (t, PrivKey(t.pubkey.id))))
        if isinstance(t, Sign):
            return self._add(t.payload, Step("sig-payload", (t,)))
        if isinstance(t, PrivKey):
            return self._add(PubKey(t.id), Step("keypair", (t,)))
        return False

    def _guess(self) -> bool:
        k = self.known
        candidates = {
            s
            for t in k
            for s in subterms(t)
            if isinstance(s, WeakSecret) and self.classes[s.id].strength is Strength.WEAK and s not in k
        }
        for s in sorted(candidates, key=lambda x: x.id):
            for t in sorted(k, key=lambda x: x.render()):
                if not isinstance(t, VERIFIER_TYPES) or not _contains(t, s):
                    continue
                if not self.stretched_guessing and _all_under_kdf(t, s):
                    continue
                rest = (k - {t}) | {s}
                if all(synth(c, rest) for c in t.children()):
                    rule = "guess-stretched" if _all_under_kdf(t, s) else "guess"
                    self._add(s, Step(rule, (t,)))
                    return True
        return False

    def __contains__(self, target: Term) -> bool:
        return synth(target, self.terms)

    def guessed(self) -> list[Term]:
        return [t for t, st in self.provenance.items() if st.rule.startswith("guess")]

    def explain(self, target: Term) -> list[str]:
        """Derivation lines (premises first) leading to ``target``."""
        lines: list[str] = []
        seen: set[Term] = set()

        def visit(t: Term) -> None:
            if t in seen:
                return
            seen.add(t)
            if t in self.provenance:
                step = self.provenance[t]
                for p in step.premises:
                    visit(p)
                lines.append(f"{step.rule}: {t.render()}")
            elif isinstance(t, Atom):
                return
            elif isinstance(t, PubKey) and PrivKey(t.id) in self.terms:
                visit(PrivKey(t.id))
                lines.append(f"keypair: {t.render()}")
            else:
                for c in t.children():
                    visit(c)
                lines.append(f"construct: {t.render()}")

        visit(target)
        return lines


def close(k: Iterable[Term], classes: Classes, *, stretched_guessing: bool = True) -> frozenset[Term]:
    """Least fixpoint of the analysis and guessing rules over ``k``."""
    return Derivation(k, classes, stretched_guessing=stretched_guessing).terms


def can_derive(k: Iterable[Term], target: Term, classes: Classes, *, stretched_guessing: bool = True) -> bool:
    check_classified([target], classes)
    return target in Derivation(k, classes, stretched_guessing=stretched_guessing)
