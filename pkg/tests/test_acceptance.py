"""Acceptance gate: one pass/fail line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import io
import random
import subprocess
import sys
from pathlib import Path

import pytest

sys.path[:0] = [str(Path(__file__).parent), str(Path(__file__).parents[1] / "src")]

from oracle import bfs_derivable, universe  # noqa: E402
from termgen import CLASSES, random_knowledge  # noqa: E402

from ssoeval.cli import main  # noqa: E402
from ssoeval.evaluator import classify, evaluate, evaluate_matrix, prepare  # noqa: E402
from ssoeval.report import (  # noqa: E402
    AXES,
    BENEFITS,
    TABLE_BENEFITS,
    TABLE_ROWS,
    Cell,
    Verdict,
    coarse_t,
    expected_matrix,
)
from ssoeval.schemes import REGISTRY, SetupImpossible, SwitchImpossible, get_driver  # noqa: E402
from ssoeval.terms import (  # noqa: E402
    Atom,
    Derivation,
    Hash,
    Kdf,
    Mac,
    Nonce,
    SECRET_TYPES,
    SecretClass,
    Strength,
    SymEnc,
    SymKey,
    WeakSecret,
    close,
    secret_material,
)
from ssoeval.world import Annotation, Scenario  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"
RESULTS: list[str] = []


def _report(number: int, title: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})")


_MATRIX = {}


def _computed():
    if "m" not in _MATRIX:
        _MATRIX["m"] = evaluate_matrix(TABLE_ROWS)[0]
    return _MATRIX["m"]


def check_table() -> tuple[bool, str]:
    m, want = _computed(), expected_matrix()
    bad = [
        f"{r}/{b}: {m.cell(r, b)} != {want.cell(r, b)}"
        for r in TABLE_ROWS for b in TABLE_BENEFITS if m.cell(r, b) != want.cell(r, b)
    ]
    n = len(TABLE_ROWS) * len(TABLE_BENEFITS)
    return not bad, f"{n - len(bad)}/{n} cells match" + (f"; {bad[:3]}" if bad else "")


def check_b8() -> tuple[bool, str]:
    m, want = _computed(), expected_matrix()
    subs = ("B8a", "B8b", "B8c")
    bad = [f"{r}/{b}" for r in TABLE_ROWS for b in subs if m.cell(r, b) != want.cell(r, b)]
    n = len(TABLE_ROWS) * len(subs)
    return not bad, f"{n - len(bad)}/{n} sub-cells match" + (f"; {bad[:3]}" if bad else "")


def check_classifier() -> tuple[bool, str]:
    want = expected_matrix()
    bad = []
    for r in TABLE_ROWS:
        got = classify(r).coords
        for a in AXES:
            g, w = got[a], want.coords[r][a]
            if a == "T":
                g, w = coarse_t(g), coarse_t(w)
            if g != w:
                bad.append(f"{r}/{a}: {g} != {w}")
    return not bad, f"{len(TABLE_ROWS) * len(AXES) - len(bad)}/{len(TABLE_ROWS) * len(AXES)} coordinates match" + (
        f"; {bad[:3]}" if bad else ""
    )


def check_oracle(samples: int = 1000) -> tuple[bool, str]:
    rng = random.Random(2024)
    disagreements = 0
    checked = 0
    for _ in range(samples):
        k = random_knowledge(rng, max_terms=12, depth=4)
        targets = random_knowledge(rng, max_terms=4, depth=4)
        d = Derivation(k, CLASSES)
        expected = bfs_derivable(k, CLASSES, targets)
        for t in universe(k, targets):
            checked += 1
            if (t in d) != (t in expected):
                disagreements += 1
    pw = WeakSecret("pw")
    cls = {"pw": SecretClass("pw", Strength.WEAK), "k": SecretClass("k"), "n": SecretClass("n")}
    stretched = Hash(Kdf(pw, Atom("auth")))
    directed = [
        # strong secrets never come back out of one-way functions
        Nonce("n") not in close([Hash(Nonce("n")), Mac(SymKey("k"), Nonce("n"))], cls),
        SymKey("k") not in close([Kdf(SymKey("k"), Atom("l"))], cls),
        # a weak secret falls to guessing exactly when a verifier exists
        pw in close([Hash(pw)], cls),
        pw not in close([], cls),
        pw not in close([SymEnc(SymKey("k"), pw)], cls),
        pw in close([stretched], cls),
        pw not in Derivation([stretched], cls, stretched_guessing=False),
    ]
    ok = disagreements == 0 and all(directed)
    return ok, f"{samples} random sets, {checked} terms checked, {disagreements} disagreements; {sum(directed)}/{len(directed)} directed cases"


def check_augmentations() -> tuple[bool, str]:
    out = []
    ok = True
    for base, aug, witness in (
        ("saw", "saw-augmented", Annotation.USER_NOTIFICATION),
        ("mobile-connect-loa3", "mobile-connect-augmented", Annotation.KEY_REVOCATION),
    ):
        diff = [b for b in BENEFITS if evaluate(base, b).cell != evaluate(aug, b).cell]
        b11 = evaluate(aug, "B11")
        seen = any(e.annotation is witness for e in b11.trace)
        good = (
            diff == ["B11"]
            and evaluate(base, "B11").cell.verdict is Verdict.NOT_PROVIDED
            and b11.cell == Cell(Verdict.PARTIAL)
            and seen
        )
        ok &= good
        out.append(f"{aug}: differs at {diff or 'nothing'}, witness {witness.value} {'seen' if seen else 'missing'}")
    return ok, "; ".join(out)


def _cli(*argv) -> str:
    buf = io.StringIO()
    main(list(argv), buf, io.StringIO())
    return buf.getvalue()


def check_determinism() -> tuple[bool, str]:
    cmd = [sys.executable, "-m", "ssoeval.cli", "run-all", "--seed", "0"]
    env_src = str(Path(__file__).parents[1] / "src")
    runs = [
        subprocess.run(cmd, capture_output=True, env={"PYTHONPATH": env_src, "PYTHONHASHSEED": str(h)}).stdout
        for h in (1, 2)
    ]
    same = runs[0] == runs[1] and runs[0].endswith(b"MATCH\n")
    stale = [n for n in sorted(REGISTRY) if _cli("trace", "--scheme", n) != (GOLDEN / f"{n}.trace").read_text(encoding="utf-8")]
    ok = same and not stale
    return ok, f"run-all byte-identical across processes: {same}; golden traces stable: {len(REGISTRY) - len(stale)}/{len(REGISTRY)}"


def _strays(world) -> list[str]:
    bad = []
    for p in world.principals.values():
        for t in p.store():
            for s in secret_material(t):
                if not isinstance(s, SECRET_TYPES):
                    continue
                cls = world.classes[s.id]
                if cls.strength is Strength.STRONG and not cls.extractable and world.generator.get(s.id) != p.id:
                    bad.append(f"{p.id} holds {s.render()}")
    return bad


def check_conservation() -> tuple[bool, str]:
    bad = []
    runs = 0
    for name in sorted(REGISTRY):
        driver = get_driver(name)
        prep = prepare(driver, Scenario(name))
        w = prep.world
        try:
            driver.setup_device(w, prep.victim, f"{prep.victim}-fresh")
        except SetupImpossible:
            pass
        try:
            driver.switch_idp(w, prep.victim)
        except SwitchImpossible:
            pass
        runs += 1
        bad += [f"{name}: {b}" for b in _strays(w)]
    return not bad, f"{runs} schemes, {len(bad)} violations" + (f"; {bad[:3]}" if bad else "")


CRITERIA = [
    (1, "benefit matrix reproduction", check_table),
    (2, "B8 sub-verdict reproduction", check_b8),
    (3, "taxonomy classifier", check_classifier),
    (4, "derivation engine equals brute-force oracle", check_oracle),
    (5, "augmentation deltas", check_augmentations),
    (6, "determinism and golden traces", check_determinism),
    (7, "secret conservation in fault-free runs", check_conservation),
]


@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check):
    ok, detail = check()
    _report(number, title, ok, detail)
    print(RESULTS[-1])
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, title, check in CRITERIA:
        ok, detail = check()
        _report(number, title, ok, detail)
        print(RESULTS[-1])
        failed += not ok
    sys.exit(1 if failed else 0)
