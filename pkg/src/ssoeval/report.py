"""Expected matrix, comparison and rendering.

The expected matrix is transcribed by hand from the published comparison
table; the three resilience-to-leak sub-verdicts (B8a/b/c) come from the
per-scheme discussion, because the table's single B8 column does not map
onto them one-to-one.  That column is kept in :data:`TABLE_B8` for
reference only.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum


class Verdict(str, Enum):
    PROVIDED = "Provided"
    PARTIAL = "Partial"
    NOT_PROVIDED = "NotProvided"

    def rank(self) -> int:
        return {"Provided": 2, "Partial": 1, "NotProvided": 0}[self.value]


class Footnote(str, Enum):
    NONE = "None"
    TWO_THIRD_PARTIES = "TwoThirdParties"
    OPTIONAL_FEATURE = "OptionalFeature"


@dataclass(frozen=True)
class Cell:
    verdict: Verdict
    footnote: Footnote = Footnote.NONE

    def __str__(self) -> str:
        if self.footnote is Footnote.NONE:
            return self.verdict.value
        return f"{self.verdict.value}+{self.footnote.value}"


AXES = ("A", "G", "C", "T", "M")
BENEFITS = (
    "B1", "B2", "B3", "B4", "B5", "B6", "B7",
    "B8a", "B8b", "B8c",
    "B9", "B10", "B11", "B12", "B13", "B14",
)
TABLE_BENEFITS = tuple(b for b in BENEFITS if not b.startswith("B8"))

# Row order of the published table, with display labels.
TABLE_ROWS = (
    "openid2",
    "persona",
    "oauth2",
    "oidc",
    "mobile-connect-loa3",
    "shibboleth",
    "saw",
    "persona-fallback",
    "securekey",
    "sync15",
    "sync20",
    "impostor",
    "uaf-nonattested",
    "uaf-attested",
)
AUGMENTED_ROWS = ("saw-augmented", "mobile-connect-augmented")
LABELS = {
    "openid2": "OpenID 2.0",
    "persona": "Mozilla Persona",
    "oauth2": "OAuth 2.0",
    "oidc": "OpenID Connect",
    "mobile-connect-loa2": "Mobile Connect (LoA2)",
    "mobile-connect-loa3": "Mobile Connect",
    "shibboleth": "Shibboleth",
    "saw": "SAW",
    "persona-fallback": "Persona Fallback",
    "securekey": "SecureKey Concierge",
    "sync15": "Firefox Sync 1.5",
    "sync20": "Firefox Sync 2.0",
    "impostor": "Impostor",
    "uaf-nonattested": "FIDO UAF (Non-Attested)",
    "uaf-attested": "FIDO UAF (Attested)",
    "saw-augmented": "SAW (augmented)",
    "mobile-connect-augmented": "Mobile Connect (augmented)",
}


@dataclass
class EvaluationMatrix:
    rows: list[str]
    coords: dict[str, dict[str, str]] = field(default_factory=dict)
    cells: dict[str, dict[str, Cell]] = field(default_factory=dict)

    def cell(self, scheme: str, benefit: str) -> Cell:
        return self.cells[scheme][benefit]

    def only(self, schemes: list[str]) -> EvaluationMatrix:
        return EvaluationMatrix(
            [r for r in self.rows if r in schemes],
            {r: self.coords[r] for r in self.rows if r in schemes},
            {r: self.cells[r] for r in self.rows if r in schemes},
        )

    def check_populated(self) -> None:
        for r in self.rows:
            missing = [a for a in AXES if a not in self.coords.get(r, {})]
            missing += [b for b in BENEFITS if b not in self.cells.get(r, {})]
            if missing:
                raise ValueError(f"{r}: unpopulated columns {missing}")


# -- expected data ----------------------------------------------------------

P, H, N = Verdict.PROVIDED, Verdict.PARTIAL, Verdict.NOT_PROVIDED
DAGGER, SECTION = Footnote.TWO_THIRD_PARTIES, Footnote.OPTIONAL_FEATURE

# scheme: (A, G, C, T, M), B1..B7, B9..B14, (B8a, B8b, B8c)
_EXPECTED = {
    # table row: OpenID 2.0
    "openid2": (("A1", "G1", "C2", "T1", "M1"),
                (N, P, P, N, P, P, P, N, P, N, N, N, P),
                (N, P, N)),   # discussion: password at IdP, leaked IdP store crackable
    # table row: Mozilla Persona
    "persona": (("A1", "G2", "C2", "T1", "M1"),
                (N, P, P, H, P, P, P, N, P, N, P, N, P),
                (N, P, N)),   # B4 partial: cached certificate outlives an outage
    # table row: OAuth 2.0
    "oauth2": (("A2", "G1", "C1", "T1", "M1"),
               (N, P, P, N, P, N, P, N, P, N, N, N, N),
               (N, P, N)),
    # table row: OpenID Connect (same as OAuth 2.0)
    "oidc": (("A2", "G1", "C1", "T1", "M1"),
             (N, P, P, N, P, N, P, N, P, N, N, N, N),
             (N, P, N)),
    # table row: Mobile Connect
    "mobile-connect-loa3": (("A3", "G1", "C1", "T1", "M2"),
                            (N, P, N, N, N, P, P, P, P, N, N, P, N),
                            (P, P, P)),  # SIM key never leaves the handset
    # table row: Shibboleth; B6 and B13 rely on optional features
    "shibboleth": (("A3", "G1", "C1", "T1", "M1"),
                   (N, P, P, N, N, (P, SECTION), P, P, P, N, N, (P, SECTION), N),
                   (N, P, N)),
    # table row: SAW; B1 partial via mail forwarding
    "saw": (("A4", "G3", "C1", "T1", "M1"),
            (H, P, P, N, P, P, P, N, P, N, N, N, P),
            (N, P, N)),
    # table row: Persona Fallback; B11 dagger: bridge or mail provider
    "persona-fallback": (("A4", "G2", "C2", "T1", "M1"),
                         (N, P, P, H, P, P, P, N, P, (N, DAGGER), P, N, P),
                         (N, P, N)),
    # table row: SecureKey Concierge; B11 dagger: broker or bank
    "securekey": (("A4", "G1", "C1", "T1", "M1"),
                  (H, P, P, N, N, P, P, P, P, (N, DAGGER), P, P, P),
                  (N, P, N)),
    # table row: Firefox Sync 1.5
    "sync15": (("A5", "G3", "C2", "T2a", "M4"),
               (P, N, P, P, P, P, N, N, N, P, P, P, P),
               (N, N, P)),   # server copy is useless without the paired key
    # table row: Firefox Sync 2.0; B2 and B11 partial (password-derived keys)
    "sync20": (("A5", "G3", "C2", "T2a", "M4"),
               (P, H, P, P, P, P, N, N, N, H, P, P, P),
               (N, N, H)),
    # table row: Impostor
    "impostor": (("A5", "G4", "C2", "T1", "M1"),
                 (N, P, N, N, P, P, N, N, N, N, N, P, P),
                 (P, N, N)),
    # table row: FIDO UAF (Non-Attested)
    "uaf-nonattested": (("A5", "G1", "C2", "T2b", "M3"),
                        (P, N, P, P, P, P, P, N, N, P, P, P, P),
                        (N, P, P)),
    # table row: FIDO UAF (Attested)
    "uaf-attested": (("A6", "G1", "C2", "T2b", "M3"),
                     (N, N, P, P, N, P, P, P, P, P, P, P, P),
                     (P, P, P)),
}

# The table's own B8 column ("Device-Bound-Secret"), informational only.
TABLE_B8 = {
    "openid2": N, "persona": N, "oauth2": N, "oidc": N, "mobile-connect-loa3": P,
    "shibboleth": N, "saw": N, "persona-fallback": N, "securekey": N,
    "sync15": H, "sync20": N, "impostor": N, "uaf-nonattested": H, "uaf-attested": P,
}


def _cell(v) -> Cell:
    return Cell(*v) if isinstance(v, tuple) else Cell(v)


# The two augmentations change exactly one verdict of their base scheme.
AUGMENTED_BASE = {"saw-augmented": "saw", "mobile-connect-augmented": "mobile-connect-loa3"}


def expected_matrix(*, augmented: bool = False) -> EvaluationMatrix:
    rows = list(TABLE_ROWS) + (list(AUGMENTED_ROWS) if augmented else [])
    m = EvaluationMatrix(rows)
    for row in TABLE_ROWS:
        coords, table, b8 = _EXPECTED[row]
        m.coords[row] = dict(zip(AXES, coords))
        cells = dict(zip(TABLE_BENEFITS, map(_cell, table)))
        cells.update(zip(("B8a", "B8b", "B8c"), map(_cell, b8)))
        m.cells[row] = {b: cells[b] for b in BENEFITS}
    if augmented:
        for row, base in AUGMENTED_BASE.items():
            m.coords[row] = dict(m.coords[base])
            m.cells[row] = {**m.cells[base], "B11": Cell(Verdict.PARTIAL)}
    return m


def coarse_t(t: str) -> str:
    """The table grades the remote-IdP auth types as plain T1."""
    return "T1" if t.startswith("T1") else t


# -- comparison -------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    scheme: str
    column: str
    expected: str
    computed: str
    evidence: str = ""


@dataclass
class MatrixDiff:
    mismatches: list[Mismatch] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.mismatches)

    def __len__(self) -> int:
        return len(self.mismatches)

    def render(self) -> str:
        if not self.mismatches:
            return "MATCH\n"
        lines = [f"MISMATCH {len(self.mismatches)} cell(s)"]
        for m in self.mismatches:
            line = f"  {m.scheme} {m.column}: expected {m.expected}, computed {m.computed}"
            if m.evidence:
                line += f" ({m.evidence})"
            lines.append(line)
        return "\n".join(lines) + "\n"


def compare(computed: EvaluationMatrix, expected: EvaluationMatrix, evidence: dict | None = None) -> MatrixDiff:
    if computed.rows != expected.rows:
        raise ValueError(f"row mismatch: {computed.rows} vs {expected.rows}")
    evidence = evidence or {}
    diff = MatrixDiff()
    for row in expected.rows:
        for axis in AXES:
            want = expected.coords[row][axis]
            got = computed.coords[row][axis]
            if axis == "T":
                want, got = coarse_t(want), coarse_t(got)
            if want != got:
                diff.mismatches.append(Mismatch(row, axis, want, got, evidence.get((row, axis), "")))
        for b in BENEFITS:
            want, got = expected.cells[row][b], computed.cells[row][b]
            if want != got:
                diff.mismatches.append(Mismatch(row, b, str(want), str(got), evidence.get((row, b), "")))
    return diff


# -- rendering --------------------------------------------------------------

_MARK = {Verdict.PROVIDED: "●", Verdict.PARTIAL: "◐", Verdict.NOT_PROVIDED: ""}
_FOOT = {Footnote.NONE: "", Footnote.TWO_THIRD_PARTIES: "†", Footnote.OPTIONAL_FEATURE: "§"}


def _mark(c: Cell) -> str:
    # the table prints a bare footnote sign where a benefit hinges on it
    if c.footnote is not Footnote.NONE:
        return _FOOT[c.footnote]
    return _MARK[c.verdict]


def _unmark(s: str) -> Cell:
    s = s.strip()
    if s == "†":
        return Cell(Verdict.NOT_PROVIDED, Footnote.TWO_THIRD_PARTIES)
    if s == "§":
        return Cell(Verdict.PROVIDED, Footnote.OPTIONAL_FEATURE)
    for v, mark in _MARK.items():
        if mark == s:
            return Cell(v)
    raise ValueError(f"unknown cell mark {s!r}")


def _md(m: EvaluationMatrix) -> str:
    header = ["Scheme", *AXES, *BENEFITS]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in m.rows:
        cells = [row, *(m.coords[row][a] for a in AXES), *(_mark(m.cells[row][b]) for b in BENEFITS)]
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("● provided, ◐ partially provided, blank not provided; "
                 "† impersonation possible by either of two third parties; "
                 "§ provided through an optional protocol feature.")
    return "\n".join(lines) + "\n"


def _csv(m: EvaluationMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", *AXES, *BENEFITS])
    for row in m.rows:
        w.writerow([row, *(m.coords[row][a] for a in AXES), *(str(m.cells[row][b]) for b in BENEFITS)])
    return buf.getvalue()


def _json(m: EvaluationMatrix) -> str:
    doc = {
        "rows": [
            {
                "scheme": row,
                "coords": {a: m.coords[row][a] for a in AXES},
                "cells": {
                    b: {"verdict": m.cells[row][b].verdict.value, "footnote": m.cells[row][b].footnote.value}
                    for b in BENEFITS
                },
            }
            for row in m.rows
        ]
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


FORMATS = ("markdown", "csv", "json")


def render(m: EvaluationMatrix, fmt: str = "markdown") -> str:
    if fmt == "markdown":
        return _md(m)
    if fmt == "csv":
        return _csv(m)
    if fmt == "json":
        return _json(m)
    raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def _parse_cell(s: str) -> Cell:
    verdict, _, foot = s.partition("+")
    return Cell(Verdict(verdict), Footnote(foot) if foot else Footnote.NONE)


def parse(text: str, fmt: str = "markdown") -> EvaluationMatrix:
    m = EvaluationMatrix([])
    if fmt == "json":
        for r in json.loads(text)["rows"]:
            m.rows.append(r["scheme"])
            m.coords[r["scheme"]] = dict(r["coords"])
            m.cells[r["scheme"]] = {
                b: Cell(Verdict(c["verdict"]), Footnote(c["footnote"])) for b, c in r["cells"].items()
            }
        return m
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        for rec in reader:
            row = rec[0]
            vals = dict(zip(header, rec))
            m.rows.append(row)
            m.coords[row] = {a: vals[a] for a in AXES}
            m.cells[row] = {b: _parse_cell(vals[b]) for b in BENEFITS}
        return m
    if fmt == "markdown":
        lines = [ln for ln in text.splitlines() if ln.startswith("|")]
        header = [h.strip() for h in lines[0].strip("|").split("|")]
        for ln in lines[2:]:
            vals = dict(zip(header, (v.strip() for v in ln.strip().strip("|").split("|"))))
            row = vals["Scheme"]
            m.rows.append(row)
            m.coords[row] = {a: vals[a] for a in AXES}
            m.cells[row] = {b: _unmark(vals[b]) for b in BENEFITS}
        return m
    raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
