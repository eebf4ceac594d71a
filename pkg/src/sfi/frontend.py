"""Text format (``.sfi``) reader/writer and JSON serialization of results.

Grammar, one construct per line by convention but whitespace-insensitive::

    program   := "entry" METHODREF decl*
    decl      := "class" IDENT ["extends" IDENT] "{" member* "}"
    member    := "field" IDENT ["init"]
               | "clinit" "{" point* "}"
               | "method" IDENT "{" point* "}"
    point     := LABEL ":" instr attr*
    instr     := "any" | "return" | "invoke" | "put" FIELDREF | "get" FIELDREF
    attr      := "clinit" "=" IDENT
               | "->" LABEL ("," LABEL)*
               | "calls" METHODREF ("," METHODREF)*

``#`` starts a comment.  ``end`` names the exit point of the enclosing method.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .model import (
    CLINIT, LAST, ClassDecl, FieldDecl, FieldId, Instruction, Method, MethodId, Op,
    PointLabel, Program, RETURN,
)

if TYPE_CHECKING:
    from .analysis import AbstractState, Solution
    from .checks import Diagnostic


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    expected: str
    found: str

    def __str__(self) -> str:
        return f"{self.span}: expected {self.expected}, found {self.found}"


class ParseFailure(ValueError):
    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(map(str, errors)))


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>->)
  | (?P<clinit><clinit>)
  | (?P<word>[A-Za-z_$][A-Za-z0-9_$]*|[0-9]+)
  | (?P<punct>[{}:,.=])
""", re.VERBOSE)

_INSTR_WORDS = {op.value: op for op in Op}


@dataclass(frozen=True)
class _Tok:
    kind: str  # word, arrow, clinit, punct, eof
    text: str
    span: SourceSpan

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            span = SourceSpan(line, pos - line_start + 1)
            raise ParseFailure([ParseError(span, "a token", repr(text[pos]))])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), SourceSpan(line, pos - line_start + 1)))
        pos = m.end()
    toks.append(_Tok("eof", "", SourceSpan(line, pos - line_start + 1)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    # -- token helpers ---------------------------------------------------

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected: str):
        raise ParseFailure([ParseError(self.tok.span, expected, self.tok.describe())])

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind != "eof"

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def advance(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def word(self, what: str) -> _Tok:
        if self.tok.kind != "word":
            self.fail(what)
        return self.advance()

    # -- grammar ---------------------------------------------------------

    def method_ref(self) -> tuple[MethodId, SourceSpan]:
        cls = self.word("a class name")
        self.expect(".")
        if self.tok.kind == "clinit":
            self.advance()
            return MethodId(cls.text, CLINIT), cls.span
        name = self.word("a method name or <clinit>")
        return MethodId(cls.text, name.text), cls.span

    def field_ref(self) -> tuple[FieldId, SourceSpan]:
        cls = self.word("a class name")
        self.expect(".")
        name = self.word("a field name")
        return FieldId(cls.text, name.text), cls.span

    def program(self) -> dict:
        self.expect("entry")
        entry, entry_span = self.method_ref()
        classes: dict[str, ClassDecl] = {}
        bodies: list[tuple[MethodId, list]] = []
        errors: list[ParseError] = []
        while self.tok.kind != "eof":
            start = self.tok.span
            name, decl, methods = self.class_decl()
            if name in classes:
                errors.append(ParseError(start, "a fresh class name", f"duplicate class {name!r}"))
                continue
            classes[name] = decl
            bodies.extend(methods)
        return dict(entry=entry, entry_span=entry_span, classes=classes,
                    bodies=bodies, errors=errors)

    def class_decl(self):
        self.expect("class")
        name = self.word("a class name").text
        sup = None
        if self.at("extends"):
            self.advance()
            sup = self.word("a superclass name").text
        self.expect("{")
        fields: list[FieldDecl] = []
        methods: list[tuple[MethodId, list]] = []
        while not self.at("}"):
            if self.at("field"):
                self.advance()
                fname = self.word("a field name").text
                has_init = False
                if self.at("init") and self.peek().text != ".":
                    self.advance()
                    has_init = True
                fields.append(FieldDecl(fname, has_init))
            elif self.at("clinit"):
                span = self.advance().span
                methods.append((MethodId(name, CLINIT), self.body(span)))
            elif self.at("method"):
                self.advance()
                mtok = self.word("a method name")
                methods.append((MethodId(name, mtok.text), self.body(mtok.span)))
            else:
                self.fail("'field', 'clinit', 'method' or '}'")
        self.advance()
        return name, ClassDecl(name, sup, tuple(fields)), [(m, b) for m, b in methods]

    def body(self, span: SourceSpan) -> tuple[SourceSpan, list]:
        self.expect("{")
        points = []
        while not self.at("}"):
            points.append(self.point())
        self.advance()
        return span, points

    def point(self) -> dict:
        lab = self.word("a point label or '}'")
        self.expect(":")
        op_tok = self.word("an instruction")
        op = _INSTR_WORDS.get(op_tok.text)
        if op is None:
            self.i -= 1
            self.fail("'any', 'return', 'invoke', 'put' or 'get'")
        fld = None
        if op in (Op.PUT, Op.GET):
            fld = self.field_ref()
        pt = dict(label=lab, op=op, field=fld, clinit=[], succ=[], calls=[])
        while True:
            if self.at("clinit") and self.peek().text == "=":
                self.advance()
                self.advance()
                pt["clinit"].append(self.word("a class name"))
            elif self.tok.kind == "arrow":
                self.advance()
                pt["succ"].append(self.word("a label"))
                while self.at(","):
                    self.advance()
                    pt["succ"].append(self.word("a label"))
            elif self.at("calls") and self.peek().text != ":":
                self.advance()
                pt["calls"].append(self.method_ref())
                while self.at(","):
                    self.advance()
                    pt["calls"].append(self.method_ref())
            else:
                return pt


def parse(text: str, *, resolve: bool = True) -> Program:
    """Parse ``.sfi`` text into a Program.

    With ``resolve=False`` only syntax errors (and duplicate labels or clinit
    attributes, which the Program cannot represent) are raised; dangling
    references are kept in the Program for :func:`sfi.model.validate` to
    report.
    """
    p = _Parser(text)
    raw = p.program()
    errors: list[ParseError] = list(raw["errors"])
    classes: dict[str, ClassDecl] = raw["classes"]
    methods: dict[MethodId, Method] = {}
    instr: dict[PointLabel, Instruction] = {}
    intra: set[tuple[PointLabel, PointLabel]] = set()
    inter: set[tuple[PointLabel, MethodId]] = set()
    flow_clinit: dict[PointLabel, str] = {}
    unresolved: list[ParseError] = []

    fields = {FieldId(c.name, f.name) for c in classes.values() for f in c.fields}
    for c in classes.values():
        seen_fields = set()
        for f in c.fields:
            if f.name in seen_fields:
                errors.append(ParseError(raw["entry_span"], "distinct field names", f"duplicate field {c.name}.{f.name}"))
            seen_fields.add(f.name)

    for mid, (span, points) in raw["bodies"]:
        if mid in methods:
            errors.append(ParseError(span, "one body per method", f"duplicate method {mid}"))
            continue
        labels: list[str] = []
        for pt in points:
            lab = pt["label"]
            if lab.text == LAST:
                errors.append(ParseError(lab.span, "a label other than 'end'", "'end'"))
                continue
            if lab.text in labels:
                errors.append(ParseError(lab.span, "a fresh label", f"duplicate label {lab.text!r} in {mid}"))
                continue
            labels.append(lab.text)
        methods[mid] = Method(mid, tuple(labels))
        known = set(labels) | {LAST}
        seen = set()
        for pt in points:
            lab = pt["label"]
            if lab.text in seen or lab.text == LAST:
                continue
            seen.add(lab.text)
            here = PointLabel(mid, lab.text)
            fld = None
            if pt["field"] is not None:
                fld, fspan = pt["field"]
                if fld not in fields:
                    unresolved.append(ParseError(fspan, "a declared field", str(fld)))
            instr[here] = Instruction(pt["op"], fld)
            if len(pt["clinit"]) > 1:
                errors.append(ParseError(pt["clinit"][1].span, "at most one clinit attribute", "a second clinit"))
            for ctok in pt["clinit"][:1]:
                if ctok.text not in classes:
                    unresolved.append(ParseError(ctok.span, "a declared class", repr(ctok.text)))
                flow_clinit[here] = ctok.text
            for stok in pt["succ"]:
                if stok.text not in known:
                    unresolved.append(ParseError(stok.span, f"a label of {mid}", repr(stok.text)))
                intra.add((here, PointLabel(mid, stok.text)))
            if pt["op"] is RETURN.op:
                intra.add((here, PointLabel(mid, LAST)))
            for target, _ in pt["calls"]:
                inter.add((here, target))

    for pt_list in (b for _, (_, b) in raw["bodies"]):
        for pt in pt_list:
            for target, tspan in pt["calls"]:
                if target not in methods:
                    unresolved.append(ParseError(tspan, "a declared method", str(target)))
    if raw["entry"] not in methods:
        unresolved.append(ParseError(raw["entry_span"], "a declared entry method", str(raw["entry"])))

    if resolve:
        errors.extend(unresolved)
    if errors:
        raise ParseFailure(sorted(errors, key=lambda e: (e.span.line, e.span.column)))
    return Program(raw["entry"], classes, methods, instr, frozenset(intra),
                   frozenset(inter), flow_clinit)


def render(program: Program) -> str:
    """Canonical text; every intra edge is written out, including return edges."""
    lines = [f"entry {program.entry}"]
    for cls in program.classes.values():
        head = f"class {cls.name}" + (f" extends {cls.superclass}" if cls.superclass else "")
        lines.append(head + " {")
        for f in cls.fields:
            lines.append(f"  field {f.name}" + (" init" if f.has_initializer else ""))
        owned = [m for m in program.methods.values() if m.id.class_name == cls.name]
        owned.sort(key=lambda m: (not m.id.is_clinit,))
        for m in owned:
            lines.append("  clinit {" if m.id.is_clinit else f"  method {m.id.method_name} {{")
            for p in m.points():
                if p.is_last:
                    continue
                parts = [f"    {p.label}: {program.instr[p]}"]
                if p in program.flow_clinit:
                    parts.append(f"clinit={program.flow_clinit[p]}")
                succ = program.successors.get(p, [])
                if succ:
                    parts.append("-> " + ", ".join(s.label for s in succ))
                calls = program.call_targets.get(p, [])
                if calls:
                    parts.append("calls " + ", ".join(map(str, calls)))
                lines.append(" ".join(parts))
            lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Results


def state_to_dict(a: AbstractState) -> dict:
    return {
        "may": sorted(a.may),
        "must": sorted(a.must),
        "wf": sorted(str(f) for f in a.wf),
    }


def sorted_points(program: Program) -> list[PointLabel]:
    return sorted(program.points(), key=PointLabel.sort_key)


def solution_to_dict(program: Program, solution: Solution,
                     diagnostics: list[Diagnostic] | None = None) -> dict:
    points = []
    for p in sorted_points(program):
        ins = program.instr.get(p)
        points.append({
            "point": str(p),
            "instr": str(ins) if ins is not None else None,
            "in": state_to_dict(solution.a_in[p]),
            "out": state_to_dict(solution.a_out[p]),
        })
    warnings = [
        {"kind": d.kind.value, "point": str(d.point), "field": str(d.field), "detail": d.detail}
        for d in diagnostics or ()
    ]
    return {"points": points, "warnings": warnings}


def solution_to_json(program: Program, solution: Solution,
                     diagnostics: list[Diagnostic] | None = None) -> str:
    return json.dumps(solution_to_dict(program, solution, diagnostics), indent=2) + "\n"


def _fmt_set(items) -> str:
    return "{" + ",".join(items) + "}" if items else "{}"


def solution_to_table(program: Program, solution: Solution) -> str:
    """Fixed-width table: point, instruction, then May/Must/Wf in and out."""
    header = ["point", "instr", "in.May", "in.Must", "in.Wf", "out.May", "out.Must", "out.Wf"]
    rows = [header]
    for p in sorted_points(program):
        ins = program.instr.get(p)
        row = [str(p), str(ins) if ins is not None else ""]
        for a in (solution.a_in[p], solution.a_out[p]):
            d = state_to_dict(a)
            row += [_fmt_set(d["may"]), _fmt_set(d["must"]), _fmt_set(d["wf"])]
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows
    ) + "\n"
