"""Program model for the static-field-initialization language.

A program is the tuple (entry, instr, flow_intra, flow_inter, flow_clinit)
plus the class/method structure it was built from.  Labels are local to a
method and qualified by it; every method owns a distinguished exit label
``end`` that never carries an instruction.
"""
from __future__ import annotations

import dataclasses
import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

CLINIT = "<clinit>"
LAST = "end"

# Reserved prefix for labels introduced by desugarings.
SYNTHETIC_PREFIX = "$"
SUPER_LABEL = "$super"
ENTRY_LABEL = "$entry"
CLINIT_RETURN_LABEL = "$ret"
PRE_SUPER_PREFIX = "$pre_"
POST_SUPER_PREFIX = "$init_"

_NUMERIC = re.compile(r"\d+")


def label_key(label: str) -> tuple:
    """Natural sort key: numeric labels first, by value."""
    if _NUMERIC.fullmatch(label):
        return (0, int(label), "")
    return (1, 0, label)


@dataclass(frozen=True, order=True)
class FieldId:
    class_name: str
    field_name: str

    def __str__(self) -> str:
        return f"{self.class_name}.{self.field_name}"


@dataclass(frozen=True, order=True)
class MethodId:
    class_name: str
    method_name: str

    @property
    def is_clinit(self) -> bool:
        return self.method_name == CLINIT

    def __str__(self) -> str:
        return f"{self.class_name}.{self.method_name}"


@dataclass(frozen=True)
class PointLabel:
    method: MethodId
    label: str

    @property
    def is_last(self) -> bool:
        return self.label == LAST

    def sort_key(self) -> tuple:
        return (self.method.class_name, self.method.method_name, label_key(self.label))

    def __lt__(self, other: PointLabel) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return f"{self.method}/{self.label}"


class Op(str, enum.Enum):
    PUT = "put"
    GET = "get"
    INVOKE = "invoke"
    RETURN = "return"
    ANY = "any"


@dataclass(frozen=True)
class Instruction:
    op: Op
    field: FieldId | None = None

    def __post_init__(self):
        if (self.op in (Op.PUT, Op.GET)) != (self.field is not None):
            raise ValueError(f"{self.op.value} takes a field operand iff it is put/get")

    def __str__(self) -> str:
        return f"{self.op.value} {self.field}" if self.field else self.op.value


ANY = Instruction(Op.ANY)
RETURN = Instruction(Op.RETURN)
INVOKE = Instruction(Op.INVOKE)


def put(f: FieldId) -> Instruction:
    return Instruction(Op.PUT, f)


def get(f: FieldId) -> Instruction:
    return Instruction(Op.GET, f)


@dataclass(frozen=True)
class FieldDecl:
    name: str
    has_initializer: bool = False


@dataclass(frozen=True)
class ClassDecl:
    name: str
    superclass: str | None = None
    fields: tuple[FieldDecl, ...] = ()


@dataclass(frozen=True)
class Method:
    """A method body: its instruction-bearing labels in listing order."""

    id: MethodId
    labels: tuple[str, ...] = ()

    @property
    def first(self) -> PointLabel:
        return PointLabel(self.id, self.labels[0] if self.labels else LAST)

    @property
    def last(self) -> PointLabel:
        return PointLabel(self.id, LAST)

    def points(self) -> Iterator[PointLabel]:
        for lab in self.labels:
            yield PointLabel(self.id, lab)
        yield self.last


@dataclass(frozen=True)
class Program:
    entry: MethodId
    classes: Mapping[str, ClassDecl]
    methods: Mapping[MethodId, Method]
    instr: Mapping[PointLabel, Instruction]
    flow_intra: frozenset[tuple[PointLabel, PointLabel]] = frozenset()
    flow_inter: frozenset[tuple[PointLabel, MethodId]] = frozenset()
    flow_clinit: Mapping[PointLabel, str] = field(default_factory=dict)

    # -- structure -----------------------------------------------------

    @cached_property
    def class_names(self) -> frozenset[str]:
        return frozenset(self.classes)

    @cached_property
    def field_ids(self) -> frozenset[FieldId]:
        return frozenset(
            FieldId(c.name, f.name) for c in self.classes.values() for f in c.fields
        )

    def clinit(self, class_name: str) -> Method | None:
        return self.methods.get(MethodId(class_name, CLINIT))

    def points(self) -> list[PointLabel]:
        """Every program point, including each method's exit anchor."""
        return [p for m in self.methods.values() for p in m.points()]

    def method_of(self, point: PointLabel) -> Method:
        return self.methods[point.method]

    # -- flow indexes ---------------------------------------------------

    @cached_property
    def successors(self) -> dict[PointLabel, list[PointLabel]]:
        out: dict[PointLabel, list[PointLabel]] = {}
        for src, dst in self.flow_intra:
            out.setdefault(src, []).append(dst)
        for v in out.values():
            v.sort()
        return out

    @cached_property
    def predecessors(self) -> dict[PointLabel, list[PointLabel]]:
        out: dict[PointLabel, list[PointLabel]] = {}
        for src, dst in self.flow_intra:
            out.setdefault(dst, []).append(src)
        for v in out.values():
            v.sort()
        return out

    @cached_property
    def call_targets(self) -> dict[PointLabel, list[MethodId]]:
        out: dict[PointLabel, list[MethodId]] = {}
        for src, m in self.flow_inter:
            out.setdefault(src, []).append(m)
        for v in out.values():
            v.sort()
        return out

    @cached_property
    def callers(self) -> dict[MethodId, list[PointLabel]]:
        out: dict[MethodId, list[PointLabel]] = {}
        for src, m in self.flow_inter:
            out.setdefault(m, []).append(src)
        for v in out.values():
            v.sort()
        return out

    @cached_property
    def clinit_sources(self) -> dict[str, list[PointLabel]]:
        out: dict[str, list[PointLabel]] = {}
        for src, c in self.flow_clinit.items():
            out.setdefault(c, []).append(src)
        for v in out.values():
            v.sort()
        return out

    @cached_property
    def entry_points(self) -> dict[PointLabel, MethodId]:
        """Map from each method's first point to the method."""
        return {m.first: m.id for m in self.methods.values()}

    def replace(self, **changes) -> Program:
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# Validation


class ViolationKind(str, enum.Enum):
    MISSING_RETURN_EDGE = "missing-return-edge"
    DANGLING_LABEL = "dangling-label"
    DUPLICATE_CLINIT_TARGET = "duplicate-clinit-target"
    CROSS_METHOD_INTRA_EDGE = "cross-method-intra-edge"
    UNKNOWN_REFERENCE = "unknown-reference"
    INVOKE_WITHOUT_TARGET = "invoke-without-target"
    CALL_FROM_NON_INVOKE = "call-from-non-invoke"
    EXPLICIT_CLINIT_CALL = "explicit-clinit-call"
    CYCLIC_SUPERCLASS = "cyclic-superclass"


WARNING_KINDS = frozenset({ViolationKind.INVOKE_WITHOUT_TARGET})


@dataclass(frozen=True, order=True)
class Violation:
    kind: ViolationKind
    location: PointLabel | None
    message: str

    @property
    def is_error(self) -> bool:
        return self.kind not in WARNING_KINDS

    def __str__(self) -> str:
        where = str(self.location) if self.location is not None else "<program>"
        grade = "error" if self.is_error else "warning"
        return f"{where}: {grade}: {self.kind.value}: {self.message}"


def _reachable(program: Program, start: PointLabel) -> set[PointLabel]:
    seen = {start}
    todo = [start]
    succ = program.successors
    while todo:
        p = todo.pop()
        for q in succ.get(p, ()):
            if q not in seen:
                seen.add(q)
                todo.append(q)
    return seen


def superclass_cycle(program: Program) -> list[str] | None:
    """Return one cycle in the superclass relation, or None."""
    for start in program.classes:
        chain = [start]
        cur = program.classes[start].superclass
        while cur is not None and cur in program.classes:
            if cur in chain:
                return chain[chain.index(cur):] + [cur]
            chain.append(cur)
            cur = program.classes[cur].superclass
    return None


def validate(program: Program) -> list[Violation]:
    """Check the well-formedness conditions; violations are returned, not raised."""
    out: list[Violation] = []

    def add(kind, loc, msg):
        out.append(Violation(kind, loc, msg))

    if program.entry not in program.methods:
        add(ViolationKind.UNKNOWN_REFERENCE, None, f"entry method {program.entry} is not declared")

    cycle = superclass_cycle(program)
    if cycle:
        add(ViolationKind.CYCLIC_SUPERCLASS, None, "superclass cycle " + " -> ".join(cycle))

    for mid in program.methods:
        if mid.class_name not in program.classes:
            add(ViolationKind.UNKNOWN_REFERENCE, None, f"method {mid} belongs to undeclared class {mid.class_name}")

    declared = {p for m in program.methods.values() for p in m.points()}
    for p in program.instr:
        if p not in declared or p.is_last:
            add(ViolationKind.DANGLING_LABEL, p, f"instruction at undeclared point {p}")
    for m in program.methods.values():
        for p in m.points():
            if not p.is_last and p not in program.instr:
                add(ViolationKind.DANGLING_LABEL, p, f"point {p} carries no instruction")

    for p, ins in sorted(program.instr.items()):
        if ins.field is not None and ins.field not in program.field_ids:
            add(ViolationKind.UNKNOWN_REFERENCE, p, f"field {ins.field} is not declared")

    for src, dst in sorted(program.flow_intra):
        for end in (src, dst):
            if end not in declared:
                add(ViolationKind.DANGLING_LABEL, src, f"intra edge {src} -> {dst} names undeclared point {end}")
        if src.method != dst.method:
            add(ViolationKind.CROSS_METHOD_INTRA_EDGE, src, f"intra edge {src} -> {dst} leaves method {src.method}")

    for src, m in sorted(program.flow_inter):
        if src not in declared:
            add(ViolationKind.DANGLING_LABEL, src, f"call edge from undeclared point {src}")
        elif program.instr.get(src) != INVOKE:
            add(ViolationKind.CALL_FROM_NON_INVOKE, src, f"call edge {src} -> {m} leaves a non-invoke point")
        if m not in program.methods:
            add(ViolationKind.UNKNOWN_REFERENCE, src, f"call target {m} is not declared")
        elif m.is_clinit:
            add(ViolationKind.EXPLICIT_CLINIT_CALL, src, f"class initializer {m} called explicitly")

    for src, c in sorted(program.flow_clinit.items()):
        if src not in declared or src.is_last:
            add(ViolationKind.DANGLING_LABEL, src, f"initialization edge from undeclared point {src}")
        if c not in program.classes:
            add(ViolationKind.UNKNOWN_REFERENCE, src, f"initialization edge names undeclared class {c}")

    for p, ins in sorted(program.instr.items()):
        if ins == INVOKE and not program.call_targets.get(p):
            add(ViolationKind.INVOKE_WITHOUT_TARGET, p, f"invoke at {p} has no call target")

    for m in program.methods.values():
        for p in sorted(_reachable(program, m.first)):
            if program.instr.get(p) == RETURN and (p, m.last) not in program.flow_intra:
                add(ViolationKind.MISSING_RETURN_EDGE, p, f"return at {p} has no edge to {m.last}")

    return sorted(set(out), key=lambda v: (v.location.sort_key() if v.location else (), v.kind.value, v.message))


def errors(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.is_error]


# ---------------------------------------------------------------------------
# Desugarings


class CyclicSuperclassError(ValueError):
    pass


def _prepend(program: Program, method: Method, label: str, ins: Instruction,
             clinit: str | None, after: int = 0) -> Program:
    """Insert a fresh point at position ``after`` of ``method``'s label list.

    The new point inherits the incoming edges of the point it displaces when
    it becomes the method's first point; otherwise it is spliced between its
    neighbour and the point that followed it in listing order.
    """
    mid = method.id
    new = PointLabel(mid, label)
    labels = list(method.labels)
    intra = set(program.flow_intra)
    if after == 0:
        nxt = method.first
        labels.insert(0, label)
        intra.add((new, nxt))
    else:
        prev = PointLabel(mid, labels[after - 1])
        nxt = PointLabel(mid, labels[after]) if after < len(labels) else method.last
        # The spliced-in neighbour is always a synthetic straight-line point.
        intra.discard((prev, nxt))
        intra.add((prev, new))
        intra.add((new, nxt))
        labels.insert(after, label)
    instr = dict(program.instr)
    instr[new] = ins
    flow_clinit = dict(program.flow_clinit)
    if clinit is not None:
        flow_clinit[new] = clinit
    methods = dict(program.methods)
    methods[mid] = Method(mid, tuple(labels))
    return program.replace(methods=methods, instr=instr, flow_intra=frozenset(intra),
                           flow_clinit=flow_clinit)


def desugar_super_init(program: Program) -> Program:
    """Make each class initializer start by initializing the superclass.

    A superclass that is not declared in the program is treated as the root
    (``Object``) and gets no edge.  Classes without an initializer are left
    alone.
    """
    cycle = superclass_cycle(program)
    if cycle:
        raise CyclicSuperclassError("superclass cycle " + " -> ".join(cycle))
    for cls in program.classes.values():
        sup = cls.superclass
        body = program.clinit(cls.name)
        if sup is None or sup not in program.classes or body is None:
            continue
        if SUPER_LABEL in body.labels:
            continue
        # Field initializers placed in pre-super order stay in front.
        pos = 0
        while pos < len(body.labels) and body.labels[pos].startswith(PRE_SUPER_PREFIX):
            pos += 1
        program = _prepend(program, body, SUPER_LABEL, ANY, sup, after=pos)
    return program


class FieldInitMode(str, enum.Enum):
    IGNORE = "ignore"
    PRE_SUPER = "pre-super"
    POST_SUPER = "post-super"


def desugar_field_initializers(program: Program, mode: FieldInitMode | str) -> Program:
    """Turn field-initializer attributes into explicit puts in the class initializer.

    ``pre-super`` follows the order used by Sun's JVM (fields set before the
    superclass is initialized); ``post-super`` follows the JVM specification
    (right after the superclass initialization point).
    """
    mode = FieldInitMode(mode)
    if mode is FieldInitMode.IGNORE:
        return program
    prefix = PRE_SUPER_PREFIX if mode is FieldInitMode.PRE_SUPER else POST_SUPER_PREFIX
    for cls in program.classes.values():
        inits = [f for f in cls.fields if f.has_initializer]
        if not inits:
            continue
        body = program.clinit(cls.name)
        if body is None:
            mid = MethodId(cls.name, CLINIT)
            ret = PointLabel(mid, CLINIT_RETURN_LABEL)
            methods = dict(program.methods)
            body = methods[mid] = Method(mid, (CLINIT_RETURN_LABEL,))
            instr = dict(program.instr)
            instr[ret] = RETURN
            program = program.replace(methods=methods, instr=instr,
                                      flow_intra=program.flow_intra | {(ret, body.last)})
        if mode is FieldInitMode.PRE_SUPER:
            pos = 0
        else:
            pos = body.labels.index(SUPER_LABEL) + 1 if SUPER_LABEL in body.labels else 0
        for f in inits:
            label = prefix + f.name
            if label in body.labels:
                continue
            program = _prepend(program, body, label, put(FieldId(cls.name, f.name)), None, after=pos)
            body = program.methods[body.id]
            pos += 1
    return program


def add_entry_class_init(program: Program) -> Program:
    """Trigger the entry method's class initializer before its first instruction."""
    body = program.methods[program.entry]
    if ENTRY_LABEL in body.labels:
        return program
    return _prepend(program, body, ENTRY_LABEL, ANY, program.entry.class_name)


def desugar(program: Program, *, field_init_mode: FieldInitMode | str = FieldInitMode.IGNORE,
            super_init: bool | None = None, entry_class_init: bool = False) -> Program:
    """Apply the configured desugarings in their canonical order.

    ``super_init=None`` enables superclass initialization whenever some class
    declares a superclass.
    """
    if super_init is None:
        super_init = any(c.superclass for c in program.classes.values())
    # Field initializers first: a class initializer they create still needs
    # its superclass edge, and pre-super puts keep their place in front of it.
    program = desugar_field_initializers(program, field_init_mode)
    if super_init:
        program = desugar_super_init(program)
    if entry_class_init:
        program = add_entry_class_init(program)
    return program
