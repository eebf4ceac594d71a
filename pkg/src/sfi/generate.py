"""Seeded random programs for the soundness suite.

Programs are valid by construction: every return is wired to its method's
exit, every invoke has at least one target, and no class initializer is
called explicitly.  The call graph is mostly acyclic with occasional
recursion, and initialization edges favour the shapes that make lazy
initialization interesting (mutual dependencies between initializers, an
initializer that touches its own class).
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .model import (
    ANY, CLINIT, INVOKE, LAST, RETURN, ClassDecl, FieldDecl, FieldId, Instruction,
    Method, MethodId, PointLabel, Program, get, put,
)


@dataclass(frozen=True)
class Bounds:
    classes: int = 3
    methods: int = 4
    points: int = 20
    fields: int = 2

    def __post_init__(self):
        if min(self.classes, self.methods, self.points, self.fields) < 1:
            raise ValueError("generator bounds must be positive")


def _class_name(i: int) -> str:
    return chr(ord("A") + i) if i < 26 else f"K{i}"


def _min_clinits(n_classes: int) -> int:
    return max(1, -(-3 * n_classes // 10))


def generate_program(seed: int, bounds: Bounds = Bounds()) -> Program:
    """Random valid program; ``methods`` counts initializers, ``points`` counts instructions."""
    rng = random.Random(seed)
    room = min(bounds.methods, bounds.points) - 1  # methods left beside main
    n_classes = rng.randint(1, bounds.classes)
    # At least 30% of classes (and at least one) get an initializer, so the
    # class count shrinks when there is no room for enough of them.
    while n_classes > 1 and _min_clinits(n_classes) > room:
        n_classes -= 1
    names = [_class_name(i) for i in range(n_classes)]
    n_fields = rng.randint(1, bounds.fields)
    field_ids = [FieldId(rng.choice(names), f"f{i}") for i in range(n_fields)]

    if room < 1:
        n_clinits = 0
    else:
        n_clinits = rng.randint(_min_clinits(n_classes), min(n_classes, room))
    n_methods = rng.randint(max(2, n_clinits + 1), max(2, room + 1))
    n_methods = min(n_methods, room + 1)
    clinit_classes = sorted(rng.sample(names, n_clinits))

    method_ids = [MethodId(names[0], "main")]
    for c in clinit_classes:
        method_ids.append(MethodId(c, CLINIT))
    k = 0
    while len(method_ids) < n_methods:
        method_ids.append(MethodId(rng.choice(names), f"m{k}"))
        k += 1
    ordinary = [m for m in method_ids if not m.is_clinit]

    # Split instruction points across methods, at least one each.
    n_points = rng.randint(len(method_ids), max(len(method_ids), bounds.points))
    sizes = [1] * len(method_ids)
    for _ in range(n_points - len(method_ids)):
        sizes[rng.randrange(len(sizes))] += 1

    methods: dict[MethodId, Method] = {}
    instr: dict[PointLabel, Instruction] = {}
    intra: set[tuple[PointLabel, PointLabel]] = set()
    inter: set[tuple[PointLabel, MethodId]] = set()
    flow_clinit: dict[PointLabel, str] = {}
    counter = 0

    for mi, (mid, size) in enumerate(zip(method_ids, sizes)):
        labels = [str(counter + j) for j in range(size)]
        counter += size
        methods[mid] = Method(mid, tuple(labels))
        pts = [PointLabel(mid, lab) for lab in labels]
        last = PointLabel(mid, LAST)
        for j, p in enumerate(pts):
            is_tail = j == size - 1
            roll = rng.random()
            if is_tail and rng.random() < 0.85:
                ins = RETURN
            elif roll < 0.12:
                ins = RETURN
            elif roll < 0.35:
                ins = put(rng.choice(field_ids))
            elif roll < 0.55:
                ins = get(rng.choice(field_ids))
            elif roll < 0.72 and ordinary:
                ins = INVOKE
            else:
                ins = ANY
            instr[p] = ins

            if ins == RETURN:
                intra.add((p, last))
            else:
                nxt = pts[j + 1] if not is_tail else last
                intra.add((p, nxt))
                r = rng.random()
                if r < 0.15:
                    intra.add((p, rng.choice(pts)))
                elif r < 0.22:
                    intra.add((p, last))

            if ins == INVOKE:
                # Prefer callees later in the list so recursion stays occasional.
                later = [m for m in ordinary if method_ids.index(m) > mi]
                pool = later if later and rng.random() < 0.88 else ordinary
                for m in rng.sample(pool, min(len(pool), rng.choice((1, 1, 1, 2)))):
                    inter.add((p, m))

            target = None
            if ins.field is not None and rng.random() < 0.7:
                target = ins.field.class_name
            elif rng.random() < 0.25:
                target = rng.choice(names)
            if target is not None:
                flow_clinit[p] = target

    # Initializer-to-initializer dependencies: mutual pairs and self edges.
    if len(clinit_classes) >= 2 and rng.random() < 0.35:
        a, b = rng.sample(clinit_classes, 2)
        flow_clinit[rng.choice(list(PointLabel(MethodId(a, CLINIT), lab) for lab in methods[MethodId(a, CLINIT)].labels))] = b
        flow_clinit[rng.choice(list(PointLabel(MethodId(b, CLINIT), lab) for lab in methods[MethodId(b, CLINIT)].labels))] = a
    if clinit_classes and rng.random() < 0.25:
        c = rng.choice(clinit_classes)
        body = methods[MethodId(c, CLINIT)]
        flow_clinit[PointLabel(body.id, rng.choice(body.labels))] = c
    if not flow_clinit:
        main = methods[method_ids[0]]
        flow_clinit[PointLabel(main.id, rng.choice(main.labels))] = rng.choice(clinit_classes or names)

    fields_by_class: dict[str, list[FieldDecl]] = {c: [] for c in names}
    for f in field_ids:
        fields_by_class[f.class_name].append(FieldDecl(f.field_name))
    classes = {c: ClassDecl(c, None, tuple(fields_by_class[c])) for c in names}
    return Program(method_ids[0], classes, methods, instr, frozenset(intra),
                   frozenset(inter), flow_clinit)
