import random

import pytest

from sfi.frontend import parse
from sfi.generate import Bounds, generate_program
from sfi.model import (
    ANY, CLINIT, ClassDecl, CyclicSuperclassError, FieldDecl, FieldInitMode, MethodId,
    Op, ViolationKind, add_entry_class_init, desugar, desugar_field_initializers,
    desugar_super_init, errors, put, validate,
)

from conftest import fid, pt


def test_two_paths_is_valid(two_paths):
    assert validate(two_paths) == []


def test_empty_method_is_valid():
    p = parse("entry C.main\nclass C { method main { } }")
    assert validate(p) == []
    assert p.methods[MethodId("C", "main")].first.is_last


def test_missing_return_edge_reported(two_paths):
    broken = two_paths.replace(flow_intra=two_paths.flow_intra - {(pt("A.<clinit>", 8), pt("A.<clinit>", "end"))})
    vs = validate(broken)
    assert [(v.kind, v.location) for v in vs] == [(ViolationKind.MISSING_RETURN_EDGE, pt("A.<clinit>", 8))]
    assert "A.<clinit>/8" in vs[0].message


def test_unreachable_return_needs_no_edge(two_paths):
    extra = pt("C.m", 99)
    instr = dict(two_paths.instr)
    instr[extra] = two_paths.instr[pt("C.m", 12)]
    methods = dict(two_paths.methods)
    mid = MethodId("C", "m")
    methods[mid] = methods[mid].__class__(mid, ("12", "99"))
    assert validate(two_paths.replace(instr=instr, methods=methods)) == []


def test_structural_violations():
    text = """
    entry C.main
    class C {
      method main {
        0: invoke -> 1
        1: any clinit=Nope -> ghost
        2: put C.missing calls C.main -> end
        3: invoke calls C.<clinit> -> end
      }
      clinit { 9: return }
    }
    """
    kinds = {v.kind for v in validate(parse(text, resolve=False))}
    assert kinds == {
        ViolationKind.INVOKE_WITHOUT_TARGET, ViolationKind.UNKNOWN_REFERENCE,
        ViolationKind.DANGLING_LABEL, ViolationKind.CALL_FROM_NON_INVOKE,
        ViolationKind.EXPLICIT_CLINIT_CALL,
    }


def test_invoke_without_target_is_warning_grade():
    p = parse("entry C.main\nclass C { method main { 0: invoke -> 1\n 1: return } }")
    vs = validate(p)
    assert [v.kind for v in vs] == [ViolationKind.INVOKE_WITHOUT_TARGET]
    assert errors(vs) == []


def test_cross_method_edge():
    p = parse("entry C.main\nclass C { method main { 0: return } method m { 1: return } }")
    bad = p.replace(flow_intra=p.flow_intra | {(pt("C.main", 0), pt("C.m", 1))})
    assert ViolationKind.CROSS_METHOD_INTRA_EDGE in {v.kind for v in validate(bad)}


# -- desugarings ------------------------------------------------------------

HIERARCHY = """
entry C.main
class A extends Object {
  field x init
  clinit { 1: put A.x -> 2
           2: return }
}
class B extends A {
  field y init
  field z init
  clinit { 10: get A.x clinit=A -> 11
           11: return }
}
class C {
  method main { 0: any clinit=B -> 3
                3: return }
}
"""


def test_super_init_prepends_synthetic_point():
    p = desugar_super_init(parse(HIERARCHY))
    body = p.methods[MethodId("B", CLINIT)]
    first = body.first
    assert first == pt("B.<clinit>", "$super")
    assert p.instr[first] == ANY
    assert p.flow_clinit[first] == "A"
    assert (first, pt("B.<clinit>", 10)) in p.flow_intra
    # A's superclass is undeclared, so A is a root.
    assert p.methods[MethodId("A", CLINIT)].labels == ("1", "2")
    assert validate(p) == []


def test_super_init_without_superclass_is_identity(two_paths):
    assert desugar_super_init(two_paths) == two_paths


def test_super_init_idempotent():
    once = desugar_super_init(parse(HIERARCHY))
    assert desugar_super_init(once) == once


def test_super_init_rejects_cycles():
    p = parse("entry A.main\nclass A extends B { method main { 0: return } }\nclass B extends A { }")
    assert ViolationKind.CYCLIC_SUPERCLASS in {v.kind for v in validate(p)}
    with pytest.raises(CyclicSuperclassError):
        desugar_super_init(p)


def test_field_initializers_ignore_is_identity():
    p = parse(HIERARCHY)
    assert desugar_field_initializers(p, "ignore") == p


def _labels(p, cls):
    return p.methods[MethodId(cls, CLINIT)].labels


def test_field_initializers_pre_super():
    p = desugar_field_initializers(desugar_super_init(parse(HIERARCHY)), FieldInitMode.PRE_SUPER)
    assert _labels(p, "B") == ("$pre_y", "$pre_z", "$super", "10", "11")
    assert p.instr[pt("B.<clinit>", "$pre_y")] == put(fid("B.y"))
    assert p.methods[MethodId("B", CLINIT)].first == pt("B.<clinit>", "$pre_y")
    assert validate(p) == []


def test_field_initializers_post_super():
    p = desugar_field_initializers(desugar_super_init(parse(HIERARCHY)), FieldInitMode.POST_SUPER)
    assert _labels(p, "B") == ("$super", "$init_y", "$init_z", "10", "11")
    succ = p.successors
    assert succ[pt("B.<clinit>", "$super")] == [pt("B.<clinit>", "$init_y")]
    assert succ[pt("B.<clinit>", "$init_z")] == [pt("B.<clinit>", 10)]
    assert validate(p) == []


def test_field_initializer_creates_missing_clinit():
    p = parse("entry C.main\nclass C { field k init\n method main { 0: get C.k clinit=C -> 1\n 1: return } }")
    q = desugar_field_initializers(p, "post-super")
    assert _labels(q, "C") == ("$init_k", "$ret")
    assert q.instr[pt("C.<clinit>", "$ret")].op is Op.RETURN
    assert validate(q) == []


def test_entry_class_init():
    p = parse("entry C.main\nclass C { method main { 0: return } }")
    q = add_entry_class_init(p)
    first = q.methods[q.entry].first
    assert first == pt("C.main", "$entry")
    assert q.flow_clinit[first] == "C"
    assert add_entry_class_init(q) == q
    assert desugar(p) == p  # flag off by default


def _decorate(program, rng):
    """Random superclasses (acyclic) and field-initializer flags on a generated program."""
    names = list(program.classes)
    classes = {}
    for i, c in enumerate(names):
        sup = rng.choice(names[:i]) if i and rng.random() < 0.6 else rng.choice([None, "Object"])
        fields = tuple(FieldDecl(f.name, rng.random() < 0.5) for f in program.classes[c].fields)
        classes[c] = ClassDecl(c, sup, fields)
    return program.replace(classes=classes)


@pytest.mark.parametrize("seed", range(40))
def test_desugarings_preserve_validity_and_are_idempotent(seed):
    rng = random.Random(seed)
    p = _decorate(generate_program(seed, Bounds(4, 6, 25, 3)), rng)
    base = {(v.kind, v.location) for v in errors(validate(p))}
    for mode in FieldInitMode:
        q = desugar(p, field_init_mode=mode, super_init=True, entry_class_init=True)
        assert {(v.kind, v.location) for v in errors(validate(q))} <= base
        assert desugar(q, field_init_mode=mode, super_init=True, entry_class_init=True) == q
        # flow_clinit stays a function of the point.
        assert all(isinstance(c, str) for c in q.flow_clinit.values())


@pytest.mark.parametrize("seed", range(40))
def test_desugarings_commute_when_initializers_exist(seed):
    rng = random.Random(seed)
    p = _decorate(generate_program(seed, Bounds(4, 6, 25, 3)), rng)
    # Restrict field initializers to classes that already have a <clinit>.
    classes = {
        c: d if p.clinit(c) else ClassDecl(d.name, d.superclass, tuple(FieldDecl(f.name) for f in d.fields))
        for c, d in p.classes.items()
    }
    p = p.replace(classes=classes)
    for mode in (FieldInitMode.PRE_SUPER, FieldInitMode.POST_SUPER):
        a = add_entry_class_init(desugar_field_initializers(desugar_super_init(p), mode))
        b = desugar_super_init(add_entry_class_init(desugar_field_initializers(p, mode)))
        assert a == b
