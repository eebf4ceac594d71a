import json

import pytest

from sfi import load_example
from sfi.analysis import solve
from sfi.checks import read_before_write
from sfi.frontend import ParseFailure, parse, render, solution_to_dict, solution_to_json, solution_to_table
from sfi.generate import Bounds, generate_program
from sfi.model import RETURN, FieldInitMode, MethodId, Op, desugar

from conftest import EXAMPLES, GOLDEN, pt


def test_two_paths_shape(two_paths):
    assert len(two_paths.methods) == 4
    # 11 labelled points plus one exit anchor per method.
    assert len(two_paths.instr) == 11
    assert len(two_paths.points()) == 15
    assert two_paths.instr[pt("A.<clinit>", 6)].op is Op.PUT
    assert two_paths.flow_clinit[pt("A.<clinit>", 8)] == "A"
    assert two_paths.call_targets[pt("C.main", 2)] == [MethodId("C", "m")]
    assert two_paths.successors[pt("C.main", 0)] == [pt("C.main", 1), pt("C.main", 3)]


def test_minimal_program():
    p = parse("entry C.main\nclass C { method main { 0: return } }")
    assert list(p.methods) == [MethodId("C", "main")]
    assert p.instr == {pt("C.main", 0): RETURN}
    assert p.flow_intra == {(pt("C.main", 0), pt("C.main", "end"))}


def test_entry_alone_is_rejected():
    with pytest.raises(ParseFailure) as exc:
        parse("entry C.main")
    assert "C.main" in str(exc.value)


@pytest.mark.parametrize("text, needle", [
    ("class C { }", "entry"),
    ("entry C.main\nclass C { method main { 0: jump } }", "jump"),
    ("entry C.main\nclass C { method main { 0: any\n 0: return } }", "duplicate"),
    ("entry C.main\nclass C { method main { end: return } }", "end"),
    ("entry C.main\nclass C { method main { 0: any clinit=C clinit=C -> 1\n 1: return } }", "clinit"),
    ("entry C.main\nclass C { method main { 0: put C.nope -> end } }", "C.nope"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ParseFailure) as exc:
        parse(text)
    assert needle in str(exc.value)
    assert all(e.span.line >= 1 for e in exc.value.errors)


def test_unresolved_references_survive_lenient_parse():
    p = parse("entry C.main\nclass C { method main { 0: any -> ghost } }", resolve=False)
    assert (pt("C.main", 0), pt("C.main", "ghost")) in p.flow_intra


def test_comments_and_empty_bodies():
    p = parse("# leading\nentry C.main  # trailing\nclass C { method main { } clinit { } }")
    assert p.methods[MethodId("C", "main")].labels == ()
    assert p.clinit("C").first.is_last


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_round_trip(name):
    p = load_example(name)
    assert parse(render(p)) == p
    assert render(parse(render(p))) == render(p)


def test_render_is_canonical(two_paths):
    text = render(two_paths)
    assert text.startswith("entry C.main\n")
    assert "8: return clinit=A -> end" in text
    assert "2: invoke -> 5 calls C.m" in text


def test_synthetic_labels_render_with_reserved_prefix():
    text = "entry B.main\nclass A { field x init\n clinit { 1: return } }\nclass B extends A { method main { 0: return } clinit { 2: return } }"
    d = desugar(parse(text), field_init_mode=FieldInitMode.POST_SUPER, entry_class_init=True)
    out = render(d)
    for label in ("$super", "$init_x", "$entry"):
        assert f"{label}:" in out
    assert parse(out) == d


@pytest.mark.parametrize("seed", range(0, 200, 20))
def test_generated_round_trip_sample(seed):
    p = generate_program(seed, Bounds(6, 8, 40, 4))
    assert parse(render(p)) == p


def test_generator_golden():
    expected = (GOLDEN / "gen_seed0.sfi").read_text()
    assert render(generate_program(0, Bounds(3, 4, 20, 2))) == expected


def test_solution_json_point_2(two_paths):
    d = solution_to_dict(two_paths, solve(two_paths))
    row = next(r for r in d["points"] if r["point"] == "C.main/2")
    assert row["instr"] == "invoke"
    assert row["in"] == {"may": ["A", "B"], "must": ["A", "B"], "wf": ["A.f"]}
    assert d["warnings"] == []


def test_solution_json_empty_entry():
    p = parse("entry C.main\nclass C { method main { } }")
    d = solution_to_dict(p, solve(p))
    assert d["points"] == [{
        "point": "C.main/end", "instr": None,
        "in": {"may": [], "must": [], "wf": []},
        "out": {"may": [], "must": [], "wf": []},
    }]


def test_json_is_deterministic_and_carries_warnings():
    p = load_example("field_cycle_a_first")
    sol = solve(p)
    a = solution_to_json(p, sol, read_before_write(p, sol))
    b = solution_to_json(p, solve(p), read_before_write(p, solve(p)))
    assert a == b
    assert json.loads(a)["warnings"] == [{
        "kind": "read-before-init", "point": "B.<clinit>/5", "field": "A.f",
        "detail": "field may still hold its default value",
    }]


def test_table_layout(two_paths):
    lines = solution_to_table(two_paths, solve(two_paths)).splitlines()
    assert lines[0].split() == ["point", "instr", "in.May", "in.Must", "in.Wf", "out.May", "out.Must", "out.Wf"]
    assert len(lines) == 1 + 15
    row6 = next(line for line in lines if line.startswith("A.<clinit>/6 "))
    assert row6.split() == ["A.<clinit>/6", "put", "A.f", "{A}", "{A}", "{}", "{A,B}", "{A,B}", "{A.f}"]
