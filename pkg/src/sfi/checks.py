"""Client checks built on the analysis, and the empirical soundness harness."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .analysis import AbstractState, Solution, bottom, f_init
from .model import FieldId, Op, PointLabel, Program
from .semantics import ConcreteState, Machine, explore, step_invariant_violations


class DiagnosticKind(str, enum.Enum):
    READ_BEFORE_INIT = "read-before-init"
    MAY_NULL_READ = "may-null-read"


@dataclass(frozen=True)
class Diagnostic:
    kind: DiagnosticKind
    point: PointLabel
    field: FieldId
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.point}: {self.kind.value}: {self.field}" + (f" ({self.detail})" if self.detail else "")


UNREACHABLE_NOTE = "reads at points the analysis proves unreachable are not reported"


def read_before_write(program: Program, sol: Solution) -> list[Diagnostic]:
    """Reads of a field not guaranteed to be written when the read executes.

    The initialization edge of the reading point fires before the read, so
    the written-field set is taken after accounting for it.
    """
    bot = bottom(program)
    out = []
    for p, ins in program.instr.items():
        if ins.op is not Op.GET:
            continue
        after = f_init(program, p, sol.a_in[p], sol)
        if after == bot or ins.field in after.wf:
            continue
        out.append(Diagnostic(DiagnosticKind.READ_BEFORE_INIT, p, ins.field,
                              "field may still hold its default value"))
    return sorted(out, key=lambda d: (d.point.sort_key(), d.field))


def nullness_flags(program: Program, sol: Solution) -> set[FieldId]:
    """Fields whose abstract value must include the default (null) constant."""
    return {d.field for d in read_before_write(program, sol)}


def correctness_holds(a: AbstractState, written: frozenset[FieldId] | set[FieldId],
                      history: frozenset[str] | set[str]) -> bool:
    """``must <= history <= may`` and every field in ``wf`` has been written."""
    return a.must <= history <= a.may and a.wf <= written


def which_clause_fails(a: AbstractState, written, history) -> str | None:
    if not a.must <= history:
        return "must-subset-history"
    if not history <= a.may:
        return "history-subset-may"
    if not a.wf <= written:
        return "wf-subset-written"
    return None


@dataclass(frozen=True)
class SoundnessViolation:
    state: ConcreteState
    abstract: AbstractState
    clause: str

    def __str__(self) -> str:
        return f"{self.state} not approximated by {self.abstract}: {self.clause}"


@dataclass
class SoundnessReport:
    programs_checked: int = 0
    states_checked: int = 0
    violations: list[SoundnessViolation] = field(default_factory=list)
    exploration_complete: list[bool] = field(default_factory=list)
    # Populated when the harness also checks steps and default reads.
    invariant_failures: list[str] = field(default_factory=list)
    missed_reads: list[tuple[PointLabel, FieldId]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.invariant_failures and not self.missed_reads

    def merge(self, other: SoundnessReport) -> None:
        self.programs_checked += other.programs_checked
        self.states_checked += other.states_checked
        self.violations += other.violations
        self.exploration_complete += other.exploration_complete
        self.invariant_failures += other.invariant_failures
        self.missed_reads += other.missed_reads


def verify_soundness(program: Program, sol: Solution, max_depth: int = 24,
                     max_states: int = 50_000, *, full: bool = False) -> SoundnessReport:
    """Check the analysis result against every explored concrete state.

    With ``full=True`` the step invariants of the semantics are checked on
    every expanded state and, when exploration is complete, each default-value
    read seen by the interpreter must be reported by :func:`read_before_write`.
    """
    m = Machine(program)
    # Bitmask views of the in-states, indexed like the machine's points.
    masks = []
    for p in m.points:
        a = sol.a_in[p]
        masks.append((
            sum(1 << m.class_bit[c] for c in a.must),
            sum(1 << m.class_bit[c] for c in a.may),
            sum(1 << m.field_bit[f] for f in a.wf),
        ))

    failures: list[str] = []
    default_reads: set[tuple[int, int]] = set()

    def observe(src, succs, reads):
        failures.extend(step_invariant_violations(m, src, succs))
        default_reads.update(reads)

    result = explore(program, max_depth, max_states, machine=m,
                     observer=observe if full else None)
    report = SoundnessReport(programs_checked=1, states_checked=len(result.raw_visited),
                             exploration_complete=[result.complete])
    for raw in result.raw_visited:
        point, _, written, hist = raw
        must, may, wf = masks[point]
        if must & ~hist or hist & ~may or wf & ~written:
            st = m.decode(raw)
            a = sol.a_in[st.point]
            report.violations.append(SoundnessViolation(st, a, which_clause_fails(a, st.written, st.history)))
    report.violations.sort(key=lambda v: str(v))

    if full:
        report.invariant_failures = sorted(set(failures))
        if result.complete:
            flagged = {(d.point, d.field) for d in read_before_write(program, sol)}
            seen = {(m.points[p], m.fields[fmask.bit_length() - 1]) for p, fmask in default_reads}
            report.missed_reads = sorted(seen - flagged, key=lambda x: (x[0].sort_key(), x[1]))
    return report


def corrupt_solution(program: Program, sol: Solution) -> Solution:
    """A deliberately unsound copy: drop one class from the may-set of some reachable in-state."""
    for p in sorted(sol.a_in, key=PointLabel.sort_key):
        a = sol.a_in[p]
        if a.may and a != bottom(program):
            drop = sorted(a.may)[0]
            a_in = dict(sol.a_in)
            a_in[p] = AbstractState(a.may - {drop}, a.must - {drop}, a.wf)
            return Solution(a_in, dict(sol.a_out), dict(sol.implicit_exits))
    # Nothing to drop: claim every class is initialized at the entry instead.
    first = program.methods[program.entry].first
    a_in = dict(sol.a_in)
    a_in[first] = AbstractState(program.class_names, program.class_names, sol.a_in[first].wf)
    return Solution(a_in, dict(sol.a_out), dict(sol.implicit_exits))
