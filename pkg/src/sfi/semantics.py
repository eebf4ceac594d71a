"""Small-step semantics with lazy, at-most-once class initialization.

States are ``<point, call stack, store, history>``.  Field values are
collapsed to default/written since values themselves are abstract.  Entering
a class initializer pushes a *marked* frame for the suspended point; returning
to a marked frame re-executes the suspended instruction without triggering
the initialization again.

Internally a state is the tuple ``(point, stack, written, history)`` of
ints: point indexes, frames encoded as ``2 * point + marked`` (top first),
and bitmasks over fields and classes.  :class:`Machine` converts to and from
the public :class:`ConcreteState`.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

from .model import FieldId, Op, PointLabel, Program

RawState = tuple  # (int, tuple[int, ...], int, int)

_NONE, _ANY, _GET, _PUT, _INVOKE, _RETURN = range(6)
_CODES = {Op.ANY: _ANY, Op.GET: _GET, Op.PUT: _PUT, Op.INVOKE: _INVOKE, Op.RETURN: _RETURN}


class FieldValue(enum.Enum):
    DEFAULT = "default"
    WRITTEN = "written"


class Frame(NamedTuple):
    point: PointLabel
    marked: bool

    def __str__(self) -> str:
        return f"[[{self.point}]]" if self.marked else str(self.point)


class ConcreteState(NamedTuple):
    point: PointLabel
    stack: tuple[Frame, ...]
    written: frozenset[FieldId]
    history: frozenset[str]

    def value(self, f: FieldId) -> FieldValue:
        return FieldValue.WRITTEN if f in self.written else FieldValue.DEFAULT

    def __str__(self) -> str:
        stack = "::".join(map(str, self.stack)) or "eps"
        store = "{" + ",".join(sorted(map(str, self.written))) + "}"
        hist = "{" + ",".join(sorted(self.history)) + "}"
        return f"<{self.point}, {stack}, written={store}, h={hist}>"


class Machine:
    """A program compiled to index arrays for fast stepping."""

    def __init__(self, program: Program):
        self.program = program
        self.points: list[PointLabel] = sorted(program.points(), key=PointLabel.sort_key)
        self.index = {p: i for i, p in enumerate(self.points)}
        self.classes: list[str] = sorted(program.classes)
        self.class_bit = {c: i for i, c in enumerate(self.classes)}
        self.fields: list[FieldId] = sorted(program.field_ids)
        self.field_bit = {f: i for i, f in enumerate(self.fields)}

        idx = self.index
        n = len(self.points)
        self.kind = [_NONE] * n
        self.fmask = [0] * n
        self.succ: list[tuple[int, ...]] = [()] * n
        self.calls: list[tuple[int, ...]] = [()] * n
        self.init_class = [-1] * n
        for p, ins in program.instr.items():
            if p not in idx:
                continue
            i = idx[p]
            self.kind[i] = _CODES[ins.op]
            if ins.field is not None and ins.field in self.field_bit:
                self.fmask[i] = 1 << self.field_bit[ins.field]
        for p, targets in program.successors.items():
            if p in idx:
                self.succ[idx[p]] = tuple(idx[t] for t in targets if t in idx)
        for p, ms in program.call_targets.items():
            if p in idx:
                self.calls[idx[p]] = tuple(idx[program.methods[m].first] for m in ms if m in program.methods)
        for p, c in program.flow_clinit.items():
            if p in idx and c in self.class_bit:
                self.init_class[idx[p]] = self.class_bit[c]
        # -1 marks a class without an initializer body (behaves as empty).
        self.clinit_first = []
        for c in self.classes:
            body = program.clinit(c)
            self.clinit_first.append(idx[body.first] if body is not None else -1)

    # -- encoding --------------------------------------------------------

    def initial(self) -> RawState:
        return (self.index[self.program.methods[self.program.entry].first], (), 0, 0)

    def decode(self, raw: RawState) -> ConcreteState:
        point, stack, written, hist = raw
        return ConcreteState(
            self.points[point],
            tuple(Frame(self.points[fr >> 1], bool(fr & 1)) for fr in stack),
            frozenset(f for i, f in enumerate(self.fields) if written >> i & 1),
            frozenset(c for i, c in enumerate(self.classes) if hist >> i & 1),
        )

    def encode(self, state: ConcreteState) -> RawState:
        return (
            self.index[state.point],
            tuple(2 * self.index[fr.point] + fr.marked for fr in state.stack),
            sum(1 << self.field_bit[f] for f in state.written),
            sum(1 << self.class_bit[c] for c in state.history),
        )

    # -- stepping ----------------------------------------------------------

    def need_init(self, point: int, hist: int) -> int:
        """Class bit whose initializer must run before ``point`` executes, else -1."""
        c = self.init_class[point]
        if c >= 0 and not hist >> c & 1:
            return c
        return -1

    def step(self, raw: RawState, reads: list | None = None) -> list[RawState]:
        """All successors of ``raw``, ordered by target label.

        When ``reads`` is a list, each ``get`` executed on a field still
        holding its default value appends ``(point, field_mask)`` to it.
        """
        point, stack, written, hist = raw
        c = self.init_class[point]
        if c >= 0 and not hist >> c & 1:
            first = self.clinit_first[c]
            hist |= 1 << c
            if first < 0:
                # Empty initializer: enter and return at once.
                return self._step1(point, stack, written, hist, reads)
            return [(first, (2 * point + 1,) + stack, written, hist)]
        return self._step1(point, stack, written, hist, reads)

    def _step1(self, point, stack, written, hist, reads) -> list[RawState]:
        k = self.kind[point]
        if k == _ANY:
            return [(s, stack, written, hist) for s in self.succ[point]]
        if k == _GET:
            if reads is not None and self.succ[point] and not written & self.fmask[point]:
                reads.append((point, self.fmask[point]))
            return [(s, stack, written, hist) for s in self.succ[point]]
        if k == _PUT:
            w = written | self.fmask[point]
            return [(s, stack, w, hist) for s in self.succ[point]]
        if k == _INVOKE:
            pushed = (2 * point,) + stack
            return [(f, pushed, written, hist) for f in self.calls[point]]
        if k == _RETURN:
            if not stack:
                return []
            top, rest = stack[0], stack[1:]
            caller = top >> 1
            if top & 1:
                return self._step1(caller, rest, written, hist, reads)
            return [(s, rest, written, hist) for s in self.succ[caller]]
        return []

    def is_final(self, raw: RawState) -> bool:
        """Normal termination: nothing left on the stack and nothing left to run."""
        return not raw[1] and self.kind[raw[0]] in (_RETURN, _NONE)


# ---------------------------------------------------------------------------
# Public operations


def need_init(point: PointLabel, history: frozenset[str] | set[str], program: Program) -> str | None:
    cls = program.flow_clinit.get(point)
    if cls is not None and cls not in history:
        return cls
    return None


def initial_state(program: Program) -> ConcreteState:
    m = Machine(program)
    return m.decode(m.initial())


def step(state: ConcreteState, program: Program, machine: Machine | None = None) -> list[ConcreteState]:
    m = machine or Machine(program)
    return [m.decode(s) for s in m.step(m.encode(state))]


class Limit(str, enum.Enum):
    DEPTH = "depth"
    STATES = "states"


@dataclass
class ExplorationResult:
    machine: Machine
    raw_visited: set
    raw_final: set
    raw_stuck: set
    limits_hit: set[Limit] = field(default_factory=set)

    @property
    def complete(self) -> bool:
        return not self.limits_hit

    @cached_property
    def visited(self) -> set[ConcreteState]:
        return {self.machine.decode(s) for s in self.raw_visited}

    @cached_property
    def final(self) -> set[ConcreteState]:
        return {self.machine.decode(s) for s in self.raw_final}

    @cached_property
    def stuck(self) -> set[ConcreteState]:
        return {self.machine.decode(s) for s in self.raw_stuck}


StepObserver = Callable[[RawState, list, list], None]


def explore(program: Program, max_depth: int = 32, max_states: int = 100_000, *,
            machine: Machine | None = None,
            observer: StepObserver | None = None) -> ExplorationResult:
    """Breadth-first enumeration of reachable states.

    States deeper than ``max_depth`` frames are recorded but not expanded.
    ``observer(state, successors, default_reads)`` is called for every
    expanded state.
    """
    if max_depth <= 0 or max_states <= 0:
        raise ValueError("exploration bounds must be positive")
    m = machine or Machine(program)
    start = m.initial()
    visited = {start}
    final, stuck = set(), set()
    limits: set[Limit] = set()
    frontier = deque([start])
    step_ = m.step
    while frontier:
        s = frontier.popleft()
        if len(s[1]) > max_depth:
            limits.add(Limit.DEPTH)
            continue
        reads = [] if observer is not None else None
        succs = step_(s, reads)
        if observer is not None:
            observer(s, succs, reads)
        if not succs:
            (final if m.is_final(s) else stuck).add(s)
            continue
        for t in succs:
            if t not in visited:
                if len(visited) >= max_states:
                    limits.add(Limit.STATES)
                    frontier.clear()
                    break
                visited.add(t)
                frontier.append(t)
    return ExplorationResult(m, visited, final, stuck, limits)


class TraceError(IndexError):
    pass


def run_trace(program: Program, choices: list[int]) -> list[ConcreteState]:
    """Replay one execution; ``choices[i]`` picks among the successors at step ``i``."""
    m = Machine(program)
    cur = m.initial()
    trace = [cur]
    for n, choice in enumerate(choices):
        succs = m.step(cur)
        if not succs:
            break
        if not 0 <= choice < len(succs):
            raise TraceError(f"choice {choice} at step {n} is out of range (0..{len(succs) - 1})")
        cur = succs[choice]
        trace.append(cur)
    return [m.decode(s) for s in trace]


# ---------------------------------------------------------------------------
# Invariant checks over single steps


def step_invariant_violations(m: Machine, src: RawState, succs: list[RawState]) -> list[str]:
    """Properties every step must satisfy; returns human-readable failures."""
    point, stack, _, hist = src
    out = []
    c = m.need_init(point, hist)
    for t in succs:
        t_point, t_stack, _, t_hist = t
        if hist & ~t_hist:
            out.append("history shrank")
        grown = t_hist & ~hist
        if c >= 0:
            if grown != 1 << c:
                out.append("initialization step must add exactly the initialized class")
        elif grown:
            out.append("history grew without an initialization step")
        if src[2] & ~t[2]:
            out.append("written fields shrank")
        out.extend(_stack_shape_violations(m, point, c, stack, t_stack))
    if c >= 0 and m.clinit_first[c] >= 0:
        if len(succs) != 1:
            out.append("initialization step must have exactly one successor")
        elif succs[0][0] != m.clinit_first[c] or succs[0][1][:1] != (2 * point + 1,):
            out.append("initialization step must enter the initializer with a marked frame")
    return out


def _stack_shape_violations(m: Machine, point: int, c: int, stack: tuple, t_stack: tuple) -> list[str]:
    if t_stack == stack:
        return []
    if t_stack[1:] == stack:
        top = t_stack[0]
        if top & 1 and (c < 0 or top >> 1 != point):
            return ["marked frame pushed outside an initialization step"]
        if not top & 1 and m.kind[point] != _INVOKE:
            return ["plain frame pushed by a non-invoke instruction"]
        return []
    if m.kind[point] != _RETURN:
        return ["frame popped by a non-return instruction"]
    # A return pops one or more frames (a chain of marked frames resumes the
    # suspended instructions) and a resumed invoke may push a plain frame.
    for k in range(1, len(stack) + 1):
        rest = stack[k:]
        if t_stack == rest:
            return []
        if t_stack[1:] == rest:
            if t_stack[0] & 1:
                return ["resumed instruction triggered a second initialization"]
            return []
    return ["unexpected call stack after return"]
