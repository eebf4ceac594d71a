"""Must-Have-Been-Initialized dataflow analysis.

Each program point gets an in-state and an out-state ``(may, must, wf)``:
classes whose initializer may have started, classes whose initializer must
have started, and fields written on every path.  The lattice orders ``may``
by inclusion and ``must``/``wf`` by reverse inclusion.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .model import FieldId, INVOKE, Instruction, Op, PointLabel, Program


@dataclass(frozen=True)
class AbstractState:
    may: frozenset[str] = frozenset()
    must: frozenset[str] = frozenset()
    wf: frozenset[FieldId] = frozenset()

    def __str__(self) -> str:
        def fmt(s):
            return "{" + ",".join(sorted(map(str, s))) + "}"
        return f"({fmt(self.may)}, {fmt(self.must)}, {fmt(self.wf)})"


EMPTY = AbstractState()


def bottom(program: Program) -> AbstractState:
    return AbstractState(frozenset(), program.class_names, program.field_ids)


def top(program: Program) -> AbstractState:
    return AbstractState(program.class_names, frozenset(), frozenset())


def leq(a: AbstractState, b: AbstractState) -> bool:
    return a.may <= b.may and a.must >= b.must and a.wf >= b.wf


def join(a: AbstractState, b: AbstractState) -> AbstractState:
    return AbstractState(a.may | b.may, a.must & b.must, a.wf & b.wf)


def meet(a: AbstractState, b: AbstractState) -> AbstractState:
    return AbstractState(a.may & b.may, a.must | b.must, a.wf | b.wf)


def join_all(states: Iterable[AbstractState], bot: AbstractState) -> AbstractState:
    acc = bot
    for s in states:
        acc = join(acc, s)
    return acc


# ---------------------------------------------------------------------------
# Transfer functions


def transfer_instr(instr: Instruction, a: AbstractState) -> AbstractState:
    """Effect of a non-call instruction.  Reads are transparent."""
    if instr.op is Op.PUT:
        return AbstractState(a.may, a.must, a.wf | {instr.field})
    if instr.op is Op.INVOKE:
        raise ValueError("invoke has its own equation; use f_call")
    return a


def f_call(caller: AbstractState, exit: AbstractState) -> AbstractState:
    """Combine the state before a call with the callee's exit state.

    ``may`` comes from the callee; ``must`` and ``wf`` only grow during
    execution, so the caller's facts remain valid after the call.
    """
    return AbstractState(exit.may, caller.must | exit.must, caller.wf | exit.wf)


def f_init_call(cls: str, a: AbstractState, bot: AbstractState) -> AbstractState:
    """Calling context flowing into ``cls``'s initializer from a state ``a``."""
    if cls in a.must:
        return bot
    return AbstractState(a.may | {cls}, a.must | {cls}, a.wf)


class Solution(NamedTuple):
    a_in: dict[PointLabel, AbstractState]
    a_out: dict[PointLabel, AbstractState]
    # Exit states of initializers referenced by an initialization edge but
    # without a body; such classes behave as if their initializer were empty.
    implicit_exits: dict[str, AbstractState] = {}

    def clinit_exit(self, program: Program, cls: str) -> AbstractState:
        body = program.clinit(cls)
        if body is not None:
            return self.a_in[body.last]
        return self.implicit_exits[cls]


def _f_init(program: Program, point: PointLabel, a: AbstractState,
            exit_of, bot: AbstractState) -> AbstractState:
    """Account for a class initialization possibly triggered at ``point``.

    ``exit_of(cls)`` yields the in-state at the end of ``cls``'s initializer.
    """
    cls = program.flow_clinit.get(point)
    if cls is None or cls in a.must:
        return a
    after = f_call(a, exit_of(cls))
    if cls not in a.may:
        return after
    return join(f_init_call(cls, a, bot), after)


def f_init(program: Program, point: PointLabel, a: AbstractState, sol: Solution) -> AbstractState:
    """Account for a class initialization possibly triggered at ``point``, given a solution."""
    return _f_init(program, point, a, lambda c: sol.clinit_exit(program, c), bottom(program))


# ---------------------------------------------------------------------------
# Equation system


class Equations:
    """The dataflow equations of one program, evaluated against a current assignment.

    Unknowns are ``("in", l)``, ``("out", l)`` for every point and ``("exit", C)``
    for each class that is the target of an initialization edge but has no
    initializer body.
    """

    def __init__(self, program: Program):
        self.program = program
        self.bot = bottom(program)
        self.points = program.points()
        implicit = sorted(c for c in program.clinit_sources if program.clinit(c) is None)
        self.implicit = implicit
        self.unknowns: list[tuple] = (
            [("in", p) for p in self.points]
            + [("out", p) for p in self.points]
            + [("exit", c) for c in implicit]
        )
        self.clinit_first = {
            program.clinit(c).first: c
            for c in program.classes if program.clinit(c) is not None
        }
        self.dependents = self._dependents()

    def exit_key(self, cls: str) -> tuple:
        body = self.program.clinit(cls)
        return ("in", body.last) if body is not None else ("exit", cls)

    def _reads(self, key: tuple) -> set[tuple]:
        prog = self.program
        kind, x = key
        deps: set[tuple] = set()
        if kind == "exit":
            for src in prog.clinit_sources.get(x, ()):
                deps.add(("in", src))
            return deps
        if kind == "in":
            for pred in prog.predecessors.get(x, ()):
                deps.add(("out", pred))
            if x in self.clinit_first:
                for src in prog.clinit_sources.get(self.clinit_first[x], ()):
                    deps.add(("in", src))
            mid = prog.entry_points.get(x)
            if mid is not None and not mid.is_clinit:
                for src in prog.callers.get(mid, ()):
                    deps |= self._init_reads(src)
            return deps
        deps |= self._init_reads(x)
        if prog.instr.get(x) == INVOKE:
            for m in prog.call_targets.get(x, ()):
                if m in prog.methods:
                    deps.add(("in", prog.methods[m].last))
        return deps

    def _init_reads(self, point: PointLabel) -> set[tuple]:
        deps = {("in", point)}
        cls = self.program.flow_clinit.get(point)
        if cls is not None and cls in self.program.classes:
            deps.add(self.exit_key(cls))
        return deps

    def _dependents(self) -> dict[tuple, list[tuple]]:
        out: dict[tuple, set[tuple]] = {k: set() for k in self.unknowns}
        for k in self.unknowns:
            for d in self._reads(k):
                out.setdefault(d, set()).add(k)
        return {k: sorted(v, key=_key_order) for k, v in out.items()}

    def initial(self) -> dict[tuple, AbstractState]:
        return {k: self.bot for k in self.unknowns}

    def evaluate(self, key: tuple, env: dict[tuple, AbstractState]) -> AbstractState:
        """Right-hand side of the equation for ``key`` under assignment ``env``."""
        prog, bot = self.program, self.bot
        kind, x = key

        def exit_of(cls):
            return env[self.exit_key(cls)]

        def finit(point):
            return _f_init(prog, point, env[("in", point)], exit_of, bot)

        if kind == "exit":
            return join_all((f_init_call(x, env[("in", s)], bot)
                             for s in prog.clinit_sources.get(x, ())), bot)
        if kind == "in":
            acc = EMPTY if x == prog.methods[prog.entry].first else bot
            if x in self.clinit_first:
                cls = self.clinit_first[x]
                for src in prog.clinit_sources.get(cls, ()):
                    acc = join(acc, f_init_call(cls, env[("in", src)], bot))
            mid = prog.entry_points.get(x)
            if mid is not None and not mid.is_clinit:
                for src in prog.callers.get(mid, ()):
                    acc = join(acc, finit(src))
            for pred in prog.predecessors.get(x, ()):
                acc = join(acc, env[("out", pred)])
            return acc
        ins = prog.instr.get(x)
        if ins is None:
            # Method exit anchor: nothing executes here.
            return env[("in", x)]
        before = finit(x)
        if ins.op is Op.INVOKE:
            exits = join_all((env[("in", prog.methods[m].last)]
                              for m in prog.call_targets.get(x, ()) if m in prog.methods), bot)
            return f_call(before, exits)
        return transfer_instr(ins, before)

    def to_solution(self, env: dict[tuple, AbstractState]) -> Solution:
        return Solution(
            {p: env[("in", p)] for p in self.points},
            {p: env[("out", p)] for p in self.points},
            {c: env[("exit", c)] for c in self.implicit},
        )

    def from_solution(self, sol: Solution) -> dict[tuple, AbstractState]:
        env = {("in", p): a for p, a in sol.a_in.items()}
        env.update({("out", p): a for p, a in sol.a_out.items()})
        env.update({("exit", c): a for c, a in sol.implicit_exits.items()})
        for c in self.implicit:
            env.setdefault(("exit", c), self.evaluate(("exit", c), env))
        return env


def _key_order(key: tuple) -> tuple:
    kind, x = key
    return (kind, x.sort_key() if isinstance(x, PointLabel) else (x,))


def solve(program: Program, *, rng: random.Random | None = None) -> Solution:
    """Least solution by worklist iteration from bottom.

    With ``rng`` the worklist is drained in random order; the result does not
    depend on the order.
    """
    eqs = Equations(program)
    env = eqs.initial()
    if rng is None:
        work = deque(eqs.unknowns)
        queued = set(work)
        while work:
            key = work.popleft()
            queued.discard(key)
            new = eqs.evaluate(key, env)
            if new != env[key]:
                env[key] = new
                for d in eqs.dependents.get(key, ()):
                    if d not in queued:
                        queued.add(d)
                        work.append(d)
    else:
        pool = list(eqs.unknowns)
        rng.shuffle(pool)
        queued = set(pool)
        while pool:
            i = rng.randrange(len(pool))
            pool[i], pool[-1] = pool[-1], pool[i]
            key = pool.pop()
            queued.discard(key)
            new = eqs.evaluate(key, env)
            if new != env[key]:
                env[key] = new
                for d in eqs.dependents.get(key, ()):
                    if d not in queued:
                        queued.add(d)
                        pool.append(d)
    return eqs.to_solution(env)


def solve_round_robin(program: Program) -> Solution:
    """Least solution by repeated full sweeps over all equations (no dependency tracking)."""
    eqs = Equations(program)
    env = eqs.initial()
    changed = True
    while changed:
        changed = False
        for key in eqs.unknowns:
            new = eqs.evaluate(key, env)
            if new != env[key]:
                env[key] = new
                changed = True
    return eqs.to_solution(env)


class Discrepancy(NamedTuple):
    point: PointLabel | str
    side: str
    expected: AbstractState
    actual: AbstractState


def check_equations(program: Program, sol: Solution) -> list[Discrepancy]:
    """Every equation whose right-hand side differs from the assigned value."""
    eqs = Equations(program)
    env = eqs.from_solution(sol)
    out = []
    for key in eqs.unknowns:
        expected = eqs.evaluate(key, env)
        if expected != env[key]:
            out.append(Discrepancy(key[1], key[0], expected, env[key]))
    return out

