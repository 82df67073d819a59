"""Sequential graph-model interpreter framework.

An interpreter definition maps node types to (precondition, instruction)
pairs.  Execution keeps a LIFO stack of pending elements: the initial
selector seeds the stack, then each step pops one element, dispatches to
the most specific registration along its superType chain, evaluates the
precondition, and either executes the instruction (which may push
successor elements) or records a skip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    InstructionFaultError,
    InterpreterError,
    NoInstructionError,
    StepLimitExceededError,
)
from .model import Edge


@dataclass
class Registration:
    typeName: str
    instruction: object  # callable(ctx, element)
    precondition: object = None  # callable(ctx, element) -> bool, or None


@dataclass
class InterpreterDefinition:
    name: str
    initialSelector: object  # callable(ctx) -> list of elements, in desired order
    registrations: dict = field(default_factory=dict)  # typeName -> Registration
    maxSteps: int = 10_000

    def register(self, type_name, instruction, precondition=None):
        self.registrations[type_name] = Registration(type_name, instruction, precondition)
        return self


@dataclass
class TraceEntry:
    step: int
    elementId: str
    typeName: str
    dispatchedType: str  # type whose registration actually ran


class ExecutionContext:
    """Mutable interpreter state: bindings, stack, and the execution record."""

    def __init__(self, model, spec):
        self.model = model
        self.spec = spec
        self.bindings = {}
        self.stack = []  # LIFO of elements pending execution
        self.trace = []  # TraceEntry per executed instruction
        self.skips = []  # (elementId, typeName) whose precondition failed
        self.steps = 0
        self.halted = False

    def push(self, element):
        self.stack.append(element)

    def push_all(self, elements):
        """Push a batch so the first listed element is executed first."""
        for el in reversed(list(elements)):
            self.stack.append(el)

    def halt(self):
        self.halted = True

    # convenience graph accessors for instruction bodies
    def outgoing(self, element, edge_type=None):
        return [
            e
            for e in self.model.elements.values()
            if isinstance(e, Edge)
            and e.sourceId == element.id
            and (edge_type is None or e.typeName == edge_type)
        ]

    def incoming(self, element, edge_type=None):
        return [
            e
            for e in self.model.elements.values()
            if isinstance(e, Edge)
            and e.targetId == element.id
            and (edge_type is None or e.typeName == edge_type)
        ]

    def target_of(self, edge):
        return self.model.elements[edge.targetId]


def dispatch(definition, spec, type_name):
    """Most specific registration along the superType chain, or None."""
    from .metamodel import ancestry

    for name in ancestry(spec, type_name):
        reg = definition.registrations.get(name)
        if reg is not None:
            return reg
    return None


def run(definition, model, spec, bindings=None) -> ExecutionContext:
    """Run the interpreter to completion (empty stack, halt, or step limit)."""
    ctx = ExecutionContext(model, spec)
    if bindings:
        ctx.bindings.update(bindings)
    initial = definition.initialSelector(ctx)
    ctx.push_all(initial)
    while ctx.stack and not ctx.halted:
        element = ctx.stack.pop()
        reg = dispatch(definition, spec, element.typeName)
        if reg is None:
            raise NoInstructionError(element.typeName)
        if reg.precondition is not None and not reg.precondition(ctx, element):
            ctx.skips.append((element.id, element.typeName))
            continue
        if ctx.steps >= definition.maxSteps:
            raise StepLimitExceededError(definition.maxSteps, ctx)
        ctx.steps += 1
        ctx.trace.append(
            TraceEntry(
                step=ctx.steps,
                elementId=element.id,
                typeName=element.typeName,
                dispatchedType=reg.typeName,
            )
        )
        try:
            reg.instruction(ctx, element)
        except InterpreterError:
            raise
        except Exception as exc:
            raise InstructionFaultError(element.id, exc) from exc
    return ctx


# ---------------------------------------------------------------------------
# Built-in interpreters (used by the CLI `interpret` subcommand)
# ---------------------------------------------------------------------------


def _flowchart_definition(max_steps=10_000):
    """Token walk over the bundled flowchart language.

    Start/Task/End execute unconditionally; a Decision follows the branch
    whose flow label equals its `condition` attribute (first outgoing flow
    when no label matches).  Visited-set precondition keeps cyclic charts
    from looping forever below the step limit.
    """

    def initial(ctx):
        starts = [
            n for n in ctx.model.elements.values()
            if n.typeName == "Start" and not isinstance(n, Edge)
        ]
        return sorted(starts, key=lambda n: n.id)

    def not_visited(ctx, el):
        return el.id not in ctx.bindings.setdefault("visited", set())

    def mark(ctx, el):
        ctx.bindings.setdefault("visited", set()).add(el.id)
        ctx.bindings.setdefault("log", []).append(el.id)

    def follow_all(ctx, el):
        mark(ctx, el)
        flows = sorted(ctx.outgoing(el, "Flow"), key=lambda e: e.id)
        ctx.push_all([ctx.target_of(f) for f in flows])

    def run_decision(ctx, el):
        mark(ctx, el)
        flows = sorted(ctx.outgoing(el, "Flow"), key=lambda e: e.id)
        if not flows:
            return
        condition = (el.attributes.get("condition") or [""])[0]
        chosen = flows[0]
        for f in flows:
            label = (f.attributes.get("label") or [""])[0]
            if label == condition:
                chosen = f
                break
        ctx.push(ctx.target_of(chosen))

    def run_end(ctx, el):
        mark(ctx, el)

    d = InterpreterDefinition(name="flowchart", initialSelector=initial, maxSteps=max_steps)
    d.register("Activity", follow_all, precondition=not_visited)
    d.register("Decision", run_decision, precondition=not_visited)
    d.register("Start", follow_all, precondition=not_visited)
    d.register("End", run_end, precondition=not_visited)
    return d


def _petrinet_definition(max_steps=10_000):
    """Fire enabled transitions until none remain (or the step limit hits).

    Pops a Transition, checks every incoming Arc's place holds at least
    the arc weight in tokens, then moves tokens; enabled transitions are
    re-discovered after each firing.
    """

    def places_in(ctx, tr):
        return [(ctx.model.elements[a.sourceId], a) for a in ctx.incoming(tr, "Arc")]

    def places_out(ctx, tr):
        return [(ctx.model.elements[a.targetId], a) for a in ctx.outgoing(tr, "Arc")]

    def tokens(place):
        return (place.attributes.get("tokens") or [0])[0]

    def weight(arc):
        return (arc.attributes.get("weight") or [1])[0]

    def enabled(ctx, tr):
        ins = places_in(ctx, tr)
        return bool(ins) and all(tokens(p) >= weight(a) for p, a in ins)

    def initial(ctx):
        return sorted(
            (t for t in ctx.model.elements.values() if t.typeName == "Transition"),
            key=lambda t: t.id,
        )

    def fire(ctx, tr):
        for p, a in places_in(ctx, tr):
            p.attributes["tokens"] = [tokens(p) - weight(a)]
        for p, a in places_out(ctx, tr):
            p.attributes["tokens"] = [tokens(p) + weight(a)]
        ctx.bindings.setdefault("firings", []).append(tr.id)
        if not ctx.stack:
            ctx.push_all([t for t in initial(ctx) if enabled(ctx, t)])

    d = InterpreterDefinition(name="petrinet", initialSelector=initial, maxSteps=max_steps)
    d.register("Transition", fire, precondition=enabled)
    return d


BUILTIN_INTERPRETERS = {
    "flowchart": _flowchart_definition,
    "petrinet": _petrinet_definition,
}


def get_interpreter(name, max_steps=10_000) -> InterpreterDefinition:
    try:
        factory = BUILTIN_INTERPRETERS[name]
    except KeyError:
        raise InterpreterError(f"unknown interpreter {name!r}") from None
    return factory(max_steps)
