"""Deterministic discrete-event execution of flowthing models.

Events are ordered by (time, seq).  Stage transitions take no time; a
crossing between flowsystems takes the arc delay (or the scenario channel
delay).  Events of tokens inside a closed gate are held back and released
in their original order when the gate reopens.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .lang.printer import format_effect
from .model import (
    INT, SYMBOL, AttrRef, BoolOp, CloseGate, Compare, Const, EnvRef, FlowArc, Inject,
    Model, Not, OpenGate, Scenario, Stage, StartTimer, StopTimer, iter_atoms,
    split_stage_path,
)
from .trace import EVENT_LIMIT, QUIESCENT, TIME_LIMIT, EventRecord, Trace
from .validate import InvalidModel, errors, validate


class InvalidScenario(ValueError):
    pass


class InternalError(RuntimeError):
    """A simulator invariant was broken; this is a defect, not a model error."""


@dataclass
class Token:
    id: int
    kind: str
    flowsystem: str
    stage: Stage
    attributes: dict
    created_at: int
    # True while the token sits in a Transfer stage it reached over a channel.
    inbound: bool = False

    @property
    def place(self) -> str:
        return f"{self.flowsystem}.{self.stage.value}"


# -- guards ---------------------------------------------------------------

def _value(atom, attrs, env, sources=None):
    if isinstance(atom, Const):
        return atom.value
    if isinstance(atom, EnvRef):
        return env[atom.name]
    if isinstance(atom, AttrRef):
        if atom.source is not None and sources is not None:
            return sources[atom.source - 1][atom.name]
        return attrs[atom.name]
    raise InternalError(f"not an atom: {atom!r}")


def _compare(op, left, right) -> bool:
    if type(left) is not type(right):
        return op == "!="
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if isinstance(left, str):
        return False
    return {"<": left < right, "<=": left <= right,
            ">": left > right, ">=": left >= right}[op]


def evaluate_guard(expr, token, environment) -> bool:
    """Evaluate a guard against a token (or its attribute map) and environment.

    Symbols compare by identity and integers by value; comparing values of
    different types is never equal and never ordered.
    """
    attrs = token.attributes if isinstance(token, Token) else (token or {})
    if isinstance(expr, Compare):
        return _compare(expr.op, _value(expr.left, attrs, environment),
                        _value(expr.right, attrs, environment))
    if isinstance(expr, Not):
        return not evaluate_guard(expr.operand, attrs, environment)
    if isinstance(expr, BoolOp):
        results = (evaluate_guard(o, attrs, environment) for o in expr.operands)
        return all(results) if expr.op == "and" else any(results)
    raise InternalError(f"not a guard: {expr!r}")


# -- state ----------------------------------------------------------------

@dataclass
class SimState:
    model: Model
    scenario: Scenario
    env: dict
    rng: random.Random
    trace: Trace
    time: int = 0
    queue: list = field(default_factory=list)
    tokens: dict[int, Token] = field(default_factory=dict)
    timers: dict[str, int] = field(default_factory=dict)  # running timer -> expiry time
    closed: set[str] = field(default_factory=set)
    latches: dict[int, list] = field(default_factory=dict)
    deferred: list = field(default_factory=list)
    next_token: int = 1
    next_qseq: int = 0
    # Lookup tables derived from the model.
    stage_sources: dict = field(default_factory=dict)
    timeout_sources: dict = field(default_factory=dict)
    out_flows: dict = field(default_factory=dict)
    successors: dict = field(default_factory=dict)
    controllers: dict = field(default_factory=dict)

    def push(self, time: int, action: tuple):
        heapq.heappush(self.queue, (time, self.next_qseq, action))
        self.next_qseq += 1

    def emit(self, event: str, subject, place: str, **detail) -> EventRecord:
        record = EventRecord(self.time, len(self.trace.events), event, subject, place, detail)
        self.trace.events.append(record)
        return record


def _build_tables(state: SimState):
    model = state.model
    for ti, trig in enumerate(model.triggers):
        state.latches[ti] = [None] * len(trig.sources)
        for si, src in enumerate(trig.sources):
            table = state.timeout_sources if src.timeout else state.stage_sources
            table.setdefault(src.place, []).append((ti, si))
    for path, fs in model.flowsystems.items():
        state.successors[path] = [(a, b) for a, b in fs.arcs]
    for arc in model.flows:
        src_fs, src_stage = split_stage_path(arc.source)
        dst_fs, dst_stage = split_stage_path(arc.target)
        if src_fs == dst_fs:
            state.successors[src_fs].append((src_stage, dst_stage))
        else:
            state.out_flows.setdefault(arc.source, []).append(arc)
    for gate in model.gates.values():
        if gate.controller is not None:
            state.controllers[gate.controller] = gate


def _check_scenario(model: Model, scenario: Scenario, env: dict):
    for inj in scenario.injections:
        fs = model.flowsystems.get(inj.target)
        if fs is None:
            raise InvalidScenario(f"injection target {inj.target!r} does not exist")
        if fs.kind != inj.kind or Stage.CREATE not in fs.stages:
            raise InvalidScenario(f"cannot inject {inj.kind!r} into {inj.target!r}")
        if inj.time < 0:
            raise InvalidScenario("injection time must be non-negative")
        _check_attrs(model.kinds[inj.kind], dict(inj.assignments))
    needed: dict[str, str | None] = {}
    for trig in model.triggers:
        for src in trig.sources:
            for atom in iter_atoms(src.guard) if src.guard is not None else ():
                if isinstance(atom, EnvRef):
                    needed.setdefault(atom.name, None)
        if isinstance(trig.effect, Inject):
            kind = model.kinds[trig.effect.kind]
            for name, atom in trig.effect.assignments:
                if isinstance(atom, EnvRef):
                    needed[atom.name] = kind.attribute(name).domain
    for timer in model.timers.values():
        if timer.duration.name is not None:
            needed[timer.duration.name] = INT
    for name, domain in sorted(needed.items()):
        if name not in env:
            raise InvalidScenario(f"environment has no value for {name!r}")
        if domain is not None and _domain(env[name]) != domain:
            raise InvalidScenario(f"environment value {name!r} must be {domain}")
    for timer in model.timers.values():
        if timer.duration.evaluate(env) <= 0:
            raise InvalidScenario(f"timer {timer.path!r} has non-positive duration")
    if not 0 <= scenario.drop <= 1:
        raise InvalidScenario("drop probability must lie in [0, 1]")
    if scenario.delay < 0 or scenario.max_time < 0 or scenario.max_events < 0:
        raise InvalidScenario("channel delay and stop bounds must be non-negative")


def _domain(value) -> str:
    return INT if isinstance(value, int) else SYMBOL


def _check_attrs(kind, attrs: dict):
    names = {a.name for a in kind.attributes}
    for name, value in attrs.items():
        attr = kind.attribute(name)
        if attr is None:
            raise InvalidScenario(f"kind {kind.name!r} has no attribute {name!r}")
        if _domain(value) != attr.domain:
            raise InvalidScenario(f"attribute {name!r} of {kind.name!r} must be {attr.domain}")
    missing = names - set(attrs)
    if missing:
        raise InvalidScenario(f"{kind.name!r} injection leaves {sorted(missing)} unset")


def init(model: Model, scenario: Scenario) -> SimState:
    """Prepare a run: one queued creation per injection, all gates open."""
    problems = errors(validate(model))
    if problems:
        raise InvalidModel(problems)
    env = scenario.environment()
    _check_scenario(model, scenario, env)
    state = SimState(model, scenario, env, random.Random(scenario.seed),
                     Trace(scenario.name, scenario.seed))
    _build_tables(state)
    for inj in scenario.injections:
        state.push(inj.time, ("inject", inj))
    return state


# -- stepping ---------------------------------------------------------------

def _frozen(state: SimState, flowsystem: str) -> bool:
    for sphere in state.closed:
        if flowsystem.startswith(sphere + "."):
            gate = state.model.gates[sphere]
            if gate.controller != flowsystem:
                return True
    return False


def _defer(state: SimState, time: int, qseq: int, action: tuple):
    state.deferred.append((time, qseq, action))


def _release(state: SimState):
    held, state.deferred = sorted(state.deferred, key=lambda e: (e[0], e[1])), []
    for time, qseq, action in held:
        if _frozen(state, _event_flowsystem(state, action)):
            state.deferred.append((time, qseq, action))
        else:
            state.push(state.time, action)


def _event_flowsystem(state: SimState, action: tuple) -> str | None:
    if action[0] == "advance":
        return state.tokens[action[1]].flowsystem
    if action[0] == "arrive":
        return split_stage_path(action[2].target)[0]
    return None


def _create(state: SimState, kind: str, target: str, attrs: dict) -> Token:
    fs_path, stage = split_stage_path(target)
    if stage is None:
        fs_path = target
    token = Token(state.next_token, kind, fs_path, Stage.CREATE, attrs, state.time)
    state.next_token += 1
    state.tokens[token.id] = token
    state.emit("token-created", token.id, token.place, kind=kind, attrs=dict(attrs))
    state.push(state.time, ("advance", token.id, False))
    gate = state.controllers.get(fs_path)
    if gate is not None:
        symbol = attrs.get("value")
        if symbol == gate.close_symbol:
            _close(state, gate.sphere)
        elif symbol == gate.open_symbol:
            _open(state, gate.sphere)
    return token


def _close(state: SimState, sphere: str):
    if sphere not in state.closed:
        state.closed.add(sphere)
        state.emit("gate-closed", sphere, sphere)


def _open(state: SimState, sphere: str):
    if sphere in state.closed:
        state.closed.discard(sphere)
        state.emit("gate-opened", sphere, sphere)
        _release(state)


def _cancel_timer(state: SimState, path: str):
    state.queue = [e for e in state.queue if not (e[2][0] == "expire" and e[2][1] == path)]
    heapq.heapify(state.queue)
    del state.timers[path]


def _apply(state: SimState, effect, snapshots: list):
    if isinstance(effect, Inject):
        kind = state.model.kinds[effect.kind]
        first = snapshots[0] or {}
        attrs = {name: _value(atom, first, state.env, snapshots)
                 for name, atom in effect.assignments}
        _check_attrs(kind, attrs)
        _create(state, effect.kind, effect.target, attrs)
    elif isinstance(effect, StartTimer):
        if effect.timer in state.timers:
            _cancel_timer(state, effect.timer)
        timer = state.model.timers[effect.timer]
        duration = timer.duration.evaluate(state.env)
        expires = state.time + duration
        state.timers[effect.timer] = expires
        state.push(expires, ("expire", effect.timer))
        state.emit("timer-started", effect.timer, timer.owner, duration=duration,
                   expires=expires)
    elif isinstance(effect, StopTimer):
        if effect.timer in state.timers:
            _cancel_timer(state, effect.timer)
            state.emit("timer-cancelled", effect.timer, state.model.timers[effect.timer].owner)
    elif isinstance(effect, CloseGate):
        _close(state, effect.sphere)
    elif isinstance(effect, OpenGate):
        _open(state, effect.sphere)
    else:
        raise InternalError(f"unknown effect {effect!r}")


def _latch(state: SimState, ti: int, si: int, snapshot, subject, place: str):
    trig = state.model.triggers[ti]
    latches = state.latches[ti]
    latches[si] = snapshot if snapshot is not None else {}
    if any(latch is None for latch in latches):
        return
    snapshots = list(latches)
    state.latches[ti] = [None] * len(latches)
    state.emit("trigger-fired", subject, place, trigger=ti, effect=format_effect(trig.effect))
    _apply(state, trig.effect, snapshots)


def _complete(state: SimState, token: Token):
    place = token.place
    for ti, si in state.stage_sources.get(place, ()):
        guard = state.model.triggers[ti].sources[si].guard
        if guard is None or evaluate_guard(guard, token, state.env):
            _latch(state, ti, si, dict(token.attributes), token.id, place)


def _plan(state: SimState, token: Token):
    if token.stage == Stage.TRANSFER and not token.inbound:
        flows = state.out_flows.get(token.place)
        if flows:
            return ("depart", flows[0])
    for a, b in state.successors[token.flowsystem]:
        if a == token.stage:
            return ("move", b)
    return ("retire",)


def _depart(state: SimState, token: Token, arc: FlowArc):
    scn = state.scenario
    lost = False
    if scn.drop > 0:
        lost = state.rng.randrange(scn.drop.denominator) < scn.drop.numerator
    detail = {"kind": token.kind, "attrs": dict(token.attributes), "to": arc.target}
    carrier = state.model.kinds[token.kind].carrier
    if carrier is not None:
        detail["part_of"] = carrier
    if lost:
        state.emit("channel-dropped", token.id, token.place, **detail)
        _retire(state, token)
        return
    delay = arc.delay if arc.delay is not None else scn.delay
    state.emit("channel-crossed", token.id, token.place, arrives=state.time + delay, **detail)
    state.push(state.time + delay, ("arrive", token.id, arc))


def _retire(state: SimState, token: Token):
    state.emit("token-retired", token.id, token.place)
    del state.tokens[token.id]


def _advance(state: SimState, time: int, qseq: int, token_id: int, fired: bool):
    token = state.tokens.get(token_id)
    if token is None:
        raise InternalError(f"advance of unknown token {token_id}")
    if _frozen(state, token.flowsystem):
        _defer(state, time, qseq, ("advance", token_id, fired))
        return
    if not fired:
        _complete(state, token)
        if token_id not in state.tokens:
            raise InternalError(f"token {token_id} vanished while completing a stage")
    plan = _plan(state, token)
    if plan[0] == "move" and _frozen(state, token.flowsystem):
        # The token's own triggers closed its sphere; hold the move.
        _defer(state, time, qseq, ("advance", token_id, True))
        return
    if plan[0] == "depart":
        _depart(state, token, plan[1])
    elif plan[0] == "move":
        old = token.place
        state.emit("stage-exited", token.id, old)
        token.stage = plan[1]
        token.inbound = False
        state.emit("stage-entered", token.id, token.place, **{"from": old})
        state.push(state.time, ("advance", token.id, False))
    else:
        _retire(state, token)


def _arrive(state: SimState, time: int, qseq: int, token_id: int, arc: FlowArc):
    dst_fs = split_stage_path(arc.target)[0]
    if _frozen(state, dst_fs):
        _defer(state, time, qseq, ("arrive", token_id, arc))
        return
    token = state.tokens[token_id]
    if token.place != arc.source:
        raise InternalError(f"token {token_id} arrived from {arc.source} but sits at "
                            f"{token.place}")
    state.emit("stage-exited", token.id, arc.source)
    token.flowsystem = dst_fs
    token.stage = Stage.TRANSFER
    token.inbound = True
    state.emit("stage-entered", token.id, token.place, **{"from": arc.source})
    state.push(state.time, ("advance", token.id, False))


def _expire(state: SimState, path: str):
    if path not in state.timers:
        raise InternalError(f"expiry of idle timer {path}")
    del state.timers[path]
    state.emit("timer-expired", path, state.model.timers[path].owner)
    for ti, si in state.timeout_sources.get(path, ()):
        guard = state.model.triggers[ti].sources[si].guard
        if guard is None or evaluate_guard(guard, None, state.env):
            _latch(state, ti, si, None, path, path)


def step(state: SimState) -> list[EventRecord] | None:
    """Dispatch the least (time, seq) event; return the records it produced.

    Returns None when the queue is empty.  A dispatch whose token is frozen
    behind a closed gate produces no records.
    """
    if not state.queue:
        return None
    time, qseq, action = heapq.heappop(state.queue)
    if time < state.time:
        raise InternalError("event queue went back in time")
    state.time = time
    start = len(state.trace.events)
    kind = action[0]
    if kind == "inject":
        inj = action[1]
        _create(state, inj.kind, inj.target, dict(inj.assignments))
    elif kind == "advance":
        _advance(state, time, qseq, action[1], action[2])
    elif kind == "arrive":
        _arrive(state, time, qseq, action[1], action[2])
    elif kind == "expire":
        _expire(state, action[1])
    else:
        raise InternalError(f"unknown action {kind!r}")
    return state.trace.events[start:]


def run(model: Model, scenario: Scenario) -> Trace:
    """Step until quiescence or a stop bound; the outcome is recorded on the trace."""
    state = init(model, scenario)
    while True:
        if not state.queue:
            outcome = QUIESCENT
            break
        if len(state.trace.events) >= scenario.max_events:
            outcome = EVENT_LIMIT
            break
        if state.queue[0][0] > scenario.max_time:
            outcome = TIME_LIMIT
            break
        step(state)
    state.trace.outcome = outcome
    state.trace.final_time = state.time
    return state.trace
