from __future__ import annotations

import re

from ..model import (
    NORMAL, AttrRef, BoolOp, CloseGate, Compare, Const, EnvRef, Inject, Model, Not,
    OpenGate, Scenario, StartTimer, StopTimer,
)

IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*$")
RESERVED = frozenset({"and", "or", "not", "token", "env", "when", "timeout", "with", "at",
                      "time", "none", "receive"})
INDENT = "  "


def quote(name: str) -> str:
    if IDENT.match(name) and name not in RESERVED:
        return name
    return f'"{name}"'


def format_atom(atom) -> str:
    if isinstance(atom, Const):
        return str(atom.value) if isinstance(atom.value, int) else quote(atom.value)
    if isinstance(atom, EnvRef):
        return f"env.{atom.name}"
    if isinstance(atom, AttrRef):
        owner = "token" if atom.source is None else f"src{atom.source}"
        return f"{owner}.{atom.name}"
    raise TypeError(f"not an atom: {atom!r}")


_PRECEDENCE = {"or": 1, "and": 2}


def format_expr(expr, parent: int = 0) -> str:
    if isinstance(expr, Compare):
        return f"{format_atom(expr.left)} {expr.op} {format_atom(expr.right)}"
    if isinstance(expr, Not):
        return f"not {format_expr(expr.operand, 3)}"
    if isinstance(expr, BoolOp):
        prec = _PRECEDENCE[expr.op]
        text = f" {expr.op} ".join(format_expr(o, prec + 1) for o in expr.operands)
        return f"({text})" if prec < parent else text
    raise TypeError(f"not an expression: {expr!r}")


def format_literal(value) -> str:
    return str(value) if isinstance(value, int) else quote(value)


def format_effect(effect) -> str:
    if isinstance(effect, Inject):
        text = f"inject {quote(effect.kind)} at {effect.target}"
        if effect.assignments:
            text += " with " + ", ".join(f"{k} = {format_atom(v)}" for k, v in effect.assignments)
        return text
    verb = {StartTimer: "start", StopTimer: "stop", OpenGate: "open", CloseGate: "close"}
    target = effect.timer if isinstance(effect, (StartTimer, StopTimer)) else effect.sphere
    return f"{verb[type(effect)]} {target}"


def format_source(source) -> str:
    if source.timeout:
        return f"timeout {source.place}"
    if source.guard is None:
        return source.place
    return f"{source.place} when {format_expr(source.guard)}"


def _sphere_lines(model: Model, path: str, depth: int) -> list[str]:
    pad = INDENT * depth
    lines = [f"{pad}sphere {path.rpartition('.')[2]} {{"]
    for child in model.children(path):
        if child in model.spheres:
            lines += _sphere_lines(model, child, depth + 1)
            continue
        fs = model.flowsystems[child]
        inner = pad + INDENT * 2
        arcs = ", ".join(f"{a.value} -> {b.value}" for a, b in fs.arcs) or "none"
        lines += [
            f"{pad}{INDENT}flowsystem {fs.name}: {quote(fs.kind)} {{",
            f"{inner}stages: {', '.join(s.value for s in fs.stages)}",
            f"{inner}arcs: {arcs}",
            f"{pad}{INDENT}}}",
        ]
    lines.append(f"{pad}}}")
    return lines


def scenario_lines(scn: Scenario) -> list[str]:
    drop = scn.drop
    drop_text = str(drop.numerator) if drop.denominator == 1 else f"{drop.numerator}/{drop.denominator}"
    lines = [
        f"scenario {scn.name} {{",
        f"{INDENT}channel delay {scn.delay} drop {drop_text}",
        f"{INDENT}seed {scn.seed}",
        f"{INDENT}stop time {scn.max_time} events {scn.max_events}",
    ]
    for key, value in scn.env:
        lines.append(f"{INDENT}env {key} = {format_literal(value)}")
    for inj in scn.injections:
        text = f"{INDENT}inject {quote(inj.kind)} at {inj.target} time {inj.time}"
        if inj.assignments:
            text += " with " + ", ".join(f"{k} = {format_literal(v)}" for k, v in inj.assignments)
        lines.append(text)
    lines.append("}")
    return lines


def print_canonical(model: Model) -> str:
    """Deterministic source text for ``model``; ``receive`` is never re-sugared."""
    blocks: list[list[str]] = []
    for name in sorted(model.kinds):
        kind = model.kinds[name]
        text = f"kind {quote(kind.name)}"
        if kind.category != NORMAL:
            text += f": {kind.category}"
        if kind.carrier is not None:
            text += f" within {quote(kind.carrier)}"
        if kind.attributes:
            text += " { " + ", ".join(f"{a.name}: {a.domain}" for a in kind.attributes) + " }"
        blocks.append([text])
    for root in model.roots():
        blocks.append(_sphere_lines(model, root, 0))
    if model.flows:
        blocks.append([
            f"flow {f.source} -> {f.target}" + (f" delay {f.delay}" if f.delay is not None else "")
            for f in model.flows
        ])
    if model.timers:
        blocks.append([f"timer {p} = {model.timers[p].duration}" for p in sorted(model.timers)])
    if model.gates:
        gate_lines = []
        for path in sorted(model.gates):
            gate = model.gates[path]
            text = f"gate {gate.sphere}"
            if gate.controller is not None:
                text += (f" by {gate.controller} close {quote(gate.close_symbol)}"
                         f" open {quote(gate.open_symbol)}")
            gate_lines.append(text)
        blocks.append(gate_lines)
    if model.triggers:
        blocks.append([
            "trigger " + ", ".join(format_source(s) for s in t.sources)
            + " => " + format_effect(t.effect)
            for t in model.triggers
        ])
    for name in sorted(model.scenarios):
        blocks.append(scenario_lines(model.scenarios[name]))
    if not blocks:
        return ""
    # Kinds and single-line groups stay compact; multi-line blocks get a blank line.
    out: list[str] = []
    prev_kind = False
    for block in blocks:
        is_kind = len(block) == 1 and block[0].startswith("kind ")
        if out and not (is_kind and prev_kind):
            out.append("")
        out.extend(block)
        prev_kind = is_kind
    return "\n".join(out) + "\n"


def print_scenarios(scenarios) -> str:
    blocks = [scenario_lines(s) for s in sorted(scenarios, key=lambda s: s.name)]
    return "\n\n".join("\n".join(b) for b in blocks) + ("\n" if blocks else "")
