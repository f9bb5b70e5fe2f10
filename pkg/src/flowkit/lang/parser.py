"""Recursive-descent parser for ``.fm`` model sources.

Errors are collected as diagnostics; after an error the parser resumes at
the next top-level declaration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ..model import (
    COMPARE_OPS, INT, NORMAL, STATE, SYMBOL, AttrRef, Attribute, BoolOp, CloseGate,
    Compare, Const, Diagnostic, Duration, EnvRef, FlowArc, Flowsystem, Gate, Inject,
    Injection, Kind, Model, Not, OpenGate, Scenario, Source, Span, Sphere, Stage,
    StartTimer, StopTimer, Timer, Trigger, default_arcs, sort_stages,
)
from .lexer import Tok, tokenize

TOP_LEVEL = ("kind", "sphere", "flow", "trigger", "timer", "gate", "scenario")
SOURCE_REF = re.compile(r"src([1-9][0-9]*)$")


@dataclass(frozen=True)
class SourceUnit:
    name: str
    content: str


class _Abort(Exception):
    pass


class Parser:
    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.toks = tokenize(text, filename)
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        self.kinds: dict[str, Kind] = {}
        self.spheres: dict[str, Sphere] = {}
        self.flowsystems: dict[str, Flowsystem] = {}
        self.flows: list[FlowArc] = []
        self.triggers: list[Trigger] = []
        self.timers: dict[str, Timer] = {}
        self.gates: dict[str, Gate] = {}
        self.scenarios: dict[str, Scenario] = {}

    # -- token helpers ---------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def peek(self, offset: int = 1) -> Tok:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def advance(self) -> Tok:
        tok = self.tok
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def error(self, code: str, message: str, span: Span):
        self.diagnostics.append(Diagnostic("error", code, message, span))
        raise _Abort

    def unexpected(self, expected: str):
        tok = self.tok
        if tok.type == "ERROR":
            self.error("P1", tok.value, tok.span)
        shown = "end of file" if tok.type == "EOF" else repr(tok.value)
        self.error("P1", f"expected {expected}, found {shown}", tok.span)

    def expect_op(self, value: str) -> Tok:
        if not self.tok.is_op(value):
            self.unexpected(repr(value))
        return self.advance()

    def expect_word(self, value: str) -> Tok:
        if not self.tok.is_word(value):
            self.unexpected(repr(value))
        return self.advance()

    def accept_op(self, value: str) -> bool:
        if self.tok.is_op(value):
            self.advance()
            return True
        return False

    def accept_word(self, value: str) -> bool:
        if self.tok.is_word(value):
            self.advance()
            return True
        return False

    def name(self, what: str = "name") -> Tok:
        if self.tok.type != "NAME":
            self.unexpected(what)
        return self.advance()

    def kind_name(self) -> Tok:
        if self.tok.type not in ("NAME", "STRING"):
            self.unexpected("kind name")
        return self.advance()

    def integer(self) -> int:
        if self.tok.type != "INT":
            self.unexpected("integer")
        return int(self.advance().value)

    def path(self) -> tuple[str, Span]:
        first = self.name("path")
        parts = [first.value]
        end = first.span
        while self.tok.is_op(".") and self.peek().type == "NAME":
            self.advance()
            seg = self.advance()
            parts.append(seg.value)
            end = seg.span
        span = Span(first.span.file, first.span.line, first.span.column,
                    _extent(first.span, end))
        return ".".join(parts), span

    def duplicate(self, what: str, name: str, span: Span):
        self.diagnostics.append(
            Diagnostic("error", "P3", f"duplicate {what} {name!r}", span))

    # -- driver ----------------------------------------------------------

    def parse(self) -> Model:
        while self.tok.type != "EOF":
            start = self.pos
            try:
                self.declaration()
            except _Abort:
                self.recover(start)
        return Model(
            kinds=self.kinds, spheres=self.spheres, flowsystems=self.flowsystems,
            flows=tuple(self.flows), triggers=tuple(self.triggers), timers=self.timers,
            gates=self.gates, scenarios=self.scenarios,
        )

    def recover(self, start: int):
        depth = 0
        for tok in self.toks[start:self.pos]:
            if tok.is_op("{"):
                depth += 1
            elif tok.is_op("}"):
                depth -= 1
        if self.pos == start:
            self.advance()
        while self.tok.type != "EOF":
            tok = self.tok
            if depth <= 0 and tok.type == "NAME" and tok.value in TOP_LEVEL:
                return
            if tok.is_op("{"):
                depth += 1
            elif tok.is_op("}"):
                depth -= 1
            self.advance()

    def declaration(self):
        tok = self.tok
        handler = {
            "kind": self.kind_decl, "sphere": lambda: self.sphere_decl(None),
            "flow": self.flow_decl, "trigger": self.trigger_decl,
            "timer": self.timer_decl, "gate": self.gate_decl,
            "scenario": self.scenario_decl,
        }.get(tok.value) if tok.type == "NAME" else None
        if handler is None:
            self.unexpected("declaration")
        handler()

    # -- declarations ----------------------------------------------------

    def kind_decl(self):
        self.expect_word("kind")
        name_tok = self.kind_name()
        category = NORMAL
        carrier = None
        if self.accept_op(":"):
            cat = self.name("kind category")
            if cat.value not in (NORMAL, STATE):
                self.error("P1", f"unknown kind category {cat.value!r}", cat.span)
            category = cat.value
        if self.accept_word("within"):
            carrier = self.kind_name().value
        attrs: list[Attribute] = []
        if self.accept_op("{"):
            seen = set()
            while not self.tok.is_op("}"):
                attr_tok = self.name("attribute name")
                self.expect_op(":")
                dom = self.name("attribute domain")
                if dom.value not in (INT, SYMBOL):
                    self.error("P1", f"unknown attribute domain {dom.value!r}", dom.span)
                if attr_tok.value in seen:
                    self.duplicate("attribute", attr_tok.value, attr_tok.span)
                else:
                    seen.add(attr_tok.value)
                    attrs.append(Attribute(attr_tok.value, dom.value))
                if not self.accept_op(","):
                    break
            self.expect_op("}")
        if name_tok.value in self.kinds:
            self.duplicate("kind", name_tok.value, name_tok.span)
            return
        self.kinds[name_tok.value] = Kind(name_tok.value, category, tuple(attrs), carrier,
                                          span=name_tok.span)

    def sphere_decl(self, parent: str | None):
        self.expect_word("sphere")
        name_tok = self.name("sphere name")
        path = f"{parent}.{name_tok.value}" if parent else name_tok.value
        if path in self.spheres or path in self.flowsystems:
            self.duplicate("sphere", path, name_tok.span)
        else:
            self.spheres[path] = Sphere(path, span=name_tok.span)
        self.expect_op("{")
        while not self.tok.is_op("}"):
            if self.tok.is_word("sphere"):
                self.sphere_decl(path)
            elif self.tok.is_word("flowsystem"):
                self.flowsystem_decl(path)
            else:
                self.unexpected("'sphere', 'flowsystem' or '}'")
        self.expect_op("}")

    def stage(self, allow_receive: bool) -> tuple[list[Stage], Tok]:
        tok = self.name("stage name")
        if allow_receive and tok.value == "receive":
            return [Stage.ARRIVE, Stage.ACCEPT], tok
        try:
            return [Stage(tok.value)], tok
        except ValueError:
            self.error("P2", f"unknown stage {tok.value!r}", tok.span)

    def flowsystem_decl(self, sphere: str):
        self.expect_word("flowsystem")
        name_tok = self.name("flowsystem name")
        path = f"{sphere}.{name_tok.value}"
        self.expect_op(":")
        kind = self.kind_name().value
        self.expect_op("{")
        self.expect_word("stages")
        self.expect_op(":")
        stages: list[Stage] = []
        while True:
            found, tok = self.stage(allow_receive=True)
            for st in found:
                if st in stages:
                    self.duplicate("stage", st.value, tok.span)
                else:
                    stages.append(st)
            if not self.accept_op(","):
                break
        arcs = None
        if self.accept_word("arcs"):
            self.expect_op(":")
            arcs = []
            if not self.accept_word("none"):
                while True:
                    (a,), _ = self.stage(allow_receive=False)
                    self.expect_op("->")
                    (b,), _ = self.stage(allow_receive=False)
                    arcs.append((a, b))
                    if not self.accept_op(","):
                        break
        self.expect_op("}")
        if arcs is None:
            arcs = list(default_arcs(stages))
        if path in self.flowsystems or path in self.spheres:
            self.duplicate("flowsystem", path, name_tok.span)
            return
        self.flowsystems[path] = Flowsystem(path, kind, sort_stages(stages), tuple(arcs),
                                            span=name_tok.span)

    def flow_decl(self):
        self.expect_word("flow")
        src, span = self.path()
        self.expect_op("->")
        dst, _ = self.path()
        delay = None
        if self.accept_word("delay"):
            delay = self.integer()
        self.flows.append(FlowArc(src, dst, delay, span=span))

    def trigger_decl(self):
        start = self.expect_word("trigger")
        sources = []
        while True:
            sources.append(self.source())
            if not self.accept_op(","):
                break
        self.expect_op("=>")
        effect = self.effect()
        self.triggers.append(Trigger(tuple(sources), effect, span=start.span))

    def source(self) -> Source:
        if self.tok.is_word("timeout") and self.peek().type == "NAME":
            self.advance()
            place, span = self.path()
            return Source(place, None, True, span=span)
        place, span = self.path()
        guard = None
        if self.accept_word("when"):
            guard = self.expr()
        return Source(place, guard, False, span=span)

    def effect(self):
        tok = self.name("effect")
        if tok.value == "inject":
            kind = self.kind_name().value
            self.expect_word("at")
            target, _ = self.path()
            assigns = []
            if self.accept_word("with"):
                while True:
                    attr = self.name("attribute name").value
                    self.expect_op("=")
                    assigns.append((attr, self.atom()))
                    if not self.accept_op(","):
                        break
            return Inject(kind, target, tuple(assigns), span=tok.span)
        ctor = {"start": StartTimer, "stop": StopTimer, "open": OpenGate,
                "close": CloseGate}.get(tok.value)
        if ctor is None:
            self.error("P1", f"unknown effect {tok.value!r}", tok.span)
        target, span = self.path()
        return ctor(target, span=span)

    def timer_decl(self):
        self.expect_word("timer")
        path, span = self.path()
        self.expect_op("=")
        if self.tok.type == "INT":
            factor = self.integer()
            name = None
            if self.accept_op("*"):
                name = self.name("environment name").value
        else:
            factor, name = 1, self.name("duration").value
        if path in self.timers:
            self.duplicate("timer", path, span)
            return
        self.timers[path] = Timer(path, Duration(factor, name), span=span)

    def gate_decl(self):
        self.expect_word("gate")
        sphere, span = self.path()
        gate = Gate(sphere, span=span)
        if self.accept_word("by"):
            controller, _ = self.path()
            close_sym, open_sym = gate.close_symbol, gate.open_symbol
            if self.accept_word("close"):
                close_sym = self.symbol()
            if self.accept_word("open"):
                open_sym = self.symbol()
            gate = Gate(sphere, controller, close_sym, open_sym, span=span)
        if sphere in self.gates:
            self.duplicate("gate", sphere, span)
            return
        self.gates[sphere] = gate

    def symbol(self) -> str:
        if self.tok.type not in ("NAME", "STRING"):
            self.unexpected("symbol")
        return self.advance().value

    def literal(self) -> int | str:
        if self.tok.type == "INT":
            return self.integer()
        return self.symbol()

    def scenario_decl(self):
        self.expect_word("scenario")
        name_tok = self.name("scenario name")
        self.expect_op("{")
        fields: dict = {}
        injections: list[Injection] = []
        env: dict[str, int | str] = {}
        while not self.tok.is_op("}"):
            tok = self.name("scenario item")
            if tok.value == "inject":
                kind = self.kind_name().value
                self.expect_word("at")
                target, _ = self.path()
                time = 0
                if self.accept_word("time"):
                    time = self.integer()
                assigns = []
                if self.accept_word("with"):
                    while True:
                        attr = self.name("attribute name").value
                        self.expect_op("=")
                        assigns.append((attr, self.literal()))
                        if not self.accept_op(","):
                            break
                injections.append(Injection(kind, target, time, tuple(assigns), span=tok.span))
            elif tok.value == "env":
                key = self.name("environment name")
                self.expect_op("=")
                if key.value in env:
                    self.duplicate("environment entry", key.value, key.span)
                env[key.value] = self.literal()
            elif tok.value == "channel":
                if self.accept_word("delay"):
                    fields["delay"] = self.integer()
                if self.accept_word("drop"):
                    num = self.integer()
                    den = self.integer() if self.accept_op("/") else 1
                    if den <= 0 or not 0 <= num <= den:
                        self.error("P1", "drop probability must lie in [0, 1]", tok.span)
                    fields["drop"] = Fraction(num, den)
            elif tok.value == "seed":
                fields["seed"] = self.integer()
            elif tok.value == "stop":
                if self.accept_word("time"):
                    fields["max_time"] = self.integer()
                if self.accept_word("events"):
                    fields["max_events"] = self.integer()
            else:
                self.error("P1", f"unknown scenario item {tok.value!r}", tok.span)
        self.expect_op("}")
        if name_tok.value in self.scenarios:
            self.duplicate("scenario", name_tok.value, name_tok.span)
            return
        self.scenarios[name_tok.value] = Scenario(
            name_tok.value, tuple(injections), tuple(sorted(env.items())),
            span=name_tok.span, **fields)

    # -- expressions -----------------------------------------------------

    def expr(self):
        start = self.tok.span
        operands = [self.conjunction()]
        while self.accept_word("or"):
            operands.append(self.conjunction())
        return operands[0] if len(operands) == 1 else BoolOp("or", tuple(operands), span=start)

    def conjunction(self):
        start = self.tok.span
        operands = [self.unary()]
        while self.accept_word("and"):
            operands.append(self.unary())
        return operands[0] if len(operands) == 1 else BoolOp("and", tuple(operands), span=start)

    def unary(self):
        start = self.tok.span
        if self.accept_word("not"):
            return Not(self.unary(), span=start)
        if self.accept_op("("):
            inner = self.expr()
            self.expect_op(")")
            return inner
        left = self.atom()
        if not (self.tok.type == "OP" and self.tok.value in COMPARE_OPS):
            self.unexpected("comparison operator")
        op = self.advance().value
        right = self.atom()
        return Compare(op, left, right, span=start)

    def atom(self):
        tok = self.tok
        if tok.type == "INT":
            return Const(self.integer(), span=tok.span)
        if tok.type == "STRING":
            self.advance()
            return Const(tok.value, span=tok.span)
        if tok.type != "NAME":
            self.unexpected("value")
        self.advance()
        if self.tok.is_op(".") and (tok.value in ("token", "env") or SOURCE_REF.match(tok.value)):
            self.advance()
            attr = self.name("attribute name")
            span = Span(tok.span.file, tok.span.line, tok.span.column,
                        _extent(tok.span, attr.span))
            if tok.value == "env":
                return EnvRef(attr.value, span=span)
            m = SOURCE_REF.match(tok.value)
            return AttrRef(attr.value, int(m.group(1)) if m else None, span=span)
        return Const(tok.value, span=tok.span)


def _extent(first: Span, last: Span) -> int:
    if first.line != last.line:
        return first.length
    return last.column + last.length - first.column


def parse(source: SourceUnit | str, filename: str = "<input>") -> tuple[Model, list[Diagnostic]]:
    """Parse ``.fm`` text into an unvalidated model plus P-code diagnostics."""
    if isinstance(source, SourceUnit):
        text, filename = source.content, source.name
    else:
        text = source
    parser = Parser(text, filename)
    model = parser.parse()
    return model, sorted(parser.diagnostics, key=Diagnostic.sort_key)


def parse_expr(text: str):
    """Parse a standalone guard expression (used by programmatic builders)."""
    parser = Parser(text, "<expr>")
    try:
        expr = parser.expr()
        if parser.tok.type != "EOF":
            parser.unexpected("end of expression")
    except _Abort:
        raise ValueError(str(parser.diagnostics[-1])) from None
    return expr


def parse_atom(text: str):
    parser = Parser(text, "<expr>")
    try:
        atom = parser.atom()
        if parser.tok.type != "EOF":
            parser.unexpected("end of value")
    except _Abort:
        raise ValueError(str(parser.diagnostics[-1])) from None
    return atom
