"""Static well-formedness rules.

W1 intra-arcs from the canonical set       W5 guard/template references exist
W2 inter-flow arcs are Transfer->Transfer  W6 gates bind state-kind flowsystems
W3 state kinds only create and process     W7 paths are unique
W4 injections target a matching Create     W8 referenced timers are declared

Unresolvable references are reported as P4.
"""

from __future__ import annotations

from .model import (
    CANONICAL_ARCS, DEFAULT_ENV, GATE_ATTRIBUTE, INT, STATE, STATE_STAGES, SYMBOL,
    AttrRef, CloseGate, Compare, Const, Diagnostic, EnvRef, Inject, Model, OpenGate,
    Span, Stage, StartTimer, StopTimer, iter_atoms, split_stage_path,
)

_ORDERING = ("<", "<=", ">", ">=")


class InvalidModel(ValueError):
    def __init__(self, diagnostics):
        super().__init__("model has validation errors:\n"
                         + "\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


class _Checker:
    def __init__(self, model: Model):
        self.model = model
        self.out: list[Diagnostic] = []
        # Environment names every run is guaranteed to have.
        if model.scenarios:
            names = None
            for scn in model.scenarios.values():
                keys = set(scn.environment())
                names = keys if names is None else names & keys
            self.env_names = names
        else:
            self.env_names = set(DEFAULT_ENV)

    def error(self, code, message, span):
        self.out.append(Diagnostic("error", code, message, span))

    def warning(self, code, message, span):
        self.out.append(Diagnostic("warning", code, message, span))

    def stage_ref(self, path: str, span: Span):
        """Resolve ``fs.stage``; reports P4 and returns None on failure."""
        head, stage = split_stage_path(path)
        fs = self.model.flowsystems.get(head)
        if fs is None or stage is None:
            self.error("P4", f"unresolved stage reference {path!r}", span)
            return None
        if stage not in fs.stages:
            self.error("P4", f"flowsystem {head!r} has no {stage.value} stage", span)
            return None
        return fs, stage

    # -- rules -------------------------------------------------------------

    def run(self) -> list[Diagnostic]:
        self.names()
        self.flowsystems()
        self.flows()
        self.triggers()
        self.timers()
        self.gates()
        self.scenarios()
        return sorted(self.out, key=Diagnostic.sort_key)

    def names(self):
        m = self.model
        owners: dict[str, str] = {}
        for label, table in (("sphere", m.spheres), ("flowsystem", m.flowsystems),
                             ("timer", m.timers)):
            for path, element in table.items():
                if path in owners:
                    self.error("W7", f"{label} {path!r} reuses the path of a {owners[path]}",
                               element.span)
                else:
                    owners[path] = label
        for sphere in m.spheres.values():
            if sphere.parent is not None and sphere.parent not in m.spheres:
                self.error("P4", f"parent sphere {sphere.parent!r} is not declared", sphere.span)
        for fs in m.flowsystems.values():
            if fs.sphere not in m.spheres:
                self.error("P4", f"owner sphere {fs.sphere!r} is not declared", fs.span)
            if fs.name in {s.value for s in Stage} | {"receive"}:
                self.error("W7", f"flowsystem name {fs.name!r} shadows a stage name", fs.span)
        for timer in m.timers.values():
            if timer.owner not in m.spheres:
                self.error("P4", f"timer owner {timer.owner!r} is not a sphere", timer.span)
        for kind in m.kinds.values():
            if kind.carrier is not None and kind.carrier not in m.kinds:
                self.error("P4", f"carrier kind {kind.carrier!r} is not declared", kind.span)

    def flowsystems(self):
        for fs in self.model.flowsystems.values():
            kind = self.model.kinds.get(fs.kind)
            if kind is None:
                self.error("P4", f"kind {fs.kind!r} is not declared", fs.span)
            for a, b in fs.arcs:
                if a not in fs.stages or b not in fs.stages:
                    self.error("W1", f"arc {a.value} -> {b.value} uses a stage not declared "
                               f"in {fs.path!r}", fs.span)
                elif (a, b) not in CANONICAL_ARCS:
                    self.error("W1", f"arc {a.value} -> {b.value} is not a legal flow", fs.span)
            if kind is not None and kind.category == STATE:
                extra = [s.value for s in fs.stages if s not in STATE_STAGES]
                if extra:
                    self.error("W3", f"state flowsystem {fs.path!r} may only create and "
                               f"process (found {', '.join(extra)})", fs.span)
            if Stage.ARRIVE in fs.stages and Stage.ACCEPT not in fs.stages:
                self.warning("W1", f"{fs.path!r} arrives without accepting; arrived "
                             "tokens are retired", fs.span)

    def flows(self):
        for arc in self.model.flows:
            src = self.stage_ref(arc.source, arc.span)
            dst = self.stage_ref(arc.target, arc.span)
            if arc.delay is not None and arc.delay < 0:
                self.error("W2", "flow delay must be non-negative", arc.span)
            if src is None or dst is None:
                continue
            (sfs, sst), (dfs, dst_stage) = src, dst
            if sfs.path == dfs.path:
                if (sst, dst_stage) not in CANONICAL_ARCS:
                    self.error("W1", f"flow {sst.value} -> {dst_stage.value} inside "
                               f"{sfs.path!r} is not a legal flow", arc.span)
                continue
            if sst != Stage.TRANSFER or dst_stage != Stage.TRANSFER:
                self.error("W2", "flow between flowsystems must connect transfer to transfer",
                           arc.span)
            if sfs.kind != dfs.kind:
                self.error("W2", f"flow connects kind {sfs.kind!r} to kind {dfs.kind!r}",
                           arc.span)

    def triggers(self):
        for trig in self.model.triggers:
            kinds = []
            for src in trig.sources:
                if src.timeout:
                    if src.place not in self.model.timers:
                        self.error("W8", f"timer {src.place!r} is not declared", src.span)
                    kinds.append(None)
                    if src.guard is not None:
                        self.check_expr(src.guard, [None], None)
                    continue
                ref = self.stage_ref(src.place, src.span)
                kind = self.model.kind_of(ref[0].path) if ref else None
                kinds.append(kind)
                if src.guard is not None and ref is not None:
                    self.check_expr(src.guard, [kind], kind)
            self.effect(trig.effect, kinds)

    def effect(self, effect, source_kinds):
        m = self.model
        if isinstance(effect, Inject):
            head, stage = split_stage_path(effect.target)
            fs = m.flowsystems.get(head if stage is not None else effect.target)
            if fs is None:
                self.error("P4", f"unresolved inject target {effect.target!r}", effect.span)
                return
            if stage is not None and stage != Stage.CREATE:
                self.error("W4", f"inject target must be a create stage, not {stage.value}",
                           effect.span)
            if Stage.CREATE not in fs.stages:
                self.error("W4", f"{fs.path!r} has no create stage to inject into", effect.span)
            kind = m.kinds.get(effect.kind)
            if kind is None:
                self.error("P4", f"kind {effect.kind!r} is not declared", effect.span)
                return
            if fs.kind != effect.kind:
                self.error("W4", f"inject of {effect.kind!r} into {fs.path!r} which carries "
                           f"{fs.kind!r}", effect.span)
            self.assignments(effect.assignments, kind, effect.span, source_kinds)
        elif isinstance(effect, (StartTimer, StopTimer)):
            if effect.timer not in m.timers:
                self.error("W8", f"timer {effect.timer!r} is not declared", effect.span)
        elif isinstance(effect, (OpenGate, CloseGate)):
            if effect.sphere not in m.spheres:
                self.error("P4", f"unresolved sphere {effect.sphere!r}", effect.span)
            elif effect.sphere not in m.gates:
                self.error("W6", f"sphere {effect.sphere!r} has no gate", effect.span)

    def assignments(self, assigns, kind, span, source_kinds):
        seen = set()
        for name, value in assigns:
            attr = kind.attribute(name)
            if attr is None:
                self.error("W4", f"kind {kind.name!r} has no attribute {name!r}", span)
                continue
            seen.add(name)
            if source_kinds is not None:
                vtype = self.atom_type(value, source_kinds, source_kinds[0] if source_kinds else None)
            else:
                vtype = _literal_type(value)
            if vtype is not None and vtype != attr.domain:
                self.error("W4", f"attribute {name!r} expects {attr.domain}, got {vtype}", span)
        missing = [a.name for a in kind.attributes if a.name not in seen]
        if missing:
            self.error("W4", f"injection of {kind.name!r} leaves {', '.join(missing)} unset", span)

    def atom_type(self, atom, source_kinds, own_kind):
        """Static type of an atom, or None when unknown; reports W5 problems."""
        if isinstance(atom, Const):
            return INT if isinstance(atom.value, int) else SYMBOL
        if isinstance(atom, EnvRef):
            if atom.name not in self.env_names:
                self.error("W5", f"environment name {atom.name!r} is not defined by every "
                           "scenario", atom.span)
            return None
        if isinstance(atom, AttrRef):
            if atom.source is None:
                kind = own_kind
            elif atom.source > len(source_kinds):
                self.error("W5", f"src{atom.source} exceeds the {len(source_kinds)} trigger "
                           "sources", atom.span)
                return None
            else:
                kind = source_kinds[atom.source - 1]
            if kind is None:
                self.error("W5", f"attribute {atom.name!r} referenced where no token is "
                           "available", atom.span)
                return None
            attr = kind.attribute(atom.name)
            if attr is None:
                self.error("W5", f"kind {kind.name!r} has no attribute {atom.name!r}", atom.span)
                return None
            return attr.domain
        return None

    def check_expr(self, expr, source_kinds, own_kind):
        for node in _compares(expr):
            lt = self.atom_type(node.left, source_kinds, own_kind)
            rt = self.atom_type(node.right, source_kinds, own_kind)
            if node.op in _ORDERING and SYMBOL in (lt, rt):
                self.error("W5", f"ordering comparison {node.op!r} on a symbol", node.span)
            elif lt is not None and rt is not None and lt != rt:
                self.error("W5", f"comparison between {lt} and {rt}", node.span)
        for atom in iter_atoms(expr):
            if isinstance(atom, AttrRef) and atom.source is not None:
                self.error("W5", "guards may only reference their own token", atom.span)

    def timers(self):
        for timer in self.model.timers.values():
            d = timer.duration
            if d.name is not None:
                if d.name not in self.env_names:
                    self.error("W8", f"timer duration uses undefined environment name "
                               f"{d.name!r}", timer.span)
                    continue
            if d.factor <= 0:
                self.error("W8", "timer duration must be positive", timer.span)

    def gates(self):
        m = self.model
        for gate in m.gates.values():
            if gate.sphere not in m.spheres:
                self.error("P4", f"gated sphere {gate.sphere!r} is not declared", gate.span)
            if gate.controller is None:
                continue
            fs = m.flowsystems.get(gate.controller)
            if fs is None:
                self.error("P4", f"gate controller {gate.controller!r} is not a flowsystem",
                           gate.span)
                continue
            kind = m.kinds.get(fs.kind)
            if kind is None:
                continue
            if kind.category != STATE:
                self.error("W6", f"gate controller {fs.path!r} carries non-state kind "
                           f"{kind.name!r}", gate.span)
            attr = kind.attribute(GATE_ATTRIBUTE)
            if attr is None or attr.domain != SYMBOL:
                self.error("W6", f"gate controller kind {kind.name!r} needs attribute "
                           f"'{GATE_ATTRIBUTE}: symbol'", gate.span)

    def scenarios(self):
        m = self.model
        for scn in m.scenarios.values():
            for inj in scn.injections:
                fs = m.flowsystems.get(inj.target)
                kind = m.kinds.get(inj.kind)
                if fs is None:
                    self.error("P4", f"unresolved injection target {inj.target!r}", inj.span)
                    continue
                if kind is None:
                    self.error("P4", f"kind {inj.kind!r} is not declared", inj.span)
                    continue
                if fs.kind != inj.kind or Stage.CREATE not in fs.stages:
                    self.error("W4", f"cannot inject {inj.kind!r} into {fs.path!r}", inj.span)
                self.assignments([(k, Const(v)) for k, v in inj.assignments], kind,
                                 inj.span, None)
            for key, value in scn.environment().items():
                if key == "segment_lifetime" and (not isinstance(value, int) or value <= 0):
                    self.error("W8", "segment_lifetime must be a positive integer", scn.span)


def _literal_type(atom):
    if isinstance(atom, Const):
        return INT if isinstance(atom.value, int) else SYMBOL
    return None


def _compares(expr):
    if isinstance(expr, Compare):
        yield expr
    elif hasattr(expr, "operands"):
        for operand in expr.operands:
            yield from _compares(operand)
    elif hasattr(expr, "operand"):
        yield from _compares(expr.operand)


def validate(model: Model) -> list[Diagnostic]:
    """All W1-W8 (and deferred P4) violations, sorted by span then rule code."""
    return _Checker(model).run()


def errors(diagnostics) -> list[Diagnostic]:
    return [d for d in diagnostics if d.is_error]
