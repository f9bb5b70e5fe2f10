"""Structure diagrams (DOT) and message sequence charts.

Graph conventions: one cluster per sphere and per flowsystem, one node per
stage, solid edges for flows, dashed edges for triggers, and a double
border around state flowsystems.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    CloseGate, Inject, Model, OpenGate, Stage, StartTimer, StopTimer, split_stage_path,
)
from .trace import Trace
from .validate import InvalidModel, errors, validate


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _gate_node(sphere: str) -> str:
    return f"{sphere}#gate"


def _effect_node(effect) -> str:
    if isinstance(effect, Inject):
        head, stage = split_stage_path(effect.target)
        fs = head if stage is not None else effect.target
        return f"{fs}.{Stage.CREATE.value}"
    if isinstance(effect, (StartTimer, StopTimer)):
        return effect.timer
    return _gate_node(effect.sphere)


def _effect_label(effect) -> str:
    return {StartTimer: "start", StopTimer: "stop", OpenGate: "open",
            CloseGate: "close"}.get(type(effect), "")


def _flowsystem_lines(model: Model, path: str, pad: str) -> list[str]:
    fs = model.flowsystems[path]
    kind = model.kinds[fs.kind]
    lines = [f"{pad}subgraph {_q('cluster_' + path)} {{",
             f"{pad}  label={_q(f'{fs.name} : {fs.kind}')};"]
    if kind.category == "state":
        lines.append(f"{pad}  peripheries=2;")
    received = (Stage.ARRIVE, Stage.ACCEPT) in fs.arcs
    for stage in fs.stages:
        if received and stage in (Stage.ARRIVE, Stage.ACCEPT):
            continue
        lines.append(f"{pad}  {_q(fs.stage_path(stage))} [label={_q(stage.label)}];")
    if received:
        lines += [f"{pad}  subgraph {_q('cluster_' + path + '#receive')} {{",
                  f"{pad}    label=\"receive\";", f"{pad}    style=dotted;"]
        for stage in (Stage.ARRIVE, Stage.ACCEPT):
            lines.append(f"{pad}    {_q(fs.stage_path(stage))} [label={_q(stage.label)}];")
        lines.append(f"{pad}  }}")
    lines.append(f"{pad}}}")
    return lines


def _sphere_lines(model: Model, path: str, depth: int) -> list[str]:
    pad = "  " * depth
    lines = [f"{pad}subgraph {_q('cluster_' + path)} {{",
             f"{pad}  label={_q(path.rpartition('.')[2])};"]
    if path in model.gates:
        lines.append(f"{pad}  {_q(_gate_node(path))} [shape=diamond, label=\"gate\"];")
    for tpath in sorted(p for p, t in model.timers.items() if t.owner == path):
        timer = model.timers[tpath]
        label = f"{tpath.rpartition('.')[2]} ({timer.duration})"
        lines.append(f"{pad}  {_q(tpath)} [shape=ellipse, label={_q(label)}];")
    for child in model.children(path):
        if child in model.spheres:
            lines += _sphere_lines(model, child, depth + 1)
        else:
            lines += _flowsystem_lines(model, child, pad + "  ")
    lines.append(f"{pad}}}")
    return lines


def graph_edges(model: Model) -> tuple[list[str], list[str], list[str]]:
    """Sorted (solid, dashed, dotted) DOT edge statements for ``model``."""
    solid = []
    for fs in model.flowsystems.values():
        for a, b in fs.arcs:
            solid.append(f"{_q(fs.stage_path(a))} -> {_q(fs.stage_path(b))};")
    for arc in model.flows:
        attrs = f" [label={_q(f'delay {arc.delay}')}]" if arc.delay is not None else ""
        solid.append(f"{_q(arc.source)} -> {_q(arc.target)}{attrs};")
    dashed = []
    for trig in model.triggers:
        target = _effect_node(trig.effect)
        label = _effect_label(trig.effect)
        extra = f", label={_q(label)}" if label else ""
        for src in trig.sources:
            dashed.append(f"{_q(src.place)} -> {_q(target)} [style=dashed{extra}];")
    dotted = [
        f"{_q(g.controller + '.' + Stage.CREATE.value)} -> {_q(_gate_node(g.sphere))} "
        f"[style=dotted, arrowhead=none];"
        for g in model.gates.values() if g.controller is not None
    ]
    return sorted(solid), sorted(dashed), sorted(dotted)


def render_graph(model: Model, name: str = "flowthings") -> str:
    """DOT text for the model's structure; byte-stable for equal models."""
    problems = errors(validate(model))
    if problems:
        raise InvalidModel(problems)
    lines = [f"digraph {_q(name)} {{", "  compound=true;", "  node [shape=box];"]
    for root in model.roots():
        lines += _sphere_lines(model, root, 1)
    solid, dashed, dotted = graph_edges(model)
    lines += ["  " + e for e in solid + dashed + dotted]
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- message sequence charts ---------------------------------------------------

@dataclass(frozen=True)
class MscLine:
    time: int
    source: str
    target: str
    kind: str
    summary: str = ""
    lost: bool = False

    def __str__(self) -> str:
        text = f"t{self.time} {self.source} -> {self.target} : {self.kind}"
        if self.summary:
            text += f" {self.summary}"
        if self.lost:
            text += " (lost)"
        return text


def _top(path: str) -> str:
    return path.split(".", 1)[0]


def _attrs(attrs: dict) -> str:
    return ", ".join(f"{k}={attrs[k]}" for k in sorted(attrs))


def msc_lines(trace: Trace) -> list[MscLine]:
    """Project channel events between different top-level spheres.

    A flowthing that travels inside a carrier message (``part_of`` in the
    event detail) is folded into the carrier's line when the carrier makes
    the same hop at the same time.
    """
    hops = []
    for e in trace.events:
        if e.kind not in ("channel-crossed", "channel-dropped"):
            continue
        src, dst = _top(e.place), _top(e.detail["to"])
        if src != dst:
            hops.append((e, src, dst))
    carried: dict[int, list] = {}
    standalone = []
    for i, (e, src, dst) in enumerate(hops):
        carrier = e.detail.get("part_of")
        host = None
        if carrier is not None:
            host = next((j for j, (o, s, d) in enumerate(hops)
                         if o.detail["kind"] == carrier and o.time == e.time
                         and (s, d) == (src, dst) and o.kind == e.kind), None)
        if host is None:
            standalone.append(i)
        else:
            carried.setdefault(host, []).append(e)
    out = []
    for i in standalone:
        e, src, dst = hops[i]
        parts = []
        if e.detail.get("attrs"):
            parts.append(f"({_attrs(e.detail['attrs'])})")
        for inner in carried.get(i, ()):
            piece = inner.detail["kind"]
            if inner.detail.get("attrs"):
                piece += f"({_attrs(inner.detail['attrs'])})"
            parts.append(f"+ {piece}")
        out.append(MscLine(e.time, src, dst, e.detail["kind"], " ".join(parts),
                           e.kind == "channel-dropped"))
    return out


def render_msc(trace: Trace) -> str:
    """Sequence chart text: a header line, then one ``t<time> A -> B : kind`` line per message."""
    lines = [f"msc {trace.scenario}"]
    lines += [str(line) for line in msc_lines(trace)]
    return "\n".join(lines) + "\n"
