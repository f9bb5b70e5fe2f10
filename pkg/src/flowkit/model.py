"""Flowthing domain types.

A model is a forest of spheres holding flowsystems; each flowsystem moves
tokens of one kind through a subset of the six generic stages.  Every
element is addressed by its dotted path (``Local.syn.transfer``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union


class Stage(str, enum.Enum):
    CREATE = "create"
    RELEASE = "release"
    TRANSFER = "transfer"
    ARRIVE = "arrive"
    ACCEPT = "accept"
    PROCESS = "process"

    @property
    def label(self) -> str:
        return self.value.capitalize()

    def __str__(self) -> str:
        return self.value


STAGE_ORDER = tuple(Stage)
STATE_STAGES = frozenset({Stage.CREATE, Stage.PROCESS})

# Declaration order matters: default arcs follow it, and so does arc choice.
CANONICAL_ARCS: tuple[tuple[Stage, Stage], ...] = (
    (Stage.TRANSFER, Stage.ARRIVE),
    (Stage.ARRIVE, Stage.ACCEPT),
    (Stage.ACCEPT, Stage.PROCESS),
    (Stage.ACCEPT, Stage.RELEASE),
    (Stage.PROCESS, Stage.RELEASE),
    (Stage.CREATE, Stage.RELEASE),
    (Stage.CREATE, Stage.PROCESS),
    (Stage.RELEASE, Stage.TRANSFER),
)

NORMAL = "normal"
STATE = "state"

INT = "int"
SYMBOL = "symbol"

DEFAULT_CLOSE_SYMBOL = "STOP"
DEFAULT_OPEN_SYMBOL = "GO"
GATE_ATTRIBUTE = "value"

DEFAULT_ENV: dict[str, int | str] = {"segment_lifetime": 10}


def legal_successors(stage: Stage, category: str = NORMAL) -> frozenset[Stage]:
    """Stages reachable from ``stage`` in one intra-flowsystem step."""
    succ = {b for a, b in CANONICAL_ARCS if a == stage}
    if category == STATE:
        if stage not in STATE_STAGES:
            return frozenset()
        succ &= STATE_STAGES
    return frozenset(succ)


def default_arcs(stages) -> tuple[tuple[Stage, Stage], ...]:
    present = set(stages)
    return tuple((a, b) for a, b in CANONICAL_ARCS if a in present and b in present)


def sort_stages(stages) -> tuple[Stage, ...]:
    present = set(stages)
    return tuple(s for s in STAGE_ORDER if s in present)


@dataclass(frozen=True)
class Span:
    file: str = "<model>"
    line: int = 1
    column: int = 1
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NO_SPAN = Span()


def _span() -> Span:
    return field(default=NO_SPAN, compare=False, repr=False)


# -- guard and template expressions ---------------------------------------

@dataclass(frozen=True)
class Const:
    value: int | str
    span: Span = _span()


@dataclass(frozen=True)
class AttrRef:
    """``token.name`` (source=None) or ``srcN.name`` (source=N, 1-based)."""

    name: str
    source: int | None = None
    span: Span = _span()


@dataclass(frozen=True)
class EnvRef:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Atom"
    right: "Atom"
    span: Span = _span()


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    operands: tuple["Expr", ...]
    span: Span = _span()


@dataclass(frozen=True)
class Not:
    operand: "Expr"
    span: Span = _span()


Atom = Union[Const, AttrRef, EnvRef]
Expr = Union[Compare, BoolOp, Not]

COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")


def iter_atoms(expr):
    if isinstance(expr, (Const, AttrRef, EnvRef)):
        yield expr
    elif isinstance(expr, Compare):
        yield expr.left
        yield expr.right
    elif isinstance(expr, BoolOp):
        for operand in expr.operands:
            yield from iter_atoms(operand)
    elif isinstance(expr, Not):
        yield from iter_atoms(expr.operand)


# -- structural elements --------------------------------------------------

@dataclass(frozen=True)
class Attribute:
    name: str
    domain: str  # INT | SYMBOL


@dataclass(frozen=True)
class Kind:
    name: str
    category: str = NORMAL
    attributes: tuple[Attribute, ...] = ()
    # Message kind this flowthing travels inside of (message charts fold it in).
    carrier: str | None = None
    span: Span = _span()

    def attribute(self, name: str) -> Attribute | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        return None


@dataclass(frozen=True)
class Sphere:
    path: str
    span: Span = _span()

    @property
    def name(self) -> str:
        return self.path.rpartition(".")[2]

    @property
    def parent(self) -> str | None:
        return self.path.rpartition(".")[0] or None


@dataclass(frozen=True)
class Flowsystem:
    path: str
    kind: str
    stages: tuple[Stage, ...]
    arcs: tuple[tuple[Stage, Stage], ...]
    span: Span = _span()

    @property
    def name(self) -> str:
        return self.path.rpartition(".")[2]

    @property
    def sphere(self) -> str:
        return self.path.rpartition(".")[0]

    def stage_path(self, stage: Stage) -> str:
        return f"{self.path}.{stage.value}"


@dataclass(frozen=True)
class FlowArc:
    source: str  # stage path
    target: str
    delay: int | None = None
    span: Span = _span()


@dataclass(frozen=True)
class Source:
    """A trigger source: completion of a stage, or expiry of a timer."""

    place: str
    guard: Expr | None = None
    timeout: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class Inject:
    kind: str
    target: str  # flowsystem path, or its create-stage path
    assignments: tuple[tuple[str, Atom], ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class StartTimer:
    timer: str
    span: Span = _span()


@dataclass(frozen=True)
class StopTimer:
    timer: str
    span: Span = _span()


@dataclass(frozen=True)
class OpenGate:
    sphere: str
    span: Span = _span()


@dataclass(frozen=True)
class CloseGate:
    sphere: str
    span: Span = _span()


Effect = Union[Inject, StartTimer, StopTimer, OpenGate, CloseGate]


@dataclass(frozen=True)
class Trigger:
    sources: tuple[Source, ...]
    effect: Effect
    span: Span = _span()


@dataclass(frozen=True)
class Duration:
    """``factor`` logical units, or ``factor * env[name]`` when name is set."""

    factor: int
    name: str | None = None

    def evaluate(self, env) -> int:
        if self.name is None:
            return self.factor
        return self.factor * env[self.name]

    def __str__(self) -> str:
        if self.name is None:
            return str(self.factor)
        if self.factor == 1:
            return self.name
        return f"{self.factor} * {self.name}"


@dataclass(frozen=True)
class Timer:
    path: str
    duration: Duration
    span: Span = _span()

    @property
    def owner(self) -> str:
        return self.path.rpartition(".")[0]


@dataclass(frozen=True)
class Gate:
    sphere: str
    controller: str | None = None
    close_symbol: str = DEFAULT_CLOSE_SYMBOL
    open_symbol: str = DEFAULT_OPEN_SYMBOL
    span: Span = _span()


@dataclass(frozen=True)
class Injection:
    kind: str
    target: str
    time: int = 0
    assignments: tuple[tuple[str, int | str], ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Scenario:
    name: str
    injections: tuple[Injection, ...] = ()
    env: tuple[tuple[str, int | str], ...] = ()
    delay: int = 1
    drop: Fraction = Fraction(0)
    seed: int = 0
    max_time: int = 100_000
    max_events: int = 100_000
    span: Span = _span()

    def environment(self) -> dict[str, int | str]:
        env = dict(DEFAULT_ENV)
        env.update(self.env)
        return env

    def with_env(self, **values) -> "Scenario":
        merged = dict(self.env)
        merged.update(values)
        return replace(self, env=tuple(sorted(merged.items())))


@dataclass(frozen=True)
class Model:
    kinds: dict[str, Kind] = field(default_factory=dict)
    spheres: dict[str, Sphere] = field(default_factory=dict)
    flowsystems: dict[str, Flowsystem] = field(default_factory=dict)
    flows: tuple[FlowArc, ...] = ()
    triggers: tuple[Trigger, ...] = ()
    timers: dict[str, Timer] = field(default_factory=dict)
    gates: dict[str, Gate] = field(default_factory=dict)
    scenarios: dict[str, Scenario] = field(default_factory=dict)

    def roots(self) -> list[str]:
        return sorted(p for p, s in self.spheres.items() if s.parent is None)

    def children(self, sphere: str) -> list[str]:
        """Names of spheres and flowsystems directly inside ``sphere``."""
        out = [p for p, s in self.spheres.items() if s.parent == sphere]
        out += [p for p, f in self.flowsystems.items() if f.sphere == sphere]
        return sorted(out)

    def kind_of(self, flowsystem: str) -> Kind | None:
        fs = self.flowsystems.get(flowsystem)
        return self.kinds.get(fs.kind) if fs else None

    def with_scenarios(self, scenarios) -> "Model":
        merged = dict(self.scenarios)
        for scn in scenarios:
            merged[scn.name] = scn
        return replace(self, scenarios=merged)

    def without_scenarios(self) -> "Model":
        return replace(self, scenarios={})


# -- path resolution ------------------------------------------------------

@dataclass(frozen=True)
class StageRef:
    flowsystem: Flowsystem
    stage: Stage

    @property
    def path(self) -> str:
        return self.flowsystem.stage_path(self.stage)


class PathNotFound(LookupError):
    def __init__(self, path: str, segment: str):
        super().__init__(f"no element at {path!r} (unknown segment {segment!r})")
        self.path = path
        self.segment = segment


def split_stage_path(path: str) -> tuple[str, Stage | None]:
    head, _, last = path.rpartition(".")
    try:
        return head, Stage(last)
    except ValueError:
        return path, None


def resolve_path(model: Model, path: str):
    """Return the sphere, flowsystem, stage or timer at ``path``."""
    if not path:
        raise ValueError("empty path")
    if path in model.spheres:
        return model.spheres[path]
    if path in model.flowsystems:
        return model.flowsystems[path]
    if path in model.timers:
        return model.timers[path]
    head, stage = split_stage_path(path)
    fs = model.flowsystems.get(head)
    if fs is not None and stage is not None and stage in fs.stages:
        return StageRef(fs, stage)
    # Find the first segment that does not resolve, for the error message.
    parts = path.split(".")
    known = set(model.spheres) | set(model.flowsystems) | set(model.timers)
    for i in range(len(parts)):
        prefix = ".".join(parts[: i + 1])
        if prefix not in known:
            raise PathNotFound(path, parts[i])
    raise PathNotFound(path, parts[-1])


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: Span = NO_SPAN

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def sort_key(self):
        s = self.span
        return (s.file, s.line, s.column, self.code, self.message)

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}[{self.code}]: {self.message}"
