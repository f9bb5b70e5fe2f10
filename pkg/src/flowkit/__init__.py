"""Executable flowthing models: language, validator, simulator and renderers."""

from .engine import SimState, evaluate_guard, init, run, step
from .lang import SourceUnit, load_model, parse, print_canonical
from .model import Diagnostic, Model, Stage, legal_successors, resolve_path
from .render import render_graph, render_msc
from .trace import EventRecord, Trace, dumps_trace, loads_trace
from .validate import validate

__all__ = [
    "Diagnostic", "EventRecord", "Model", "SimState", "SourceUnit", "Stage", "Trace",
    "dumps_trace", "evaluate_guard", "init", "legal_successors", "load_model", "loads_trace",
    "parse", "print_canonical", "render_graph", "render_msc", "resolve_path", "run", "step",
    "validate",
]

__version__ = "0.1.0"
