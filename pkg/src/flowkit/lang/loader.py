"""Load a ``.fm`` file together with its optional ``.scn`` sidecar."""

from __future__ import annotations

from pathlib import Path

from ..model import Diagnostic, Model
from .parser import parse


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".scn")


def read_source(path: Path) -> str:
    # newline="" keeps CRLF intact; the lexer normalizes it and spans stay honest.
    with open(path, encoding="utf-8", newline="") as handle:
        return handle.read()


def load_model(path) -> tuple[Model, list[Diagnostic]]:
    """Parse ``path`` and merge scenarios from ``<stem>.scn`` when that file exists.

    Raises OSError when either file cannot be read.
    """
    path = Path(path)
    model, diags = parse(read_source(path), str(path))
    extra = sidecar_path(path)
    if path.suffix == ".fm" and extra.is_file():
        side, side_diags = parse(read_source(extra), str(extra))
        diags = diags + side_diags
        if any((side.kinds, side.spheres, side.flowsystems, side.flows, side.triggers,
                side.timers, side.gates)):
            diags.append(Diagnostic("error", "P1", "scenario file may only declare scenarios",
                                    _first_span(side)))
        for scn in side.scenarios.values():
            if scn.name in model.scenarios:
                diags.append(Diagnostic("error", "P3", f"duplicate scenario '{scn.name}'",
                                        scn.span))
        model = model.with_scenarios(side.scenarios.values())
    return model, sorted(diags, key=Diagnostic.sort_key)


def _first_span(model: Model):
    for group in (model.kinds, model.spheres, model.flowsystems, model.timers, model.gates):
        for item in group.values():
            return item.span
    return (model.flows + model.triggers)[0].span
