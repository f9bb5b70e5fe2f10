"""The ``fm`` command: check, run, render and diff.

Machine output goes to stdout; diagnostics and summaries go to stderr.
"""

from __future__ import annotations

import argparse
import enum
import json
import os
import sys
from dataclasses import replace

from .engine import InvalidScenario, run
from .lang import load_model
from .model import Scenario
from .render import render_graph, render_msc
from .trace import dumps_trace
from .validate import InvalidModel, errors, validate


class ExitStatus(enum.IntEnum):
    OK = 0
    DIAGNOSTICS = 1
    USAGE = 2
    IO = 3
    MISMATCH = 4


_DEFAULTS = Scenario("default")
_COLORS = {"error": "\033[31m", "warning": "\033[33m"}


def _color_enabled(stream) -> bool:
    return os.environ.get("FM_COLOR", "1") != "0" and stream.isatty()


def _report(diags, stream=None):
    stream = stream or sys.stderr
    color = _color_enabled(stream)
    for d in diags:
        text = str(d)
        if color:
            tag = f"{d.severity}[{d.code}]"
            text = text.replace(tag, f"{_COLORS.get(d.severity, '')}{tag}\033[0m", 1)
        print(text, file=stream)


def _load_valid(path):
    """(model, status); status is None when the model is usable."""
    try:
        model, diags = load_model(path)
    except OSError as exc:
        print(f"fm: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        return None, ExitStatus.IO
    if not errors(diags):
        diags = sorted(diags + validate(model), key=lambda d: d.sort_key())
    _report(diags)
    if errors(diags):
        return None, ExitStatus.DIAGNOSTICS
    return model, None


def _scenario(model, name):
    if name not in model.scenarios:
        known = ", ".join(sorted(model.scenarios)) or "none"
        print(f"fm: unknown scenario '{name}' (available: {known})", file=sys.stderr)
        return None
    return model.scenarios[name]


def _simulate(model, scenario):
    try:
        return run(model, scenario), None
    except InvalidScenario as exc:
        print(f"fm: invalid scenario: {exc}", file=sys.stderr)
        return None, ExitStatus.DIAGNOSTICS
    except InvalidModel as exc:
        _report(exc.diagnostics)
        return None, ExitStatus.DIAGNOSTICS


def cmd_check(args) -> int:
    _, status = _load_valid(args.file)
    return status if status is not None else ExitStatus.OK


def cmd_run(args) -> int:
    model, status = _load_valid(args.file)
    if status is not None:
        return status
    scenario = _scenario(model, args.scenario)
    if scenario is None:
        return ExitStatus.USAGE
    overrides = {k: v for k, v in (("seed", args.seed), ("max_time", args.max_time),
                                   ("max_events", args.max_events)) if v is not None}
    trace, status = _simulate(model, replace(scenario, **overrides))
    if status is not None:
        return status
    text = dumps_trace(trace)
    if args.trace:
        try:
            with open(args.trace, "w", encoding="utf-8", newline="\n") as out:
                out.write(text)
        except OSError as exc:
            print(f"fm: cannot write {args.trace}: {exc.strerror or exc}", file=sys.stderr)
            return ExitStatus.IO
    else:
        sys.stdout.write(text)
    print(f"{trace.scenario}: {len(trace.events)} events, final time {trace.final_time}, "
          f"{trace.outcome}", file=sys.stderr)
    return ExitStatus.OK


def cmd_render(args) -> int:
    model, status = _load_valid(args.file)
    if status is not None:
        return status
    if args.format == "graph":
        sys.stdout.write(render_graph(model))
        return ExitStatus.OK
    scenario = _scenario(model, args.scenario)
    if scenario is None:
        return ExitStatus.USAGE
    trace, status = _simulate(model, scenario)
    if status is not None:
        return status
    sys.stdout.write(render_msc(trace))
    return ExitStatus.OK


def _read_lines(path):
    with open(path, encoding="utf-8", newline="") as handle:
        return handle.read().replace("\r\n", "\n").split("\n")


def _position(line: str):
    try:
        row = json.loads(line)
    except ValueError:
        return None
    if isinstance(row, dict) and "seq" in row:
        return row["time"], row["seq"]
    return None


def cmd_diff(args) -> int:
    try:
        a, b = _read_lines(args.a), _read_lines(args.b)
    except OSError as exc:
        print(f"fm: cannot read {exc.filename}: {exc.strerror or exc}", file=sys.stderr)
        return ExitStatus.IO
    if a == b:
        return ExitStatus.OK
    index = next(i for i in range(max(len(a), len(b)))
                 if i >= len(a) or i >= len(b) or a[i] != b[i])
    left = a[index] if index < len(a) else "<end of file>"
    right = b[index] if index < len(b) else "<end of file>"
    where = _position(left) or _position(right)
    if where is None:
        print(f"first divergence at line {index + 1}")
    else:
        print(f"first divergence at time {where[0]}, seq {where[1]}")
    print(f"< {left}")
    print(f"> {right}")
    return ExitStatus.MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fm", description="Flowthing model toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="parse and validate a model")
    check.add_argument("file")
    check.set_defaults(func=cmd_check)

    runp = sub.add_parser("run", help="simulate a scenario and print its trace")
    runp.add_argument("file")
    runp.add_argument("--scenario", default="default", help="scenario name (default: default)")
    runp.add_argument("--seed", type=int,
                      help=f"random seed (default: the scenario's, {_DEFAULTS.seed} if unset)")
    runp.add_argument("--max-time", type=int,
                      help=f"time bound (default: the scenario's, {_DEFAULTS.max_time} if unset)")
    runp.add_argument("--max-events", type=int,
                      help="event bound (default: the scenario's, "
                           f"{_DEFAULTS.max_events} if unset)")
    runp.add_argument("--trace", help="write the trace here instead of stdout")
    runp.set_defaults(func=cmd_run)

    render = sub.add_parser("render", help="emit a structure graph or a sequence chart")
    render.add_argument("file")
    render.add_argument("--format", choices=("graph", "msc"), default="graph",
                        help="output format (default: graph)")
    render.add_argument("--scenario", default="default",
                        help="scenario for msc output (default: default)")
    render.set_defaults(func=cmd_render)

    diff = sub.add_parser("diff", help="compare two serialized traces")
    diff.add_argument("a")
    diff.add_argument("b")
    diff.set_defaults(func=cmd_diff)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())
