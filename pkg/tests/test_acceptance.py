"""Acceptance gate: the nine primary criteria.

Each criterion is a function returning (passed, detail).  Under pytest a
PASS/FAIL line per criterion is printed in the terminal summary; running
this file directly prints the same lines.
"""

import sys
import time
from dataclasses import replace
from pathlib import Path

import pytest

from flowkit.corpus import SEGMENT_SPHERE, build_stop_and_wait, entries
from flowkit.engine import run
from flowkit.lang import load_model
from flowkit.render import msc_lines, render_graph
from flowkit.trace import dumps_trace, loads_trace
from flowkit.validate import errors, validate

sys.path.insert(0, str(Path(__file__).parent))
from oracle import ReplayError, replay  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
FIXTURES = Path(__file__).parent / "fixtures"
RESULTS: dict[int, tuple[str, bool, str]] = {}


def corpus_model(name):
    model, diags = load_model(CORPUS / f"{name}.fm")
    assert not diags, diags
    return model


def c1_handshake_order():
    model = corpus_model("handshake")
    lines = msc_lines(run(model, model.scenarios["default"]))
    got = [(l.source, l.target, l.kind) for l in lines]
    want = [("Local", "Remote", "SYN"), ("Remote", "Local", "SYN+ACK"), ("Local", "Remote", "ACK")]
    return got == want, f"{len(got)} lines: {[k for _, _, k in got]}"


def _alternates(trace, n):
    crossed = trace.of_kind("channel-crossed")
    order = [(e.detail["kind"], e.detail["attrs"]["seq"]) for e in crossed]
    if order != [p for i in range(1, n + 1) for p in (("Frame", i), ("Ack", i))]:
        return False
    ack_tokens = {e.subject: e.detail["attrs"]["seq"] for e in trace.of_kind("token-created")
                  if e.detail["kind"] == "Ack"}
    accepted = {ack_tokens[e.subject]: e.seq for e in trace.of_kind("stage-entered")
                if e.place == "Sender.ack.accept"}
    frame_sent = {e.detail["attrs"]["seq"]: e.seq for e in crossed if e.detail["kind"] == "Frame"}
    return all(frame_sent[i + 1] > accepted[i] for i in range(1, n))


def c2_stop_and_wait():
    start = time.perf_counter()
    bad = []
    for n in range(1, 21):
        model = build_stop_and_wait(n)
        if not _alternates(run(model, model.scenarios["default"]), n):
            bad.append(n)
    elapsed = time.perf_counter() - start
    return not bad and elapsed < 1.0, f"failing counts {bad}, sweep {elapsed:.3f}s"


def c3_zero_window():
    model = corpus_model("tcp")
    trace = run(model, model.scenarios["zero_window"])
    steps = [
        lambda e: e.kind == "gate-closed" and e.subject == SEGMENT_SPHERE,
        lambda e: e.kind == "timer-started" and e.subject == "Local.persist",
        lambda e: e.kind == "timer-expired" and e.subject == "Local.persist",
        lambda e: e.kind == "channel-crossed" and e.detail["kind"] == "SYN"
        and e.detail["attrs"].get("role") == "PROBE",
        lambda e: e.kind == "channel-crossed" and e.detail["kind"] == "ACK",
        lambda e: e.kind == "gate-opened" and e.subject == SEGMENT_SPHERE,
    ]
    found, k = [], 0
    for e in trace.events:
        if k < len(steps) and steps[k](e):
            found.append(e.seq)
            k += 1
    closed, leaked = False, 0
    for e in trace.events:
        if e.subject == SEGMENT_SPHERE and e.kind in ("gate-closed", "gate-opened"):
            closed = e.kind == "gate-closed"
        elif closed and e.kind == "channel-crossed" and e.detail["kind"] == "Segment":
            leaked += 1
    return k == len(steps) and leaked == 0, f"subsequence at {found}, leaked segments {leaked}"


def c4_termination_timers():
    model = corpus_model("tcp")
    gaps = {}
    for name in ("local_close_timeout", "remote_close_timeout"):
        for lifetime in (1, 10, 100):
            trace = run(model, model.scenarios[name].with_env(segment_lifetime=lifetime))
            started = {e.subject: e.time for e in trace.of_kind("timer-started")}
            expired = trace.of_kind("timer-expired")
            gaps[(name, lifetime)] = [e.time - started[e.subject] for e in expired]
    ok = all(g == [2 * lifetime] for (_, lifetime), g in gaps.items())
    return ok, ", ".join(f"{n}@{l}={g}" for (n, l), g in gaps.items())


SSL_BASELINE = ["Client Hello", "Server Hello", "Server Certificate", "Server Hello Done",
                "Client Key Exchange", "Change Cipher Spec", "Finished"]


def c5_ssl():
    model = corpus_model("ssl")
    trace = run(model, model.scenarios["baseline"])
    chart = [l.kind for l in msc_lines(trace)]
    kind_of = {e.subject: e.detail["kind"] for e in trace.of_kind("token-created")}
    masters = [e for e in trace.of_kind("token-created") if e.detail["kind"] == "MasterSecret"]
    sides = sorted(e.place.split(".")[0] for e in masters)

    def present(side, kind):
        # Index at which a random of ``kind`` first sits in a flowsystem of ``side``.
        return min((e.seq for e in trace.events
                    if e.kind in ("token-created", "stage-entered")
                    and kind_of.get(e.subject) == kind and e.place.split(".")[0] == side),
                   default=None)

    after_randoms = True
    for m in masters:
        side = m.place.split(".")[0]
        seen = [present(side, "ClientRandom"), present(side, "ServerRandom")]
        after_randoms &= None not in seen and m.seq > max(seen)
    ccs = [e.seq for e in trace.of_kind("channel-crossed")
           if e.detail["kind"] == "Change Cipher Spec"]
    ccs_after = len(ccs) == 1 and all(ccs[0] > m.seq for m in masters)
    ok = chart == SSL_BASELINE and sides == ["Client", "Server"] and after_randoms and ccs_after
    return ok, (f"chart {'ok' if chart == SSL_BASELINE else chart}, masters {sides}, "
                f"after randoms {after_randoms}, CCS after masters {ccs_after}")


def c6_determinism():
    runs, problems = 0, []
    for entry in entries():
        model = corpus_model(entry.name)
        for scn in model.scenarios.values():
            first, second = dumps_trace(run(model, scn)), dumps_trace(run(model, scn))
            runs += 1
            if first != second:
                problems.append(f"{entry.name}/{scn.name} repeat")
            if scn.drop == 0:
                texts = {dumps_trace(run(model, replace(scn, seed=s))) for s in (0, 1, 42)}
                if len(texts) != 1:
                    problems.append(f"{entry.name}/{scn.name} seeds")
    return not problems, f"{runs} scenarios, problems {problems}"


def c7_static_semantics():
    caught = {}
    for code in ("W1", "W2", "W3", "W4", "W5", "W6", "W7", "W8"):
        (path,) = FIXTURES.glob(f"{code.lower()}_*.fm")
        model, parse_diags = load_model(path)
        caught[code] = not parse_diags and [d.code for d in errors(validate(model))] == [code]
    dirty = [e.name for e in entries() if errors(validate(corpus_model(e.name)))]
    ok = all(caught.values()) and not dirty
    return ok, f"caught {sum(caught.values())}/8, corpus models with errors {dirty}"


def c8_exclusivity_oracle():
    checked, failures = 0, []
    for path in sorted(CORPUS.glob("*.trace")):
        name = path.name.split(".")[0]
        try:
            replay(corpus_model(name), loads_trace(path.read_text(encoding="utf-8")))
        except ReplayError as exc:
            failures.append(f"{path.name}: {exc}")
        checked += 1
    return checked > 0 and not failures, f"{checked} golden traces, failures {failures}"


def c9_renderer():
    problems = []
    for entry in entries():
        model = corpus_model(entry.name)
        dot = render_graph(model)
        if dot != render_graph(model):
            problems.append(f"{entry.name} unstable")
        edges = [line for line in dot.splitlines() if " -> " in line]
        dashed = sum("style=dashed" in line for line in edges)
        solid = sum("style=" not in line for line in edges)
        arcs = sum(len(fs.arcs) for fs in model.flowsystems.values()) + len(model.flows)
        if dashed != sum(len(t.sources) for t in model.triggers) or solid != arcs:
            problems.append(f"{entry.name} counts {solid}/{dashed}")
    return not problems, f"problems {problems}"


CRITERIA = [
    (1, "handshake order", c1_handshake_order),
    (2, "stop-and-wait alternation", c2_stop_and_wait),
    (3, "zero-window path", c3_zero_window),
    (4, "termination timers", c4_termination_timers),
    (5, "ssl ordering and key symmetry", c5_ssl),
    (6, "determinism", c6_determinism),
    (7, "static semantics", c7_static_semantics),
    (8, "runtime exclusivity oracle", c8_exclusivity_oracle),
    (9, "renderer determinism and counts", c9_renderer),
]


def report_line(number, title, passed, detail):
    return f"criterion {number} [{title}]: {'PASS' if passed else 'FAIL'} - {detail}"


@pytest.mark.parametrize("number, title, check", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check):
    passed, detail = check()
    RESULTS[number] = (title, passed, detail)
    print(report_line(number, title, passed, detail))
    assert passed, detail


if __name__ == "__main__":
    failed = 0
    for number, title, check in CRITERIA:
        passed, detail = check()
        failed += not passed
        print(report_line(number, title, passed, detail))
    sys.exit(1 if failed else 0)
