"""Independent trace replayer used as a test oracle.

It shares nothing with the engine beyond the Model data types: token
locations are tracked from the records alone and every move is checked
against the model's declared arcs and flows, plus a private copy of the
legal stage successor table.
"""

from __future__ import annotations

LEGAL = {
    ("transfer", "arrive"), ("arrive", "accept"), ("accept", "process"), ("accept", "release"),
    ("process", "release"), ("create", "release"), ("create", "process"),
    ("release", "transfer"),
}


class ReplayError(AssertionError):
    pass


def _split(place: str):
    head, _, stage = place.rpartition(".")
    return head, stage


def replay(model, trace) -> dict:
    """Check ``trace`` against ``model``; return final {token id: place} for live tokens.

    Raises ReplayError on the first violation, naming the event index.
    """
    where: dict = {}
    retired: set = set()
    in_flight: dict = {}        # token id -> (target place, arrival time)
    closed: set = set()
    flows = {(a.source, a.target) for a in model.flows}
    events = trace.events
    last_time = 0

    def fail(i, msg):
        raise ReplayError(f"event {i}: {msg}: {events[i]}")

    i = 0
    while i < len(events):
        e = events[i]
        if e.seq != i:
            fail(i, "seq is not the record index")
        if e.time < last_time:
            fail(i, "time went backwards")
        last_time = e.time
        subject = e.subject
        if e.kind == "token-created":
            if subject in where or subject in retired:
                fail(i, "token id reused")
            fs, stage = _split(e.place)
            decl = model.flowsystems.get(fs)
            if decl is None or stage != "create" or decl.kind != e.detail["kind"]:
                fail(i, "token created outside a matching create stage")
            where[subject] = e.place
        elif e.kind == "stage-exited":
            if where.get(subject) != e.place:
                fail(i, "exit from a stage the token does not occupy")
            if i + 1 >= len(events):
                fail(i, "exit is the last record")
            nxt = events[i + 1]
            if (nxt.kind != "stage-entered" or nxt.subject != subject
                    or nxt.detail.get("from") != e.place):
                fail(i, "exit not immediately followed by the matching entry")
            src_fs, src_stage = _split(e.place)
            dst_fs, dst_stage = _split(nxt.place)
            if src_fs == dst_fs:
                arcs = {(a.value, b.value) for a, b in model.flowsystems[src_fs].arcs}
                if (src_stage, dst_stage) not in arcs or (src_stage, dst_stage) not in LEGAL:
                    fail(i + 1, "stage transition not in the arc set")
            else:
                if (e.place, nxt.place) not in flows:
                    fail(i + 1, "crossing not along a declared flow")
                if in_flight.pop(subject, None) != (nxt.place, nxt.time):
                    fail(i + 1, "arrival without a matching crossing")
            where[subject] = nxt.place
            i += 2
            continue
        elif e.kind == "stage-entered":
            fail(i, "entry without a preceding exit")
        elif e.kind in ("channel-crossed", "channel-dropped"):
            if where.get(subject) != e.place or _split(e.place)[1] != "transfer":
                fail(i, "crossing from a place the token does not occupy")
            if subject in in_flight:
                fail(i, "token crossed twice")
            if (e.place, e.detail["to"]) not in flows:
                fail(i, "crossing not along a declared flow")
            if e.kind == "channel-crossed":
                in_flight[subject] = (e.detail["to"], e.detail["arrives"])
            else:
                nxt = events[i + 1] if i + 1 < len(events) else None
                if nxt is None or nxt.kind != "token-retired" or nxt.subject != subject:
                    fail(i, "dropped token not retired at once")
        elif e.kind == "token-retired":
            if where.get(subject) != e.place:
                fail(i, "retiring a token from the wrong place")
            if subject in in_flight:
                fail(i, "retiring a token that is in flight")
            del where[subject]
            retired.add(subject)
        elif e.kind in ("gate-closed", "gate-opened"):
            if (e.kind == "gate-closed") == (subject in closed):
                fail(i, "gate event without a state change")
            if e.kind == "gate-closed":
                closed.add(subject)
            else:
                closed.discard(subject)
        elif e.kind == "trigger-fired" and isinstance(subject, int):
            if where.get(subject) != e.place:
                fail(i, "trigger fired by a token elsewhere")
        # Exclusivity: every live token sits in exactly one known stage.
        for token, place in where.items():
            fs, stage = _split(place)
            if fs not in model.flowsystems or stage not in {s.value for s in
                                                            model.flowsystems[fs].stages}:
                fail(i, f"token {token} at unknown place {place}")
        i += 1
    # Only a closed gate can hold tokens still once nothing is queued.
    if trace.outcome == "quiescent" and (in_flight or (where and not closed)):
        raise ReplayError(f"quiescent trace leaves live tokens {sorted(where)}")
    return where
