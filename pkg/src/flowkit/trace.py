"""Event records and the JSON Lines trace format.

A serialized trace is a header line, one line per event, and a footer::

    {"scenario": "default"}
    {"time": 0, "seq": 0, "kind": "token-created", "subject": 1, "place": "...", "detail": {...}}
    {"outcome": "quiescent", "events": 42, "time": 3}

Event keys always appear in the order time, seq, kind, subject, place,
detail; keys inside ``detail`` are sorted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

EVENT_KINDS = (
    "token-created", "stage-entered", "stage-exited", "channel-crossed", "channel-dropped",
    "trigger-fired", "timer-started", "timer-expired", "timer-cancelled", "gate-opened",
    "gate-closed", "token-retired",
)

QUIESCENT = "quiescent"
TIME_LIMIT = "time-limit"
EVENT_LIMIT = "event-limit"


@dataclass(frozen=True)
class EventRecord:
    time: int
    seq: int
    kind: str
    subject: int | str
    place: str
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "time": self.time, "seq": self.seq, "kind": self.kind,
            "subject": self.subject, "place": self.place,
            "detail": _sorted(self.detail),
        }, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "EventRecord":
        return cls(data["time"], data["seq"], data["kind"], data["subject"], data["place"],
                   data.get("detail", {}))


def _sorted(value):
    if isinstance(value, dict):
        return {k: _sorted(value[k]) for k in sorted(value)}
    return value


@dataclass
class Trace:
    scenario: str
    seed: int | None
    events: list[EventRecord] = field(default_factory=list)
    outcome: str | None = None
    final_time: int = 0

    def of_kind(self, *kinds: str) -> list[EventRecord]:
        return [e for e in self.events if e.kind in kinds]


def dumps_trace(trace: Trace) -> str:
    # The seed is left out so that loss-free runs serialize identically for any seed.
    lines = [json.dumps({"scenario": trace.scenario}, ensure_ascii=False)]
    lines += [e.to_json() for e in trace.events]
    lines.append(json.dumps({"outcome": trace.outcome, "events": len(trace.events),
                             "time": trace.final_time}))
    return "\n".join(lines) + "\n"


def loads_trace(text: str) -> Trace:
    rows = [json.loads(line) for line in text.replace("\r\n", "\n").splitlines() if line.strip()]
    if not rows or "scenario" not in rows[0]:
        raise ValueError("trace has no header line")
    trace = Trace(rows[0]["scenario"], None)
    for row in rows[1:]:
        if "outcome" in row:
            trace.outcome = row["outcome"]
            trace.final_time = row.get("time", 0)
        else:
            trace.events.append(EventRecord.from_dict(row))
    return trace
