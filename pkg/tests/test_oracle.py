"""The replay oracle must reject traces that break exclusivity or arc legality."""

from dataclasses import replace

import pytest

from flowkit.engine import run
from oracle import ReplayError, replay


@pytest.fixture
def golden(corpus):
    model = corpus["handshake"].model
    return model, run(model, model.scenarios["default"])


def mutated(trace, index, **changes):
    events = list(trace.events)
    events[index] = replace(events[index], **changes)
    return replace(trace, events=events)


def index_of(trace, kind, place):
    return next(i for i, e in enumerate(trace.events) if e.kind == kind and e.place == place)


def test_accepts_golden(golden):
    model, trace = golden
    assert replay(model, trace) == {}


def test_rejects_illegal_stage_jump(golden):
    model, trace = golden
    i = index_of(trace, "stage-entered", "Local.syn.release")
    with pytest.raises(ReplayError, match="arc set"):
        replay(model, mutated(trace, i, place="Local.syn.transfer"))


def test_rejects_token_in_two_places(golden):
    model, trace = golden
    i = index_of(trace, "stage-exited", "Local.syn.create")
    with pytest.raises(ReplayError):
        replay(model, mutated(trace, i, place="Local.syn.release"))


def test_rejects_reused_token_id(golden):
    model, trace = golden
    i = index_of(trace, "token-created", "Remote.synack.create")
    with pytest.raises(ReplayError, match="reused"):
        replay(model, mutated(trace, i, subject=1))


def test_rejects_arrival_without_crossing(golden):
    model, trace = golden
    i = index_of(trace, "channel-crossed", "Local.syn.transfer")
    with pytest.raises(ReplayError):
        replay(model, mutated(trace, i, detail={**trace.events[i].detail, "arrives": 7}))


def test_rejects_renumbered_seq(golden):
    model, trace = golden
    with pytest.raises(ReplayError, match="seq"):
        replay(model, mutated(trace, 3, seq=99))
