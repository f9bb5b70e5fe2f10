import pytest
from hypothesis import given, strategies as st

from flowkit.model import (
    CANONICAL_ARCS, NORMAL, STATE, Diagnostic, PathNotFound, Span, Sphere, Stage, StageRef,
    default_arcs, legal_successors, resolve_path,
)


def test_arrive_has_single_successor():
    assert legal_successors(Stage.ARRIVE, NORMAL) == {Stage.ACCEPT}


def test_release_leads_to_transfer():
    assert legal_successors(Stage.RELEASE, NORMAL) == {Stage.TRANSFER}


def test_state_kind_create_only_reaches_process():
    assert legal_successors(Stage.CREATE, STATE) == {Stage.PROCESS}
    assert legal_successors(Stage.PROCESS, STATE) == frozenset()


def test_canonical_arc_set_has_eight_arcs():
    assert len(CANONICAL_ARCS) == 8
    for a, b in CANONICAL_ARCS:
        assert b in legal_successors(a, NORMAL)


@given(st.sets(st.sampled_from(list(Stage))))
def test_default_arcs_are_legal_and_within_stages(stages):
    for a, b in default_arcs(stages):
        assert a in stages and b in stages
        assert (a, b) in CANONICAL_ARCS


def test_resolve_stage_path(corpus):
    model = corpus["handshake"].model
    ref = resolve_path(model, "Local.data.process")
    assert isinstance(ref, StageRef)
    assert ref.stage is Stage.PROCESS and ref.flowsystem.path == "Local.data"


def test_resolve_sphere(corpus):
    assert resolve_path(corpus["handshake"].model, "Local") == Sphere("Local")


def test_resolve_unknown_path(corpus):
    with pytest.raises(PathNotFound) as info:
        resolve_path(corpus["handshake"].model, "Nowhere.x")
    assert info.value.segment == "Nowhere"


def test_diagnostic_format():
    d = Diagnostic("error", "W3", "bad", Span("m.fm", 3, 7, 2))
    assert str(d) == "m.fm:3:7: error[W3]: bad"
    assert d.is_error
