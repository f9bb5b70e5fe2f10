import io
import subprocess
import sys
from pathlib import Path

from flowkit.cli import ExitStatus, _color_enabled, main
from flowkit.render import msc_lines
from flowkit.trace import loads_trace

FIXTURES = Path(__file__).parent / "fixtures"


def fm(capsys, *args):
    try:
        code = main([str(a) for a in args])
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def test_check_clean_corpus_file(capsys, corpus_dir):
    assert fm(capsys, "check", corpus_dir / "handshake.fm") == (0, "", "")


def test_check_reports_one_error_line(capsys):
    code, out, err = fm(capsys, "check", FIXTURES / "w3_state_release.fm")
    assert code == ExitStatus.DIAGNOSTICS and out == ""
    (line,) = err.splitlines()
    assert line.startswith(f"{FIXTURES / 'w3_state_release.fm'}:2:23: error[W3]: ")


def test_check_missing_file(capsys, tmp_path):
    assert fm(capsys, "check", tmp_path / "absent.fm")[0] == ExitStatus.IO


def test_check_parse_error(capsys, tmp_path):
    path = tmp_path / "bad.fm"
    path.write_text("kind D\nsphere S { flowsystem d: D { stages: create, store } }\n")
    code, _, err = fm(capsys, "check", path)
    assert code == 1 and "error[P2]" in err


def test_run_handshake_to_stdout(capsys, corpus_dir):
    code, out, err = fm(capsys, "run", corpus_dir / "handshake.fm", "--scenario", "default")
    assert code == 0
    trace = loads_trace(out)
    assert [line.kind for line in msc_lines(trace)] == ["SYN", "SYN+ACK", "ACK"]
    assert err.strip() == "default: 47 events, final time 3, quiescent"


def test_run_event_limit(capsys, corpus_dir):
    code, out, _ = fm(capsys, "run", corpus_dir / "handshake.fm", "--max-events", "0")
    trace = loads_trace(out)
    assert code == 0 and trace.events == [] and trace.outcome == "event-limit"


def test_run_zero_window_starts_persist(capsys, corpus_dir, tmp_path):
    out_path = tmp_path / "zw.trace"
    code, out, _ = fm(capsys, "run", corpus_dir / "tcp.fm", "--scenario", "zero_window",
                      "--trace", out_path)
    assert code == 0 and out == ""
    started = loads_trace(out_path.read_text()).of_kind("timer-started")
    assert [e.subject for e in started] == ["Local.persist"]


def test_run_unknown_scenario(capsys, corpus_dir):
    code, _, err = fm(capsys, "run", corpus_dir / "handshake.fm", "--scenario", "nope")
    assert code == ExitStatus.USAGE and "nope" in err


def test_run_unknown_flag(capsys, corpus_dir):
    assert fm(capsys, "run", corpus_dir / "handshake.fm", "--fast")[0] == ExitStatus.USAGE


def test_run_invalid_model(capsys):
    assert fm(capsys, "run", FIXTURES / "w1_illegal_arc.fm")[0] == ExitStatus.DIAGNOSTICS


def test_run_help_shows_defaults(capsys):
    code, out, _ = fm(capsys, "run", "--help")
    assert code == 0
    for text in ("0 if unset", "100000 if unset", "(default: default)"):
        assert text in " ".join(out.split())


def test_render_graph(capsys, corpus_dir):
    code, out, _ = fm(capsys, "render", corpus_dir / "handshake.fm", "--format", "graph")
    assert code == 0 and out.startswith("digraph")
    assert sum("style=dashed" in line for line in out.splitlines()) == 2


def test_render_msc(capsys, corpus_dir):
    code, out, _ = fm(capsys, "render", corpus_dir / "handshake.fm", "--format", "msc",
                      "--scenario", "default")
    assert code == 0
    assert out.splitlines()[1:] == ["t0 Local -> Remote : SYN", "t1 Remote -> Local : SYN+ACK",
                                    "t2 Local -> Remote : ACK"]


def test_render_unknown_format(capsys, corpus_dir):
    assert fm(capsys, "render", corpus_dir / "handshake.fm", "--format", "pdf")[0] == 2


def test_diff_identical(capsys, corpus_dir):
    golden = corpus_dir / "handshake.default.trace"
    assert fm(capsys, "diff", golden, golden) == (0, "", "")


def test_diff_fresh_run_against_golden(capsys, corpus_dir, tmp_path):
    fresh = tmp_path / "fresh.trace"
    fm(capsys, "run", corpus_dir / "handshake.fm", "--trace", fresh)
    assert fm(capsys, "diff", fresh, corpus_dir / "handshake.default.trace")[0] == 0


def test_diff_ignores_line_endings(capsys, corpus_dir, tmp_path):
    golden = corpus_dir / "handshake.default.trace"
    crlf = tmp_path / "crlf.trace"
    crlf.write_bytes(golden.read_bytes().replace(b"\n", b"\r\n"))
    assert fm(capsys, "diff", crlf, golden)[0] == 0


def test_diff_lossy_seeds(capsys, corpus_dir, tmp_path):
    a, b = tmp_path / "a.trace", tmp_path / "b.trace"
    fm(capsys, "run", corpus_dir / "handshake.fm", "--scenario", "lossy", "--seed", "0",
       "--trace", a)
    fm(capsys, "run", corpus_dir / "handshake.fm", "--scenario", "lossy", "--seed", "1",
       "--trace", b)
    code, out, _ = fm(capsys, "diff", a, b)
    assert code == ExitStatus.MISMATCH
    lines = out.splitlines()
    assert lines[0] == "first divergence at time 0, seq 5"
    assert lines[1].startswith("< ") and lines[2].startswith("> ")


def test_diff_missing_file(capsys, tmp_path):
    assert fm(capsys, "diff", tmp_path / "a", tmp_path / "b")[0] == ExitStatus.IO


class FakeTty(io.StringIO):
    def isatty(self):
        return True


def test_fm_color_switch(monkeypatch):
    monkeypatch.delenv("FM_COLOR", raising=False)
    assert _color_enabled(FakeTty())
    monkeypatch.setenv("FM_COLOR", "0")
    assert not _color_enabled(FakeTty())
    assert not _color_enabled(io.StringIO())


def test_module_entry_point(corpus_dir):
    result = subprocess.run([sys.executable, "-m", "flowkit.cli", "check",
                             str(corpus_dir / "tcp.fm")], capture_output=True, text=True)
    assert result.returncode == 0 and result.stdout == ""
