"""Builders for the protocol models shipped under ``corpus/``.

Each builder returns a Model with its named scenarios attached.  The
checked-in ``.fm``/``.scn``/``.trace`` files are regenerated from these
builders with ``python -m flowkit.corpus corpus/``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .engine import run
from .lang import parse_atom, parse_expr, print_canonical, print_scenarios
from .model import (
    INT, NORMAL, STATE, SYMBOL, Attribute, CloseGate, Const, Duration, FlowArc, Flowsystem,
    Gate, Inject, Injection, Kind, Model, Scenario, Source, Sphere, Stage,
    StartTimer, StopTimer, Timer, Trigger, default_arcs, sort_stages,
)
from .trace import dumps_trace


class ModelBuilder:
    def __init__(self):
        self.kinds: dict[str, Kind] = {}
        self.spheres: dict[str, Sphere] = {}
        self.flowsystems: dict[str, Flowsystem] = {}
        self.flows: list[FlowArc] = []
        self.triggers: list[Trigger] = []
        self.timers: dict[str, Timer] = {}
        self.gates: dict[str, Gate] = {}
        self.scenarios: dict[str, Scenario] = {}

    def kind(self, name, category=NORMAL, within=None, **attrs):
        self.kinds[name] = Kind(name, category,
                                tuple(Attribute(k, v) for k, v in attrs.items()), within)

    def sphere(self, path):
        parts = path.split(".")
        for i in range(1, len(parts) + 1):
            prefix = ".".join(parts[:i])
            self.spheres.setdefault(prefix, Sphere(prefix))

    def flowsystem(self, path, kind, *stages):
        expanded = []
        for name in stages:
            expanded += [Stage.ARRIVE, Stage.ACCEPT] if name == "receive" else [Stage(name)]
        self.sphere(path.rpartition(".")[0])
        self.flowsystems[path] = Flowsystem(path, kind, sort_stages(expanded),
                                            default_arcs(expanded))

    def sender(self, path, kind):
        self.flowsystem(path, kind, "create", "release", "transfer")

    def receiver(self, path, kind):
        self.flowsystem(path, kind, "transfer", "receive", "process")

    def flow(self, source, target, delay=None):
        self.flows.append(FlowArc(f"{source}.transfer", f"{target}.transfer", delay))

    def trigger(self, sources, effect):
        if isinstance(sources, (str, Source)):
            sources = [sources]
        self.triggers.append(Trigger(tuple(_source(s) for s in sources), effect))

    def timer(self, path, factor, name=None):
        self.timers[path] = Timer(path, Duration(factor, name))

    def gate(self, sphere, controller=None):
        self.gates[sphere] = Gate(sphere, controller)

    def scenario(self, name, injections, **options):
        env = options.pop("env", {})
        self.scenarios[name] = Scenario(name, tuple(injections), tuple(sorted(env.items())),
                                        **options)

    def build(self) -> Model:
        return Model(dict(self.kinds), dict(self.spheres), dict(self.flowsystems),
                     tuple(self.flows), tuple(self.triggers), dict(self.timers),
                     dict(self.gates), dict(self.scenarios))


def _source(spec) -> Source:
    if isinstance(spec, Source):
        return spec
    if spec.startswith("timeout "):
        return Source(spec[len("timeout "):], timeout=True)
    place, _, guard = spec.partition(" when ")
    return Source(place, parse_expr(guard) if guard else None)


def inject(kind, target, **values) -> Inject:
    assigns = tuple((k, Const(v) if isinstance(v, int) else parse_atom(v))
                    for k, v in values.items())
    return Inject(kind, target, assigns)


def put(kind, target, time=0, **values) -> Injection:
    return Injection(kind, target, time, tuple(values.items()))


# -- Stop-and-Wait ----------------------------------------------------------

def build_stop_and_wait(frame_count: int = 3) -> Model:
    """Sender holds every further frame at its channel until the previous ack arrives."""
    if frame_count < 1:
        raise ValueError("frame_count must be at least 1")
    b = ModelBuilder()
    b.kind("Frame", seq=INT)
    b.kind("Ack", seq=INT)
    b.kind("Control", STATE, value=SYMBOL)
    b.sender("Sender.Out.frame", "Frame")
    b.flowsystem("Sender.Out.control", "Control", "create", "process")
    b.receiver("Sender.ack", "Ack")
    b.receiver("Receiver.frame", "Frame")
    b.sender("Receiver.ack", "Ack")
    b.flow("Sender.Out.frame", "Receiver.frame")
    b.flow("Receiver.ack", "Sender.ack")
    b.gate("Sender.Out", "Sender.Out.control")
    b.trigger("Sender.Out.frame.transfer", inject("Control", "Sender.Out.control", value="STOP"))
    b.trigger("Receiver.frame.process", inject("Ack", "Receiver.ack", seq="token.seq"))
    b.trigger("Sender.ack.process", inject("Control", "Sender.Out.control", value="GO"))
    b.scenario("default", [put("Frame", "Sender.Out.frame", seq=i)
                           for i in range(1, frame_count + 1)])
    return b.build()


# -- three-way handshake --------------------------------------------------------

def build_handshake(symmetric: bool = False) -> Model:
    """SYN, SYN+ACK, ACK between Local and Remote.

    The symmetric variant gives both sides the full set of flowsystems and
    triggers so that each can initiate.
    """
    b = ModelBuilder()
    b.kind("SYN")
    b.kind("SYN+ACK")
    b.kind("ACK")
    if not symmetric:
        b.kind("Data")
        b.flowsystem("Local.data", "Data", "create", "process")
        b.sender("Local.syn", "SYN")
        b.receiver("Remote.syn", "SYN")
        b.sender("Remote.synack", "SYN+ACK")
        b.receiver("Local.synack", "SYN+ACK")
        b.sender("Local.ack", "ACK")
        b.receiver("Remote.ack", "ACK")
        b.flow("Local.syn", "Remote.syn")
        b.flow("Remote.synack", "Local.synack")
        b.flow("Local.ack", "Remote.ack")
        b.trigger("Remote.syn.process", inject("SYN+ACK", "Remote.synack"))
        b.trigger("Local.synack.process", inject("ACK", "Local.ack"))
        b.scenario("default", [put("SYN", "Local.syn")])
        b.scenario("app_data", [put("Data", "Local.data")])
        b.scenario("lossy", [put("SYN", "Local.syn")], drop=Fraction(1, 2))
        return b.build()
    sides = ("Local", "Remote")
    for me, peer in (sides, sides[::-1]):
        for kind, name in (("SYN", "syn"), ("SYN+ACK", "synack"), ("ACK", "ack")):
            b.sender(f"{me}.{name}_out", kind)
            b.receiver(f"{me}.{name}_in", kind)
            b.flow(f"{me}.{name}_out", f"{peer}.{name}_in")
    for me in sides:
        b.trigger(f"{me}.syn_in.process", inject("SYN+ACK", f"{me}.synack_out"))
        b.trigger(f"{me}.synack_in.process", inject("ACK", f"{me}.ack_out"))
    b.scenario("default", [put("SYN", "Local.syn_out")])
    b.scenario("symmetric", [put("SYN", "Local.syn_out"), put("SYN", "Remote.syn_out")])
    return b.build()


# -- TCP --------------------------------------------------------------------------

SEGMENT_SPHERE = "Local.Connection.Segment"
CONNECTION_SPHERE = "Local.Connection"
PERSIST_DURATION = 5

_TCP_ENV = {"local_window": 8, "remote_window": 4, "peer_fin": "YES", "peer_ack": "YES"}


def build_tcp() -> Model:
    b = ModelBuilder()
    b.kind("Data", intent=SYMBOL)
    b.kind("Header")
    b.kind("Segment")
    b.kind("Window", size=INT)
    b.kind("State", STATE, value=SYMBOL)
    b.kind("SYN", role=SYMBOL)
    b.kind("SYN+ACK")
    b.kind("ACK", ctx=SYMBOL, window=INT)
    b.kind("FIN", fin_type=SYMBOL)

    seg = SEGMENT_SPHERE
    b.flowsystem("Local.data", "Data", "create", "process")
    b.flowsystem("Local.header", "Header", "create")
    b.sender(f"{seg}.segment", "Segment")
    b.flowsystem(f"{seg}.state", "State", "create", "process")
    b.receiver("Local.window", "Window")
    b.sender("Local.syn", "SYN")
    b.receiver("Local.syn_in", "SYN")
    b.receiver("Local.synack", "SYN+ACK")
    b.sender("Local.synack_out", "SYN+ACK")
    b.receiver("Local.ack", "ACK")
    b.sender("Local.ack_out", "ACK")
    b.sender("Local.fin", "FIN")
    b.receiver("Local.fin_in", "FIN")
    b.receiver("IP.segment", "Segment")
    b.sender("Remote.window", "Window")
    b.receiver("Remote.syn_in", "SYN")
    b.sender("Remote.syn", "SYN")
    b.sender("Remote.synack", "SYN+ACK")
    b.receiver("Remote.synack_in", "SYN+ACK")
    b.sender("Remote.ack", "ACK")
    b.receiver("Remote.ack_in", "ACK")
    b.sender("Remote.fin", "FIN")
    b.receiver("Remote.fin_in", "FIN")

    b.flow(f"{seg}.segment", "IP.segment")
    b.flow("Remote.window", "Local.window")
    b.flow("Local.syn", "Remote.syn_in")
    b.flow("Remote.synack", "Local.synack")
    b.flow("Local.ack_out", "Remote.ack_in")
    b.flow("Remote.syn", "Local.syn_in")
    b.flow("Local.synack_out", "Remote.synack_in")
    b.flow("Remote.ack", "Local.ack")
    b.flow("Local.fin", "Remote.fin_in")
    b.flow("Remote.fin", "Local.fin_in")

    b.timer("Local.persist", PERSIST_DURATION)
    b.timer("Local.c_term", 2, "segment_lifetime")
    b.timer("Local.s_term", 2, "segment_lifetime")
    b.gate(CONNECTION_SPHERE)
    b.gate(seg, f"{seg}.state")

    local_ack = {"window": "env.local_window"}
    remote_ack = {"window": "env.remote_window"}
    # Processed data and a fresh header together make a segment for IP.
    b.trigger(["Local.data.process when token.intent == SEND", "Local.header.create"],
              inject("Segment", f"{seg}.segment"))
    # A zero window stops segment manufacture and arms the persist timer;
    # its expiry sends a probe whose ACK reopens the segment sphere.
    b.trigger("Local.window.process when token.size == 0",
              inject("State", f"{seg}.state", value="STOP"))
    b.trigger("Local.window.process when token.size == 0", StartTimer("Local.persist"))
    b.trigger("timeout Local.persist", inject("SYN", "Local.syn", role="PROBE"))
    b.trigger("Remote.syn_in.process when token.role == PROBE",
              inject("ACK", "Remote.ack", ctx="WINDOW", **remote_ack))
    b.trigger("Local.ack.process when token.ctx == WINDOW and token.window > 0",
              inject("State", f"{seg}.state", value="GO"))
    # Active open.
    b.trigger("Local.data.process when token.intent == CONNECT",
              inject("SYN", "Local.syn", role="OPEN"))
    b.trigger("Remote.syn_in.process when token.role == OPEN", inject("SYN+ACK", "Remote.synack"))
    b.trigger("Local.synack.process", inject("ACK", "Local.ack_out", ctx="OPEN", **local_ack))
    # Passive open; the peer's ACK lets transmission begin.
    b.trigger("Local.syn_in.process when token.role == OPEN",
              inject("SYN+ACK", "Local.synack_out"))
    b.trigger("Remote.synack_in.process", inject("ACK", "Remote.ack", ctx="OPEN", **remote_ack))
    b.trigger("Local.ack.process when token.ctx == OPEN",
              inject("State", f"{seg}.state", value="GO"))
    # C-TERMINATE, closed by the peer's FIN or by the timer.
    b.trigger("Local.fin.release when token.fin_type == C-TERMINATE", StartTimer("Local.c_term"))
    b.trigger("Remote.fin_in.process when token.fin_type == C-TERMINATE",
              inject("ACK", "Remote.ack", ctx="C-TERMINATE", **remote_ack))
    b.trigger("Remote.fin_in.process when token.fin_type == C-TERMINATE and env.peer_fin == YES",
              inject("FIN", "Remote.fin", fin_type="C-TERMINATE"))
    b.trigger("Local.fin_in.process when token.fin_type == C-TERMINATE",
              CloseGate(CONNECTION_SPHERE))
    b.trigger("Local.fin_in.process when token.fin_type == C-TERMINATE", StopTimer("Local.c_term"))
    b.trigger("Local.fin_in.process when token.fin_type == C-TERMINATE",
              inject("ACK", "Local.ack_out", ctx="C-TERMINATE", **local_ack))
    b.trigger("timeout Local.c_term", CloseGate(CONNECTION_SPHERE))
    # S-TERMINATE, closed by the peer's ACK or by the timer.
    b.trigger("Local.fin_in.process when token.fin_type == S-TERMINATE",
              inject("ACK", "Local.ack_out", ctx="S-TERMINATE", **local_ack))
    b.trigger("Local.fin_in.process when token.fin_type == S-TERMINATE",
              inject("FIN", "Local.fin", fin_type="S-TERMINATE"))
    b.trigger("Local.fin.release when token.fin_type == S-TERMINATE", StartTimer("Local.s_term"))
    b.trigger("Remote.fin_in.process when token.fin_type == S-TERMINATE and env.peer_ack == YES",
              inject("ACK", "Remote.ack", ctx="S-TERMINATE", **remote_ack))
    b.trigger("Local.ack.process when token.ctx == S-TERMINATE", CloseGate(CONNECTION_SPHERE))
    b.trigger("Local.ack.process when token.ctx == S-TERMINATE", StopTimer("Local.s_term"))
    b.trigger("timeout Local.s_term", CloseGate(CONNECTION_SPHERE))

    def scn(name, injections, **env):
        b.scenario(name, injections, env={**_TCP_ENV, **env})

    scn("send_data", [put("Data", "Local.data", intent="SEND"), put("Header", "Local.header")])
    scn("zero_window", [
        put("Window", "Remote.window", size=0),
        put("Data", "Local.data", time=2, intent="SEND"),
        put("Header", "Local.header", time=2),
    ])
    scn("handshake", [put("Data", "Local.data", intent="CONNECT")])
    scn("passive_open", [put("SYN", "Remote.syn", role="OPEN")])
    scn("local_close", [put("FIN", "Local.fin", fin_type="C-TERMINATE")])
    scn("local_close_timeout", [put("FIN", "Local.fin", fin_type="C-TERMINATE")], peer_fin="NO")
    scn("remote_close", [put("FIN", "Remote.fin", fin_type="S-TERMINATE")])
    scn("remote_close_timeout", [put("FIN", "Remote.fin", fin_type="S-TERMINATE")],
        peer_ack="NO")
    return b.build()


# -- SSL handshake -------------------------------------------------------------------

def build_ssl(with_server_key_exchange: bool = False, with_client_auth: bool = False) -> Model:
    """Client/Server Hello exchange up to the client's Finished message.

    The two optional server messages are switched by scenario environment
    flags; ``default`` uses the flags given here.
    """
    b = ModelBuilder()
    b.kind("Client Hello", version=SYMBOL, cipher_suite=SYMBOL)
    b.kind("ClientRandom", within="Client Hello", value=SYMBOL)
    b.kind("Server Hello", version=SYMBOL, cipher_suite=SYMBOL, compression=SYMBOL)
    b.kind("ServerRandom", within="Server Hello", value=SYMBOL)
    b.kind("Server Certificate", public_key=SYMBOL)
    b.kind("Server Key Exchange", temp_key=SYMBOL)
    b.kind("Certificate Request")
    b.kind("Server Hello Done")
    b.kind("Client Certificate")
    b.kind("Client Key Exchange", premaster=SYMBOL)
    b.kind("Change Cipher Spec")
    b.kind("Finished")
    b.kind("MasterSecret", client_random=SYMBOL, server_random=SYMBOL)

    # (client side, server side, kind) in the direction the message travels.
    to_server = [
        ("client_random", "client_random", "ClientRandom"),
        ("hello", "client_hello", "Client Hello"),
        ("certificate", "client_certificate", "Client Certificate"),
        ("key_exchange", "key_exchange_in", "Client Key Exchange"),
        ("change_cipher", "change_cipher", "Change Cipher Spec"),
        ("finished", "finished", "Finished"),
    ]
    to_client = [
        ("server_random", "server_random", "ServerRandom"),
        ("server_hello", "hello", "Server Hello"),
        ("certificate_in", "certificate", "Server Certificate"),
        ("key_exchange_in", "key_exchange", "Server Key Exchange"),
        ("cert_request", "cert_request", "Certificate Request"),
        ("hello_done", "hello_done", "Server Hello Done"),
    ]
    for client, server, kind in to_server:
        b.sender(f"Client.{client}", kind)
        b.receiver(f"Server.{server}", kind)
        b.flow(f"Client.{client}", f"Server.{server}")
    for client, server, kind in to_client:
        b.sender(f"Server.{server}", kind)
        b.receiver(f"Client.{client}", kind)
        b.flow(f"Server.{server}", f"Client.{client}")
    b.flowsystem("Client.master", "MasterSecret", "create", "process")
    b.flowsystem("Server.master", "MasterSecret", "create", "process")

    hello = "Server.client_hello.process"
    b.trigger(hello, inject("ServerRandom", "Server.server_random", value="sr"))
    b.trigger(hello, inject("Server Hello", "Server.hello", version="token.version",
                            cipher_suite="token.cipher_suite", compression="NONE"))
    b.trigger(hello, inject("Server Certificate", "Server.certificate", public_key="server_pk"))
    b.trigger(f"{hello} when env.server_key_exchange == YES",
              inject("Server Key Exchange", "Server.key_exchange", temp_key="temp_key"))
    b.trigger(f"{hello} when env.client_auth == YES",
              inject("Certificate Request", "Server.cert_request"))
    b.trigger(hello, inject("Server Hello Done", "Server.hello_done"))
    b.trigger(["Server.server_random.create", "Server.client_random.process"],
              inject("MasterSecret", "Server.master",
                     client_random="src2.value", server_random="src1.value"))
    b.trigger(["Client.client_random.create", "Client.server_random.process"],
              inject("MasterSecret", "Client.master",
                     client_random="src1.value", server_random="src2.value"))
    b.trigger("Client.cert_request.process", inject("Client Certificate", "Client.certificate"))
    b.trigger("Client.hello_done.process",
              inject("Client Key Exchange", "Client.key_exchange", premaster="pms"))
    b.trigger(["Client.master.create", "Client.key_exchange.transfer"],
              inject("Change Cipher Spec", "Client.change_cipher"))
    b.trigger("Client.change_cipher.transfer", inject("Finished", "Client.finished"))

    opening = [put("ClientRandom", "Client.client_random", value="cr"),
               put("Client Hello", "Client.hello", version="SSL3", cipher_suite="RSA_AES")]

    def flags(ske, auth):
        return {"server_key_exchange": "YES" if ske else "NO",
                "client_auth": "YES" if auth else "NO"}

    b.scenario("default", opening, env=flags(with_server_key_exchange, with_client_auth))
    b.scenario("baseline", opening, env=flags(False, False))
    b.scenario("client_auth", opening, env=flags(False, True))
    b.scenario("server_key_exchange", opening, env=flags(True, False))
    b.scenario("full", opening, env=flags(True, True))
    return b.build()


# -- checked-in corpus ------------------------------------------------------------

@dataclass(frozen=True)
class CorpusEntry:
    name: str
    model: Model

    @property
    def source(self) -> str:
        return print_canonical(self.model.without_scenarios())

    @property
    def scenario_source(self) -> str:
        return print_scenarios(self.model.scenarios.values())

    def golden(self) -> dict[str, str]:
        return {name: dumps_trace(run(self.model, scn))
                for name, scn in sorted(self.model.scenarios.items())}


def entries() -> list[CorpusEntry]:
    return [
        CorpusEntry("stop_and_wait", build_stop_and_wait()),
        CorpusEntry("handshake", build_handshake()),
        CorpusEntry("handshake_symmetric", build_handshake(symmetric=True)),
        CorpusEntry("tcp", build_tcp()),
        CorpusEntry("ssl", build_ssl()),
    ]


def corpus_files() -> dict[str, str]:
    """Relative file name -> content for every checked-in corpus file."""
    files = {}
    for entry in entries():
        files[f"{entry.name}.fm"] = entry.source
        files[f"{entry.name}.scn"] = entry.scenario_source
        for scenario, text in entry.golden().items():
            files[f"{entry.name}.{scenario}.trace"] = text
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m flowkit.corpus",
                                     description="Regenerate or check the corpus files.")
    parser.add_argument("directory", type=Path)
    parser.add_argument("--check", action="store_true",
                        help="report drift instead of writing files")
    args = parser.parse_args(argv)
    drift = []
    for name, text in corpus_files().items():
        path = args.directory / name
        if args.check:
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                drift.append(name)
            continue
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    for name in drift:
        print(f"drift: {name}", file=sys.stderr)
    return 1 if drift else 0


if __name__ == "__main__":
    sys.exit(main())
