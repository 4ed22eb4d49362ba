"""Two-party monitoring session over a reliable byte stream.

The formula owner garbles and the trace owner evaluates. Message order:

    G -> E  HELLO            E -> G  HELLO
    G -> E  PARAMS           E -> G  PARAMS-ACK
    G -> E  OT-MSG1          E -> G  OT-MSG2          G -> E  OT-MSG3
    G -> E  GARBLER-INPUTS
    G -> E  CYCLE-TABLES  x cycles
    G -> E  DECODE-INFO
    E -> G  OUTPUT
    G -> E  CLOSE

A frame is a 4-byte big-endian payload length, a 1-byte type and the payload.
Either side may send ERROR instead of its next frame, which ends the session.
"""
from __future__ import annotations

import enum
import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circuit.monitor import (build_monitor_netlist, decode_output, evaluator_bits,
                              garbler_bits, worst_case_cycles)
from .circuit.netlist import CONST0, CONST1, Netlist
from .mpc.garble import (EvaluatorSession, GarbledCycle, GarblingError, decode_outputs,
                         garble_session, kappa_words, labels_from_bytes, labels_to_bytes)
from .mpc.ot import ELEMENT_BYTES, OTChooser, OTError, OTSender
from .robustness import Trace
from .stl import FormulaEncoding, pad_encoding

log = logging.getLogger(__name__)

VERSION = 1
MAX_PAYLOAD = 1 << 31
HEADER = struct.Struct(">IB")
PARAMS_FMT = struct.Struct(">IIHHIB")


class Msg(enum.IntEnum):
    HELLO = 1
    PARAMS = 2
    PARAMS_ACK = 3
    OT_MSG1 = 4
    OT_MSG2 = 5
    OT_MSG3 = 6
    GARBLER_INPUTS = 7
    CYCLE_TABLES = 8
    DECODE_INFO = 9
    OUTPUT = 10
    CLOSE = 11
    ERROR = 12


class Reason(enum.IntEnum):
    OK = 0
    VERSION = 1
    N_MISMATCH = 2
    M_MISMATCH = 3
    W_MISMATCH = 4
    KAPPA_MISMATCH = 5
    CYCLES_TOO_LOW = 6
    CYCLES_MISMATCH = 7
    PROTOCOL = 16
    INTEGRITY = 17
    INTERNAL = 18


class ProtocolError(RuntimeError):
    def __init__(self, message: str, reason: Reason = Reason.PROTOCOL):
        super().__init__(message)
        self.reason = reason


class NegotiationError(ProtocolError):
    """Parameters rejected during the handshake (NEGOTIATE-FAIL)."""


class PeerAbort(ProtocolError):
    """The other side sent ERROR."""


@dataclass(frozen=True)
class SessionParams:
    n: int
    m: int
    width: int = 32
    kappa: int = 128
    cycles: Optional[int] = None  # None: use the worst-case bound
    version: int = VERSION

    def __post_init__(self):
        kappa_words(self.kappa)
        if self.cycles is None:
            object.__setattr__(self, "cycles", worst_case_cycles(self.n, self.m))

    def pack(self) -> bytes:
        return PARAMS_FMT.pack(self.n, self.m, self.width, self.kappa, self.cycles, self.version)

    @classmethod
    def unpack(cls, payload: bytes) -> "SessionParams":
        if len(payload) != PARAMS_FMT.size:
            raise ProtocolError("malformed PARAMS payload")
        n, m, w, kappa, cycles, version = PARAMS_FMT.unpack(payload)
        try:
            return cls(n, m, w, kappa, cycles, version)
        except ValueError as exc:
            raise ProtocolError(f"invalid PARAMS: {exc}") from None


def check_params(local: SessionParams, remote: SessionParams) -> Reason:
    """Evaluator-side acceptance test for the garbler's proposal."""
    if remote.version != VERSION or local.version != VERSION:
        return Reason.VERSION
    if remote.n != local.n:
        return Reason.N_MISMATCH
    if remote.m != local.m:
        return Reason.M_MISMATCH
    if remote.width != local.width:
        return Reason.W_MISMATCH
    if remote.kappa != local.kappa:
        return Reason.KAPPA_MISMATCH
    if remote.cycles < worst_case_cycles(remote.n, remote.m):
        return Reason.CYCLES_TOO_LOW
    if remote.cycles != local.cycles:
        return Reason.CYCLES_MISMATCH
    return Reason.OK


@dataclass
class SessionStats:
    bytes_sent: int = 0
    bytes_received: int = 0
    frames_sent: int = 0
    frames_received: int = 0
    peak_buffer: int = 0
    compute_ms: float = 0.0
    total_ms: float = 0.0
    ot_count: int = 0
    frame_log: list = field(default_factory=list)


# -- framing ---------------------------------------------------------------------

class Channel:
    """Frames over a socket-like object, with byte and frame counters."""

    def __init__(self, sock, stats: Optional[SessionStats] = None):
        self.sock = sock
        self.stats = stats if stats is not None else SessionStats()
        self.closed = False

    def send(self, kind: Msg, payload: bytes = b"") -> None:
        if self.closed:
            raise ProtocolError("channel closed")
        frame = HEADER.pack(len(payload), int(kind)) + payload
        self.sock.sendall(frame)
        self.stats.bytes_sent += len(frame)
        self.stats.frames_sent += 1

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            if not chunk:
                raise ProtocolError("connection closed by peer")
            buf += chunk
        return bytes(buf)

    def recv(self) -> tuple[Msg, bytes]:
        length, kind = HEADER.unpack(self._read_exact(HEADER.size))
        if length > MAX_PAYLOAD:
            raise ProtocolError(f"frame of {length} bytes exceeds limit")
        try:
            kind = Msg(kind)
        except ValueError:
            raise ProtocolError(f"unknown frame type {kind}") from None
        payload = self._read_exact(length) if length else b""
        self.stats.bytes_received += HEADER.size + length
        self.stats.frames_received += 1
        return kind, payload

    def expect(self, kind: Msg) -> bytes:
        got, payload = self.recv()
        if got is Msg.ERROR:
            code = payload[0] if payload else Reason.PROTOCOL
            text = payload[1:].decode("utf-8", "replace")
            raise PeerAbort(f"peer aborted: {text}", Reason(code) if code in Reason._value2member_map_
                            else Reason.PROTOCOL)
        if got is not kind:
            raise ProtocolError(f"expected {kind.name}, got {got.name}")
        return payload

    def abort(self, reason: Reason, text: str) -> None:
        """Send ERROR and stop talking. Shutting the socket down also unblocks
        a peer that is still busy writing to us."""
        try:
            self.send(Msg.ERROR, bytes([int(reason)]) + text.encode()[:512])
        except (OSError, ProtocolError):
            pass
        self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except (OSError, AttributeError):
            pass


def _hello() -> bytes:
    return bytes([VERSION])


def _check_hello(payload: bytes) -> None:
    if not payload or payload[0] != VERSION:
        raise NegotiationError("protocol version mismatch", Reason.VERSION)


def _ack(reason: Reason) -> bytes:
    return bytes([int(reason)]) + reason.name.encode()


def negotiate(channel: Channel, proposed: SessionParams, role: str) -> SessionParams:
    """Handshake. The garbler proposes; the evaluator accepts or rejects with a
    reason code. Both sides return the agreed parameters or raise."""
    if role == "garbler":
        channel.send(Msg.HELLO, _hello())
        _check_hello(channel.expect(Msg.HELLO))
        channel.send(Msg.PARAMS, proposed.pack())
        ack = channel.expect(Msg.PARAMS_ACK)
        if not ack or ack[0] != Reason.OK:
            reason = Reason(ack[0]) if ack and ack[0] in Reason._value2member_map_ else Reason.PROTOCOL
            raise NegotiationError(f"NEGOTIATE-FAIL: evaluator rejected parameters ({reason.name})",
                                   reason)
        return proposed
    if role == "evaluator":
        _check_hello(channel.expect(Msg.HELLO))
        channel.send(Msg.HELLO, _hello())
        remote = SessionParams.unpack(channel.expect(Msg.PARAMS))
        reason = check_params(proposed, remote)
        channel.send(Msg.PARAMS_ACK, _ack(reason))
        if reason is not Reason.OK:
            raise NegotiationError(f"NEGOTIATE-FAIL: rejected garbler parameters ({reason.name})",
                                   reason)
        return remote
    raise ValueError(f"unknown role {role!r}")


def _fixed_label_count(net: Netlist) -> int:
    return len(net.dff_q) + int(np.count_nonzero((net.kind == CONST0) | (net.kind == CONST1)))


def _guard(channel: Channel, fn):
    """Run a role body; on failure tell the peer (unless it aborted first)."""
    try:
        return fn()
    except PeerAbort:
        channel.closed = True
        raise
    except NegotiationError:
        channel.closed = True
        raise
    except (ProtocolError, OTError) as exc:
        channel.abort(getattr(exc, "reason", Reason.PROTOCOL), str(exc))
        raise ProtocolError(str(exc), getattr(exc, "reason", Reason.PROTOCOL)) from exc
    except GarblingError as exc:
        channel.abort(Reason.INTEGRITY, str(exc))
        raise ProtocolError(str(exc), Reason.INTEGRITY) from exc
    except OSError as exc:
        channel.closed = True
        raise ProtocolError(f"transport failure: {exc}") from exc
    except Exception as exc:
        channel.abort(Reason.INTERNAL, f"{type(exc).__name__}: {exc}")
        raise


# -- roles -----------------------------------------------------------------------

def run_garbler(channel: Channel, params: SessionParams, enc: FormulaEncoding,
                netlist: Optional[Netlist] = None) -> int:
    """Formula owner's side. Returns the robustness reported by the evaluator."""
    stats = channel.stats
    t_start = time.perf_counter()

    def body() -> int:
        agreed = negotiate(channel, params, "garbler")
        net = netlist or build_monitor_netlist(agreed.n, agreed.m, agreed.width)
        padded = pad_encoding(enc, agreed.m)
        gbits = garbler_bits(padded, agreed.m, agreed.width)
        compute = 0.0

        t = time.perf_counter()
        gs = garble_session(net, agreed.cycles, kappa=agreed.kappa)
        zero, one = gs.evaluator_key_pairs()
        sender = OTSender([(labels_to_bytes(z), labels_to_bytes(o)) for z, o in zip(zero, one)])
        compute += time.perf_counter() - t
        stats.ot_count = len(zero)
        channel.send(Msg.OT_MSG1, sender.first_message())
        msg2 = channel.expect(Msg.OT_MSG2)
        t = time.perf_counter()
        msg3 = sender.answer(msg2)
        compute += time.perf_counter() - t
        channel.send(Msg.OT_MSG3, msg3)

        own = labels_to_bytes(gs.encode_garbler_inputs(gbits)) + labels_to_bytes(gs.fixed_labels())
        channel.send(Msg.GARBLER_INPUTS, own)
        for _ in range(agreed.cycles):
            t = time.perf_counter()
            gc = gs.garble_cycle()
            compute += time.perf_counter() - t
            channel.send(Msg.CYCLE_TABLES, struct.pack(">I", gc.cycle) + gc.tables)
        channel.send(Msg.DECODE_INFO, np.packbits(gs.decode_info).tobytes())
        out = channel.expect(Msg.OUTPUT)
        if len(out) != 9:
            raise ProtocolError("malformed OUTPUT payload")
        value, done = struct.unpack(">qB", out)
        if not done:
            raise ProtocolError("evaluator reported an unfinished computation")
        channel.send(Msg.CLOSE)
        stats.compute_ms = compute * 1e3
        return value

    try:
        return _guard(channel, body)
    finally:
        stats.total_ms = (time.perf_counter() - t_start) * 1e3


def run_evaluator(channel: Channel, params: SessionParams, trace: Trace,
                  netlist: Optional[Netlist] = None) -> int:
    """Trace owner's side. Returns the robustness, which it also reports back."""
    stats = channel.stats
    t_start = time.perf_counter()

    def body() -> int:
        agreed = negotiate(channel, params, "evaluator")
        net = netlist or build_monitor_netlist(agreed.n, agreed.m, agreed.width)
        ebits = evaluator_bits(trace, agreed.n, agreed.width)
        label_bytes = agreed.kappa // 8
        compute = 0.0

        chooser = OTChooser(ebits.tolist(), label_bytes)
        stats.ot_count = len(ebits)
        msg1 = channel.expect(Msg.OT_MSG1)
        t = time.perf_counter()
        msg2 = chooser.choose(msg1)
        compute += time.perf_counter() - t
        channel.send(Msg.OT_MSG2, msg2)
        msg3 = channel.expect(Msg.OT_MSG3)
        t = time.perf_counter()
        own = labels_from_bytes(b"".join(chooser.receive(msg3)), agreed.kappa)
        compute += time.perf_counter() - t

        payload = channel.expect(Msg.GARBLER_INPUTS)
        n_g, n_fixed = len(net.garbler_inputs), _fixed_label_count(net)
        if len(payload) != (n_g + n_fixed) * label_bytes:
            raise ProtocolError("GARBLER-INPUTS has the wrong size")
        labels = labels_from_bytes(payload, agreed.kappa)
        ev = EvaluatorSession(net, agreed.cycles, agreed.kappa)
        ev.set_inputs(labels[:n_g], own, labels[n_g:])
        del payload, labels

        for c in range(agreed.cycles):
            frame = channel.expect(Msg.CYCLE_TABLES)
            if len(frame) < 4:
                raise ProtocolError("CYCLE-TABLES frame too short")
            (index,) = struct.unpack(">I", frame[:4])
            t = time.perf_counter()
            ev.consume(GarbledCycle(index, frame[4:]))
            compute += time.perf_counter() - t
            del frame
        stats.peak_buffer = ev.peak_buffer

        info = channel.expect(Msg.DECODE_INFO)
        n_out = len(net.outputs)
        if len(info) != (n_out + 7) // 8:
            raise ProtocolError("DECODE-INFO has the wrong size")
        decode = np.unpackbits(np.frombuffer(info, dtype=np.uint8))[:n_out]
        bits = decode_outputs(ev.output_labels(), decode)
        value, done = decode_output(bits, agreed.width)
        if not done:
            raise ProtocolError("done flag low after the agreed cycle count")
        channel.send(Msg.OUTPUT, struct.pack(">qB", value, 1))
        channel.expect(Msg.CLOSE)
        stats.compute_ms = compute * 1e3
        return value

    try:
        return _guard(channel, body)
    finally:
        stats.total_ms = (time.perf_counter() - t_start) * 1e3


# -- byte accounting -------------------------------------------------------------------

def expected_transcript_bytes(net: Netlist, params: SessionParams) -> dict:
    """Bytes both directions put on the wire for one session, from counts alone."""
    lb = params.kappa // 8
    n_ot = len(net.evaluator_inputs)
    tables = net.n_and * params.cycles * 4 * lb
    frames = 2 + 2 + 3 + 1 + params.cycles + 1 + 1 + 1
    overhead = {
        "framing": frames * HEADER.size,
        "handshake": 2 * len(_hello()) + PARAMS_FMT.size + len(_ack(Reason.OK)),
        "ot": ELEMENT_BYTES * (1 + n_ot) + 2 * n_ot * lb,
        "garbler_inputs": (len(net.garbler_inputs) + _fixed_label_count(net)) * lb,
        "cycle_index": 4 * params.cycles,
        "decode_output": (len(net.outputs) + 7) // 8 + 9,
    }
    return {"tables": tables, "overhead": sum(overhead.values()), **overhead}


# -- loopback and sockets -------------------------------------------------------------

@dataclass
class LoopbackResult:
    garbler_value: Optional[int]
    evaluator_value: Optional[int]
    garbler_stats: SessionStats
    evaluator_stats: SessionStats
    garbler_error: Optional[BaseException] = None
    evaluator_error: Optional[BaseException] = None


def run_loopback(enc: FormulaEncoding, trace: Trace, params: SessionParams,
                 evaluator_params: Optional[SessionParams] = None,
                 use_tcp: bool = True) -> LoopbackResult:
    """Both roles in one process, connected over a loopback socket."""
    if use_tcp:
        server = socket.create_server(("127.0.0.1", 0))
        port = server.getsockname()[1]
        ev_sock = socket.create_connection(("127.0.0.1", port))
        g_sock, _ = server.accept()
        server.close()
    else:
        g_sock, ev_sock = socket.socketpair()
    net = build_monitor_netlist(params.n, params.m, params.width)
    g_chan, e_chan = Channel(g_sock), Channel(ev_sock)
    result = LoopbackResult(None, None, g_chan.stats, e_chan.stats)

    def evaluator():
        try:
            result.evaluator_value = run_evaluator(e_chan, evaluator_params or params, trace,
                                                   net if evaluator_params is None else None)
        except BaseException as exc:  # reported to the caller
            result.evaluator_error = exc
        finally:
            ev_sock.close()

    th = threading.Thread(target=evaluator, name="evaluator", daemon=True)
    th.start()
    try:
        result.garbler_value = run_garbler(g_chan, params, enc, net)
    except BaseException as exc:
        result.garbler_error = exc
    finally:
        th.join()
        g_sock.close()
    return result


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def listen_once(endpoint: str, timeout: Optional[float] = None) -> socket.socket:
    host, port = parse_endpoint(endpoint)
    with socket.create_server((host, port)) as server:
        server.settimeout(timeout)
        conn, addr = server.accept()
    log.info("accepted connection from %s:%d", *addr[:2])
    conn.settimeout(None)
    return conn


def connect(endpoint: str, retries: int = 50, delay: float = 0.1) -> socket.socket:
    host, port = parse_endpoint(endpoint)
    for attempt in range(retries):
        try:
            return socket.create_connection((host, port))
        except OSError:
            if attempt == retries - 1:
                raise
            time.sleep(delay)
    raise AssertionError("unreachable")
