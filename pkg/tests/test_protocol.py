import socket
import struct
import threading

import numpy as np
import pytest

from privmon.circuit.monitor import build_monitor_netlist, worst_case_cycles
from privmon.gen import random_formula, random_trace
from privmon.protocol import (HEADER, Channel, Msg, NegotiationError, PeerAbort, ProtocolError,
                              Reason, SessionParams, check_params, expected_transcript_bytes,
                              negotiate, parse_endpoint, run_evaluator, run_garbler, run_loopback)
from privmon.robustness import Trace, dp_taliro, example_trace
from privmon.stl import encode, parse_formula

from conftest import WORKED_FORMULA


def _enc(m=4):
    return encode(parse_formula(WORKED_FORMULA), m)


@pytest.mark.parametrize("kappa", [128, 256])
def test_worked_example_over_loopback(kappa):
    res = run_loopback(_enc(), example_trace(), SessionParams(4, 4, kappa=kappa))
    assert res.garbler_error is None and res.evaluator_error is None
    assert res.garbler_value == res.evaluator_value == 3


def test_socketpair_transport():
    res = run_loopback(_enc(), example_trace(), SessionParams(4, 4), use_tcp=False)
    assert res.garbler_value == res.evaluator_value == 3


def test_random_sessions_match_cleartext():
    rng = np.random.default_rng(2024)
    for _ in range(4):
        f = random_formula(3, rng)
        tr = random_trace(int(rng.integers(1, 5)), rng)
        enc = encode(f, 5)
        res = run_loopback(enc, tr, SessionParams(4, 5))
        assert res.garbler_value == res.evaluator_value == dp_taliro(tr, enc)


def test_short_trace_is_padded():
    f = parse_formula("F[0,3) x >= 2 && G[0,inf) x >= -5")
    tr = Trace([0, 2], [1, 4])
    res = run_loopback(encode(f, 5), tr, SessionParams(4, 5))
    assert res.evaluator_value == dp_taliro(tr, encode(f))


# -- negotiation -------------------------------------------------------------------------

@pytest.mark.parametrize("evaluator, reason", [
    (SessionParams(5, 4), Reason.N_MISMATCH),
    (SessionParams(4, 5), Reason.M_MISMATCH),
    (SessionParams(4, 4, width=16), Reason.W_MISMATCH),
    (SessionParams(4, 4, kappa=256), Reason.KAPPA_MISMATCH),
])
def test_parameter_mismatch_rejected(evaluator, reason):
    res = run_loopback(_enc(), example_trace(), SessionParams(4, 4), evaluator_params=evaluator)
    for err in (res.garbler_error, res.evaluator_error):
        assert isinstance(err, NegotiationError) and err.reason is reason
        assert "NEGOTIATE-FAIL" in str(err)
    assert res.garbler_value is None and res.evaluator_value is None


def test_cycles_below_minimum_rejected():
    low = worst_case_cycles(4, 4) - 1
    p = SessionParams(4, 4, cycles=low)
    assert check_params(p, p) is Reason.CYCLES_TOO_LOW
    res = run_loopback(_enc(), example_trace(), p)
    assert res.evaluator_error.reason is Reason.CYCLES_TOO_LOW
    assert isinstance(res.garbler_error, NegotiationError)


def test_equal_proposals_agree():
    a, b = socket.socketpair()
    p = SessionParams(4, 4)
    out = {}
    th = threading.Thread(target=lambda: out.setdefault("e", negotiate(Channel(b), p, "evaluator")))
    th.start()
    out["g"] = negotiate(Channel(a), p, "garbler")
    th.join()
    assert out["g"] == out["e"] == p
    a.close(), b.close()


def test_params_wire_format():
    p = SessionParams(10, 7, 32, 128, 200)
    assert SessionParams.unpack(p.pack()) == p
    assert p.pack() == struct.pack(">IIHHIB", 10, 7, 32, 128, 200, 1)
    with pytest.raises(ProtocolError):
        SessionParams.unpack(b"\x00" * 3)
    assert SessionParams(4, 4).cycles == worst_case_cycles(4, 4)


# -- byte and memory laws ------------------------------------------------------------------

def test_transcript_bytes_follow_formula():
    p = SessionParams(4, 4)
    res = run_loopback(_enc(), example_trace(), p)
    g, e = res.garbler_stats, res.evaluator_stats
    assert g.bytes_sent == e.bytes_received and e.bytes_sent == g.bytes_received
    exp = expected_transcript_bytes(build_monitor_netlist(4, 4, 32), p)
    assert g.bytes_sent + g.bytes_received == exp["tables"] + exp["overhead"]


def test_evaluator_peak_independent_of_cycles():
    c = worst_case_cycles(4, 4)
    r1 = run_loopback(_enc(), example_trace(), SessionParams(4, 4, cycles=c))
    r2 = run_loopback(_enc(), example_trace(), SessionParams(4, 4, cycles=2 * c))
    assert r1.evaluator_value == r2.evaluator_value == 3
    assert r1.evaluator_stats.peak_buffer == r2.evaluator_stats.peak_buffer > 0


# -- framing and aborts ---------------------------------------------------------------------

def _pair():
    a, b = socket.socketpair()
    return Channel(a), Channel(b)


def test_frame_bytes():
    a, b = socket.socketpair()
    Channel(a).send(Msg.HELLO, b"\x01")
    assert b.recv(16) == b"\x00\x00\x00\x01\x01\x01"
    a.close(), b.close()


def test_unknown_frame_type():
    g, e = _pair()
    g.sock.sendall(HEADER.pack(0, 99))
    with pytest.raises(ProtocolError, match="unknown frame type"):
        e.recv()


def test_out_of_order_frame_aborts_evaluator():
    g, e = _pair()
    err = {}

    def evaluator():
        try:
            run_evaluator(e, SessionParams(4, 4), example_trace())
        except ProtocolError as exc:
            err["e"] = exc

    th = threading.Thread(target=evaluator)
    th.start()
    g.send(Msg.HELLO, b"\x01")
    assert g.expect(Msg.HELLO) == b"\x01"
    g.send(Msg.CYCLE_TABLES, b"\x00" * 8)  # skips PARAMS
    kind, payload = g.recv()
    th.join()
    assert kind is Msg.ERROR and payload[0] == Reason.PROTOCOL
    assert "expected PARAMS" in str(err["e"])


def test_peer_abort_is_raised():
    g, e = _pair()
    e.abort(Reason.INTERNAL, "boom")
    with pytest.raises(PeerAbort, match="boom"):
        g.expect(Msg.HELLO)


class _Corrupting(Channel):
    def send(self, kind, payload=b""):
        if kind is Msg.CYCLE_TABLES and payload[:4] == b"\x00\x00\x00\x03":
            payload = payload[:4] + bytes(x ^ 0x5A for x in payload[4:])
        super().send(kind, payload)


class _Truncating(Channel):
    def send(self, kind, payload=b""):
        if kind is Msg.CYCLE_TABLES and payload[:4] == b"\x00\x00\x00\x02":
            self.sock.sendall(HEADER.pack(len(payload), int(kind)) + payload[:100])
            self.sock.shutdown(socket.SHUT_WR)
            raise ConnectionResetError("simulated drop")
        super().send(kind, payload)


def _run_with(garbler_channel_cls):
    a, b = socket.socketpair()
    g, e = garbler_channel_cls(a), Channel(b)
    out = {}

    def evaluator():
        try:
            out["e"] = run_evaluator(e, SessionParams(4, 4), example_trace())
        except ProtocolError as exc:
            out["e_err"] = exc

    th = threading.Thread(target=evaluator)
    th.start()
    try:
        out["g"] = run_garbler(g, SessionParams(4, 4), _enc())
    except ProtocolError as exc:
        out["g_err"] = exc
    th.join()
    a.close(), b.close()
    return out


def test_tampered_tables_fail_closed():
    out = _run_with(_Corrupting)
    assert "e" not in out and "g" not in out
    assert out["e_err"].reason is Reason.INTEGRITY
    # the garbler either reads the ERROR frame or hits the shut-down socket
    assert isinstance(out["g_err"], ProtocolError)


def test_dropped_connection_fails_closed():
    out = _run_with(_Truncating)
    assert "e" not in out and "g" not in out
    assert "closed" in str(out["e_err"])
    assert "transport" in str(out["g_err"])


def test_endpoint_parsing():
    assert parse_endpoint("127.0.0.1:9000") == ("127.0.0.1", 9000)
    assert parse_endpoint(":9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_endpoint("localhost")


def test_local_failure_notifies_peer():
    # a trace longer than N fails on the evaluator after the handshake
    tr = Trace(range(6), [0] * 6)
    res = run_loopback(_enc(), tr, SessionParams(4, 4))
    assert res.evaluator_error is not None and not isinstance(res.evaluator_error, ProtocolError)
    assert isinstance(res.garbler_error, ProtocolError)
    assert res.garbler_value is None
