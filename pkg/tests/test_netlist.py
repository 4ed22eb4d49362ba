import numpy as np
import pytest

from privmon.circuit.builder import CircuitBuilder
from privmon.circuit.monitor import build_monitor_netlist
from privmon.circuit.netlist import AND, NOT, XOR, Netlist, NetlistError
from privmon.circuit.sim import simulate, simulate_combinational

HAND_WRITTEN = """\
# y = (a AND b) XOR NOT c
IN G 0 1
IN E 2
AND 0 1 3
NOT 2 4
XOR 3 4 5
OUT 5
"""


def test_hand_written_file():
    net = Netlist.deserialize(HAND_WRITTEN)
    assert net.stats()["and"] == 1 and net.stats()["xor"] == 1 and net.stats()["not"] == 1
    cases = np.array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)])
    out = simulate_combinational(net, cases)[:, 0]
    assert out.tolist() == [(a & b) ^ (1 - c) for a, b, c in cases]


def test_out_of_order_gates_are_sorted():
    shuffled = "IN G 0 1\nIN E 2\nXOR 3 4 5\nNOT 2 4\nAND 0 1 3\nOUT 5\n"
    net = Netlist.deserialize(shuffled)
    assert net.kind.tolist() != [XOR, NOT, AND]
    assert Netlist.deserialize(net.serialize()).serialize() == net.serialize()


@pytest.mark.parametrize("text, fragment", [
    ("IN G 0\nIN E 1\nAND 0 1 2\nXOR 0 1 2\nOUT 2\n", "twice"),
    ("IN G 0\nIN E 1\nAND 0 4 2\nOUT 2\n", "undriven"),
    ("IN G 0\nIN E 1\nAND 0 3 2\nAND 0 2 3\nOUT 3\n", "cycle"),
    ("IN G 0\nIN E 1\nAND 0 1\nOUT 2\n", "fields"),
    ("IN G 0\nIN E 1\nNAND 0 1 2\nOUT 2\n", "unknown"),
    ("IN G 0\nAND 0 0 1\nOUT 1\n", "missing"),
    ("IN G 0\nIN E 1\nAND 0 x 2\nOUT 2\n", "non-integer"),
    ("IN G 0\nIN E 1\nDFF 2 3 7\nAND 0 1 2\nOUT 3\n", "init"),
    ("IN G 0\nIN E 1\nOUT 5\n", "never driven"),
])
def test_malformed(text, fragment):
    with pytest.raises(NetlistError, match=fragment):
        Netlist.deserialize(text)


def test_dff_loop_is_not_a_combinational_cycle():
    # toggle flip-flop: q' = q XOR en
    text = "IN G 0\nIN E\nDFF 2 1 0\nXOR 1 0 2\nOUT 1\n"
    net = Netlist.deserialize(text)
    res = simulate(net, [1], [], 5, fixed=True, require_done=False)
    assert res.cycles_used == 5 and res.outputs.tolist() == [0]  # 0,1,0,1,0


def test_builder_round_trip():
    bld = CircuitBuilder()
    a = bld.input("G", 8)
    b = bld.input("E", 8)
    r = bld.register(8)
    bld.set_next(r, bld.add(r, bld.min(a, b))[0])
    net = bld.build(r + [bld.one], {"N": 1, "M": 1, "W": 8, "cycles": 3})
    text = net.serialize()
    back = Netlist.deserialize(text)
    assert back.serialize() == text
    assert back.params == net.params
    g, e = [1, 0, 1, 0, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0, 0, 0]
    r1 = simulate(net, g, e, 3, fixed=True)
    r2 = simulate(back, g, e, 3, fixed=True)
    assert r1.outputs.tolist() == r2.outputs.tolist()


def test_monitor_netlist_round_trip():
    net = build_monitor_netlist(4, 4, 32)
    text = net.serialize()
    assert Netlist.deserialize(text).serialize() == text
    assert text.startswith("PARAMS 4 4 32 ")


def test_check_rejects_bad_arrays():
    net = Netlist.deserialize(HAND_WRITTEN)
    net.out[2] = 3  # XOR now overwrites the AND output
    with pytest.raises(NetlistError):
        net.check()
