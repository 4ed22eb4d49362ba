import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from privmon.bench import linear_fit
from privmon.circuit import monitor
from privmon.circuit.monitor import (MonitorParams, build_monitor_netlist, decode_output,
                                     evaluator_bits, expected_cycles, garbler_bits, node_cycles,
                                     worst_case_cycles)
from privmon.circuit.sim import SimulationError, simulate
from privmon.gen import random_formula, random_trace
from privmon.robustness import Trace, TraceError, dp_taliro, example_trace, pinf
from privmon.stl import (CapacityError, Op, always, conj, encode, eventually, ge, node_count,
                         parse_formula)

from conftest import WORKED_FORMULA, formulas, traces

N, M = 5, 6


def run_circuit(trace, f, n=N, m=M, width=32, fixed=False):
    net = build_monitor_netlist(n, m, width)
    enc = encode(f, m)
    res = simulate(net, garbler_bits(enc, m, width), evaluator_bits(trace, n, width),
                   worst_case_cycles(n, m), fixed=fixed)
    value, done = decode_output(res.outputs, width)
    assert done
    return value, res.cycles_used


def test_worked_example():
    f = parse_formula(WORKED_FORMULA)
    value, used = run_circuit(example_trace(), f, n=4, m=4)
    assert value == 3
    assert used == expected_cycles(encode(f, 4), 4) == 1 + 6 + 4 + 4 + 4


def test_cycle_costs():
    assert node_cycles(Op.GE, 10) == 4
    assert node_cycles(Op.IFF, 10) == 12
    assert node_cycles(Op.UNTIL, 10) == 12
    assert worst_case_cycles(10, 7) == 1 + 7 * 12
    assert worst_case_cycles(32, 3) == 1 + 3 * 34
    assert MonitorParams(4, 4, 32).worst_case_cycles() == worst_case_cycles(4, 4)


@settings(max_examples=150)
@given(traces(max_len=N), formulas(max_leaves=4))
def test_circuit_matches_dp(trace, f):
    assume(node_count(f) <= M)
    value, used = run_circuit(trace, f)
    assert value == dp_taliro(trace, encode(f))
    assert used == expected_cycles(encode(f, M), N)


@settings(max_examples=60)
@given(traces(max_len=N, value_range=30000, max_gap=8000), formulas(max_leaves=3),
       st.sampled_from([16, 24]))
def test_circuit_saturates_like_dp(trace, f, width):
    assume(node_count(f) <= M and trace.times[-1] < pinf(width))
    value, _ = run_circuit(trace, f, width=width)
    assert value == dp_taliro(trace, encode(f), width)


@settings(max_examples=30)
@given(traces(max_len=N), formulas(max_leaves=3))
def test_fixed_mode_same_result(trace, f):
    assume(node_count(f) <= M)
    early, _ = run_circuit(trace, f)
    fixed, used = run_circuit(trace, f, fixed=True)
    assert fixed == early and used == worst_case_cycles(N, M)


def test_short_trace_padding():
    f = parse_formula("G[0,inf) (x >= -1) && F[1,3) x >= 2")
    short = Trace([0, 2], [1, 4])
    assert run_circuit(short, f, n=4, m=M)[0] == dp_taliro(short, encode(f))


def test_depth4_templates_at_n10():
    rng = np.random.default_rng(3)
    for k in range(8):
        f = random_formula(4, rng, template=k % 4)
        tr = random_trace(int(rng.integers(1, 11)), rng)
        assert run_circuit(tr, f, n=10, m=7)[0] == dp_taliro(tr, encode(f))


def test_netlist_independent_of_formula():
    a = build_monitor_netlist(4, 5, 32).serialize()
    monitor._build_cached.cache_clear()
    b = build_monitor_netlist(4, 5, 32).serialize()
    assert a == b
    # inputs are the only place a formula enters
    net = build_monitor_netlist(4, 5, 32)
    bits1 = garbler_bits(encode(always(ge(1), 0, 3), 5), 5)
    bits2 = garbler_bits(encode(eventually(conj(ge(1), ge(2)), 2, 9), 5), 5)
    assert len(bits1) == len(bits2) == len(net.garbler_inputs)


def test_capacity_errors():
    f = always(eventually(conj(ge(1), ge(2)), 0, 1), 0, 2)
    with pytest.raises(CapacityError):
        encode(f, 4)
    with pytest.raises(ValueError):
        garbler_bits(encode(f, 5), 4)
    with pytest.raises(TraceError):
        evaluator_bits(Trace(range(6), [0] * 6), 5)


def test_simulation_budget_error():
    net = build_monitor_netlist(4, 4, 32)
    enc = encode(parse_formula(WORKED_FORMULA), 4)
    with pytest.raises(SimulationError):
        simulate(net, garbler_bits(enc, 4), evaluator_bits(example_trace(), 4), 5)


def test_gate_count_linear_in_n():
    ns = [4, 8, 16]
    gates = [build_monitor_netlist(n, 5, 32).stats()["gates"] for n in ns]
    _, _, r2 = linear_fit(ns, gates)
    assert r2 > 0.99


def test_sizes_at_reference_point():
    st_ = build_monitor_netlist(4, 4, 32).stats()
    assert st_["and"] == 4281 and st_["dff"] == 1172
