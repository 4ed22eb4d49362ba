"""
Two parties, one verdict
========================

The garbler holds the formula, the evaluator holds the trace. Both run over a
local TCP socket; neither sees the other's input, and both learn the result.
"""

import numpy as np

from privmon.circuit.monitor import build_monitor_netlist, worst_case_cycles
from privmon.gen import random_formula, random_trace
from privmon.protocol import SessionParams, expected_transcript_bytes, run_loopback
from privmon.robustness import dp_taliro
from privmon.stl import encode

n, m = 8, 5  # trace capacity and formula capacity
rng = np.random.default_rng(3)
phi = random_formula(3, rng)
trace = random_trace(6, rng)
print("formula:", phi)

net = build_monitor_netlist(n, m)
print("circuit:", net.stats())
print("cycles per session:", worst_case_cycles(n, m))

params = SessionParams(n, m, width=32, kappa=128)
res = run_loopback(encode(phi, m), trace, params)
print("garbler says  ", res.garbler_value)
print("evaluator says", res.evaluator_value)
print("in the clear  ", dp_taliro(trace, encode(phi)))

# every byte on the wire is accounted for in advance
exp = expected_transcript_bytes(net, params)
sent = res.garbler_stats.bytes_sent + res.garbler_stats.bytes_received
print(f"bytes: {sent} measured, {exp['tables'] + exp['overhead']} predicted "
      f"({exp['tables']} of them garbled tables)")
print("evaluator never held more than", res.evaluator_stats.peak_buffer, "table bytes at once")
print("wall time:", round(res.garbler_stats.total_ms), "ms")

# a short cycle budget is refused before any garbling
low = SessionParams(n, m, cycles=worst_case_cycles(n, m) - 1)
bad = run_loopback(encode(phi, m), trace, low)
print("\nwith too few cycles:", bad.evaluator_error)
