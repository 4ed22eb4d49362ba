"""
How cost grows with trace length
================================

Circuit size is linear in the trace capacity N; the garbled transcript is
circuit size times cycle count, and the cycle count grows linearly in N
once N + 2 passes the fixed cost of the slowest boolean node (12 cycles).
"""

from privmon.bench import linear_fit, sweep
from privmon.circuit.monitor import build_monitor_netlist, worst_case_cycles

m = 5
print(" N    gates     ANDs   DFFs  cycles")
ns, gates = [4, 8, 16, 32, 64], []
for n in ns:
    s = build_monitor_netlist(n, m).stats()
    gates.append(s["gates"])
    print(f"{n:>2} {s['gates']:>8} {s['and']:>8} {s['dff']:>6} {worst_case_cycles(n, m):>7}")

slope, icpt, r2 = linear_fit(ns, gates)
print(f"\ngates ~ {slope:.0f} * N + {icpt:.0f}   (R^2 = {r2:.5f})")

# a few real sessions; bytes grow roughly with N^2
rows = sweep([4, 8], [3], reps=2, seed=11)
for r in rows:
    print(f"N={r.n} depth={r.depth}: {r.bytes:>10} bytes  {r.total_ms:>7.0f} ms  "
          f"value={r.value} expected={r.expected}")
