"""
Robustness of a timed trace, step by step
==========================================

A formula is flattened into a node list, then a table is filled from the
last sample backwards. The top-left cell is the robustness at time 0.
"""

from privmon.robustness import dp_table, example_trace, rob_recursive, rob_str, verdict
from privmon.stl import encode, parse_formula

phi = parse_formula("(x >= 0) U[4,9) !(x >= 10)")
trace = example_trace()
print("formula:", phi)
print("trace:  ", list(zip(trace.times, trace.values)))

# nodes come out breadth-first, children always after their parent
enc = encode(phi)
for j, node in enumerate(enc.nodes):
    print(f"  node {j}: {node.op.name:<6} children=({node.k1}, {node.k2}) "
          f"window=[{node.lower},{node.upper}) c={node.threshold}")

table = dp_table(trace, enc)
print("\nrow = sample, column = node")
for i, row in enumerate(table.R):
    print(f"  t={trace.times[i]:>2}  " + "  ".join(f"{rob_str(int(v)):>6}" for v in row))

value = table.value
print("\nrobustness:", value, verdict(value))

# the direct recursive definition agrees, just slower on long traces
assert rob_recursive(trace, phi) == value

# padding the encoding with TRUE nodes changes nothing
assert dp_table(trace, encode(phi, 9)).value == value
