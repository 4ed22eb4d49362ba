"""The robustness monitor as one formula-agnostic sequential circuit.

Layout
------
The circuit keeps the whole DP table in flip-flops: ``M`` columns (one per
encoded node) by ``N`` lanes (one per trace sample), each a ``W``-bit word.
Column 0 is virtual; reading it yields +inf, or the atom value
``sat(x_i - v)`` while an atom node loads its second operand.

A controller walks the columns from ``M`` down to 1, so children are always
finished before their parent. All N lanes work on the same column at once.

* Boolean and atom nodes take four cycles: two loads, then two combine steps.
  The second operand may be negated on its way into the accumulator.
* IFF runs that sequence three times. The first pass computes ``max(b, -a)``
  into its own column, the second computes ``max(a, -b)`` into the first
  child's column (dead after this node), and the third takes the min of both.
* Temporal nodes load both operands and then shift them down the lanes for
  N cycles. At step ``s`` lane ``i`` sees row ``i+s``; it keeps a running min
  of the left operand and folds ``min(right, running)`` into its accumulator
  whenever ``t[i+s] - t[i]`` lies in the interval.

Unused trace slots carry the +inf timestamp and are never inside a window.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..robustness import Trace, pad_trace, pinf
from ..stl import FormulaEncoding, Op, encoding_bit_layout, encoding_to_bits
from .builder import CircuitBuilder
from .netlist import Netlist

IFF_CYCLES = 12


@dataclass(frozen=True)
class MonitorParams:
    n: int
    m: int
    width: int = 32

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("N and M must be at least 1")
        if self.width < 4:
            raise ValueError("word width must be at least 4 bits")
        if self.worst_case_cycles() >= 1 << 32:
            raise ValueError("cycle count does not fit the 32-bit cycle index")

    def worst_case_cycles(self) -> int:
        return worst_case_cycles(self.n, self.m)

    @property
    def garbler_bits(self) -> int:
        return self.m * sum(w for _, w in encoding_bit_layout(self.m, self.width))

    @property
    def evaluator_bits(self) -> int:
        return self.n * 2 * self.width


def worst_case_cycles(n: int, m: int, width: int | None = None) -> int:
    """Cycles after which the done flag is guaranteed high, for any input bits."""
    return 1 + m * max(IFF_CYCLES, n + 2)


def node_cycles(op: Op, n: int) -> int:
    if op in (Op.UNTIL, Op.EVENTUALLY, Op.ALWAYS):
        return n + 2
    if op is Op.IFF:
        return IFF_CYCLES
    return 4


def expected_cycles(enc: FormulaEncoding, n: int) -> int:
    """Cycles the controller needs for this encoding before done reads high."""
    return 1 + sum(node_cycles(node.op, n) for node in enc.nodes)


def build_monitor_netlist(n: int, m: int, width: int = 32) -> Netlist:
    return _build_cached(n, m, width)


@lru_cache(maxsize=16)
def _build_cached(n: int, m: int, width: int) -> Netlist:
    params = MonitorParams(n, m, width)
    b = CircuitBuilder()
    W = width
    P = pinf(W)

    # formula fields, column c = node c - 1
    fields = []
    for _ in range(m):
        f = {}
        for name, nbits in encoding_bit_layout(m, W):
            f[name] = b.input("G", nbits)
        fields.append(f)
    times, values = [], []
    for _ in range(n):
        times.append(b.input("E", W))
        values.append(b.input("E", W))

    # controller registers
    L1, L2, C1, C2, SW, DONE = (b.dff(1), b.dff(), b.dff(), b.dff(), b.dff(), b.dff())
    p1, p2 = b.dff(), b.dff()
    jhot = [b.dff(1 if c == m else 0) for c in range(1, m + 1)]  # jhot[c-1] <=> j == c
    step = [b.dff(1 if s == 0 else 0) for s in range(n)]

    def pick(name):
        return b.select(jhot, [f[name] for f in fields])

    op = pick("op")
    k1, k2 = pick("k1"), pick("k2")
    lower, upper, thr = pick("lower"), pick("upper"), pick("threshold")

    is_op = {o: b.eq(op, b.const_word(int(o), 4)) for o in Op if o is not Op.TRUE}
    AND_, OR_, IMP, IFF = is_op[Op.AND], is_op[Op.OR], is_op[Op.IMPLIES], is_op[Op.IFF]
    U, F, G, NOT_ = is_op[Op.UNTIL], is_op[Op.EVENTUALLY], is_op[Op.ALWAYS], is_op[Op.NOT]
    GE, LE = is_op[Op.GE], is_op[Op.LE]
    binop = b.any([AND_, OR_, IMP])
    temporal = b.any([U, F, G])
    atom = b.OR(GE, LE)
    p0 = b.AND(b.NOT(p1), b.NOT(p2))
    iff_pre = b.AND(IFF, b.NOT(p2))  # IFF passes that produce max(x, -y)

    sel_k2 = b.OR(b.AND(L1, b.any([binop, b.AND(IFF, p0), U])), b.AND(L2, b.AND(IFF, p1)))
    sel_k1 = b.OR(
        b.AND(L1, b.any([b.AND(IFF, p1), F, G])),
        b.AND(L2, b.any([binop, b.AND(IFF, b.NOT(p1)), U, NOT_])),
    )
    sel_j = b.AND(L1, b.AND(IFF, p2))
    k1hot = b.onehot_decode(k1, m + 1)
    k2hot = b.onehot_decode(k2, m + 1)
    rd = [
        b.XOR(b.XOR(b.AND(sel_k1, k1hot[c]), b.AND(sel_k2, k2hot[c])), b.AND(sel_j, jhot[c - 1]))
        for c in range(1, m + 1)
    ]
    rd0 = b.any([b.NOT(b.any([sel_k1, sel_k2, sel_j])), b.AND(sel_k1, k1hot[0]), b.AND(sel_k2, k2hot[0])])
    atom_load = b.AND(rd0, b.AND(L2, atom))
    pinf_load = b.AND(rd0, b.NOT(b.AND(L2, atom)))

    negc = b.AND(C1, b.any([NOT_, LE, IMP, iff_pre]))
    maxmode = b.any([OR_, IMP, iff_pre, U, F])
    minmode = b.NOT(maxmode)
    sweep = SW
    nonsweep = b.NOT(SW)
    acc_init = b.OR(L1, L2)
    init_word = [b.one] + [minmode] * (W - 2) + [maxmode]  # PINF if min else NINF

    last = b.AND(SW, step[n - 1])
    wen = b.OR(C2, last)
    iff_mid = b.AND(IFF, p1)
    we = [b.AND(wen, b.MUX(iff_mid, k1hot[c], jhot[c - 1])) for c in range(1, m + 1)]

    pinf_w = b.const_word(P, W)
    store = [[b.register(W) for _ in range(n)] for _ in range(m)]  # store[c-1][lane]
    SA = [b.register(W) for _ in range(n)]
    SB = [b.register(W) for _ in range(n)]
    ST = [b.register(W) for _ in range(n)]
    V = [b.dff() for _ in range(n)]
    ACC = [b.register(W) for _ in range(n)]
    RM = [b.register(W) for _ in range(n)]
    zero_w = b.const_word(0, W)

    for i in range(n):
        t_i, x_i = times[i], values[i]
        valid_i = b.NOT(b.eq(t_i, pinf_w))
        atom_val = b.sat_sub(x_i, thr)
        col = b.select(rd, [store[c][i] for c in range(m)])
        col = b.xor_word(col, b.and_bit(atom_load, atom_val))
        col = b.xor_word(col, b.and_bit(pinf_load, pinf_w))

        nxt = (lambda regs: regs[i + 1]) if i + 1 < n else (lambda regs: zero_w)
        b.set_next(SA[i], b.mux_word(nonsweep, col, nxt(SA)))
        b.set_next(SB[i], b.mux_word(nonsweep, b.cond_neg(SA[i], negc), nxt(SB)))
        b.set_next(ST[i], b.mux_word(nonsweep, t_i, nxt(ST)))
        b.set_next(V[i], b.MUX(nonsweep, valid_i, V[i + 1] if i + 1 < n else b.zero))

        d = b.sub(ST[i], t_i)
        inwin = b.all([V[i], b.ge(d, lower), b.lt(d, upper)])
        cand = b.min(SB[i], RM[i])
        take = b.AND(b.OR(nonsweep, inwin), b.XOR(b.lt(ACC[i], cand), minmode))
        acc_next = b.mux_word(acc_init, init_word, b.mux_word(take, cand, ACC[i]))
        b.set_next(ACC[i], acc_next)

        lower_rm = b.AND(b.AND(sweep, V[i]), b.lt(SA[i], RM[i]))
        b.set_next(RM[i], b.mux_word(nonsweep, pinf_w, b.mux_word(lower_rm, SA[i], RM[i])))

        for c in range(m):
            b.set_next(store[c][i], b.mux_word(we[c], acc_next, store[c][i]))

    # controller next state
    iff_more = iff_pre
    node_done = b.OR(b.AND(C2, b.NOT(iff_more)), last)
    at_root = jhot[0]
    b.set_next(L1, b.OR(b.AND(C2, iff_more), b.AND(node_done, b.NOT(at_root))))
    b.set_next(L2, L1)
    b.set_next(C1, b.AND(L2, b.NOT(temporal)))
    b.set_next(C2, C1)
    b.set_next(SW, b.OR(b.AND(L2, temporal), b.AND(SW, b.NOT(step[n - 1]))))
    b.set_next(DONE, b.OR(DONE, b.AND(node_done, at_root)))
    b.set_next(p1, b.MUX(C2, b.AND(IFF, p0), p1))
    b.set_next(p2, b.MUX(C2, b.AND(IFF, p1), p2))
    for c in range(m):
        above = jhot[c + 1] if c + 1 < m else b.zero
        b.set_next(jhot[c], b.MUX(node_done, above, jhot[c]))
    for s in range(n):
        prev = step[s - 1] if s > 0 else b.zero
        b.set_next(step[s], b.MUX(SW, prev, b.const(s == 0)))

    outputs = store[0][0] + [DONE]
    return b.build(outputs, {"N": n, "M": m, "W": W, "cycles": params.worst_case_cycles()})


# -- input packing ------------------------------------------------------------

def garbler_bits(enc: FormulaEncoding, m: int, width: int = 32) -> np.ndarray:
    if len(enc) != m:
        raise ValueError(f"encoding has {len(enc)} nodes, circuit expects {m}")
    return np.array(encoding_to_bits(enc, width), dtype=np.uint8)


def evaluator_bits(trace: Trace, n: int, width: int = 32) -> np.ndarray:
    times, values = pad_trace(trace, n, width)
    mask = (1 << width) - 1
    out = np.zeros(n * 2 * width, dtype=np.uint8)
    pos = 0
    for t, x in zip(times, values):
        for word in (t & mask, x & mask):
            out[pos : pos + width] = [(word >> k) & 1 for k in range(width)]
            pos += width
    return out


def decode_output(bits, width: int = 32) -> tuple[int, bool]:
    """(robustness, done) from the output bit vector."""
    word = sum(int(bits[k]) << k for k in range(width))
    if word >> (width - 1):
        word -= 1 << width
    return word, bool(bits[width])
