"""Incremental netlist construction with constant folding and structural hashing.

Words are lists of wire ids, least-significant bit first. Every word-level
helper is ripple based, so an n-bit add/compare costs n AND gates.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .netlist import AND, CONST0, CONST1, NOT, XOR, Netlist

Word = list[int]


class CircuitBuilder:
    def __init__(self):
        self._n = 0
        self._gates: list[tuple[int, int, int, int]] = []
        self._hash: dict[tuple[int, int, int], int] = {}
        self._const: dict[int, int] = {}  # wire -> 0/1 for known constants
        self._not_of: dict[int, int] = {}
        self._zero = self._emit(CONST0, -1, -1)
        self._one = self._emit(CONST1, -1, -1)
        self._const[self._zero] = 0
        self._const[self._one] = 1
        self._not_of[self._zero] = self._one
        self._not_of[self._one] = self._zero
        self.garbler_inputs: list[int] = []
        self.evaluator_inputs: list[int] = []
        self._dffs: list[list[int]] = []  # [d, q, init]
        self._dff_by_q: dict[int, int] = {}

    # -- primitives ----------------------------------------------------------

    def _new_wire(self) -> int:
        self._n += 1
        return self._n - 1

    def _emit(self, kind: int, a: int, b: int) -> int:
        y = self._new_wire()
        self._gates.append((kind, a, b, y))
        return y

    @property
    def zero(self) -> int:
        return self._zero

    @property
    def one(self) -> int:
        return self._one

    def const(self, bit: int) -> int:
        return self._one if bit else self._zero

    def input(self, group: str, count: int) -> Word:
        wires = [self._new_wire() for _ in range(count)]
        (self.garbler_inputs if group == "G" else self.evaluator_inputs).extend(wires)
        return wires

    def NOT(self, a: int) -> int:
        if a in self._not_of:
            return self._not_of[a]
        y = self._emit(NOT, a, -1)
        self._not_of[a] = y
        self._not_of[y] = a
        return y

    def XOR(self, a: int, b: int) -> int:
        if a == b:
            return self._zero
        ca, cb = self._const.get(a), self._const.get(b)
        if ca is not None:
            return b if ca == 0 else self.NOT(b)
        if cb is not None:
            return a if cb == 0 else self.NOT(a)
        if self._not_of.get(a) == b:
            return self._one
        key = (XOR, min(a, b), max(a, b))
        if key not in self._hash:
            self._hash[key] = self._emit(XOR, key[1], key[2])
        return self._hash[key]

    def AND(self, a: int, b: int) -> int:
        if a == b:
            return a
        ca, cb = self._const.get(a), self._const.get(b)
        if ca is not None:
            return b if ca else self._zero
        if cb is not None:
            return a if cb else self._zero
        if self._not_of.get(a) == b:
            return self._zero
        key = (AND, min(a, b), max(a, b))
        if key not in self._hash:
            self._hash[key] = self._emit(AND, key[1], key[2])
        return self._hash[key]

    def OR(self, a: int, b: int) -> int:
        return self.NOT(self.AND(self.NOT(a), self.NOT(b)))

    def MUX(self, s: int, a: int, b: int) -> int:
        """s ? a : b"""
        return self.XOR(b, self.AND(s, self.XOR(a, b)))

    def any(self, bits: Sequence[int]) -> int:
        acc = self._zero
        for b in bits:
            acc = self.OR(acc, b)
        return acc

    def all(self, bits: Sequence[int]) -> int:
        acc = self._one
        for b in bits:
            acc = self.AND(acc, b)
        return acc

    # -- state ---------------------------------------------------------------

    def dff(self, init: int = 0) -> int:
        """New flip-flop; returns its q wire. Connect d later with `set_next`."""
        q = self._new_wire()
        self._dff_by_q[q] = len(self._dffs)
        self._dffs.append([-1, q, int(init)])
        return q

    def register(self, width: int, init: int = 0) -> Word:
        return [self.dff((init >> k) & 1) for k in range(width)]

    def set_next(self, q: int | Word, d: int | Word) -> None:
        if isinstance(q, list):
            if len(q) != len(d):
                raise ValueError("register and next-state widths differ")
            for qq, dd in zip(q, d):
                self.set_next(qq, dd)
            return
        entry = self._dffs[self._dff_by_q[q]]
        if entry[0] != -1:
            raise ValueError(f"dff {q} already connected")
        entry[0] = d

    # -- words ---------------------------------------------------------------

    def const_word(self, value: int, width: int) -> Word:
        return [self.const((value >> k) & 1) for k in range(width)]

    def xor_word(self, a: Word, b: Word) -> Word:
        return [self.XOR(x, y) for x, y in zip(a, b)]

    def not_word(self, a: Word) -> Word:
        return [self.NOT(x) for x in a]

    def mux_word(self, s: int, a: Word, b: Word) -> Word:
        return [self.MUX(s, x, y) for x, y in zip(a, b)]

    def and_bit(self, s: int, a: Word) -> Word:
        return [self.AND(s, x) for x in a]

    def add(self, a: Word, b: Word, cin: int | None = None) -> tuple[Word, int]:
        """Ripple adder, one AND per bit. Returns (sum, carry out)."""
        c = self._zero if cin is None else cin
        out = []
        for x, y in zip(a, b):
            xc = self.XOR(x, c)
            out.append(self.XOR(xc, y))
            c = self.XOR(c, self.AND(xc, self.XOR(y, c)))
        return out, c

    def sub(self, a: Word, b: Word) -> Word:
        return self.add(a, self.not_word(b), self._one)[0]

    def neg(self, a: Word) -> Word:
        return self.sub(self.const_word(0, len(a)), a)

    def cond_neg(self, a: Word, c: int) -> Word:
        """c ? -a : a (two's complement)."""
        return self.add(self.xor_word(a, [c] * len(a)), self.const_word(0, len(a)), c)[0]

    def _carry(self, a: Word, b: Word, cin: int) -> int:
        c = cin
        for x, y in zip(a, b):
            c = self.XOR(c, self.AND(self.XOR(x, c), self.XOR(y, c)))
        return c

    def ult(self, a: Word, b: Word) -> int:
        """Unsigned a < b: no carry out of a + ~b + 1."""
        return self.NOT(self._carry(a, self.not_word(b), self._one))

    def lt(self, a: Word, b: Word) -> int:
        """Signed a < b."""
        fa = a[:-1] + [self.NOT(a[-1])]
        fb = b[:-1] + [self.NOT(b[-1])]
        return self.ult(fa, fb)

    def ge(self, a: Word, b: Word) -> int:
        return self.NOT(self.lt(a, b))

    def eq(self, a: Word, b: Word) -> int:
        return self.all([self.NOT(self.XOR(x, y)) for x, y in zip(a, b)])

    def min(self, a: Word, b: Word) -> Word:
        return self.mux_word(self.lt(a, b), a, b)

    def max(self, a: Word, b: Word) -> Word:
        return self.mux_word(self.lt(a, b), b, a)

    def sat_sub(self, a: Word, b: Word) -> Word:
        """a - b clamped to [-(2^(W-1)-1), 2^(W-1)-1]."""
        w = len(a)
        diff = self.sub(a + [a[-1]], b + [b[-1]])
        top, sign = diff[w], diff[w - 1]
        low_zero = self.NOT(self.any(diff[: w - 1]))
        too_big = self.AND(self.NOT(top), sign)
        too_small = self.AND(top, self.OR(self.NOT(sign), low_zero))
        pinf = self.const_word((1 << (w - 1)) - 1, w)
        ninf = self.const_word((1 << (w - 1)) + 1, w)
        return self.mux_word(too_big, pinf, self.mux_word(too_small, ninf, diff[:w]))

    def onehot_decode(self, bits: Word, count: int) -> list[int]:
        """hot[k] = (bits == k) for k in [0, count)."""
        return [self.eq(bits, self.const_word(k, len(bits))) for k in range(count)]

    def select(self, hot: Sequence[int], words: Sequence[Word]) -> Word:
        """XOR of (hot[k] & words[k]); a proper mux when at most one hot bit is set."""
        width = len(words[0])
        acc = self.const_word(0, width)
        for h, w in zip(hot, words):
            acc = self.xor_word(acc, self.and_bit(h, w))
        return acc

    # -- finish --------------------------------------------------------------

    def build(self, outputs: Word, params: dict | None = None, prune: bool = True) -> Netlist:
        for d, q, _ in self._dffs:
            if d == -1:
                raise ValueError(f"dff {q} has no next-state connection")
        gates = self._gates
        dffs = self._dffs
        if prune:
            gates, dffs = self._live(outputs)
        kept_inputs = set(self.garbler_inputs) | set(self.evaluator_inputs)
        # dense renumbering in creation order
        used = sorted(kept_inputs | {q for _, q, _ in dffs} | {g[3] for g in gates})
        remap = {w: i for i, w in enumerate(used)}
        r = lambda w: remap[w] if w >= 0 else -1  # noqa: E731
        arr = np.array([(k, r(a), r(b), r(y)) for k, a, b, y in gates], dtype=np.int64).reshape(-1, 4)
        darr = np.array([(r(d), r(q), i) for d, q, i in dffs], dtype=np.int64).reshape(-1, 3)
        net = Netlist(
            len(used), arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3],
            darr[:, 0], darr[:, 1], darr[:, 2],
            [r(w) for w in self.garbler_inputs], [r(w) for w in self.evaluator_inputs],
            [r(w) for w in outputs], dict(params or {}),
        )
        return net

    def _live(self, outputs: Word):
        producer = {g[3]: g for g in self._gates}
        dff_of = {q: e for e in self._dffs for q in [e[1]]}
        live: set[int] = set()
        stack = list(outputs)
        while stack:
            w = stack.pop()
            if w in live:
                continue
            live.add(w)
            if w in producer:
                k, a, b, _ = producer[w]
                stack.extend(x for x in (a, b) if x >= 0)
            elif w in dff_of:
                stack.append(dff_of[w][0])
        gates = [g for g in self._gates if g[3] in live]
        dffs = [e for e in self._dffs if e[1] in live]
        return gates, dffs
