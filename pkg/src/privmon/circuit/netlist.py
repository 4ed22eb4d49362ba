"""Sequential gate-level netlists and their text format."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

AND, XOR, NOT, CONST0, CONST1 = 0, 1, 2, 3, 4
KIND_NAMES = {AND: "AND", XOR: "XOR", NOT: "NOT", CONST0: "CONST0", CONST1: "CONST1"}
_KIND_BY_NAME = {v: k for k, v in KIND_NAMES.items()}


class NetlistError(ValueError):
    pass


@dataclass
class Netlist:
    """Gates are stored column-wise in an order that is topological for one
    clock cycle. Single-input gates keep ``in1 == -1``; constants keep both
    inputs at -1. DFF ``q`` wires act as inputs to the combinational part;
    their ``d`` wires are latched at the end of every cycle."""

    n_wires: int
    kind: np.ndarray
    in0: np.ndarray
    in1: np.ndarray
    out: np.ndarray
    dff_d: np.ndarray
    dff_q: np.ndarray
    dff_init: np.ndarray
    garbler_inputs: np.ndarray
    evaluator_inputs: np.ndarray
    outputs: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("kind", "in0", "in1", "out", "dff_d", "dff_q", "garbler_inputs",
                     "evaluator_inputs", "outputs"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.int64))
        self.dff_init = np.ascontiguousarray(self.dff_init, dtype=np.uint8)

    @classmethod
    def empty(cls) -> "Netlist":
        z = np.zeros(0, dtype=np.int64)
        return cls(0, z, z, z, z, z, z, z, z, z, z)

    @property
    def n_gates(self) -> int:
        return len(self.kind)

    @property
    def n_and(self) -> int:
        return int(np.count_nonzero(self.kind == AND))

    @property
    def and_gate_ids(self) -> np.ndarray:
        return np.flatnonzero(self.kind == AND)

    def stats(self) -> dict:
        counts = np.bincount(self.kind, minlength=5) if self.n_gates else np.zeros(5, dtype=int)
        return {
            "gates": int(self.n_gates + len(self.dff_d)),
            "and": int(counts[AND]),
            "xor": int(counts[XOR]),
            "not": int(counts[NOT]),
            "const": int(counts[CONST0] + counts[CONST1]),
            "dff": int(len(self.dff_d)),
            "wires": int(self.n_wires),
        }

    # -- validation ----------------------------------------------------------

    def check(self) -> None:
        """Every wire has exactly one producer, every read has a producer, and
        the gate list is in dependency order."""
        producer = np.full(self.n_wires, -1, dtype=np.int64)

        def claim(wires, what):
            for w in wires:
                w = int(w)
                if not 0 <= w < self.n_wires:
                    raise NetlistError(f"{what}: wire {w} out of range")
                if producer[w] != -1:
                    raise NetlistError(f"wire {w} driven twice")
                producer[w] = 1

        claim(self.garbler_inputs, "garbler input")
        claim(self.evaluator_inputs, "evaluator input")
        claim(self.dff_q, "dff q")
        ready = producer.copy()
        for g in range(self.n_gates):
            k = int(self.kind[g])
            for a, used in ((self.in0[g], k in (AND, XOR, NOT)), (self.in1[g], k in (AND, XOR))):
                if used and (not 0 <= a < self.n_wires or ready[a] == -1):
                    raise NetlistError(f"gate {g}: input wire {a} not driven before use")
            y = int(self.out[g])
            if not 0 <= y < self.n_wires or ready[y] != -1:
                raise NetlistError(f"gate {g}: output wire {y} invalid or driven twice")
            ready[y] = 1
        for w in list(self.dff_d) + list(self.outputs):
            if not 0 <= w < self.n_wires or ready[w] == -1:
                raise NetlistError(f"wire {w} is read but never driven")

    # -- text format ---------------------------------------------------------

    def serialize(self) -> str:
        buf = io.StringIO()
        p = self.params
        if p:
            buf.write(f"PARAMS {p['N']} {p['M']} {p['W']} {p['cycles']}\n")
        buf.write("IN G " + " ".join(map(str, self.garbler_inputs)) + "\n")
        buf.write("IN E " + " ".join(map(str, self.evaluator_inputs)) + "\n")
        for d, q, init in zip(self.dff_d, self.dff_q, self.dff_init):
            buf.write(f"DFF {d} {q} {init}\n")
        for k, a, b, y in zip(self.kind.tolist(), self.in0.tolist(), self.in1.tolist(),
                              self.out.tolist()):
            if k in (AND, XOR):
                buf.write(f"{KIND_NAMES[k]} {a} {b} {y}\n")
            elif k == NOT:
                buf.write(f"NOT {a} {y}\n")
            else:
                buf.write(f"{KIND_NAMES[k]} {y}\n")
        buf.write("OUT " + " ".join(map(str, self.outputs)) + "\n")
        return buf.getvalue()

    @classmethod
    def deserialize(cls, text: str) -> "Netlist":
        params: dict = {}
        g_in: Optional[list[int]] = None
        e_in: Optional[list[int]] = None
        outs: Optional[list[int]] = None
        gates: list[tuple[int, int, int, int]] = []
        dffs: list[tuple[int, int, int]] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, *rest = line.split()
            try:
                args = [int(a) for a in rest[1:]] if head == "IN" else [int(a) for a in rest]
            except ValueError:
                raise NetlistError(f"line {lineno}: non-integer field in {raw!r}") from None

            def want(n):
                if len(args) != n:
                    raise NetlistError(f"line {lineno}: {head} takes {n} fields, got {len(args)}")

            if head == "PARAMS":
                want(4)
                params = dict(zip(("N", "M", "W", "cycles"), args))
            elif head == "IN":
                if not rest or rest[0] not in ("G", "E"):
                    raise NetlistError(f"line {lineno}: IN needs group G or E")
                if rest[0] == "G":
                    g_in = args
                else:
                    e_in = args
            elif head == "OUT":
                outs = args
            elif head == "DFF":
                want(3)
                if args[2] not in (0, 1):
                    raise NetlistError(f"line {lineno}: DFF init must be 0 or 1")
                dffs.append(tuple(args))
            elif head in ("AND", "XOR"):
                want(3)
                gates.append((_KIND_BY_NAME[head], args[0], args[1], args[2]))
            elif head == "NOT":
                want(2)
                gates.append((NOT, args[0], -1, args[1]))
            elif head in ("CONST0", "CONST1"):
                want(1)
                gates.append((_KIND_BY_NAME[head], -1, -1, args[0]))
            else:
                raise NetlistError(f"line {lineno}: unknown directive {head!r}")
        if g_in is None or e_in is None or outs is None:
            raise NetlistError("missing IN G, IN E or OUT line")

        wires = set(g_in) | set(e_in) | {q for _, q, _ in dffs} | {g[3] for g in gates}
        n_wires = max(wires | set(outs) | {d for d, _, _ in dffs}, default=-1) + 1
        gates = _toposort(gates, set(g_in) | set(e_in) | {q for _, q, _ in dffs})
        arr = np.array(gates, dtype=np.int64).reshape(-1, 4)
        darr = np.array(dffs, dtype=np.int64).reshape(-1, 3)
        net = cls(n_wires, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], darr[:, 0], darr[:, 1],
                  darr[:, 2], g_in, e_in, outs, params)
        net.check()
        return net


def _toposort(gates, sources: set[int]):
    """Kahn ordering of the combinational gates; a leftover means a loop."""
    producer = {}
    for idx, (_, _, _, y) in enumerate(gates):
        if y in producer or y in sources:
            raise NetlistError(f"wire {y} driven twice")
        producer[y] = idx
    deps: list[list[int]] = []
    users: dict[int, list[int]] = {}
    for idx, (k, a, b, _) in enumerate(gates):
        ins = [a, b] if k in (AND, XOR) else [a] if k == NOT else []
        pending = []
        for w in ins:
            if w in producer:
                pending.append(producer[w])
            elif w not in sources:
                raise NetlistError(f"gate reads undriven wire {w}")
        deps.append(pending)
        for p in pending:
            users.setdefault(p, []).append(idx)
    if all(p < idx for idx, d in enumerate(deps) for p in d):
        return list(gates)
    indeg = [len(d) for d in deps]
    order = [i for i, d in enumerate(indeg) if d == 0]
    head = 0
    while head < len(order):
        g = order[head]
        head += 1
        for u in users.get(g, ()):
            indeg[u] -= 1
            if indeg[u] == 0:
                order.append(u)
    if len(order) != len(gates):
        raise NetlistError("combinational cycle detected")
    return [gates[i] for i in order]
