"""Cleartext robustness: the recursive definition and the DP-TALIRO table.

Robustness values are plain ints confined to ``[ninf(W), pinf(W)]`` where the
two end points stand for -inf and +inf. Every operation saturates, so the
raw two's-complement minimum never shows up and negation stays an involution.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np

from .stl import NONE, Formula, FormulaEncoding, Interval, Op

DEFAULT_WIDTH = 32


def pinf(width: int = DEFAULT_WIDTH) -> int:
    return (1 << (width - 1)) - 1


def ninf(width: int = DEFAULT_WIDTH) -> int:
    return -pinf(width)


def saturate(v: int, width: int = DEFAULT_WIDTH) -> int:
    p = pinf(width)
    return max(-p, min(p, v))


def rob_str(v: int, width: int = DEFAULT_WIDTH) -> str:
    if v == pinf(width):
        return "PINF"
    if v == ninf(width):
        return "NINF"
    return str(v)


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    """A 1-D timed state sequence; timestamps start at 0 and strictly increase."""

    times: tuple[int, ...]
    values: tuple[int, ...]

    def __init__(self, times, values):
        object.__setattr__(self, "times", tuple(int(t) for t in times))
        object.__setattr__(self, "values", tuple(int(x) for x in values))
        if len(self.times) != len(self.values):
            raise TraceError("times and values differ in length")
        if not self.times:
            raise TraceError("trace is empty")
        if self.times[0] != 0:
            raise TraceError(f"first timestamp must be 0, got {self.times[0]}")
        for a, b in zip(self.times, self.times[1:]):
            if b <= a:
                raise TraceError(f"timestamps not strictly increasing at {a} -> {b}")

    def __len__(self) -> int:
        return len(self.times)

    def check_width(self, width: int) -> None:
        """Timestamps must stay below the +inf code (it marks padding in the
        circuit) and values must lie in the saturated range."""
        p = pinf(width)
        if self.times[-1] >= p:
            raise TraceError(f"timestamp {self.times[-1]} does not fit width {width}")
        for x in self.values:
            if not -p <= x <= p:
                raise TraceError(f"value {x} does not fit width {width}")

    @classmethod
    def from_csv(cls, source: Union[str, Path, io.TextIOBase]) -> "Trace":
        if isinstance(source, (str, Path)):
            with open(source, newline="") as fh:
                return cls.from_csv(fh)
        reader = csv.reader(source)
        header = [h.strip() for h in next(reader, [])]
        if header != ["t", "x"]:
            raise TraceError(f"expected header 't,x', got {','.join(header)!r}")
        times, values = [], []
        for lineno, row in enumerate(reader, 2):
            if not row or not "".join(row).strip():
                continue
            try:
                t, x = (int(c) for c in row)
            except ValueError:
                raise TraceError(f"line {lineno}: expected two integers, got {row!r}") from None
            times.append(t)
            values.append(x)
        return cls(times, values)

    def to_csv(self) -> str:
        lines = ["t,x"] + [f"{t},{x}" for t, x in zip(self.times, self.values)]
        return "\n".join(lines) + "\n"


# -- recursive oracle --------------------------------------------------------

def _window(trace: Trace, i: int, iv: Interval) -> list[int]:
    t0 = trace.times[i]
    return [j for j in range(len(trace)) if iv.contains(trace.times[j] - t0)]


def rob_recursive(trace: Trace, f: Formula, i: int = 0, width: int = DEFAULT_WIDTH) -> int:
    """Robustness of `trace` against `f` at sample `i` (0-based), straight from
    the quantitative semantics. Used as the reference for everything else."""
    if not 0 <= i < len(trace):
        raise IndexError(f"sample index {i} out of range for trace of length {len(trace)}")
    P, N = pinf(width), ninf(width)

    @lru_cache(maxsize=None)
    def rho(g: Formula, k: int) -> int:
        op = g.op
        if op is Op.TRUE:
            return P
        if op is Op.GE:
            return saturate(trace.values[k] - g.threshold, width)
        if op is Op.LE:
            return saturate(g.threshold - trace.values[k], width)
        if op is Op.NOT:
            return -rho(g.children[0], k)
        a = g.children[0]
        if op is Op.EVENTUALLY:
            return max((rho(a, j) for j in _window(trace, k, g.interval)), default=N)
        if op is Op.ALWAYS:
            return min((rho(a, j) for j in _window(trace, k, g.interval)), default=P)
        b = g.children[1]
        if op is Op.AND:
            return min(rho(a, k), rho(b, k))
        if op is Op.OR:
            return max(rho(a, k), rho(b, k))
        if op is Op.IMPLIES:
            return max(-rho(a, k), rho(b, k))
        if op is Op.IFF:
            ra, rb = rho(a, k), rho(b, k)
            return min(max(-ra, rb), max(ra, -rb))
        if op is Op.UNTIL:
            best = N
            for j in _window(trace, k, g.interval):
                prefix = min((rho(a, kk) for kk in range(k, j)), default=P)
                best = max(best, min(rho(b, j), prefix))
            return best
        raise ValueError(f"unknown operator {op!r}")

    return rho(f, i)


def rob_vector(trace: Trace, f: Formula, width: int = DEFAULT_WIDTH) -> list[int]:
    return [rob_recursive(trace, f, i, width) for i in range(len(trace))]


# -- DP-TALIRO ---------------------------------------------------------------

def bounds(iv: Interval, i: int, times, n: int, b_l: int, b_u: int) -> tuple[int, int]:
    """Index window of samples whose time lies in ``times[i] + iv``.

    Indices are 1-based like the rest of the DP: ``times[1..n]`` (``times[0]``
    is ignored). Pass the previous row's result, or ``(n + 1, 0)`` standing for
    the initial ``(+inf, -inf)``. Both scans start at the previous bounds and
    move downward, so a whole column costs O(n). An empty window comes back
    with ``b_l > b_u``.
    """
    if iv.upper is None:
        b_u = n
    else:
        start = n if b_u == 0 else b_u
        for j in range(start, i - 1, -1):
            if times[j] < times[i] + iv.upper:
                b_u = j
                break
    start = n if b_l == n + 1 else b_l
    for j in range(start, i - 1, -1):
        if times[j] >= times[i] + iv.lower:
            b_l = j
        else:
            break
    return b_l, b_u


@dataclass
class RobTable:
    """Filled DP table. ``R`` is (n, m), 0-based: ``R[i, j]`` is the robustness
    of encoded node j at sample i. ``b_l``/``b_u`` are the last window bounds
    per column (1-based, with n+1 / 0 meaning +inf / -inf)."""

    R: np.ndarray
    b_l: list[int]
    b_u: list[int]

    @property
    def value(self) -> int:
        return int(self.R[0, 0])


def dp_table(trace: Trace, enc: FormulaEncoding, width: int = DEFAULT_WIDTH) -> RobTable:
    n, m = len(trace), len(enc)
    if m == 0:
        raise ValueError("empty encoding")
    for j, node in enumerate(enc.nodes):
        for k in (node.k1, node.k2):
            if k != NONE and not j < k < m:
                raise ValueError(f"node {j}: child {k} out of range")
    P, NI = pinf(width), ninf(width)
    t = (None,) + trace.times
    x = (None,) + trace.values
    # 1-based storage with one spare row so R[n+1][*] exists.
    R = [[0] * (m + 1) for _ in range(n + 2)]
    b_l = [n + 1] * (m + 1)
    b_u = [0] * (m + 1)

    for i in range(n, 0, -1):
        for j in range(m, 0, -1):
            node = enc.nodes[j - 1]
            op = node.op
            k1, k2 = node.k1 + 1, node.k2 + 1
            if op is Op.TRUE:
                r = P
            elif op is Op.GE:
                r = saturate(x[i] - node.threshold, width)
            elif op is Op.LE:
                r = saturate(node.threshold - x[i], width)
            elif op is Op.NOT:
                r = -R[i][k1]
            elif op is Op.AND:
                r = min(R[i][k1], R[i][k2])
            elif op is Op.OR:
                r = max(R[i][k1], R[i][k2])
            elif op is Op.IMPLIES:
                r = max(-R[i][k1], R[i][k2])
            elif op is Op.IFF:
                r = min(max(-R[i][k1], R[i][k2]), max(R[i][k1], -R[i][k2]))
            else:
                iv = Interval(node.lower, node.upper)
                if op is Op.UNTIL:
                    phi, psi, combine, empty = k1, k2, max, NI
                elif op is Op.EVENTUALLY:
                    phi, psi, combine, empty = None, k1, max, NI
                elif op is Op.ALWAYS:
                    phi, psi, combine, empty = None, k1, min, P
                else:
                    raise ValueError(f"unknown opcode {op}")

                def left(row: int) -> int:
                    return P if phi is None else R[row][phi]

                if i == n and iv.lower == 0:
                    r = R[i][psi]
                elif i == n:
                    r = empty
                elif iv.lower == 0 and iv.upper is None:
                    r = combine(R[i][psi], min(left(i), R[i + 1][j]))
                else:
                    b_l[j], b_u[j] = bounds(iv, i, t, n, b_l[j], b_u[j])
                    # empty prefix (b_l <= i) gives +inf
                    tmp_min = min((left(ip) for ip in range(i, b_l[j])), default=P)
                    r = empty
                    for ip in range(b_l[j], b_u[j] + 1):
                        r = combine(r, min(R[ip][psi], tmp_min))
                        tmp_min = min(tmp_min, left(ip))
                    if iv.upper is None:
                        r = combine(r, min(left(i), R[i + 1][j]))
            R[i][j] = r

    table = np.array([row[1:] for row in R[1 : n + 1]], dtype=np.int64)
    return RobTable(table, b_l[1:], b_u[1:])


def dp_taliro(trace: Trace, enc: FormulaEncoding, width: int = DEFAULT_WIDTH) -> int:
    """Robustness at sample 0 via the dynamic program (value of the top-left cell)."""
    return dp_table(trace, enc, width).value


def verdict(v: int) -> str:
    if v > 0:
        return "SAT"
    if v < 0:
        return "UNSAT"
    return "INCONCLUSIVE"


def pad_trace(trace: Trace, n: int, width: int = DEFAULT_WIDTH) -> tuple[list[int], list[int]]:
    """Raw (times, values) of length `n` for the circuit. Empty slots carry the
    +inf timestamp code, which the circuit treats as "past the end"."""
    if len(trace) > n:
        raise TraceError(f"trace has {len(trace)} samples, capacity is {n}")
    trace.check_width(width)
    fill = n - len(trace)
    return list(trace.times) + [pinf(width)] * fill, list(trace.values) + [0] * fill


def example_trace() -> Trace:
    """The four-sample trace used as the worked example throughout the docs."""
    return Trace([0, 5, 7, 10], [3, 11, -2, -3])
