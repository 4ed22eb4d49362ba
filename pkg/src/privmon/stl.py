"""STL front end: formula AST, text parser, and the fixed-size flat encoding.

The encoding is what the Verifier feeds into the monitor circuit. It is a
breadth-first array of nodes where every child index is larger than its
parent's, so walking the array backwards visits children before parents.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional, Sequence


class Op(IntEnum):
    """Node kinds; the integer value is the 4-bit opcode used in encodings."""

    TRUE = 0
    GE = 1
    LE = 2
    NOT = 3
    AND = 4
    OR = 5
    IMPLIES = 6
    IFF = 7
    UNTIL = 8
    EVENTUALLY = 9
    ALWAYS = 10


ARITY = {
    Op.TRUE: 0, Op.GE: 0, Op.LE: 0,
    Op.NOT: 1, Op.EVENTUALLY: 1, Op.ALWAYS: 1,
    Op.AND: 2, Op.OR: 2, Op.IMPLIES: 2, Op.IFF: 2, Op.UNTIL: 2,
}
TEMPORAL = frozenset({Op.UNTIL, Op.EVENTUALLY, Op.ALWAYS})
ATOMS = frozenset({Op.GE, Op.LE})


class FormulaError(ValueError):
    """Raised for malformed formulas or encodings."""


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


class CapacityError(FormulaError):
    """Formula does not fit the requested node capacity."""


@dataclass(frozen=True)
class Interval:
    """Half-open time interval ``[lower, upper)``; ``upper=None`` is +inf."""

    lower: int
    upper: Optional[int] = None

    def __post_init__(self):
        if self.lower < 0:
            raise FormulaError(f"negative interval bound {self.lower}")
        if self.upper is not None and self.upper <= self.lower:
            raise FormulaError(f"empty interval [{self.lower},{self.upper})")

    @property
    def unbounded(self) -> bool:
        return self.upper is None

    def contains(self, d: int) -> bool:
        return d >= self.lower and (self.upper is None or d < self.upper)

    def __str__(self) -> str:
        return f"[{self.lower},{'inf' if self.upper is None else self.upper})"


@dataclass(frozen=True)
class Formula:
    op: Op
    children: tuple["Formula", ...] = ()
    threshold: int = 0
    interval: Optional[Interval] = None

    def __post_init__(self):
        if len(self.children) != ARITY[self.op]:
            raise FormulaError(f"{self.op.name} expects {ARITY[self.op]} children, got {len(self.children)}")
        if (self.op in TEMPORAL) != (self.interval is not None):
            raise FormulaError(f"{self.op.name}: interval must be given exactly for temporal operators")

    def __str__(self) -> str:
        return format_formula(self)


# -- constructors ------------------------------------------------------------

TRUE = Formula(Op.TRUE)


def ge(c: int) -> Formula:
    return Formula(Op.GE, threshold=c)


def le(c: int) -> Formula:
    return Formula(Op.LE, threshold=c)


def neg(f: Formula) -> Formula:
    return Formula(Op.NOT, (f,))


def conj(a: Formula, b: Formula) -> Formula:
    return Formula(Op.AND, (a, b))


def disj(a: Formula, b: Formula) -> Formula:
    return Formula(Op.OR, (a, b))


def implies(a: Formula, b: Formula) -> Formula:
    return Formula(Op.IMPLIES, (a, b))


def iff(a: Formula, b: Formula) -> Formula:
    return Formula(Op.IFF, (a, b))


def until(a: Formula, b: Formula, lower: int = 0, upper: Optional[int] = None) -> Formula:
    return Formula(Op.UNTIL, (a, b), interval=Interval(lower, upper))


def eventually(f: Formula, lower: int = 0, upper: Optional[int] = None) -> Formula:
    return Formula(Op.EVENTUALLY, (f,), interval=Interval(lower, upper))


def always(f: Formula, lower: int = 0, upper: Optional[int] = None) -> Formula:
    return Formula(Op.ALWAYS, (f,), interval=Interval(lower, upper))


def node_count(f: Formula) -> int:
    return 1 + sum(node_count(c) for c in f.children)


def depth(f: Formula) -> int:
    return 1 + max((depth(c) for c in f.children), default=0)


def iter_nodes(f: Formula) -> Iterator[Formula]:
    yield f
    for c in f.children:
        yield from iter_nodes(c)


# -- printing ----------------------------------------------------------------

_BINARY_TOKENS = {Op.AND: "&&", Op.OR: "||", Op.IMPLIES: "->", Op.IFF: "<->"}


def format_formula(f: Formula) -> str:
    """Fully parenthesised text that `parse_formula` reads back to the same AST."""
    if f.op is Op.TRUE:
        return "TRUE"
    if f.op is Op.GE:
        return f"(x >= {f.threshold})"
    if f.op is Op.LE:
        return f"(x <= {f.threshold})"
    if f.op is Op.NOT:
        return f"!{format_formula(f.children[0])}"
    if f.op is Op.EVENTUALLY:
        return f"(F{f.interval} {format_formula(f.children[0])})"
    if f.op is Op.ALWAYS:
        return f"(G{f.interval} {format_formula(f.children[0])})"
    a, b = (format_formula(c) for c in f.children)
    if f.op is Op.UNTIL:
        return f"({a} U{f.interval} {b})"
    return f"({a} {_BINARY_TOKENS[f.op]} {b})"


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+)|(?P<op><->|->|&&|\|\||>=|<=|[!()\[\],<>])|(?P<word>[A-Za-z_][A-Za-z_0-9]*))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    # Precedence, loosest first: <->, ->, ||, &&, U, then prefix operators.

    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.cur
        raise FormulaSyntaxError(msg, tok.pos, self.text)

    def take(self, text: Optional[str] = None, kind: Optional[str] = None) -> _Tok:
        tok = self.cur
        if (text is not None and tok.text != text) or (kind is not None and tok.kind != kind):
            want = text if text is not None else kind
            self.error(f"expected {want!r}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.cur.text == text and self.cur.kind in ("op", "word"):
            self.i += 1
            return True
        return False

    def parse(self) -> Formula:
        f = self.iff()
        if self.cur.kind != "eof":
            self.error(f"unexpected {self.cur.text!r}")
        return f

    def iff(self) -> Formula:
        f = self.imp()
        while self.accept("<->"):
            f = iff(f, self.imp())
        return f

    def imp(self) -> Formula:
        f = self.disj()
        if self.accept("->"):
            return implies(f, self.imp())
        return f

    def disj(self) -> Formula:
        f = self.conj()
        while self.accept("||"):
            f = disj(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.accept("&&"):
            f = conj(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        while self.cur.kind == "word" and self.cur.text == "U":
            self.i += 1
            iv = self.interval()
            f = Formula(Op.UNTIL, (f, self.unary()), interval=iv)
        return f

    def interval(self) -> Interval:
        start = self.take("[")
        lo = int(self.take(kind="num").text)
        self.take(",")
        if self.cur.kind == "word" and self.cur.text == "inf":
            self.i += 1
            hi = None
        else:
            hi = int(self.take(kind="num").text)
        self.take(")")
        if lo < 0:
            self.error(f"negative interval bound {lo}", start)
        if hi is not None and lo >= hi:
            self.error(f"interval [{lo},{hi}) is empty", start)
        return Interval(lo, hi)

    def unary(self) -> Formula:
        tok = self.cur
        if self.accept("!"):
            return neg(self.unary())
        if tok.kind == "word" and tok.text in ("G", "F"):
            self.i += 1
            iv = self.interval()
            op = Op.ALWAYS if tok.text == "G" else Op.EVENTUALLY
            return Formula(op, (self.unary(),), interval=iv)
        if tok.kind == "word" and tok.text == "TRUE":
            self.i += 1
            return TRUE
        if self.accept("("):
            f = self.iff()
            self.take(")")
            return f
        if tok.kind == "word" and tok.text == "x":
            self.i += 1
            rel = self.cur
            if rel.text not in (">=", ">", "<=", "<"):
                self.error("expected comparison operator")
            self.i += 1
            c = int(self.take(kind="num").text)
            return ge(c) if rel.text in (">=", ">") else le(c)
        if tok.kind == "word":
            self.error(f"unknown identifier {tok.text!r}")
        self.error(f"unexpected {tok.text or 'end of input'!r}")


def parse_formula(text: str) -> Formula:
    """Parse ASCII STL text such as ``"(x >= 0) U[4,9) !(x >= 10)"``.

    ``x > c`` and ``x < c`` are read as ``x >= c`` and ``x <= c``.
    """
    return _Parser(text).parse()


# -- flat encoding -----------------------------------------------------------

NONE = -1


@dataclass(frozen=True)
class EncodedNode:
    """One row of the flat encoding; child indices are 0-based, -1 for none."""

    op: Op = Op.TRUE
    k1: int = NONE
    k2: int = NONE
    lower: int = 0
    upper: Optional[int] = 0
    threshold: int = 0


PADDING = EncodedNode()


@dataclass(frozen=True)
class FormulaEncoding:
    nodes: tuple[EncodedNode, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, i: int) -> EncodedNode:
        return self.nodes[i]

    @property
    def live_count(self) -> int:
        """Nodes reachable from the root."""
        return len(_reachable(self))

    def validate(self) -> None:
        if not self.nodes:
            raise FormulaError("encoding has no nodes")
        for idx, n in enumerate(self.nodes):
            arity = ARITY.get(n.op)
            if arity is None:
                raise FormulaError(f"node {idx}: unknown opcode {n.op}")
            kids = [k for k in (n.k1, n.k2) if k != NONE]
            if len(kids) != arity or (arity == 1 and n.k1 == NONE):
                raise FormulaError(f"node {idx}: {n.op.name} has wrong child count")
            for k in kids:
                if not idx < k < len(self.nodes):
                    raise FormulaError(f"node {idx}: child index {k} out of range")
            if n.op in TEMPORAL:
                Interval(n.lower, n.upper)

    def to_text(self) -> str:
        """One node per line: ``idx opcode k1 k2 l u v``; u = -1 means inf."""
        rows = []
        for idx, n in enumerate(self.nodes):
            u = -1 if n.upper is None else n.upper
            rows.append(f"{idx} {int(n.op)} {n.k1} {n.k2} {n.lower} {u} {n.threshold}")
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FormulaEncoding":
        nodes = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                idx, op, k1, k2, lo, u, v = (int(p) for p in line.split())
                node = EncodedNode(Op(op), k1, k2, lo, None if u == -1 else u, v)
            except ValueError as exc:
                raise FormulaError(f"line {lineno}: {exc}") from None
            if idx != len(nodes):
                raise FormulaError(f"line {lineno}: expected index {len(nodes)}, got {idx}")
            nodes.append(node)
        enc = cls(tuple(nodes))
        enc.validate()
        return enc


def _reachable(enc: FormulaEncoding) -> set[int]:
    seen, stack = set(), [0]
    while stack:
        j = stack.pop()
        if j in seen:
            continue
        seen.add(j)
        n = enc.nodes[j]
        stack.extend(k for k in (n.k1, n.k2) if k != NONE)
    return seen


def _encode_node(f: Formula, k1: int, k2: int) -> EncodedNode:
    lo, hi = (f.interval.lower, f.interval.upper) if f.interval else (0, 0)
    return EncodedNode(f.op, k1, k2, lo, hi, f.threshold)


def encode(f: Formula, m_max: Optional[int] = None) -> FormulaEncoding:
    """Breadth-first layout, root first, left child before right child."""
    count = node_count(f)
    if m_max is not None and count > m_max:
        raise CapacityError(f"formula has {count} nodes, capacity is {m_max}")
    order: list[Formula] = []
    queue = deque([f])
    while queue:
        g = queue.popleft()
        order.append(g)
        queue.extend(g.children)
    nodes = []
    next_index = 1
    for g in order:
        kids = [NONE, NONE]
        for c in range(len(g.children)):
            kids[c] = next_index
            next_index += 1
        nodes.append(_encode_node(g, kids[0], kids[1]))
    enc = FormulaEncoding(tuple(nodes))
    return enc if m_max is None else pad_encoding(enc, m_max)


def pad_encoding(enc: FormulaEncoding, m_max: int) -> FormulaEncoding:
    """Extend with inert TRUE nodes (never referenced) up to exactly `m_max` rows."""
    if len(enc) > m_max:
        if enc.live_count > m_max or max(_reachable(enc)) >= m_max:
            raise CapacityError(f"encoding needs {len(enc)} slots, capacity is {m_max}")
        return FormulaEncoding(enc.nodes[:m_max])
    return FormulaEncoding(enc.nodes + (PADDING,) * (m_max - len(enc)))


def decode(enc: FormulaEncoding) -> Formula:
    enc.validate()

    def build(j: int) -> Formula:
        n = enc.nodes[j]
        kids = tuple(build(k) for k in (n.k1, n.k2) if k != NONE)
        iv = Interval(n.lower, n.upper) if n.op in TEMPORAL else None
        thr = n.threshold if n.op in ATOMS else 0
        return Formula(n.op, kids, thr, iv)

    return build(0)


def encoding_bit_layout(m_max: int, width: int) -> list[tuple[str, int]]:
    """Field widths of one encoded node, in transmission order."""
    ib = index_bits(m_max)
    return [("op", 4), ("k1", ib), ("k2", ib), ("lower", width), ("upper", width), ("threshold", width)]


def index_bits(m_max: int) -> int:
    return max(1, m_max.bit_length())


def encoding_to_bits(enc: FormulaEncoding, width: int) -> list[int]:
    """Little-endian bit fields per node. Child indices become 1-based (0 = none)
    and an unbounded upper end becomes the positive sentinel ``2**(width-1)-1``."""
    m = len(enc)
    ib = index_bits(m)
    pinf = (1 << (width - 1)) - 1
    bits: list[int] = []

    def put(value: int, nbits: int, what: str, signed: bool = False):
        lo = -(1 << (nbits - 1)) if signed else 0
        hi = (1 << (nbits - 1)) - 1 if signed else (1 << nbits) - 1
        if not lo <= value <= hi:
            raise CapacityError(f"{what}={value} does not fit in {nbits} bits")
        value &= (1 << nbits) - 1
        bits.extend((value >> b) & 1 for b in range(nbits))

    for n in enc.nodes:
        upper = pinf if n.upper is None else n.upper
        if n.upper is not None and n.upper >= pinf:
            raise CapacityError(f"upper bound {n.upper} collides with the infinity sentinel")
        if not -pinf <= n.threshold <= pinf:
            raise CapacityError(f"threshold {n.threshold} out of range for width {width}")
        put(int(n.op), 4, "opcode")
        put(n.k1 + 1, ib, "k1")
        put(n.k2 + 1, ib, "k2")
        put(n.lower, width, "lower", signed=True)
        put(upper, width, "upper", signed=True)
        put(n.threshold, width, "threshold", signed=True)
    return bits


def bits_to_encoding(bits: Sequence[int], m_max: int, width: int) -> FormulaEncoding:
    ib = index_bits(m_max)
    per = 4 + 2 * ib + 3 * width
    if len(bits) != per * m_max:
        raise FormulaError(f"expected {per * m_max} bits, got {len(bits)}")
    pinf = (1 << (width - 1)) - 1

    def field_at(off: int, nbits: int, signed: bool = False) -> int:
        v = sum(int(bits[off + b]) << b for b in range(nbits))
        if signed and v >> (nbits - 1):
            v -= 1 << nbits
        return v

    nodes = []
    for j in range(m_max):
        off = j * per
        op = field_at(off, 4)
        k1 = field_at(off + 4, ib) - 1
        k2 = field_at(off + 4 + ib, ib) - 1
        off += 4 + 2 * ib
        lo = field_at(off, width, True)
        up = field_at(off + width, width, True)
        v = field_at(off + 2 * width, width, True)
        nodes.append(EncodedNode(Op(op), k1, k2, lo, None if up == pinf else up, v))
    return FormulaEncoding(tuple(nodes))
