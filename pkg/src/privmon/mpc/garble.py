"""Sequential garbling with free-XOR and point-and-permute.

Every clock cycle the combinational part is garbled afresh: each AND gate gets
a new random output label and a 4-row table, XOR and NOT are free. Flip-flop
labels carry over: the q wire of cycle c+1 reuses the label of the d wire in
cycle c. Inputs keep one label for the whole session.

Rows are ``H(A, B, tweak) ^ C`` with the tweak ``(cycle << 32) | gate``. Row
order is ``2*color(A) + color(B)``. Labels keep their top 32 bits zero. Those
bits act as the redundancy check: after decrypting a row the evaluator
insists they are still zero.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numba
import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..circuit.netlist import AND, CONST0, CONST1, Netlist
from .hashing import aes_blocks, mmo_input, sha_rows

TAG_MASK = np.uint64(0xFFFFFFFF00000000)  # in the last word of a label


class GarblingError(RuntimeError):
    pass


class IntegrityError(GarblingError):
    """A decrypted row failed the redundancy check."""


class StreamError(GarblingError):
    """Garbled material missing, truncated or out of order."""


@dataclass(frozen=True)
class GarbledCycle:
    cycle: int
    tables: bytes  # AND gates in netlist order, 4 rows each, kappa/8 bytes per row


def kappa_words(kappa: int) -> int:
    if kappa not in (128, 256):
        raise ValueError("kappa must be 128 or 256")
    return kappa // 64


def table_bytes_per_cycle(net: Netlist, kappa: int = 128) -> int:
    return net.n_and * 4 * kappa // 8


# -- level schedule -------------------------------------------------------------
#
# AND gates are hashed one dependency level at a time so that each level is a
# single batched hash call. Stage s evaluates the free gates of AND-depth s
# (in netlist order) and then all AND gates of depth s + 1.

@dataclass(frozen=True)
class Schedule:
    free: np.ndarray      # gate ids, grouped by stage
    free_off: np.ndarray  # stage s uses free[free_off[s]:free_off[s+1]]
    ands: np.ndarray
    and_off: np.ndarray
    and_rank: np.ndarray  # gate id -> position among AND gates in netlist order

    @property
    def stages(self) -> int:
        return len(self.free_off) - 1


def schedule(net: Netlist) -> Schedule:
    cached = getattr(net, "_gc_schedule", None)
    if cached is not None:
        return cached
    level = np.zeros(net.n_wires, dtype=np.int64)
    glevel = _levels(net.kind, net.in0, net.in1, net.out, level)
    is_and = net.kind == AND
    depth = int(glevel.max()) if len(glevel) else 0
    free_ids = np.flatnonzero(~is_and)
    and_ids = np.flatnonzero(is_and)
    # stable sorts keep netlist order inside a stage
    free = free_ids[np.argsort(glevel[free_ids], kind="stable")]
    ands = and_ids[np.argsort(glevel[and_ids], kind="stable")]
    free_off = np.searchsorted(glevel[free], np.arange(depth + 2), side="left")
    and_off = np.searchsorted(glevel[ands] - 1, np.arange(depth + 2), side="left")
    rank = np.full(len(net.kind), -1, dtype=np.int64)
    rank[and_ids] = np.arange(len(and_ids))
    sched = Schedule(free, free_off.astype(np.int64), ands, and_off.astype(np.int64), rank)
    object.__setattr__(net, "_gc_schedule", sched)
    return sched


@numba.njit(cache=True)
def _levels(kind, in0, in1, out, level):
    glevel = np.zeros(kind.shape[0], np.int64)
    for g in range(kind.shape[0]):
        lv = 0
        if in0[g] >= 0:
            lv = level[in0[g]]
        if in1[g] >= 0 and level[in1[g]] > lv:
            lv = level[in1[g]]
        if kind[g] == 0:
            lv += 1
        level[out[g]] = lv
        glevel[g] = lv
    return glevel


# -- kernels -------------------------------------------------------------------

@numba.njit(cache=True)
def _free_gates(kind, in0, in1, out, lab, delta, ids, garbler):
    L = lab.shape[1]
    for g in ids:
        k = kind[g]
        y = out[g]
        if k == 1:
            for w in range(L):
                lab[y, w] = lab[in0[g], w] ^ lab[in1[g], w]
        elif k == 2:
            for w in range(L):
                lab[y, w] = lab[in0[g], w] ^ delta[w] if garbler else lab[in0[g], w]
        # constants keep their session labels


@numba.njit(cache=True)
def _garble_prep(kind, in0, in1, out, lab0, delta, free, ands, cycle, xa, xb, tw):
    """Free gates of the stage, then the four hash inputs of every AND in it.
    For 128-bit labels xa receives the finished AES input and xb is unused."""
    _free_gates(kind, in0, in1, out, lab0, delta, free, True)
    L = lab0.shape[1]
    base = np.uint64(cycle) << np.uint64(32)
    zero = np.uint64(0)
    for j in range(ands.shape[0]):
        g = ands[j]
        a, b = in0[g], in1[g]
        t = base | np.uint64(g)
        for r in range(4):
            va, vb = r >> 1, r & 1
            k = 4 * j + r
            if L == 2:
                a0 = lab0[a, 0] ^ (delta[0] if va else zero)
                a1 = lab0[a, 1] ^ (delta[1] if va else zero)
                b0 = lab0[b, 0] ^ (delta[0] if vb else zero)
                b1 = lab0[b, 1] ^ (delta[1] if vb else zero)
                xa[k, 0], xa[k, 1] = mmo_input(a0, a1, b0, b1, t)
            else:
                for w in range(L):
                    xa[k, w] = lab0[a, w] ^ (delta[w] if va else zero)
                    xb[k, w] = lab0[b, w] ^ (delta[w] if vb else zero)
            tw[k] = t


@numba.njit(cache=True)
def _garble_finish(in0, in1, out, lab0, delta, fresh, ands, rank, h, tables):
    L = lab0.shape[1]
    one = np.uint64(1)
    zero = np.uint64(0)
    tag = np.uint64(0xFFFFFFFF00000000)
    for j in range(ands.shape[0]):
        g = ands[j]
        n = rank[g]
        y = out[g]
        for w in range(L):
            lab0[y, w] = fresh[n, w]
        lab0[y, L - 1] &= ~tag
        ca = int(lab0[in0[g], 0] & one)
        cb = int(lab0[in1[g], 0] & one)
        for r in range(4):
            va, vb = r >> 1, r & 1
            row = 2 * (ca ^ va) + (cb ^ vb)
            for w in range(L):
                c = lab0[y, w] ^ (delta[w] if (va & vb) else zero)
                tables[n, row, w] = h[4 * j + r, w] ^ c


@numba.njit(cache=True)
def _eval_prep(kind, in0, in1, out, act, free, ands, cycle, xa, xb, tw):
    _free_gates(kind, in0, in1, out, act, act[0], free, False)
    L = act.shape[1]
    base = np.uint64(cycle) << np.uint64(32)
    for j in range(ands.shape[0]):
        g = ands[j]
        a, b = in0[g], in1[g]
        t = base | np.uint64(g)
        if L == 2:
            xa[j, 0], xa[j, 1] = mmo_input(act[a, 0], act[a, 1], act[b, 0], act[b, 1], t)
        else:
            for w in range(L):
                xa[j, w] = act[a, w]
                xb[j, w] = act[b, w]
        tw[j] = t


@numba.njit(cache=True)
def _eval_finish(in0, in1, out, act, ands, rank, h, tables):
    """Returns -1 on success or the first gate whose row failed the check."""
    L = act.shape[1]
    one = np.uint64(1)
    tag = np.uint64(0xFFFFFFFF00000000)
    for j in range(ands.shape[0]):
        g = ands[j]
        y = out[g]
        row = 2 * int(act[in0[g], 0] & one) + int(act[in1[g], 0] & one)
        n = rank[g]
        for w in range(L):
            act[y, w] = h[j, w] ^ tables[n, row, w]
        if act[y, L - 1] & tag:
            return g
    return -1


@numba.njit(cache=True)
def _carry(lab, dff_d, dff_q):
    tmp = np.empty((dff_d.shape[0], lab.shape[1]), np.uint64)
    for k in range(dff_d.shape[0]):
        tmp[k] = lab[dff_d[k]]
    for k in range(dff_d.shape[0]):
        lab[dff_q[k]] = tmp[k]


def _buffers(sched: Schedule, rows: int, L: int):
    widest = int(np.max(np.diff(sched.and_off))) if sched.stages else 0
    xa = np.empty((rows * widest, L), dtype=np.uint64)
    return xa, np.empty_like(xa), np.empty(rows * widest, dtype=np.uint64)


def _hash_rows(xa: np.ndarray, xb: np.ndarray, tw: np.ndarray) -> np.ndarray:
    if xa.shape[1] == 2:
        return aes_blocks(xa) ^ xa
    out = np.empty_like(xa)
    sha_rows(xa, xb, tw, out)
    return out


# -- randomness -------------------------------------------------------------------

class LabelSource:
    """Uniform label words: AES-CTR under a fresh OS key, or a numpy Generator
    when reproducibility matters (tests)."""

    def __init__(self, rng: Optional[np.random.Generator] = None):
        self._rng = rng
        if rng is None:
            self._ctr = Cipher(algorithms.AES(os.urandom(32)), modes.CTR(os.urandom(16))).encryptor()

    def words(self, count: int) -> np.ndarray:
        if self._rng is not None:
            return self._rng.integers(0, 2**64, size=count, dtype=np.uint64)
        return np.frombuffer(self._ctr.update(bytes(8 * count)), dtype="<u8").astype(np.uint64)

    def labels(self, count: int, L: int) -> np.ndarray:
        lab = self.words(count * L).reshape(count, L)
        lab[:, L - 1] &= ~TAG_MASK
        return lab


def labels_to_bytes(labels: np.ndarray) -> bytes:
    return np.ascontiguousarray(labels, dtype="<u8").tobytes()


def labels_from_bytes(data: bytes, kappa: int) -> np.ndarray:
    L = kappa_words(kappa)
    if len(data) % (8 * L):
        raise ValueError("label bytes not a multiple of the label size")
    return np.frombuffer(data, dtype="<u8").astype(np.uint64).reshape(-1, L)


def select_labels(zero: np.ndarray, delta: np.ndarray, bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint64).reshape(-1, 1)
    if len(bits) != len(zero):
        raise ValueError(f"{len(bits)} bits for {len(zero)} labels")
    return zero ^ (bits * delta.reshape(1, -1))


# -- garbler ---------------------------------------------------------------------------

class GarblerSession:
    """Garbler-side state for one run of a netlist over a fixed number of cycles."""

    def __init__(self, net: Netlist, cycles: int, kappa: int = 128,
                 rng: Optional[np.random.Generator] = None):
        if cycles < 1:
            raise GarblingError("need at least one cycle")
        if cycles >= 1 << 32 or net.n_gates >= 1 << 32:
            raise GarblingError("cycle or gate index does not fit the tweak")
        self.net = net
        self.cycles = cycles
        self.kappa = kappa
        self.L = L = kappa_words(kappa)
        self._src = LabelSource(rng)
        delta = self._src.labels(1, L)[0]
        delta[0] |= np.uint64(1)
        self._delta = delta
        self._lab0 = np.zeros((net.n_wires, L), dtype=np.uint64)
        fixed = np.concatenate([net.garbler_inputs, net.evaluator_inputs, net.dff_q,
                                self.const_wires]).astype(np.int64)
        self._lab0[fixed] = self._src.labels(len(fixed), L)
        self._next_cycle = 0
        self._decode: Optional[np.ndarray] = None
        self._sched = schedule(net)
        self._buf = _buffers(self._sched, 4, L)

    @property
    def const_wires(self) -> np.ndarray:
        mask = (self.net.kind == CONST0) | (self.net.kind == CONST1)
        return self.net.out[mask]

    @property
    def const_values(self) -> np.ndarray:
        mask = (self.net.kind == CONST0) | (self.net.kind == CONST1)
        return (self.net.kind[mask] == CONST1).astype(np.uint8)

    # inputs

    def garbler_key_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        z = self._lab0[self.net.garbler_inputs]
        return z.copy(), z ^ self._delta

    def evaluator_key_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        z = self._lab0[self.net.evaluator_inputs]
        return z.copy(), z ^ self._delta

    def encode_garbler_inputs(self, bits) -> np.ndarray:
        return select_labels(self._lab0[self.net.garbler_inputs], self._delta, bits)

    def fixed_labels(self) -> np.ndarray:
        """Active labels of the initial flip-flop state, then of the constants."""
        if self._next_cycle:
            raise GarblingError("fixed labels are only defined before the first cycle")
        dff = select_labels(self._lab0[self.net.dff_q], self._delta, self.net.dff_init)
        const = select_labels(self._lab0[self.const_wires], self._delta, self.const_values)
        return np.concatenate([dff, const]).reshape(-1, self.L)

    # cycles

    def garble_cycle(self) -> GarbledCycle:
        c = self._next_cycle
        if c >= self.cycles:
            raise StreamError("all cycles already garbled")
        net = self.net
        if c > 0:
            _carry(self._lab0, net.dff_d, net.dff_q)
        sched = self._sched
        fresh = self._src.words(net.n_and * self.L).reshape(net.n_and, self.L)
        tables = np.empty((net.n_and, 4, self.L), dtype=np.uint64)
        xa, xb, tw = self._buf
        for s in range(sched.stages):
            free = sched.free[sched.free_off[s]:sched.free_off[s + 1]]
            ands = sched.ands[sched.and_off[s]:sched.and_off[s + 1]]
            k = 4 * len(ands)
            _garble_prep(net.kind, net.in0, net.in1, net.out, self._lab0, self._delta, free, ands,
                         c, xa[:k], xb[:k], tw[:k])
            if k:
                h = _hash_rows(xa[:k], xb[:k], tw[:k])
                _garble_finish(net.in0, net.in1, net.out, self._lab0, self._delta, fresh, ands,
                               sched.and_rank, h, tables)
        self._next_cycle += 1
        if self._next_cycle == self.cycles:
            self._decode = (self._lab0[net.outputs, 0] & np.uint64(1)).astype(np.uint8)
        return GarbledCycle(c, tables.astype("<u8", copy=False).tobytes())

    def stream(self) -> Iterator[GarbledCycle]:
        while self._next_cycle < self.cycles:
            yield self.garble_cycle()

    @property
    def decode_info(self) -> np.ndarray:
        if self._decode is None:
            raise GarblingError("decode info is available after the final cycle")
        return self._decode

    # test hooks: garbler-side knowledge only

    @property
    def delta(self) -> np.ndarray:
        return self._delta

    def zero_labels(self) -> np.ndarray:
        """FALSE labels of every wire as of the last garbled cycle."""
        return self._lab0


def garble_session(net: Netlist, cycles: int, rng: Optional[np.random.Generator] = None,
                   kappa: int = 128) -> GarblerSession:
    return GarblerSession(net, cycles, kappa, rng)


# -- evaluator -----------------------------------------------------------------------

class EvaluatorSession:
    def __init__(self, net: Netlist, cycles: int, kappa: int = 128):
        self.net = net
        self.cycles = cycles
        self.kappa = kappa
        self.L = kappa_words(kappa)
        self._act = np.zeros((net.n_wires, self.L), dtype=np.uint64)
        self._sched = schedule(net)
        self._buf = _buffers(self._sched, 1, self.L)
        self._next_cycle = 0
        self._ready = False
        self.peak_buffer = 0
        self._n_const = int(np.count_nonzero((net.kind == CONST0) | (net.kind == CONST1)))

    def set_inputs(self, garbler: np.ndarray, evaluator: np.ndarray, fixed: np.ndarray) -> None:
        net = self.net
        const = net.out[(net.kind == CONST0) | (net.kind == CONST1)]
        want = (len(net.garbler_inputs), len(net.evaluator_inputs), len(net.dff_q) + len(const))
        got = (len(garbler), len(evaluator), len(fixed))
        if want != got:
            raise StreamError(f"label counts {got} do not match netlist {want}")
        self._act[net.garbler_inputs] = garbler
        self._act[net.evaluator_inputs] = evaluator
        self._act[net.dff_q] = fixed[: len(net.dff_q)]
        self._act[const] = fixed[len(net.dff_q):]
        self._ready = True

    def consume(self, gc: GarbledCycle) -> None:
        if not self._ready:
            raise StreamError("inputs not set")
        if gc.cycle != self._next_cycle or gc.cycle >= self.cycles:
            raise StreamError(f"expected cycle {self._next_cycle}, got {gc.cycle}")
        expect = table_bytes_per_cycle(self.net, self.kappa)
        if len(gc.tables) != expect:
            raise StreamError(f"cycle {gc.cycle}: {len(gc.tables)} table bytes, expected {expect}")
        self.peak_buffer = max(self.peak_buffer, len(gc.tables))
        net = self.net
        if gc.cycle > 0:
            _carry(self._act, net.dff_d, net.dff_q)
        tables = np.frombuffer(gc.tables, dtype="<u8").reshape(-1, 4, self.L)
        sched = self._sched
        xa, xb, tw = self._buf
        for s in range(sched.stages):
            free = sched.free[sched.free_off[s]:sched.free_off[s + 1]]
            ands = sched.ands[sched.and_off[s]:sched.and_off[s + 1]]
            k = len(ands)
            _eval_prep(net.kind, net.in0, net.in1, net.out, self._act, free, ands, gc.cycle,
                       xa[:k], xb[:k], tw[:k])
            if k:
                h = _hash_rows(xa[:k], xb[:k], tw[:k])
                bad = _eval_finish(net.in0, net.in1, net.out, self._act, ands, sched.and_rank, h,
                                   tables)
                if bad >= 0:
                    raise IntegrityError(f"cycle {gc.cycle}: gate {bad} failed the redundancy check")
        self._next_cycle += 1

    @property
    def finished(self) -> bool:
        return self._next_cycle == self.cycles

    def output_labels(self) -> np.ndarray:
        if not self.finished:
            raise StreamError(f"stream ended after {self._next_cycle} of {self.cycles} cycles")
        return self._act[self.net.outputs].copy()

    def active_labels(self) -> np.ndarray:
        """Active label of every wire as of the last evaluated cycle."""
        return self._act


def evaluate_session(net: Netlist, active_inputs: tuple[np.ndarray, np.ndarray, np.ndarray],
                     stream: Iterable[GarbledCycle], cycles: int, kappa: int = 128
                     ) -> tuple[np.ndarray, int]:
    """Evaluate a whole stream. `active_inputs` = (garbler labels, evaluator
    labels, fixed labels). Returns the active output labels and the peak
    number of table bytes held at once."""
    ev = EvaluatorSession(net, cycles, kappa)
    ev.set_inputs(*active_inputs)
    for gc in stream:
        ev.consume(gc)
    return ev.output_labels(), ev.peak_buffer


def decode_outputs(labels: np.ndarray, decode_info: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if len(labels) != len(decode_info):
        raise ValueError("label and decode-info lengths differ")
    return ((labels[:, 0] & np.uint64(1)).astype(np.uint8) ^ np.asarray(decode_info, np.uint8))
