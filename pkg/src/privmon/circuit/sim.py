"""Cleartext, cycle-accurate netlist simulation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from .netlist import Netlist


class SimulationError(RuntimeError):
    pass


@dataclass
class SimResult:
    outputs: np.ndarray
    done: bool
    cycles_used: int
    snapshots: Optional[np.ndarray] = None  # (cycles, len(watch)) if requested


@numba.njit(cache=True)
def _eval_gates(vals, kind, in0, in1, out):
    for g in range(kind.shape[0]):
        k = kind[g]
        if k == 0:
            vals[out[g]] = vals[in0[g]] & vals[in1[g]]
        elif k == 1:
            vals[out[g]] = vals[in0[g]] ^ vals[in1[g]]
        elif k == 2:
            vals[out[g]] = vals[in0[g]] ^ 1
        elif k == 3:
            vals[out[g]] = 0
        else:
            vals[out[g]] = 1


@numba.njit(cache=True)
def _run(vals, kind, in0, in1, out, dff_d, dff_q, state, cycles, done_wire, stop_on_done,
         watch, snaps):
    for c in range(cycles):
        for k in range(dff_q.shape[0]):
            vals[dff_q[k]] = state[k]
        _eval_gates(vals, kind, in0, in1, out)
        for w in range(watch.shape[0]):
            snaps[c, w] = vals[watch[w]]
        if stop_on_done and done_wire >= 0 and vals[done_wire] == 1:
            return c + 1
        for k in range(dff_d.shape[0]):
            state[k] = vals[dff_d[k]]
    return cycles


def simulate(net: Netlist, garbler_bits: Sequence[int], evaluator_bits: Sequence[int],
             max_cycles: int, fixed: bool = False, watch: Sequence[int] = (),
             require_done: bool = True) -> SimResult:
    """Run until the done flag (last output wire) rises, or for exactly
    `max_cycles` cycles when `fixed` is set. Outputs are read during the last
    simulated cycle, before the flip-flops latch."""
    if max_cycles < 1:
        raise SimulationError("max_cycles must be positive")
    g = np.asarray(garbler_bits, dtype=np.uint8)
    e = np.asarray(evaluator_bits, dtype=np.uint8)
    if len(g) != len(net.garbler_inputs) or len(e) != len(net.evaluator_inputs):
        raise SimulationError(
            f"input lengths {len(g)}/{len(e)} do not match netlist groups "
            f"{len(net.garbler_inputs)}/{len(net.evaluator_inputs)}")
    vals = np.zeros(net.n_wires, dtype=np.uint8)
    vals[net.garbler_inputs] = g
    vals[net.evaluator_inputs] = e
    state = net.dff_init.copy()
    watch_arr = np.asarray(watch, dtype=np.int64)
    snaps = np.zeros((max_cycles if len(watch_arr) else 0, len(watch_arr)), dtype=np.uint8)
    done_wire = int(net.outputs[-1]) if require_done and len(net.outputs) else -1
    used = _run(vals, net.kind, net.in0, net.in1, net.out, net.dff_d, net.dff_q, state,
                max_cycles, done_wire, not fixed, watch_arr, snaps)
    outs = vals[net.outputs].copy()
    done = bool(outs[-1]) if len(outs) else False
    if require_done and not done:
        raise SimulationError(f"done flag not raised within {max_cycles} cycles")
    return SimResult(outs, done, used, snaps[:used] if len(watch_arr) else None)


@numba.njit(cache=True)
def _eval_sliced(vals, kind, in0, in1, out):
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    for g in range(kind.shape[0]):
        k = kind[g]
        y = out[g]
        if k == 0:
            vals[y, :] = vals[in0[g], :] & vals[in1[g], :]
        elif k == 1:
            vals[y, :] = vals[in0[g], :] ^ vals[in1[g], :]
        elif k == 2:
            vals[y, :] = vals[in0[g], :] ^ full
        elif k == 3:
            vals[y, :] = 0
        else:
            vals[y, :] = full


def simulate_combinational(net: Netlist, inputs: np.ndarray) -> np.ndarray:
    """Evaluate a flip-flop-free netlist on many input vectors at once.

    `inputs` is (cases, n_inputs) of 0/1 over the garbler group followed by the
    evaluator group; the result is (cases, n_outputs). Cases are packed 64 to a
    machine word.
    """
    if len(net.dff_q):
        raise SimulationError("netlist has flip-flops")
    inputs = np.asarray(inputs, dtype=np.uint8)
    cases = inputs.shape[0]
    in_wires = np.concatenate([net.garbler_inputs, net.evaluator_inputs])
    if inputs.shape[1] != len(in_wires):
        raise SimulationError("input width does not match netlist")
    nwords = (cases + 63) // 64
    padded = np.zeros((nwords * 64, len(in_wires)), dtype=np.uint8)
    padded[:cases] = inputs
    packed = np.packbits(padded.T.reshape(len(in_wires), nwords, 64)[:, :, ::-1], axis=2)
    vals = np.zeros((net.n_wires, nwords), dtype=np.uint64)
    vals[in_wires] = packed.view(">u8").reshape(len(in_wires), nwords).astype(np.uint64)
    _eval_sliced(vals, net.kind, net.in0, net.in1, net.out)
    outv = vals[net.outputs]
    bits = np.unpackbits(outv.astype(">u8").view(np.uint8).reshape(len(net.outputs), nwords, 8),
                         axis=2)[:, :, ::-1]
    return bits.reshape(len(net.outputs), nwords * 64)[:, :cases].T.copy()

