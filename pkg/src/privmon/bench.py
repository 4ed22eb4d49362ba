"""Benchmark sweep: one CSV row per (N, formula) protocol run over loopback.

Columns, in order:

    n, depth, m, template, seed, gates, and_gates, dffs, cycles, active_cycles,
    garble_ms, evaluate_ms, total_ms, bytes, peak_buffer, kappa, value, expected, error

``gates`` counts flip-flops as gates. ``cycles`` is the fixed count the session
ran; ``active_cycles`` is when the done flag would have risen. ``bytes`` sums
both directions including framing. ``error`` is empty on success.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, TextIO

import numpy as np

from .circuit.monitor import build_monitor_netlist, expected_cycles, worst_case_cycles
from .gen import M_FOR_DEPTH, TEMPLATES, random_formula, random_trace
from .protocol import SessionParams, run_loopback
from .robustness import rob_recursive
from .stl import encode

log = logging.getLogger(__name__)


@dataclass
class BenchRecord:
    n: int
    depth: int
    m: int
    template: str
    seed: int
    gates: int
    and_gates: int
    dffs: int
    cycles: int
    active_cycles: int
    garble_ms: float
    evaluate_ms: float
    total_ms: float
    bytes: int
    peak_buffer: int
    kappa: int
    value: Optional[int]
    expected: int
    error: str = ""


COLUMNS = [f.name for f in fields(BenchRecord)]


def run_one(n: int, depth: int, seed: int, kappa: int = 128, width: int = 32,
            cycles: Optional[int] = None) -> BenchRecord:
    rng = np.random.default_rng(seed)
    template = int(rng.integers(len(TEMPLATES[depth])))
    formula = random_formula(depth, rng, template=template)
    trace = random_trace(n, rng)
    m = M_FOR_DEPTH[depth]
    net = build_monitor_netlist(n, m, width)
    stats = net.stats()
    enc = encode(formula, m)
    params = SessionParams(n, m, width, kappa, cycles or worst_case_cycles(n, m))
    result = run_loopback(enc, trace, params)
    err = result.garbler_error or result.evaluator_error
    g, e = result.garbler_stats, result.evaluator_stats
    value = result.garbler_value
    if err is None and result.garbler_value != result.evaluator_value:
        err = RuntimeError("parties disagree")
    return BenchRecord(
        n=n, depth=depth, m=m, template=TEMPLATES[depth][template][0], seed=seed,
        gates=stats["gates"], and_gates=stats["and"], dffs=stats["dff"],
        cycles=params.cycles, active_cycles=expected_cycles(enc, n),
        garble_ms=round(g.compute_ms, 3), evaluate_ms=round(e.compute_ms, 3),
        total_ms=round(max(g.total_ms, e.total_ms), 3),
        bytes=g.bytes_sent + g.bytes_received, peak_buffer=e.peak_buffer, kappa=kappa,
        value=value, expected=rob_recursive(trace, formula, 0, width),
        error="" if err is None else f"{type(err).__name__}: {err}",
    )


def sweep(ns: Iterable[int], depths: Iterable[int], reps: int, seed: int = 0,
          kappa: int = 128, cycles: Optional[int] = None) -> Iterable[BenchRecord]:
    """Yield records in (N, depth, rep) order. A failed run is recorded and the
    sweep moves on."""
    for n in ns:
        for depth in depths:
            for rep in range(reps):
                run_seed = seed * 1_000_003 + n * 1009 + depth * 101 + rep
                try:
                    rec = run_one(n, depth, run_seed, kappa=kappa, cycles=cycles)
                except Exception as exc:  # keep sweeping
                    log.exception("run n=%d depth=%d rep=%d failed", n, depth, rep)
                    rec = BenchRecord(n, depth, M_FOR_DEPTH.get(depth, 0), "", run_seed, 0, 0, 0,
                                      0, 0, 0.0, 0.0, 0.0, 0, 0, kappa, None, 0,
                                      f"{type(exc).__name__}: {exc}")
                log.info("n=%d depth=%d rep=%d cycles=%d total=%.0fms %s", n, depth, rep,
                         rec.cycles, rec.total_ms, rec.error or "ok")
                yield rec


def write_csv(records: Iterable[BenchRecord], out: TextIO) -> int:
    writer = csv.DictWriter(out, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    count = 0
    for rec in records:
        row = asdict(rec)
        row["value"] = "" if rec.value is None else rec.value
        writer.writerow(row)
        out.flush()
        count += 1
    return count


def read_csv(source: TextIO) -> list[dict]:
    reader = csv.DictReader(source)
    if reader.fieldnames != COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return list(reader)


def linear_fit(xs, ys) -> tuple[float, float, float]:
    """Least-squares line; returns (slope, intercept, r squared)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot else 1.0
    return float(slope), float(intercept), r2
