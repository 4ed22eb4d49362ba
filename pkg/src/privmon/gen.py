"""Random benchmark inputs: timed traces and formulas from fixed templates."""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .robustness import Trace
from .stl import (Formula, Interval, always, conj, disj, eventually, ge, implies, neg,
                  until)

SCALE = 10**6


def interval_pool(scale: int = SCALE) -> list[Interval]:
    s = scale
    return [Interval(0, None), Interval(s, 2 * s), Interval(0, 3 * s), Interval(5 * s, 20 * s),
            Interval(600 * s, 700 * s), Interval(30 * s, 31 * s)]


def atom_pool(scale: int = SCALE) -> list[Formula]:
    return [ge(5 * scale), ge(0), ge(-3 * scale)]


def _G(iv: Interval, f: Formula) -> Formula:
    return always(f, iv.lower, iv.upper)


def _F(iv: Interval, f: Formula) -> Formula:
    return eventually(f, iv.lower, iv.upper)


def _U(a: Formula, iv: Interval, b: Formula) -> Formula:
    return until(a, b, iv.lower, iv.upper)


# Each template takes atoms (p, q, r) and intervals (I, J, K, L).
Template = Callable[[Sequence[Formula], Sequence[Interval]], Formula]

DEPTH3: list[tuple[str, Template]] = [
    ("G_I F_J p", lambda a, i: _G(i[0], _F(i[1], a[0]))),
    ("(!p) U_I (G_J q)", lambda a, i: _U(neg(a[0]), i[0], _G(i[1], a[1]))),
    ("(G_I p) -> (F_J q)", lambda a, i: implies(_G(i[0], a[0]), _F(i[1], a[1]))),
    ("G_I (p && q)", lambda a, i: _G(i[0], conj(a[0], a[1]))),
]

DEPTH4: list[tuple[str, Template]] = [
    ("(G_I (p || q)) U_J r", lambda a, i: _U(_G(i[0], disj(a[0], a[1])), i[1], a[2])),
    ("(G_I F_J p) -> (G_K F_L q)",
     lambda a, i: implies(_G(i[0], _F(i[1], a[0])), _G(i[2], _F(i[3], a[1])))),
    ("F_I (p U_J (q -> r))", lambda a, i: _F(i[0], _U(a[0], i[1], implies(a[1], a[2])))),
    ("F_I G_J !p", lambda a, i: _F(i[0], _G(i[1], neg(a[0])))),
]

TEMPLATES = {3: DEPTH3, 4: DEPTH4}

# capacity that fits every template of a given depth
M_FOR_DEPTH = {3: 5, 4: 7}


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_formula(depth: int, seed=None, scale: int = SCALE,
                   intervals: Optional[Sequence[Interval]] = None,
                   atoms: Optional[Sequence[Formula]] = None,
                   template: Optional[int] = None) -> Formula:
    """Pick a template of the given depth and fill it from the pools."""
    if depth not in TEMPLATES:
        raise ValueError(f"templates exist for depth 3 and 4, not {depth}")
    rng = _rng(seed)
    intervals = list(intervals) if intervals is not None else interval_pool(scale)
    atoms = list(atoms) if atoms is not None else atom_pool(scale)
    choices = TEMPLATES[depth]
    idx = int(rng.integers(len(choices))) if template is None else template
    _, build = choices[idx]
    picked_atoms = [atoms[int(k)] for k in rng.integers(len(atoms), size=3)]
    picked_ivs = [intervals[int(k)] for k in rng.integers(len(intervals), size=4)]
    return build(picked_atoms, picked_ivs)


def random_trace(length: int, seed=None, scale: int = SCALE) -> Trace:
    """Gaps uniform in [1, 2*scale - 1]; the value walks with steps uniform in
    [-2*scale, 2*scale], starting from a draw in the same range."""
    if length < 1:
        raise ValueError("trace length must be at least 1")
    rng = _rng(seed)
    gaps = rng.integers(1, 2 * scale, size=length - 1)
    times = np.concatenate([[0], np.cumsum(gaps)])
    steps = rng.integers(-2 * scale, 2 * scale + 1, size=length)
    values = np.cumsum(steps)
    return Trace(times.tolist(), values.tolist())
