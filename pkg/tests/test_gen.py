import numpy as np

from privmon.gen import (DEPTH3, DEPTH4, M_FOR_DEPTH, SCALE, atom_pool, interval_pool,
                         random_formula, random_trace)
from privmon.robustness import Trace
from privmon.stl import depth, encode, node_count


def test_trace_distribution():
    tr = random_trace(10_000, 7)
    gaps = np.diff(tr.times)
    assert gaps.min() >= 1 and gaps.max() <= 2 * SCALE - 1
    steps = np.diff(tr.values)
    assert np.abs(steps).max() <= 2 * SCALE
    assert tr.times[0] == 0


def test_trace_is_reproducible():
    assert random_trace(10, 7) == random_trace(10, 7)
    assert random_trace(10, 7) != random_trace(10, 8)
    assert isinstance(random_trace(1, 0), Trace)


def _shape(f):
    return (f.op, tuple(_shape(c) for c in f.children))


def test_every_template_reachable():
    for d, templates in ((3, DEPTH3), (4, DEPTH4)):
        shapes = [_shape(random_formula(d, 0, template=k)) for k in range(len(templates))]
        assert len(set(shapes)) == len(templates) == 4
        hits = {shapes.index(_shape(random_formula(d, seed))) for seed in range(100)}
        assert hits == {0, 1, 2, 3}
        for seed in range(20):
            f = random_formula(d, seed)
            assert depth(f) == d
            assert node_count(f) <= M_FOR_DEPTH[d]


def test_templates_use_pools():
    ivs = set(interval_pool())
    atoms = set(atom_pool())
    for seed in range(50):
        f = random_formula(4, seed)
        stack = [f]
        while stack:
            g = stack.pop()
            if g.interval is not None:
                assert g.interval in ivs
            if not g.children and g.op.name != "TRUE":
                assert g in atoms
            stack.extend(g.children)


def test_template_names_distinct_and_capacity():
    for d, templates in ((3, DEPTH3), (4, DEPTH4)):
        for k in range(4):
            enc = encode(random_formula(d, 1, template=k), M_FOR_DEPTH[d])
            assert len(enc) == M_FOR_DEPTH[d]
        assert len({name for name, _ in templates}) == 4


def test_formula_reproducible():
    assert random_formula(3, 5) == random_formula(3, 5)
