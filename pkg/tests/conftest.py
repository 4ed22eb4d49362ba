import numpy as np
import pytest
from hypothesis import settings, strategies as st

from privmon.robustness import Trace
from privmon.stl import (TRUE, Formula, Interval, Op, always, conj, disj, eventually, ge, iff,
                         implies, le, neg, until)

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

WORKED_FORMULA = "(x >= 0) U[4,9) !(x >= 10)"


@st.composite
def intervals(draw, max_bound=8):
    lo = draw(st.integers(0, max_bound))
    if draw(st.booleans()):
        return Interval(lo, None)
    return Interval(lo, draw(st.integers(lo + 1, max_bound + 4)))


def formulas(max_leaves=6):
    atoms = st.one_of(
        st.builds(ge, st.integers(-6, 6)),
        st.builds(le, st.integers(-6, 6)),
        st.just(TRUE),
    )

    def extend(children):
        ivs = intervals()
        return st.one_of(
            st.builds(neg, children),
            st.builds(conj, children, children),
            st.builds(disj, children, children),
            st.builds(implies, children, children),
            st.builds(iff, children, children),
            st.builds(lambda a, b, iv: until(a, b, iv.lower, iv.upper), children, children, ivs),
            st.builds(lambda a, iv: eventually(a, iv.lower, iv.upper), children, ivs),
            st.builds(lambda a, iv: always(a, iv.lower, iv.upper), children, ivs),
        )

    return st.recursive(atoms, extend, max_leaves=max_leaves)


@st.composite
def traces(draw, min_len=1, max_len=6, max_gap=4, value_range=8):
    n = draw(st.integers(min_len, max_len))
    gaps = draw(st.lists(st.integers(1, max_gap), min_size=n - 1, max_size=n - 1))
    times = [0]
    for g in gaps:
        times.append(times[-1] + g)
    values = draw(st.lists(st.integers(-value_range, value_range), min_size=n, max_size=n))
    return Trace(times, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report -------------------------------------------------------------
#
# Acceptance tests record one line per criterion; the lines are printed in the
# terminal summary so they show up without -s.

_REPORT = pytest.StashKey[dict]()


class _Criterion:
    def __init__(self, results, number, title):
        self.results, self.number, self.title = results, number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        if not ok and not self.detail:
            self.detail = f"{exc_type.__name__}: {exc}"
        self.results[self.number] = (ok, self.title, self.detail)
        return False


@pytest.fixture
def criterion(request):
    results = request.config.stash.setdefault(_REPORT, {})
    return lambda number, title: _Criterion(results, number, title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_REPORT, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        ok, title, detail = results[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
