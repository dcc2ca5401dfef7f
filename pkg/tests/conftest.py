from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from privcpd.divergence import Distribution


@st.composite
def pmfs(draw, q=None, min_q=2, max_q=6, allow_zeros=True):
    size = q if q is not None else draw(st.integers(min_q, max_q))
    lo = 0.0 if allow_zeros else 1e-3
    w = draw(st.lists(st.floats(lo, 1.0), min_size=size, max_size=size))
    w = np.asarray(w)
    if w.sum() <= 1e-6:
        w = np.ones(size)
    return Distribution(w / w.sum())


@st.composite
def pmf_pairs(draw, min_q=2, max_q=6, allow_zeros=True):
    q = draw(st.integers(min_q, max_q))
    return draw(pmfs(q=q, allow_zeros=allow_zeros)), draw(pmfs(q=q, allow_zeros=allow_zeros))


def random_pairs(rng: np.random.Generator, count: int, q: int):
    a = rng.dirichlet(np.ones(q), size=count)
    b = rng.dirichlet(np.ones(q), size=count)
    return [(Distribution(x), Distribution(y)) for x, y in zip(a, b)]


# acceptance gate lines, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
