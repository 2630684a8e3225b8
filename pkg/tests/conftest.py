import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from obsnet import Digraph, ObserverNetworkSystem  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

G7_EDGES = [(1, 2), (2, 1), (3, 4), (4, 5), (5, 3), (2, 6), (4, 6), (6, 7)]


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def g7():
    return Digraph.from_edges(7, G7_EDGES)


@pytest.fixture
def two_cycle():
    return Digraph.from_edges(2, [(1, 2), (2, 1)])


def twocycle_system(C1=1.0, C2=0.0, H1=1.0, H2=1.0, A=1.0):
    g = Digraph.from_edges(2, [(1, 2), (2, 1)])
    return ObserverNetworkSystem(A=[[A]], C=[[[C1]], [[C2]]], H=[[[H1]], [[H2]]], graph=g)


@st.composite
def digraphs(draw, max_nodes=8):
    N = draw(st.integers(1, max_nodes))
    pairs = [(j, i) for j in range(1, N + 1) for i in range(1, N + 1) if i != j]
    edges = draw(st.sets(st.sampled_from(pairs))) if pairs else set()
    return Digraph(N, frozenset(edges))


def rational_rank(matrix) -> int:
    """Gauss-Jordan over the rationals; an oracle independent of Bareiss."""
    rows = [[Fraction(int(x)) for x in row] for row in np.asarray(matrix).tolist()]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][c] != 0:
                f = rows[r][c] / rows[rank][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def brute_force_clusters(g: Digraph):
    """Maximal elements of {reach(v)}, each paired with {v : reach(v) = cluster}."""
    succ = {v: [h for (t, h) in g.edges if t == v] for v in g.vertices}

    def closure(v):
        seen, todo = {v}, [v]
        while todo:
            u = todo.pop()
            for w in succ[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return frozenset(seen)

    reaches = {v: closure(v) for v in g.vertices}
    sets = set(reaches.values())
    maximal = [s for s in sets if not any(s < t for t in sets)]
    return {s: frozenset(v for v in g.vertices if reaches[v] == s) for s in maximal}


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
