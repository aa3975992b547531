import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from mobsim.tableau import FlowVector, GridSpec, MobilityTableau, manhattan_length, shift_cost


def random_tableau(rng, grid, n_types, fractional=False):
    flows = {}
    for _ in range(n_types):
        v = (int(rng.integers(1, grid.rows_m + 1)), int(rng.integers(1, grid.cols_n + 1)),
             int(rng.integers(1, grid.rows_m + 1)), int(rng.integers(1, grid.cols_n + 1)))
        w = float(rng.uniform(0.05, 3.0)) if fractional else float(rng.integers(1, 4))
        flows[v] = flows.get(v, 0.0) + w
    return MobilityTableau(grid, flows)


def brute_force_cost(X, Y):
    """Least cost for integer multisets by enumerating every partial matching.

    Independent of the solvers: expands multiplicities into unit vectors and
    tries every injection of a subset of X's vectors into Y's.
    """
    xs = [v for v, w in X.flows.items() for _ in range(int(round(w)))]
    ys = [v for v, w in Y.flows.items() for _ in range(int(round(w)))]
    if len(xs) > len(ys):
        xs, ys = ys, xs
    best = float("inf")
    # each x goes to a distinct y or to "delete" (None)
    for choice in itertools.product([None, *range(len(ys))], repeat=len(xs)):
        used = [c for c in choice if c is not None]
        if len(used) != len(set(used)):
            continue
        cost = 0
        for x, c in zip(xs, choice):
            cost += manhattan_length(x) if c is None else shift_cost(x, ys[c])
        cost += sum(manhattan_length(y) for i, y in enumerate(ys) if i not in used)
        best = min(best, cost)
    return best


@st.composite
def tableau_pairs(draw, max_side=5, max_types=6, fractional=True):
    m = draw(st.integers(1, max_side))
    n = draw(st.integers(1, max_side))
    grid = GridSpec(m, n)
    vec = st.tuples(st.integers(1, m), st.integers(1, n), st.integers(1, m), st.integers(1, n))
    weight = st.floats(0.1, 5.0) if fractional else st.integers(1, 4).map(float)
    out = []
    for _ in range(3):
        out.append(MobilityTableau(grid, draw(st.dictionaries(vec, weight, max_size=max_types))))
    return out
