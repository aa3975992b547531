import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobsim.errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidParameterError,
    InvalidPermutationError,
    OutOfRangeError,
)
from mobsim.tableau import (
    CellCoord,
    Dihedral,
    FlowVector,
    GridSpec,
    MobilityTableau,
    apply_permutation,
    dihedral_transform,
    embed,
    extract_slice,
    manhattan_length,
    normalize,
    reduce_common,
    shift_cost,
    slice_origins,
    swap_permutation,
    total_mass_cost,
)

from conftest import tableau_pairs


def test_grid_validation():
    with pytest.raises(InvalidParameterError):
        GridSpec(0, 3)
    with pytest.raises(InvalidParameterError):
        GridSpec(3, 3, 0.0)
    assert GridSpec(4, 5).n_cells == 20


def test_tableau_rejects_bad_flows():
    g = GridSpec(3, 3)
    with pytest.raises(OutOfRangeError):
        MobilityTableau(g, {(1, 1, 4, 1): 1.0})
    with pytest.raises(InvalidParameterError):
        MobilityTableau(g, {(1, 1, 2, 1): -1.0})
    assert len(MobilityTableau(g, {(1, 1, 2, 1): 0.0})) == 0


def test_flow_vectors_are_positioned():
    a = FlowVector(1, 1, 2, 2)
    b = FlowVector(2, 2, 3, 3)
    assert a != b  # same displacement, different position
    assert a.origin == CellCoord(1, 1) and a.dest == CellCoord(2, 2)


@pytest.mark.parametrize("v, expected", [
    ((3, 1, 3, 3), 2),
    ((5, 7, 5, 7), 0),
    ((1, 1, 4, 3), 5),
])
def test_manhattan_length(v, expected):
    assert manhattan_length(FlowVector(*v)) == expected


@pytest.mark.parametrize("v, v2, expected", [
    ((1, 2, 2, 1), (2, 3, 3, 2), 4),
    ((1, 2, 2, 1), (1, 2, 2, 1), 0),
    ((1, 1, 1, 2), (1, 1, 1, 3), 1),
])
def test_shift_cost(v, v2, expected):
    assert shift_cost(FlowVector(*v), FlowVector(*v2)) == expected
    assert shift_cost(FlowVector(*v2), FlowVector(*v)) == expected


def test_shift_cost_grid_mismatch():
    with pytest.raises(DimensionMismatchError):
        shift_cost(FlowVector(1, 1, 1, 1), FlowVector(1, 1, 1, 1), GridSpec(3, 3), GridSpec(4, 3))


@given(st.tuples(*[st.integers(1, 9)] * 4))
def test_length_zero_iff_self_loop(v):
    v = FlowVector(*v)
    assert manhattan_length(v) >= 0
    assert (manhattan_length(v) == 0) == v.is_self_loop


def test_total_mass_cost():
    g = GridSpec(3, 3)
    assert total_mass_cost(MobilityTableau.empty(g)) == 0
    assert total_mass_cost(MobilityTableau(g, {(1, 1, 2, 2): 2.0})) == 4.0
    assert total_mass_cost(MobilityTableau(g, {(1, 2, 2, 1): 1, (3, 1, 3, 3): 1})) == 4


def test_reduce_common_examples():
    g = GridSpec(3, 3)
    S = MobilityTableau(g, {(1, 1, 2, 2): 2.0, (3, 3, 1, 1): 1.0})
    a, b = reduce_common(S, S)
    assert a.is_empty() and b.is_empty()

    X = MobilityTableau(g, {(1, 1, 2, 2): 3.0})
    Y = MobilityTableau(g, {(1, 1, 2, 2): 1.0})
    a, b = reduce_common(X, Y)
    assert a == MobilityTableau(g, {(1, 1, 2, 2): 2.0}) and b.is_empty()

    Z = MobilityTableau(g, {(3, 3, 2, 2): 1.0})
    assert reduce_common(X, Z) == (X, Z)

    with pytest.raises(DimensionMismatchError):
        reduce_common(X, MobilityTableau.empty(GridSpec(4, 4)))


def test_normalize():
    g = GridSpec(3, 3)
    v1, v2 = FlowVector(1, 1, 2, 2), FlowVector(2, 2, 3, 3)
    N = normalize(MobilityTableau(g, {v1: 4, v2: 6}))
    assert N.get(v1) == pytest.approx(0.4) and N.get(v2) == pytest.approx(0.6)
    assert normalize(N) == N
    assert normalize(MobilityTableau(g, {v1: 5})).get(v1) == 1.0
    with pytest.raises(DegenerateInputError):
        normalize(MobilityTableau.empty(g))


def test_apply_permutation_examples():
    g = GridSpec(3, 3)
    S = MobilityTableau(g, {(1, 1, 2, 2): 1.0})
    assert apply_permutation(S, {}) == S
    swapped = apply_permutation(S, {(1, 1): (1, 2), (1, 2): (1, 1)})
    assert swapped == MobilityTableau(g, {(1, 2, 2, 2): 1.0})
    with pytest.raises(InvalidPermutationError):
        apply_permutation(S, {(1, 1): (1, 2)})
    with pytest.raises(InvalidPermutationError):
        apply_permutation(S, {(1, 1): (4, 4), (4, 4): (1, 1)})


def test_swap_permutation_composes_left_to_right():
    perm = swap_permutation([((1, 1), (1, 2)), ((1, 2), (1, 3))])
    # (1,1) -> (1,2) -> (1,3); (1,2) -> (1,1); (1,3) -> (1,2)
    assert perm == {(1, 1): (1, 3), (1, 2): (1, 1), (1, 3): (1, 2)}


@settings(max_examples=50, deadline=None)
@given(tableau_pairs(), st.randoms(use_true_random=False))
def test_permutation_preserves_totals(tabs, rnd):
    S = tabs[0]
    cells = S.grid.cells()
    shuffled = cells[:]
    rnd.shuffle(shuffled)
    T = apply_permutation(S, dict(zip(cells, shuffled)))
    assert T.total_flow == pytest.approx(S.total_flow, abs=1e-12)
    # distinct vectors stay distinct under a bijection
    assert len(T) == len(S)


def test_dihedral_examples():
    g = GridSpec(5, 5)
    S = MobilityTableau(g, {(1, 1, 2, 3): 1.0})
    assert dihedral_transform(S, Dihedral.ROT180) == MobilityTableau(g, {(5, 5, 4, 3): 1.0})
    assert dihedral_transform(S, Dihedral.IDENTITY) == S
    T = S
    for _ in range(4):
        T = dihedral_transform(T, Dihedral.ROT90)
    assert T == S
    with pytest.raises(DimensionMismatchError):
        dihedral_transform(MobilityTableau.empty(GridSpec(3, 4)), Dihedral.ROT90)
    # half turn and axis flips work on rectangles
    R = MobilityTableau(GridSpec(3, 4), {(1, 1, 3, 4): 1.0})
    assert dihedral_transform(R, Dihedral.ROT180) == MobilityTableau(GridSpec(3, 4), {(3, 4, 1, 1): 1.0})


def test_dihedral_group_closure_and_inverse():
    g = GridSpec(4, 4)
    S = MobilityTableau(g, {(1, 2, 3, 4): 1.0, (2, 1, 1, 1): 2.0})
    for a in Dihedral:
        assert dihedral_transform(dihedral_transform(S, a), a.inverse()) == S
        for b in Dihedral:
            c = a.compose(b)
            assert c in Dihedral
            assert dihedral_transform(dihedral_transform(S, b), a) == dihedral_transform(S, c)
    assert len({a.compose(b) for a in Dihedral for b in Dihedral}) == 8


def test_dihedral_preserves_totals():
    rng = np.random.default_rng(3)
    g = GridSpec(6, 6)
    S = MobilityTableau(g, {tuple(rng.integers(1, 7, 4)): float(rng.uniform(0.1, 2)) for _ in range(20)})
    for e in Dihedral:
        T = dihedral_transform(S, e)
        assert len(T) == len(S)
        assert T.total_flow == S.total_flow
        assert total_mass_cost(T) == pytest.approx(total_mass_cost(S))


def test_extract_slice():
    g = GridSpec(10, 10)
    inside = MobilityTableau(g, {(4, 4, 6, 5): 2.0})
    sl = extract_slice(inside, (3, 3), 5)
    assert sl.grid.shape == (5, 5)
    assert sl == MobilityTableau(GridSpec(5, 5), {(2, 2, 4, 3): 2.0})
    crossing = MobilityTableau(g, {(4, 4, 9, 5): 1.0})
    assert extract_slice(crossing, (3, 3), 5).is_empty()
    with pytest.raises(OutOfRangeError):
        extract_slice(inside, (7, 7), 5)


def test_slice_window_counts():
    assert len(slice_origins(GridSpec(40, 40), 5)) == 36 * 36
    assert len(slice_origins(GridSpec(15, 15), 5)) == 11 * 11


def test_embed_roundtrip():
    small = MobilityTableau(GridSpec(3, 3), {(1, 1, 3, 2): 1.5})
    big = embed(small, GridSpec(8, 8), (2, 4))
    assert extract_slice(big, (3, 5), 3) == small


def test_tableau_is_immutable():
    S = MobilityTableau(GridSpec(2, 2), {(1, 1, 2, 2): 1.0})
    with pytest.raises(TypeError):
        S.flows[FlowVector(1, 1, 1, 1)] = 3.0
