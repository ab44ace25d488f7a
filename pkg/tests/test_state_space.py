import itertools
from math import comb, gcd

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parrondo.state_space import (
    DihedralGroup,
    PlayerState,
    apply_permutation,
    compose,
    count_partition,
    dihedral_partition,
    flip,
    inverse,
    neighbor_winners,
    permute_states,
    reversal,
    rotation,
    singleton_partition,
    transfer,
)


def S(*bits):
    return PlayerState(bits)


def totient(n):
    return sum(1 for k in range(1, n + 1) if gcd(k, n) == 1)


def bracelets(N):
    """Burnside count of binary bracelets of length N."""
    necklaces = sum(totient(d) * 2 ** (N // d) for d in range(1, N + 1) if N % d == 0) // N
    reflections = 2 ** ((N + 1) // 2) if N % 2 else 3 * 2 ** (N // 2 - 1)
    return (necklaces + reflections) // 2


def brute_orbits(N):
    group = DihedralGroup.of(N)
    seen, orbits = set(), []
    for v in range(2 ** N):
        if v in seen:
            continue
        x = PlayerState.from_int(v, N)
        orbit = sorted({int(apply_permutation(x, g)) for g in group})
        seen.update(orbit)
        orbits.append(orbit)
    return orbits


states = st.integers(3, 9).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, 2 ** n - 1), st.integers(1, n))
)


# -- encoding and local moves ---------------------------------------------------------------

def test_integer_encoding_reads_x1_as_most_significant_bit():
    assert int(S(0, 1, 0, 1)) == 5
    assert PlayerState.from_int(12, 4).bits == (1, 1, 0, 0)
    assert str(PlayerState.from_int(3, 4)) == "0011"


def test_circular_indexing():
    x = S(1, 0, 0, 1)
    assert x[0] == x[4] == 1
    assert x[5] == x[1]


def test_invalid_components_and_sizes():
    with pytest.raises(ValueError):
        S(0, 2, 1)
    with pytest.raises(ValueError):
        S(0, 1)
    with pytest.raises(ValueError):
        PlayerState.from_int(8, 3)


@pytest.mark.parametrize(
    "x,i,expected",
    [(S(0, 1, 1, 0), 1, 1), (S(1, 1, 1), 2, 2), (S(1, 0, 0, 0, 1), 1, 1), (S(1, 0, 0, 1, 1), 5, 2)],
)
def test_neighbor_winners(x, i, expected):
    assert neighbor_winners(x, i) == expected


def test_index_errors():
    x = S(0, 0, 0)
    for op in (lambda: neighbor_winners(x, 0), lambda: flip(x, 4), lambda: transfer(x, 0, 1)):
        with pytest.raises(IndexError):
            op()
    with pytest.raises(ValueError):
        transfer(x, 1, 2)


def test_flip_examples():
    assert flip(S(0, 0, 0), 2) == S(0, 1, 0)
    assert flip(S(1, 1, 1, 1), 1) == S(0, 1, 1, 1)


def test_transfer_examples():
    for x2, x3, x4 in itertools.product((0, 1), repeat=3):
        assert transfer(S(1, x2, x3, x4), 1, -1) == S(0, x2, x3, 1)
    assert transfer(S(1, 1, 1), 2, 1) == S(1, 0, 1)
    assert transfer(S(0, 0, 0), 1, 1) == S(0, 1, 0)


@given(states)
def test_flip_is_an_involution(case):
    N, v, i = case
    x = PlayerState.from_int(v, N)
    assert flip(flip(x, i), i) == x
    assert sum(a != b for a, b in zip(flip(x, i).bits, x.bits)) == 1


@given(states, st.sampled_from([-1, 1]))
def test_transfer_is_idempotent_and_local(case, d):
    N, v, i = case
    x = PlayerState.from_int(v, N)
    y = transfer(x, i, d)
    assert transfer(y, i, d) == y
    assert y[i] == 0 and y[i + d] == 1
    changed = {j for j in range(1, N + 1) if x[j] != y[j]}
    assert changed <= {i, (i - 1 + d) % N + 1}


# -- permutations and the dihedral group ------------------------------------------------------

def test_permutation_examples():
    assert apply_permutation(S(1, 0, 0, 0), (2, 3, 4, 1)) == S(0, 0, 0, 1)
    assert apply_permutation(S(1, 1, 0, 0), (4, 3, 2, 1)) == S(0, 0, 1, 1)
    assert apply_permutation(S(1, 0, 1, 1), (1, 2, 3, 4)) == S(1, 0, 1, 1)
    with pytest.raises(ValueError):
        apply_permutation(S(1, 0, 1, 1), (1, 1, 3, 4))


@pytest.mark.parametrize("N", range(3, 10))
def test_dihedral_group_closure(N):
    group = DihedralGroup.of(N)
    elements = set(group)
    assert len(elements) == 2 * N == len(group)
    for a in elements:
        assert inverse(a) in elements
        for b in elements:
            assert compose(a, b) in elements
    # generated by the rotation and the reversal
    generated = {tuple(range(1, N + 1))}
    frontier = set(generated)
    while frontier:
        new = {compose(g, s) for g in frontier for s in group.generators} - generated
        generated |= new
        frontier = new
    assert generated == elements


@pytest.mark.parametrize("N", range(3, 9))
def test_neighbor_counts_commute_with_generators(N):
    for sigma in (rotation(N), reversal(N)):
        for v in range(2 ** N):
            x = PlayerState.from_int(v, N)
            xs = apply_permutation(x, sigma)
            for i in range(1, N + 1):
                assert neighbor_winners(xs, i) == neighbor_winners(x, sigma[i - 1])


@given(st.integers(3, 12).flatmap(lambda n: st.tuples(st.just(n), st.permutations(range(1, n + 1)))))
@settings(max_examples=50)
def test_vectorized_permutation_matches_scalar(case):
    N, sigma = case
    states = np.arange(2 ** N)
    images = permute_states(states, sigma, N)
    for v in range(0, 2 ** N, max(1, 2 ** N // 64)):
        assert images[v] == int(apply_permutation(PlayerState.from_int(v, N), sigma))


# -- partitions ---------------------------------------------------------------------------------

def test_dihedral_classes_at_n4():
    part = dihedral_partition(4)
    classes = [sorted(c.tolist()) for c in part.classes]
    assert classes == [[0], [1, 2, 4, 8], [3, 6, 9, 12], [5, 10], [7, 11, 13, 14], [15]]
    assert part.representatives.tolist() == [0, 1, 3, 5, 7, 15]


def test_dihedral_classes_at_n3_follow_popcount():
    part = dihedral_partition(3)
    assert len(part) == 4
    assert [sorted(c.tolist()) for c in part.classes] == [sorted(c.tolist()) for c in count_partition(3).classes]


@pytest.mark.parametrize("N", range(3, 10))
def test_dihedral_partition_matches_brute_force(N):
    part = dihedral_partition(N)
    assert [sorted(c.tolist()) for c in part.classes] == brute_orbits(N)


@pytest.mark.parametrize("N", range(3, 21))
def test_dihedral_class_count_matches_burnside(N):
    assert len(dihedral_partition(N)) == bracelets(N)


@pytest.mark.parametrize("N", range(3, 10))
def test_partition_invariants(N):
    part = dihedral_partition(N)
    covered = np.concatenate(part.classes)
    assert sorted(covered.tolist()) == list(range(2 ** N))
    for k, members in enumerate(part.classes):
        assert (part.class_of[members] == k).all()
        assert part.representatives[k] == members.min()
        assert (2 * N) % len(members) == 0
    counts = count_partition(N).class_of
    for members in part.classes:
        assert len(set(counts[members].tolist())) == 1


def test_count_partition():
    assert len(count_partition(4)) == 5
    assert count_partition(3).sizes.tolist() == [1, 3, 3, 1]
    assert count_partition(5).sizes[2] == 10
    for N in range(3, 10):
        assert count_partition(N).sizes.tolist() == [comb(N, k) for k in range(N + 1)]
        assert count_partition(N).levels.tolist() == list(range(N + 1))


def test_partition_range_checks():
    with pytest.raises(ValueError):
        dihedral_partition(2)
    with pytest.raises(ValueError):
        dihedral_partition(21)


def test_singleton_partition_and_indicator():
    part = singleton_partition(3)
    assert len(part) == 8
    ind = dihedral_partition(4).indicator().toarray()
    assert ind.shape == (16, 6)
    assert (ind.sum(axis=1) == 1).all()
    assert ind.sum(axis=0).tolist() == [1, 4, 4, 2, 4, 1]
