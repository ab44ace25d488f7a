"""Player configurations on a circle, local moves, and the dihedral action.

A configuration of ``N`` players is a bit string ``(x_1, ..., x_N)`` with
``x_i = 1`` for a winner and ``0`` for a loser.  The integer encoding reads the
bit string in binary with ``x_1`` as the most significant bit, so for ``N = 4``
the state ``(0, 1, 0, 1)`` is the integer 5.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

MIN_PLAYERS = 3
MAX_FULL_PLAYERS = 20


def _check_n(N: int, cap: int | None = MAX_FULL_PLAYERS) -> None:
    if not isinstance(N, (int, np.integer)) or N < MIN_PLAYERS:
        raise ValueError(f"number of players must be an integer >= {MIN_PLAYERS}, got {N!r}")
    if cap is not None and N > cap:
        raise ValueError(f"N={N} exceeds the full state-space cap of {cap}")


def _check_index(i: int, N: int) -> None:
    if not 1 <= i <= N:
        raise IndexError(f"player index {i} out of range 1..{N}")


# -- integer-level helpers (used by the matrix builders) ----------------------

def bit(state: int, i: int, N: int) -> int:
    """Status of player ``i`` (1-based) in the integer-encoded ``state``."""
    return (state >> (N - i)) & 1


def neighbor_count(state: int, i: int, N: int) -> int:
    left = i - 1 if i > 1 else N
    right = i + 1 if i < N else 1
    return bit(state, left, N) + bit(state, right, N)


def flip_int(state: int, i: int, N: int) -> int:
    return state ^ (1 << (N - i))


def transfer_int(state: int, i: int, direction: int, N: int) -> int:
    j = (i - 1 + direction) % N + 1
    return (state & ~(1 << (N - i))) | (1 << (N - j))


def popcount(state: int) -> int:
    return bin(state).count("1")


# -- PlayerState ----------------------------------------------------------------

@dataclass(frozen=True)
class PlayerState:
    """Immutable winner/loser configuration ``(x_1, ..., x_N)``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"state components must be 0 or 1, got {self.bits!r}")
        _check_n(len(bits), cap=None)
        object.__setattr__(self, "bits", bits)

    @property
    def N(self) -> int:
        return len(self.bits)

    @classmethod
    def from_int(cls, value: int, N: int) -> "PlayerState":
        if not 0 <= value < 2 ** N:
            raise ValueError(f"state {value} out of range for N={N}")
        return cls(tuple((value >> (N - i)) & 1 for i in range(1, N + 1)))

    def __int__(self) -> int:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value

    def __getitem__(self, i: int) -> int:
        """Component ``x_i`` with circular indexing (``x_0 = x_N``, ``x_{N+1} = x_1``)."""
        return self.bits[(i - 1) % self.N]

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def neighbor_winners(x: PlayerState, i: int) -> int:
    """Number of winners among the two nearest neighbors of player ``i``."""
    _check_index(i, x.N)
    return x[i - 1] + x[i + 1]


def flip(x: PlayerState, i: int) -> PlayerState:
    """``x`` with the status of player ``i`` complemented."""
    _check_index(i, x.N)
    bits = list(x.bits)
    bits[i - 1] ^= 1
    return PlayerState(tuple(bits))


def transfer(x: PlayerState, i: int, direction: int) -> PlayerState:
    """Player ``i`` becomes a loser and its neighbor ``i + direction`` a winner."""
    _check_index(i, x.N)
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction!r}")
    bits = list(x.bits)
    bits[i - 1] = 0
    bits[(i - 1 + direction) % x.N] = 1
    return PlayerState(tuple(bits))


def _check_permutation(sigma: Sequence[int], N: int) -> tuple[int, ...]:
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(1, N + 1)):
        raise ValueError(f"{sigma!r} is not a permutation of 1..{N}")
    return sigma


def apply_permutation(x: PlayerState, sigma: Sequence[int]) -> PlayerState:
    """Return ``x_sigma = (x_{sigma(1)}, ..., x_{sigma(N)})``."""
    sigma = _check_permutation(sigma, x.N)
    return PlayerState(tuple(x.bits[s - 1] for s in sigma))


# -- dihedral group ---------------------------------------------------------------

def rotation(N: int) -> tuple[int, ...]:
    return tuple(range(2, N + 1)) + (1,)


def reversal(N: int) -> tuple[int, ...]:
    return tuple(range(N, 0, -1))


def compose(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    """Permutation ``j -> sigma(tau(j))``."""
    return tuple(sigma[t - 1] for t in tau)


def inverse(sigma: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(sigma)
    for j, s in enumerate(sigma, start=1):
        inv[s - 1] = j
    return tuple(inv)


@dataclass(frozen=True)
class DihedralGroup:
    """Rotations and reflections of ``N`` players seated on a circle.

    ``elements[k]`` for ``k < N`` is the ``k``-fold power of the rotation
    ``(2, 3, ..., N, 1)``; ``elements[N + k]`` is that rotation composed with
    the reversal ``(N, ..., 1)``.
    """

    N: int
    elements: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, N: int) -> "DihedralGroup":
        _check_n(N, cap=None)
        rot, rev = rotation(N), reversal(N)
        rotations = [tuple(range(1, N + 1))]
        for _ in range(N - 1):
            rotations.append(compose(rotations[-1], rot))
        reflections = [compose(r, rev) for r in rotations]
        return cls(N, tuple(rotations + reflections))

    @property
    def generators(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return rotation(self.N), reversal(self.N)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


def permute_states(states: np.ndarray, sigma: Sequence[int], N: int) -> np.ndarray:
    """Vectorized ``x -> x_sigma`` on integer-encoded states."""
    states = np.asarray(states, dtype=np.int64)
    out = np.zeros_like(states)
    for j, s in enumerate(sigma, start=1):
        out |= ((states >> (N - s)) & 1) << (N - j)
    return out


# -- partitions ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Partition:
    """Equivalence classes of integer-encoded states ``0 .. 2**N - 1``.

    Classes are ordered by their representative, which is the smallest member.
    """

    N: int
    class_of: np.ndarray
    classes: tuple[np.ndarray, ...]
    representatives: np.ndarray
    kind: str = "custom"

    @classmethod
    def from_labels(cls, N: int, labels: np.ndarray, kind: str = "custom") -> "Partition":
        """Build a partition from arbitrary per-state labels (equal label = same class)."""
        labels = np.asarray(labels)
        if labels.shape != (2 ** N,):
            raise ValueError(f"expected {2 ** N} labels, got shape {labels.shape}")
        # first occurrence of each label is the smallest member
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        class_of = rank[inv.ravel()]
        by_class = np.argsort(class_of, kind="stable")
        bounds = np.cumsum(np.bincount(class_of, minlength=len(order)))[:-1]
        classes = tuple(np.split(by_class, bounds))
        for arr in classes:
            arr.setflags(write=False)
        representatives = first[order]
        class_of.setflags(write=False)
        representatives.setflags(write=False)
        return cls(N, class_of, classes, representatives, kind)

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.classes])

    @property
    def levels(self) -> np.ndarray:
        """Number of winners in each class representative."""
        return np.array([popcount(int(r)) for r in self.representatives])

    def indicator(self):
        """Sparse ``2**N x K`` matrix with a 1 at (state, class of state)."""
        from scipy import sparse

        n = 2 ** self.N
        return sparse.csr_array(
            (np.ones(n), (np.arange(n), self.class_of)), shape=(n, len(self))
        )


@lru_cache(maxsize=None)
def dihedral_partition(N: int) -> Partition:
    """Orbits of ``{0,1}^N`` under rotations and reflections of the circle."""
    _check_n(N)
    mask = (1 << N) - 1
    states = np.arange(2 ** N, dtype=np.int64)
    mirrored = permute_states(states, reversal(N), N)
    canon = states.copy()
    for base in (states, mirrored):
        image = base
        for _ in range(N):
            np.minimum(canon, image, out=canon)
            image = ((image << 1) | (image >> (N - 1))) & mask
    return Partition.from_labels(N, canon, kind="dihedral")


@lru_cache(maxsize=None)
def count_partition(N: int) -> Partition:
    """Classes of states with the same number of winners, ordered by that number."""
    _check_n(N)
    states = np.arange(2 ** N, dtype=np.int64)
    counts = np.zeros_like(states)
    for k in range(N):
        counts += (states >> k) & 1
    part = Partition.from_labels(N, counts, kind="count")
    assert [popcount(int(r)) for r in part.representatives] == list(range(N + 1))
    return part


def singleton_partition(N: int) -> Partition:
    _check_n(N)
    return Partition.from_labels(N, np.arange(2 ** N), kind="singleton")


__all__ = [
    "MAX_FULL_PLAYERS",
    "PlayerState",
    "neighbor_winners",
    "flip",
    "transfer",
    "apply_permutation",
    "DihedralGroup",
    "Partition",
    "dihedral_partition",
    "count_partition",
    "singleton_partition",
]
