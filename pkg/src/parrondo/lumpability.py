"""Strong lumpability of a transition matrix with respect to a partition."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import sparse

from .chains import StochasticMatrix, to_dense
from .state_space import Partition, permute_states

DEFAULT_TOL = 1e-12
_DENSE_BLOCK = 2_000_000


@dataclass(frozen=True)
class Witness:
    """Two states of one class sending different mass into a target class."""

    source_class: int
    x: int
    x_prime: int
    target_class: int
    mass_x: float
    mass_x_prime: float
    source_members: tuple[int, ...] = ()
    target_members: tuple[int, ...] = ()

    @property
    def discrepancy(self):
        return abs(self.mass_x - self.mass_x_prime)


@dataclass(frozen=True)
class LumpabilityReport:
    lumpable: bool
    max_discrepancy: float
    witness: Witness | None = None
    witnesses: tuple[Witness, ...] = field(default=(), repr=False)
    tol: float = DEFAULT_TOL

    def describe(self) -> str:
        if self.lumpable:
            return f"lumpable (max discrepancy {float(self.max_discrepancy):.3g})"
        w = self.witness
        return (
            f"states {w.x} and {w.x_prime} of class {w.source_class} send "
            f"{float(w.mass_x):.17g} vs {float(w.mass_x_prime):.17g} into class {w.target_class}"
        )

    def to_dict(self) -> dict:
        out = {
            "lumpable": self.lumpable,
            "max_discrepancy": float(self.max_discrepancy),
            "tol": float(self.tol),
            "violations": len(self.witnesses),
            "witness": None,
        }
        if self.witness is not None:
            w = self.witness
            out["witness"] = {
                "source_class": list(w.source_members) or w.source_class,
                "x": w.x,
                "x_prime": w.x_prime,
                "target_class": list(w.target_members) or w.target_class,
                "mass_x": float(w.mass_x),
                "mass_x_prime": float(w.mass_x_prime),
            }
        return out


def _class_structure(P: StochasticMatrix, part) -> tuple[np.ndarray, list[np.ndarray]]:
    if isinstance(part, Partition):
        if P.dim != 2 ** part.N:
            raise ValueError(f"matrix of dimension {P.dim} does not match a partition of {2 ** part.N} states")
        return np.asarray(part.class_of), [np.asarray(c) for c in part.classes]
    labels = np.asarray(part)
    if labels.shape != (P.dim,):
        raise ValueError(f"expected {P.dim} class labels, got shape {labels.shape}")
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    class_of = rank[inv.ravel()]
    classes = [np.flatnonzero(class_of == k) for k in range(len(order))]
    return class_of, classes


def _aggregate(data, class_of: np.ndarray, K: int):
    n = data.shape[0]
    if sparse.issparse(data):
        ind = sparse.csr_array((np.ones(n), (np.arange(n), class_of)), shape=(n, K))
        return sparse.csr_array(data @ ind)
    out = np.empty((n, K), dtype=data.dtype)
    for k in range(K):
        out[:, k] = data[:, class_of == k].sum(axis=1)
    return out


def check_lumpable(P: StochasticMatrix, part, tol: float | None = None) -> LumpabilityReport:
    """Exhaustively test whether every row of a class sends equal mass to each class.

    ``part`` is a :class:`Partition` of the ``2**N`` states or an array of
    class labels aligned with the rows of ``P``.  The reported witness is the
    pair of states with the largest mass difference (first such pair in
    class-major order), listed with the smaller state first.
    """
    exact = P.exact
    if tol is None:
        tol = 0 if exact else DEFAULT_TOL
    class_of, classes = _class_structure(P, part)
    K = len(classes)
    agg = _aggregate(P.data, class_of, K)

    witnesses: list[Witness] = []
    best: Witness | None = None
    best_disc = max_disc = Fraction(0) if exact else 0.0
    members_of = (lambda k: tuple(int(s) for s in classes[k])) if isinstance(part, Partition) else (lambda k: ())

    # classes are processed in blocks so the dense slice stays bounded
    start = 0
    while start < K:
        stop, rows = start, 0
        while stop < K and (rows == 0 or (rows + len(classes[stop])) * K <= _DENSE_BLOCK):
            rows += len(classes[stop])
            stop += 1
        idx = np.concatenate(classes[start:stop])
        block = to_dense(agg[idx]) if sparse.issparse(agg) else agg[idx]
        offset = 0
        for c in range(start, stop):
            size = len(classes[c])
            sub = block[offset:offset + size]
            offset += size
            if size == 1:
                continue
            hi_idx = np.argmax(sub, axis=0)
            lo_idx = np.argmin(sub, axis=0)
            cols = np.arange(K)
            disc = sub[hi_idx, cols] - sub[lo_idx, cols]
            for d in np.flatnonzero(disc > tol):
                a, b = sorted((int(hi_idx[d]), int(lo_idx[d])))
                w = Witness(
                    c, int(classes[c][a]), int(classes[c][b]), int(d),
                    sub[a, d], sub[b, d], members_of(c), members_of(int(d)),
                )
                witnesses.append(w)
                if disc[d] > best_disc:
                    best_disc, best = disc[d], w
            m = disc.max()
            if m > max_disc:
                max_disc = m
        start = stop

    if best is None:
        return LumpabilityReport(True, max_disc, None, (), tol)
    return LumpabilityReport(False, max_disc, best, tuple(witnesses), tol)


def check_symmetry_condition(P: StochasticMatrix, generators: Sequence[Sequence[int]], tol: float | None = None) -> bool:
    """True iff ``P(x, y) == P(x_sigma, y_sigma)`` for all states and each generator."""
    n = P.dim
    N = n.bit_length() - 1
    if 2 ** N != n:
        raise ValueError("symmetry condition needs a matrix over all 2**N states")
    if tol is None:
        tol = 0 if P.exact else DEFAULT_TOL
    states = np.arange(n)
    for sigma in generators:
        perm = permute_states(states, sigma, N)
        if sparse.issparse(P.data):
            permuted = P.data[perm][:, perm]
            diff = abs(permuted - P.data)
            if diff.nnz and diff.max() > tol:
                return False
        else:
            permuted = P.data[np.ix_(perm, perm)]
            if tol == 0:
                if not (permuted == P.data).all():
                    return False
            elif np.max(np.abs(np.asarray(permuted - P.data, dtype=float))) > tol:
                return False
    return True


__all__ = ["Witness", "LumpabilityReport", "check_lumpable", "check_symmetry_condition", "DEFAULT_TOL"]
