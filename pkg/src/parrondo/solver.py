"""Stationary distributions and equilibrium mean profits.

``stationary`` restricts the chain to its unique closed communicating class
and applies Grassmann-Taksar-Heyman elimination.  Chains whose transitions
only move between adjacent winner-count levels (every chain in this
package) are eliminated level by level when they are large, which is the
same state reduction performed one block at a time.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .chains import (
    GameParams,
    SignedMatrix,
    StochasticMatrix,
    build_dihedral,
    build_full,
    build_li,
    normalize_game,
    signed,
    to_dense,
)

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DENSE_LIMIT = 400
DIHEDRAL_MAX_N = 19
FULL_MAX_N = 14


class MultipleRecurrentClasses(ValueError):
    """The chain has more than one closed communicating class."""

    def __init__(self, classes):
        self.classes = classes
        super().__init__(f"chain has {len(classes)} recurrent classes; stationary distribution is not unique")


class NumericalFailure(RuntimeError):
    pass


@dataclass
class StationaryResult:
    pi: np.ndarray
    support: np.ndarray
    residual: float

    def __iter__(self):
        return iter(self.pi)


# -- communicating classes ------------------------------------------------------------

def _pattern(data) -> sparse.csr_array:
    if sparse.issparse(data):
        m = sparse.csr_array(data, copy=True)
        m.eliminate_zeros()
        return m
    return sparse.csr_array(np.asarray(data != 0, dtype=float))


def recurrent_classes(data) -> list[np.ndarray]:
    """Closed strongly connected components of the transition graph."""
    pat = _pattern(data).tocoo()
    n = pat.shape[0]
    _, labels = connected_components(pat, directed=True, connection="strong")
    leaving = np.zeros(labels.max() + 1, dtype=bool)
    crossing = labels[pat.row] != labels[pat.col]
    leaving[labels[pat.row[crossing]]] = True
    closed = [k for k in range(labels.max() + 1) if not leaving[k]]
    return [np.flatnonzero(labels == k) for k in closed]


# -- elimination kernels -------------------------------------------------------------------

def gth(A: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible stochastic (or Metzler) matrix by GTH elimination.

    Only off-diagonal entries are read, so no subtraction ever occurs.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if not s > 0:
            raise NumericalFailure(f"GTH pivot {k} vanished; chain is not irreducible")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        x[k] = x[:k] @ A[:k, k]
    return x / x.sum()


def gth_exact(A) -> list[Fraction]:
    """GTH elimination in exact rational arithmetic."""
    A = [[Fraction(v) for v in row] for row in A]
    n = len(A)
    for k in range(n - 1, 0, -1):
        s = sum(A[k][:k], Fraction(0))
        if s == 0:
            raise NumericalFailure(f"GTH pivot {k} vanished; chain is not irreducible")
        for i in range(k):
            A[i][k] /= s
        for i in range(k):
            aik = A[i][k]
            if aik:
                row_i, row_k = A[i], A[k]
                for j in range(k):
                    if row_k[j]:
                        row_i[j] += aik * row_k[j]
    x = [Fraction(0)] * n
    x[0] = Fraction(1)
    for k in range(1, n):
        x[k] = sum((x[i] * A[i][k] for i in range(k)), Fraction(0))
    total = sum(x, Fraction(0))
    return [v / total for v in x]


def _level_blocks(P: sparse.csr_array, levels: np.ndarray):
    """Index blocks by level, or None if some transition skips a level."""
    present = np.unique(levels)
    rank = np.searchsorted(present, levels)
    coo = P.tocoo()
    if np.any(np.abs(rank[coo.row] - rank[coo.col]) > 1):
        return None
    return [np.flatnonzero(rank == k) for k in range(len(present))]


def gth_by_levels(P: sparse.csr_array, blocks: list[np.ndarray]) -> np.ndarray:
    """Block GTH for a chain that moves between adjacent levels only.

    Levels are censored from the top down.  With ``S`` the within-level
    block of the chain censored on levels ``<= k + 1``, the diagonal of
    ``I - S`` is formed from off-diagonal and exit mass so it stays
    subtraction-free; ``pi_{k+1} = pi_k U_k (I - S)^{-1}``.
    """
    P = sparse.csr_array(P)
    sub = lambda a, b: P[a][:, b].toarray()
    top = len(blocks) - 1
    S = sub(blocks[top], blocks[top])
    exit_mass = sub(blocks[top], blocks[top - 1]).sum(axis=1) if top > 0 else None
    carriers = []
    for k in range(top - 1, -1, -1):
        hi, lo = blocks[k + 1], blocks[k]
        M = -S
        off = S.sum(axis=1) - np.diag(S)
        np.fill_diagonal(M, off + exit_mass)
        U = sub(lo, hi)
        D = sub(hi, lo)
        R = np.linalg.solve(M.T, U.T).T
        carriers.append(R)
        S = sub(lo, lo) + R @ D
        exit_mass = sub(lo, blocks[k - 1]).sum(axis=1) if k > 0 else None
    pis = [gth(S)]
    for R in reversed(carriers):
        pis.append(pis[-1] @ R)
    x = np.zeros(P.shape[0])
    for idx, part in zip(blocks, pis):
        x[idx] = part
    if np.any(x < 0):
        x = np.maximum(x, 0.0)
    return x / x.sum()


def _residual(pi, data) -> float:
    if sparse.issparse(data):
        return float(np.max(np.abs(data.T @ pi - pi)))
    if data.dtype == object:
        n = len(pi)
        worst = max(abs(sum(pi[i] * data[i, j] for i in range(n)) - pi[j]) for j in range(n))
        return float(worst)
    return float(np.max(np.abs(pi @ data - pi)))


def stationary(P: StochasticMatrix, check: bool = True) -> StationaryResult:
    """Unique stationary distribution of ``P``, zero on transient states.

    Raises :class:`MultipleRecurrentClasses` when the closed class is not
    unique and :class:`NumericalFailure` when the residual
    ``max|pi P - pi|`` exceeds ``1e-10``.
    """
    data = P.data
    classes = recurrent_classes(data)
    if len(classes) != 1:
        raise MultipleRecurrentClasses(classes)
    support = classes[0]
    n = P.dim
    if P.exact:
        sub = data[np.ix_(support, support)]
        pis = gth_exact(sub.tolist())
        pi = np.empty(n, dtype=object)
        pi.fill(Fraction(0))
        pi[support] = pis
    else:
        pi = np.zeros(n)
        if len(support) <= DENSE_LIMIT or P.levels is None:
            sub = to_dense(data[support][:, support] if sparse.issparse(data) else data[np.ix_(support, support)])
            pi[support] = gth(sub)
        else:
            sub = sparse.csr_array(data[support][:, support])
            blocks = _level_blocks(sub, np.asarray(P.levels)[support])
            if blocks is None:
                pi[support] = gth(sub.toarray())
            else:
                pi[support] = gth_by_levels(sub, blocks)
    res = _residual(pi, data)
    if check and not P.exact and res > RESIDUAL_TOL:
        raise NumericalFailure(f"stationary residual {res:.3g} exceeds {RESIDUAL_TOL}")
    return StationaryResult(pi, support, res)


def stationary_birth_death(P: StochasticMatrix) -> StationaryResult:
    """Detailed-balance recursion ``pi(i+1) = pi(i) P(i,i+1) / P(i+1,i)`` for tridiagonal ``P``.

    Works in log space so ``N`` in the thousands does not under/overflow.
    """
    data = P.data
    n = P.dim
    if sparse.issparse(data):
        coo = data.tocoo()
        if np.any(np.abs(coo.row - coo.col) > 1):
            raise ValueError("matrix is not tridiagonal")
        up = np.append(data.diagonal(1), 0.0)
        down = np.insert(data.diagonal(-1), 0, 0.0)
    else:
        up = [data[i, i + 1] if i + 1 < n else 0 for i in range(n)]
        down = [data[i, i - 1] if i > 0 else 0 for i in range(n)]
    classes = recurrent_classes(data)
    if len(classes) != 1:
        raise MultipleRecurrentClasses(classes)
    support = classes[0]
    a, b = int(support[0]), int(support[-1])
    if len(support) != b - a + 1:
        raise ValueError("recurrent class of a tridiagonal chain must be an interval")
    for i in range(a, b):
        if not down[i + 1] > 0:
            raise ValueError(f"zero down-rate at {i + 1} inside the recurrent range {a}..{b}")
    if P.exact:
        pi = np.empty(n, dtype=object)
        pi.fill(Fraction(0))
        acc = Fraction(1)
        vals = [acc]
        for i in range(a, b):
            acc = acc * up[i] / down[i + 1]
            vals.append(acc)
        total = sum(vals, Fraction(0))
        pi[a:b + 1] = [v / total for v in vals]
    else:
        up = np.asarray(up, dtype=float)
        down = np.asarray(down, dtype=float)
        logs = np.concatenate([[0.0], np.cumsum(np.log(up[a:b]) - np.log(down[a + 1:b + 1]))])
        w = np.exp(logs - logs.max())
        pi = np.zeros(n)
        pi[a:b + 1] = w / w.sum()
    res = _residual(pi, data)
    return StationaryResult(pi, support, res)


def mean_profit(pi, Pdot: SignedMatrix):
    """Equilibrium mean profit per turn ``pi . (Pdot 1)``."""
    vec = pi.pi if isinstance(pi, StationaryResult) else pi
    if len(vec) != Pdot.dim:
        raise ValueError(f"distribution of length {len(vec)} does not match matrix of dimension {Pdot.dim}")
    rs = Pdot.row_sums()
    if isinstance(vec, np.ndarray) and vec.dtype == object or (len(rs) and isinstance(rs[0], Fraction)):
        return sum((a * b for a, b in zip(vec, rs)), Fraction(0))
    return float(np.dot(vec, rs))


# -- reports ---------------------------------------------------------------------------------

@dataclass
class ProfitReport:
    mu: Any
    game: str
    method: str
    params: GameParams
    dim: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "N": self.params.N,
            "p0": float(self.params.p0),
            "p1": float(self.params.p1),
            "p2": float(self.params.p2),
            "gamma": float(self.params.gamma),
            "game": self.game,
            "method": self.method,
            "mu": float(self.mu),
            "residual": float(self.residual),
            "dim": self.dim,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def profit_of(P: StochasticMatrix, birth_death: bool = False) -> tuple[Any, StationaryResult]:
    st = stationary_birth_death(P) if birth_death else stationary(P)
    return mean_profit(st, signed(P)), st


def mu_exact(params: GameParams, game: str = "B", method: str = "dihedral") -> ProfitReport:
    """Exact equilibrium mean profit from the full or the dihedral-reduced chain."""
    game = normalize_game(game)
    if method == "full":
        if params.N > FULL_MAX_N:
            raise ValueError(f"full chains are limited to N <= {FULL_MAX_N}; use method='dihedral'")
        P = build_full(params, game)
    elif method == "dihedral":
        if params.N > DIHEDRAL_MAX_N:
            raise ValueError(f"dihedral chains are limited to N <= {DIHEDRAL_MAX_N}")
        P = build_dihedral(params, game)
    else:
        raise ValueError(f"unknown method {method!r}; expected 'full' or 'dihedral'")
    if game == "A'":
        mu, st = (Fraction(0) if params.exact else 0.0), stationary(P)
    else:
        mu, st = profit_of(P)
    return ProfitReport(mu, game, method, params, P.dim, st.residual)


def mu_li(params: GameParams, game: str = "B") -> ProfitReport:
    """Count-averaged approximation of the mean profit (games B and C')."""
    game = normalize_game(game)
    if game not in ("B", "C'"):
        raise ValueError(f"the count-averaged approximation covers games B and C', not {game!r}")
    P = build_li(params, game)
    mu, st = profit_of(P, birth_death=True)
    return ProfitReport(mu, game, "li-approx", params, P.dim, st.residual)


# -- closed forms for four players --------------------------------------------------------------

def _mu_b_exact_n4(a, b, c):
    # a = p0, b = p1, c = p2
    num = (
        -(3 - 2 * c - 3 * a ** 2 + 2 * a * c - c ** 2 + 2 * a ** 2 * c - 2 * a * c ** 2)
        + 4 * (1 + a) * (1 - a + c) * (1 - c) * b
        - 2 * (1 - a + c) * (1 - a - c) * b ** 2
    )
    den = (
        3 + 6 * a - 2 * c - 3 * a ** 2 - 2 * a * c - c ** 2 + 12 * a ** 2 * c - 4 * a * c ** 2 - 8 * a ** 2 * c ** 2
        - 4 * (1 - a + c + 2 * a ** 2 + 2 * a * c) * (1 - c) * b
        + 2 * (1 + 4 * a - a ** 2 - 2 * a * c - c ** 2) * b ** 2
    )
    return num, den


def _mu_b_approx_n4(a, b, c):
    num = (
        -(9 + 6 * a - 12 * c - 3 * a ** 2 - 8 * a * c + 3 * c ** 2 + 2 * a ** 2 * c + 2 * a * c ** 2)
        + 2 * (6 + 5 * a - 7 * c + a ** 2 - 4 * a * c + c ** 2) * b
        - 4 * (1 - a - c) * b ** 2
    )
    den = (
        9 + 24 * a - 12 * c + 9 * a ** 2 - 32 * a * c + 3 * c ** 2 - 8 * a ** 2 * c + 8 * a * c ** 2
        - 2 * (6 - a - 7 * c - a ** 2 + c ** 2) * b
        + 4 * (1 + a - c) * b ** 2
    )
    return num, den


def _mu_cprime_exact_n4(a, b, c):
    num = (
        -3 * (105 - 35 * a - 65 * c - 22 * a ** 2 + 8 * a * c + 2 * c ** 2 + 6 * a ** 2 * c - 2 * a * c ** 2)
        + 6 * (55 + 2 * a - 4 * c - 9 * a ** 2 + 12 * a * c - 9 * c ** 2 + 4 * a ** 2 * c - 4 * a * c ** 2) * b
        - 12 * (2 - a + c) * (1 - a - c) * b ** 2
    )
    den = (
        2 * (315 + 175 * a - 125 * c - 22 * a ** 2 - 10 * a * c - 12 * c ** 2 + 48 * a ** 2 * c - 32 * a * c ** 2
             - 16 * a ** 2 * c ** 2)
        - 4 * (25 - 2 * a + 8 * c + 17 * a ** 2 + 12 * a * c - 13 * c ** 2 - 8 * a ** 2 * c - 8 * a * c ** 2) * b
        + 8 * (14 + 7 * a - 3 * c - a ** 2 - 2 * a * c - c ** 2) * b ** 2
    )
    return num, den


def _mu_cprime_approx_n4(a, b, c):
    num = (
        -3 * (56 - a - 45 * c - 7 * a ** 2 - 8 * a * c + 7 * c ** 2 + 2 * a ** 2 * c + 2 * a * c ** 2)
        + 6 * (33 + 14 * a - 16 * c + a ** 2 - 4 * a * c + c ** 2) * b
        - 12 * (1 - a - c) * b ** 2
    )
    den = (
        2 * (168 + 137 * a - 107 * c + 19 * a ** 2 - 80 * a * c + 13 * c ** 2 - 8 * a ** 2 * c + 8 * a * c ** 2)
        - 4 * (15 - 6 * a - 12 * c - a ** 2 + c ** 2) * b
        + 8 * (3 + a - c) * b ** 2
    )
    return num, den


CLOSED_FORMS = {
    "B-exact": _mu_b_exact_n4,
    "B-approx": _mu_b_approx_n4,
    "C'-exact": _mu_cprime_exact_n4,
    "C'-approx": _mu_cprime_approx_n4,
}


def mu_closed_form_N4(params: GameParams, which: str):
    """Rational-function mean profits for four players (C' forms assume gamma = 1/2)."""
    which = which.replace("′", "'")
    try:
        form = CLOSED_FORMS[which]
    except KeyError:
        raise ValueError(f"unknown closed form {which!r}; expected one of {sorted(CLOSED_FORMS)}") from None
    if which.startswith("C'") and params.gamma != Fraction(1, 2):
        raise ValueError("the C' closed forms are for gamma = 1/2")
    num, den = form(params.p0, params.p1, params.p2)
    if den == 0:
        raise ZeroDivisionError(f"closed form {which} is undefined at {params.p}")
    return num / den


__all__ = [
    "MultipleRecurrentClasses",
    "NumericalFailure",
    "StationaryResult",
    "ProfitReport",
    "recurrent_classes",
    "gth",
    "gth_exact",
    "gth_by_levels",
    "stationary",
    "stationary_birth_death",
    "mean_profit",
    "mu_exact",
    "mu_li",
    "mu_closed_form_N4",
]
