"""Transition matrices for games A, A', B, C and C' and their reductions.

Every builder takes the win probabilities ``p`` and the loss probabilities
``q`` as separate sequences internally.  The payoff-signed ("dotted")
matrices are the same constructions evaluated with ``q`` replaced by ``-q``,
so signing commutes with lumping, averaging and mixing by linearity.

Matrices are stored as ``scipy.sparse.csr_array`` of floats.  When the game
parameters are :class:`fractions.Fraction` instances the builders switch to
exact arithmetic and store a dense ``object`` array of fractions instead;
that mode is intended for small ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from math import comb
from numbers import Real
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import sparse

from .state_space import (
    MIN_PLAYERS,
    Partition,
    _check_n,
    bit,
    dihedral_partition,
    flip_int,
    neighbor_count,
    transfer_int,
)

GAMES = ("A", "A'", "B", "C", "C'")

ROW_SUM_TOL = 1e-12


def normalize_game(game: str) -> str:
    """Accept ``A'``/``Aprime``/``A′`` style spellings."""
    g = str(game).strip().replace("′", "'").upper()
    g = g.replace("PRIME", "'")
    if g not in GAMES:
        raise ValueError(f"unknown game {game!r}; expected one of {GAMES}")
    return g


@dataclass(frozen=True)
class GameParams:
    """Coin probabilities ``p0, p1, p2``, mixing weight ``gamma`` and player count ``N``.

    ``p_m`` is the win probability of a player with ``m`` winning neighbors.
    Passing :class:`~fractions.Fraction` values selects exact arithmetic.
    """

    p0: Real
    p1: Real
    p2: Real
    gamma: Real = 0.5
    N: int = 4

    def __post_init__(self):
        for name in ("p0", "p1", "p2", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, Real) or not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)) or self.N < MIN_PLAYERS:
            raise ValueError(f"N must be an integer >= {MIN_PLAYERS}, got {self.N!r}")
        if self.exact:
            # floats mixed into exact parameters are read as their shortest decimal
            conv = lambda v: Fraction(repr(v)) if isinstance(v, float) else Fraction(v)
        else:
            conv = float
        for name in ("p0", "p1", "p2", "gamma"):
            object.__setattr__(self, name, conv(getattr(self, name)))
        object.__setattr__(self, "N", int(self.N))

    @property
    def exact(self) -> bool:
        return any(isinstance(getattr(self, n), Fraction) for n in ("p0", "p1", "p2", "gamma"))

    @property
    def p(self) -> tuple:
        return (self.p0, self.p1, self.p2)

    @property
    def q(self) -> tuple:
        return tuple(1 - v for v in self.p)

    def with_(self, **changes) -> "GameParams":
        return replace(self, **changes)

    def as_exact(self) -> "GameParams":
        conv = lambda v: Fraction(v).limit_denominator(10 ** 12) if isinstance(v, float) else Fraction(v)
        return GameParams(conv(self.p0), conv(self.p1), conv(self.p2), conv(self.gamma), self.N)

    def fair(self) -> "GameParams":
        """Game A as the fair-coin special case of game B."""
        half = Fraction(1, 2) if self.exact else 0.5
        return replace(self, p0=half, p1=half, p2=half)

    def is_ergodic_hint(self) -> bool:
        """Sufficient (not necessary) interior check for game B; the solver decides."""
        p0, p1, p2 = self.p
        if 0 < p1 < 1 and ((0 < p0 < 1 and 0 < p2 < 1) or (p0 == 1 and 0 < p2 < 1) or (0 < p0 < 1 and p2 == 0)):
            return True
        return False


@dataclass(frozen=True, eq=False)
class Origin:
    """How a matrix was constructed; used to derive its signed counterpart."""

    game: str
    construction: str  # full | dihedral | li | lumped | averaged | mix
    params: GameParams | None = None
    partition: Partition | None = None
    parents: tuple = ()
    gamma: Any = None


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Row-stochastic matrix together with its row/column labels.

    ``labels`` are integer-encoded states for full chains, class
    representatives for reduced chains and winner counts for the
    tridiagonal chains.  ``levels`` holds the number of winners of each
    label.  ``diag_lose`` and ``diag_win`` are set for tridiagonal game B
    chains and split the diagonal into its losing and winning parts.
    """

    data: Any
    labels: np.ndarray
    levels: np.ndarray | None = None
    origin: Origin | None = None
    diag_lose: np.ndarray | None = None
    diag_win: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def exact(self) -> bool:
        return not sparse.issparse(self.data) and self.data.dtype == object

    @property
    def game(self) -> str | None:
        return self.origin.game if self.origin else None

    def to_dense(self) -> np.ndarray:
        return to_dense(self.data)

    def tocsr(self) -> sparse.csr_array:
        if sparse.issparse(self.data):
            return self.data
        return sparse.csr_array(np.asarray(self.data, dtype=float))

    def row_sums(self) -> np.ndarray:
        return row_sums(self.data)

    def __getitem__(self, idx):
        r, c = idx
        return self.data[r, c]

    def nnz_per_row(self) -> np.ndarray:
        m = self.tocsr()
        return np.diff(m.indptr)


@dataclass(frozen=True, eq=False)
class SignedMatrix:
    """Transition matrix with each entry carrying the sign of its payoff."""

    data: Any
    labels: np.ndarray
    game: str | None = None

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def to_dense(self) -> np.ndarray:
        return to_dense(self.data)

    def row_sums(self) -> np.ndarray:
        return row_sums(self.data)

    def __getitem__(self, idx):
        r, c = idx
        return self.data[r, c]


# -- small array helpers ----------------------------------------------------------

def to_dense(data) -> np.ndarray:
    if sparse.issparse(data):
        return data.toarray()
    return np.array(data)


def row_sums(data) -> np.ndarray:
    if sparse.issparse(data):
        return np.asarray(data.sum(axis=1)).ravel()
    return data.sum(axis=1)


def _assemble(rows: list, cols: list, vals: list, shape: tuple[int, int], exact: bool):
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        for r, c, v in zip(rows, cols, vals):
            out[r, c] += v
        return out
    m = sparse.coo_array(
        (np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))), shape=shape
    ).tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    return m


def binom(n: int, k: int) -> int:
    """Binomial coefficient, zero outside ``0 <= k <= n``."""
    if k < 0 or n < 0 or k > n:
        return 0
    return comb(n, k)


def _numeric(params: GameParams):
    return Fraction(1) if params.exact else 1.0


# -- full chains -------------------------------------------------------------------

def _b_rows(N: int, p: Sequence, q: Sequence, states: Iterable[int]):
    """Yield ``(row_state, target_state, value)`` triples of game B.

    Off-diagonal moves flip one player; the diagonal collects the
    probability that the chosen player's status does not change.
    """
    for s in states:
        diag = 0
        for i in range(1, N + 1):
            m = neighbor_count(s, i, N)
            if bit(s, i, N):
                yield s, flip_int(s, i, N), q[m] / N
                diag = diag + p[m] / N
            else:
                yield s, flip_int(s, i, N), p[m] / N
                diag = diag + q[m] / N
        yield s, s, diag


def _aprime_rows(N: int, states: Iterable[int], one):
    w = one / (2 * N)
    for s in states:
        for i in range(1, N + 1):
            yield s, transfer_int(s, i, -1, N), w
            yield s, transfer_int(s, i, 1, N), w


def _levels_full(N: int) -> np.ndarray:
    states = np.arange(2 ** N, dtype=np.int64)
    counts = np.zeros_like(states)
    for k in range(N):
        counts += (states >> k) & 1
    return counts


def _full_from_triples(N: int, triples, exact: bool, origin: Origin) -> StochasticMatrix:
    rows, cols, vals = [], [], []
    for r, c, v in triples:
        rows.append(r)
        cols.append(c)
        vals.append(v)
    n = 2 ** N
    data = _assemble(rows, cols, vals, (n, n), exact)
    return StochasticMatrix(data, np.arange(n), _levels_full(N), origin)


def _full_b_matrix(params: GameParams, p, q, game: str) -> StochasticMatrix:
    N = params.N
    _check_n(N)
    origin = Origin(game, "full", params)
    return _full_from_triples(N, _b_rows(N, p, q, range(2 ** N)), params.exact, origin)


def build_full_B(params: GameParams) -> StochasticMatrix:
    """Game B on all ``2**N`` configurations."""
    return _full_b_matrix(params, params.p, params.q, "B")


def build_full_A(params: GameParams) -> StochasticMatrix:
    """Toral's nonspatial game A: game B with three fair coins."""
    fair = params.fair()
    m = _full_b_matrix(fair, fair.p, fair.q, "A")
    return replace(m, origin=Origin("A", "full", fair))


def build_full_Aprime(N: int, exact: bool = False) -> StochasticMatrix:
    """Game A': a random player hands one unit to a random nearest neighbor."""
    _check_n(N)
    one = Fraction(1) if exact else 1.0
    params = GameParams(one / 2, one / 2, one / 2, one / 2, N)
    origin = Origin("A'", "full", params)
    return _full_from_triples(N, _aprime_rows(N, range(2 ** N), one), exact, origin)


def build_full(params: GameParams, game: str) -> StochasticMatrix:
    """Full chain for any of the games A, A', B, C, C'."""
    game = normalize_game(game)
    if game == "B":
        return build_full_B(params)
    if game == "A":
        return build_full_A(params)
    if game == "A'":
        return build_full_Aprime(params.N, params.exact)
    if game == "C":
        return mix(build_full_A(params), build_full_B(params), params.gamma, game="C")
    return mix(build_full_Aprime(params.N, params.exact), build_full_B(params), params.gamma, game="C'")


# -- mixing ---------------------------------------------------------------------------

def mix(PA: StochasticMatrix, PB: StochasticMatrix, gamma, game: str | None = None) -> StochasticMatrix:
    """Random mixture ``gamma * PA + (1 - gamma) * PB``."""
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma!r}")
    if PA.data.shape != PB.data.shape or not np.array_equal(PA.labels, PB.labels):
        raise ValueError("cannot mix matrices over different index sets")
    if game is None:
        game = {"A'": "C'", "A": "C"}.get(PA.game, "mix")
    data = gamma * PA.data + (1 - gamma) * PB.data
    if sparse.issparse(data):
        data = sparse.csr_array(data)
        data.eliminate_zeros()
    origin = Origin(game, "mix", parents=(PA, PB), gamma=gamma)
    return StochasticMatrix(data, PB.labels, PB.levels, origin)


# -- reductions ------------------------------------------------------------------------

class LumpabilityError(ValueError):
    """Raised when a lumped reduction is requested for a non-lumpable matrix."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"matrix is not lumpable: {report.describe()}")


def _check_over_states(P: StochasticMatrix, part: Partition) -> None:
    if P.dim != 2 ** part.N or not np.array_equal(P.labels, np.arange(2 ** part.N)):
        raise ValueError(f"matrix of dimension {P.dim} is not indexed by the {2 ** part.N} states of the partition")


def aggregate_columns(data, part: Partition):
    """Sum columns class by class: result[:, k] = sum over y in class k of data[:, y]."""
    if sparse.issparse(data):
        return sparse.csr_array(data @ part.indicator())
    out = np.empty((data.shape[0], len(part)), dtype=data.dtype)
    for k, members in enumerate(part.classes):
        out[:, k] = data[:, members].sum(axis=1)
    return out


def _take_rows(data, rows):
    if sparse.issparse(data):
        return sparse.csr_array(data[rows])
    return data[rows]


def reduce_lumped(P: StochasticMatrix, part: Partition, verify: bool = True, tol: float | None = None) -> StochasticMatrix:
    """Quotient chain ``Pbar([x],[y]) = sum_{y' in [y]} P(x, y')`` using representatives.

    Lumpability is re-checked unless ``verify=False``; a violation raises
    :class:`LumpabilityError` carrying the witness.
    """
    _check_over_states(P, part)
    if verify:
        from .lumpability import check_lumpable

        report = check_lumpable(P, part, tol)
        if not report.lumpable:
            raise LumpabilityError(report)
    data = aggregate_columns(_take_rows(P.data, part.representatives), part)
    origin = Origin(P.game, "lumped", partition=part, parents=(P,))
    return StochasticMatrix(data, np.asarray(part.representatives), part.levels, origin)


def reduce_averaged(P: StochasticMatrix, part: Partition) -> StochasticMatrix:
    """Class-averaged chain ``|[x]|^-1 sum_{x' in [x]} sum_{y' in [y]} P(x', y')``."""
    _check_over_states(P, part)
    cols = aggregate_columns(P.data, part)
    sizes = part.sizes
    if sparse.issparse(cols):
        summed = part.indicator().T @ cols
        data = sparse.csr_array(sparse.diags_array(1.0 / sizes) @ summed)
    else:
        data = np.empty((len(part), len(part)), dtype=cols.dtype)
        for k, members in enumerate(part.classes):
            data[k] = cols[members].sum(axis=0) / int(sizes[k])
    origin = Origin(P.game, "averaged", partition=part, parents=(P,))
    return StochasticMatrix(data, np.asarray(part.representatives), part.levels, origin)


def _reduced_from_triples(triples, part: Partition, exact: bool) -> Any:
    rep_index = {int(r): k for k, r in enumerate(part.representatives)}
    class_of = part.class_of
    rows, cols, vals = [], [], []
    for s, t, v in triples:
        rows.append(rep_index[s])
        cols.append(int(class_of[t]))
        vals.append(v)
    K = len(part)
    return _assemble(rows, cols, vals, (K, K), exact)


def build_dihedral(params: GameParams, game: str, part: Partition | None = None) -> StochasticMatrix:
    """Dihedral quotient chain built from representative rows only.

    Equals ``reduce_lumped(build_full(params, game), dihedral_partition(N))``
    without materializing the ``2**N``-state chain.
    """
    game = normalize_game(game)
    N = params.N
    part = part if part is not None else dihedral_partition(N)
    reps = [int(r) for r in part.representatives]
    one = _numeric(params)
    if game in ("C", "C'"):
        first = build_dihedral(params, "A" if game == "C" else "A'", part)
        return mix(first, build_dihedral(params, "B", part), params.gamma, game=game)
    if game == "A'":
        triples = _aprime_rows(N, reps, one)
        origin_params = params
    else:
        src = params.fair() if game == "A" else params
        triples = _b_rows(N, src.p, src.q, reps)
        origin_params = src
    data = _reduced_from_triples(triples, part, params.exact)
    origin = Origin(game, "dihedral", origin_params, part)
    return StochasticMatrix(data, np.asarray(part.representatives), part.levels, origin)


# -- count-reduced tridiagonal chains -------------------------------------------------

def _falling(x: int, k: int) -> int:
    out = 1
    for t in range(k):
        out *= x - t
    return out


def binom_ratio(N: int, d: int, i: int, k: int, exact: bool):
    """Exact ``C(N - d, i - k) / C(N, i)``, zero when the numerator is out of range.

    Uses ``C(N-d, i-k) / C(N, i) = i_(k) (N-i)_(d-k) / N_(d)`` with falling
    factorials, which avoids forming the (huge) binomials at large ``N``.
    """
    if not 0 <= i - k <= N - d:
        return Fraction(0) if exact else 0.0
    r = Fraction(_falling(i, k) * _falling(N - i, d - k), _falling(N, d))
    return r if exact else float(r)


def _li_aprime_rates(N: int, exact: bool):
    up = [binom_ratio(N, 2, i, 0, exact) for i in range(N + 1)]
    down = [binom_ratio(N, 2, i, 2, exact) for i in range(N + 1)]
    return up, down


def _li_b_rates(N: int, p, q, exact: bool):
    """Up, down, losing-diagonal and winning-diagonal entries of the averaged game-B chain."""
    up, down, lose, win = [], [], [], []
    for i in range(N + 1):
        w = [binom_ratio(N, 3, i, k, exact) for k in range(4)]
        up.append(w[0] * p[0] + 2 * w[1] * p[1] + w[2] * p[2])
        down.append(w[1] * q[0] + 2 * w[2] * q[1] + w[3] * q[2])
        lose.append(w[0] * q[0] + 2 * w[1] * q[1] + w[2] * q[2])
        win.append(w[1] * p[0] + 2 * w[2] * p[1] + w[3] * p[2])
    return up, down, lose, win


def _tridiagonal(up, down, diag, exact: bool):
    n = len(diag)
    rows, cols, vals = [], [], []
    for i in range(n):
        if i > 0:
            rows.append(i), cols.append(i - 1), vals.append(down[i])
        rows.append(i), cols.append(i), vals.append(diag[i])
        if i < n - 1:
            rows.append(i), cols.append(i + 1), vals.append(up[i])
    data = _assemble(rows, cols, vals, (n, n), exact)
    if sparse.issparse(data):
        data.eliminate_zeros()
    return data


def build_li_Aprime(N: int, exact: bool = False) -> StochasticMatrix:
    """Tridiagonal count-averaged chain of game A' on ``{0, ..., N}`` winners."""
    _check_n(N, cap=None)
    up, down = _li_aprime_rates(N, exact)
    diag = [1 - u - d for u, d in zip(up, down)]
    one = Fraction(1) if exact else 1.0
    origin = Origin("A'", "li", GameParams(one / 2, one / 2, one / 2, one / 2, N))
    return StochasticMatrix(_tridiagonal(up, down, diag, exact), np.arange(N + 1), np.arange(N + 1), origin)


def _li_b(params: GameParams, p, q, game: str) -> StochasticMatrix:
    N = params.N
    up, down, lose, win = _li_b_rates(N, p, q, params.exact)
    diag = [a + b for a, b in zip(lose, win)]
    data = _tridiagonal(up, down, diag, params.exact)
    as_arr = (lambda v: np.array(v, dtype=object)) if params.exact else np.asarray
    return StochasticMatrix(
        data, np.arange(N + 1), np.arange(N + 1), Origin(game, "li", params), as_arr(lose), as_arr(win)
    )


def build_li_B(params: GameParams) -> StochasticMatrix:
    """Tridiagonal count-averaged chain of game B with the diagonal kept in two parts."""
    return _li_b(params, params.p, params.q, "B")


def build_li(params: GameParams, game: str) -> StochasticMatrix:
    game = normalize_game(game)
    if game == "B":
        return build_li_B(params)
    if game == "A'":
        return build_li_Aprime(params.N, params.exact)
    if game == "C'":
        return mix(build_li_Aprime(params.N, params.exact), build_li_B(params), params.gamma, game="C'")
    raise ValueError(f"count-averaged chains are defined for games B, A' and C', not {game!r}")


# -- signed matrices -------------------------------------------------------------------

def _zeros_like(data):
    if sparse.issparse(data):
        return sparse.csr_array(data.shape, dtype=float)
    out = np.empty(data.shape, dtype=object)
    out.fill(Fraction(0))
    return out


def _signed_data(P: StochasticMatrix):
    o = P.origin
    if o is None:
        raise ValueError("matrix has no construction metadata; cannot derive payoff signs")
    if o.construction == "mix":
        PA, PB = o.parents
        return o.gamma * _signed_data(PA) + (1 - o.gamma) * _signed_data(PB)
    if o.construction == "lumped":
        (parent,) = o.parents
        return aggregate_columns(_take_rows(_signed_data(parent), o.partition.representatives), o.partition)
    if o.construction == "averaged":
        (parent,) = o.parents
        tmp = StochasticMatrix(_signed_data(parent), parent.labels, parent.levels)
        return reduce_averaged(tmp, o.partition).data
    if o.game == "A'":
        return _zeros_like(P.data)
    if o.game not in ("A", "B"):
        raise ValueError(f"no payoff rule for game {o.game!r} built as {o.construction!r}")
    params = o.params
    neg_q = tuple(-v for v in params.q)
    if o.construction == "full":
        return _full_b_matrix(params, params.p, neg_q, o.game).data
    if o.construction == "dihedral":
        triples = _b_rows(params.N, params.p, neg_q, [int(r) for r in o.partition.representatives])
        return _reduced_from_triples(triples, o.partition, params.exact)
    if o.construction == "li":
        return _li_b(params, params.p, neg_q, o.game).data
    raise ValueError(f"unknown construction {o.construction!r}")


def signed(P: StochasticMatrix) -> SignedMatrix:
    """Payoff-signed counterpart: losing transitions negated, game A' zeroed.

    For mixtures the sign pattern is the same mixture of the component
    signed matrices, so ``signed(C') = (1 - gamma) * signed(B)``.
    """
    data = _signed_data(P)
    if sparse.issparse(data):
        data = sparse.csr_array(data)
    return SignedMatrix(data, P.labels, P.game)


# -- matrix dumps ---------------------------------------------------------------------

def to_triplets(M) -> str:
    """``row col value`` lines with 17 significant digits, zero entries omitted."""
    data = M.data if hasattr(M, "data") else M
    coo = sparse.coo_array(np.asarray(to_dense(data), dtype=float)) if not sparse.issparse(data) else data.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k]):.17g}" for k in order if coo.data[k] != 0]
    return "\n".join(lines) + ("\n" if lines else "")


def from_triplets(text: str, dim: int) -> sparse.csr_array:
    rows, cols, vals = [], [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        r, c, v = line.split()
        rows.append(int(r)), cols.append(int(c)), vals.append(float(v))
    return sparse.csr_array((vals, (rows, cols)), shape=(dim, dim))


def to_json_dict(M) -> dict:
    dense = np.asarray(to_dense(M.data), dtype=float)
    return {
        "dim": int(dense.shape[0]),
        "labels": [int(v) for v in M.labels],
        "game": getattr(M, "game", None),
        "rows": dense.tolist(),
    }


__all__ = [
    "GAMES",
    "GameParams",
    "StochasticMatrix",
    "SignedMatrix",
    "LumpabilityError",
    "build_full_A",
    "build_full_B",
    "build_full_Aprime",
    "build_full",
    "build_dihedral",
    "build_li_Aprime",
    "build_li_B",
    "build_li",
    "mix",
    "reduce_lumped",
    "reduce_averaged",
    "signed",
    "binom",
    "to_triplets",
    "from_triplets",
    "to_json_dict",
]
