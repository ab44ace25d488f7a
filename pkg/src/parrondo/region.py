"""Parrondo / anti-Parrondo classification over the (p0, p2, p1) cube.

Scans evaluate the mean profits on a lattice; fair surfaces are located by
scanning each (p0, p2) column along p1 and bisecting every sign change.
For speed the reduced game-B chain is precomputed as a linear combination
of coefficient matrices in ``p0, p1, p2, q0, q1, q2`` (``ProfitEvaluator``),
so a lattice point costs one small GTH solve per game.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chains import (
    GameParams,
    _aprime_rows,
    _b_rows,
    _li_aprime_rates,
    _li_b_rates,
    _reduced_from_triples,
    normalize_game,
)
from .solver import MultipleRecurrentClasses, NumericalFailure, gth, recurrent_classes
from .state_space import dihedral_partition

log = logging.getLogger(__name__)

ENGINES = ("exact", "li")
CLASSES = ("parrondo", "anti_parrondo", "neither", "error")
MESH_FORMAT_VERSION = 1
CSV_HEADER = ["p0", "p2", "p1", "mu_B", "mu_C", "class"]
WORKERS_ENV = "PARRONDO_WORKERS"


def classify_values(mu_b: float, mu_c: float) -> str:
    if mu_b <= 0 and mu_c > 0:
        return "parrondo"
    if mu_b >= 0 and mu_c < 0:
        return "anti_parrondo"
    return "neither"


@dataclass(frozen=True)
class RegionPoint:
    p0: float
    p1: float
    p2: float
    mu_B: float
    mu_C: float
    classification: str
    message: str = ""


class ProfitEvaluator:
    """Fast ``mu_B`` and ``mu_C'`` at fixed ``N``, ``gamma`` and engine.

    The game-B chain is ``sum_m p_m W_m + q_m V_m`` and its signed version is
    ``sum_m p_m W_m - q_m V_m``; game A' is a constant matrix with zero payoff.
    """

    def __init__(self, N: int, gamma: float = 0.5, engine: str = "exact"):
        if engine not in ENGINES:
            raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
        self.N, self.gamma, self.engine = N, float(gamma), engine
        if engine == "exact":
            part = dihedral_partition(N)
            reps = [int(r) for r in part.representatives]
            unit = np.eye(3)
            zero = np.zeros(3)
            build = lambda p, q: _reduced_from_triples(_b_rows(N, p, q, reps), part, False).toarray()
            self.win = [build(unit[m], zero) for m in range(3)]
            self.lose = [build(zero, unit[m]) for m in range(3)]
            self.aprime = _reduced_from_triples(_aprime_rows(N, reps, 1.0), part, False).toarray()
        else:
            n = N + 1
            self.win, self.lose = [], []
            for m in range(3):
                e = np.eye(3)[m]
                z = np.zeros(3)
                up, _, _, win = _li_b_rates(N, e, z, False)
                _, down, lose, _ = _li_b_rates(N, z, e, False)
                W = np.zeros((n, n))
                V = np.zeros((n, n))
                idx = np.arange(n)
                W[idx[:-1], idx[:-1] + 1] = up[:-1]
                W[idx, idx] = win
                V[idx[1:], idx[1:] - 1] = down[1:]
                V[idx, idx] = lose
                self.win.append(W)
                self.lose.append(V)
            a_up, a_down = _li_aprime_rates(N, False)
            A = np.zeros((n, n))
            idx = np.arange(n)
            A[idx[:-1], idx[:-1] + 1] = a_up[:-1]
            A[idx[1:], idx[1:] - 1] = a_down[1:]
            A[idx, idx] = 1 - np.asarray(a_up) - np.asarray(a_down)
            self.aprime = A

    def _b(self, p):
        q = [1 - v for v in p]
        P = sum(p[m] * self.win[m] + q[m] * self.lose[m] for m in range(3))
        drift = sum(p[m] * self.win[m] - q[m] * self.lose[m] for m in range(3)).sum(axis=1)
        return P, drift

    @staticmethod
    def _stationary(P: np.ndarray) -> np.ndarray:
        classes = recurrent_classes(P)
        if len(classes) != 1:
            raise MultipleRecurrentClasses(classes)
        s = classes[0]
        pi = np.zeros(P.shape[0])
        pi[s] = gth(P[np.ix_(s, s)])
        return pi

    def mu(self, p0: float, p1: float, p2: float, target: str = "B") -> float:
        target = normalize_game(target)
        P, drift = self._b((p0, p1, p2))
        if target == "B":
            return float(self._stationary(P) @ drift)
        if target == "C'":
            g = self.gamma
            PC = g * self.aprime + (1 - g) * P
            return float(self._stationary(PC) @ ((1 - g) * drift))
        raise ValueError(f"region targets are B and C', not {target!r}")

    def classify(self, p0: float, p1: float, p2: float) -> RegionPoint:
        try:
            mb = self.mu(p0, p1, p2, "B")
            mc = self.mu(p0, p1, p2, "C'")
        except (MultipleRecurrentClasses, NumericalFailure) as exc:
            return RegionPoint(p0, p1, p2, math.nan, math.nan, "error", str(exc))
        return RegionPoint(p0, p1, p2, mb, mc, classify_values(mb, mc))


def classify(params: GameParams, engine: str = "exact") -> RegionPoint:
    """Classify one parameter point using the exact or count-averaged mean profits."""
    from .solver import mu_exact, mu_li

    p0, p1, p2 = (float(v) for v in params.p)
    try:
        if engine == "exact":
            mb, mc = mu_exact(params, "B").mu, mu_exact(params, "C'").mu
        elif engine == "li":
            mb, mc = mu_li(params, "B").mu, mu_li(params, "C'").mu
        else:
            raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    except (MultipleRecurrentClasses, NumericalFailure) as exc:
        return RegionPoint(p0, p1, p2, math.nan, math.nan, "error", str(exc))
    return RegionPoint(p0, p1, p2, float(mb), float(mc), classify_values(mb, mc))


# -- lattice scans ----------------------------------------------------------------------------

def lattice(R: int) -> list[tuple[float, float, float]]:
    """``(p0, p2, p1)`` triples on ``{0, 1/R, ..., 1}^3`` with p1 varying fastest."""
    if R < 1:
        raise ValueError("resolution must be at least 1")
    ticks = [j / R for j in range(R + 1)]
    return [(a, c, b) for a in ticks for c in ticks for b in ticks]


def _scan_chunk(args):
    N, gamma, engine, triples = args
    ev = ProfitEvaluator(N, gamma, engine)
    return [ev.classify(p0, p1, p2) for p0, p2, p1 in triples]


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


@dataclass
class ScanResult:
    N: int
    gamma: float
    resolution: int
    engine: str
    points: list[RegionPoint]

    def grid(self) -> np.ndarray:
        """Classification labels as an array indexed ``[i0, i2, i1]``."""
        R = self.resolution
        return np.array([pt.classification for pt in self.points], dtype=object).reshape(R + 1, R + 1, R + 1)

    def values(self, which: str = "mu_B") -> np.ndarray:
        R = self.resolution
        return np.array([getattr(pt, which) for pt in self.points]).reshape(R + 1, R + 1, R + 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for pt in self.points:
            w.writerow([f"{pt.p0:.17g}", f"{pt.p2:.17g}", f"{pt.p1:.17g}", f"{pt.mu_B:.17g}", f"{pt.mu_C:.17g}", pt.classification])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "version": MESH_FORMAT_VERSION,
            "N": self.N,
            "gamma": self.gamma,
            "engine": self.engine,
            "resolution": self.resolution,
            "points": [
                {"p0": pt.p0, "p2": pt.p2, "p1": pt.p1, "mu_B": _jsonable(pt.mu_B), "mu_C": _jsonable(pt.mu_C),
                 "class": pt.classification}
                for pt in self.points
            ],
        }


def _jsonable(v: float):
    return None if math.isnan(v) else v


def scan(N: int, gamma: float = 0.5, resolution: int = 10, engine: str = "exact",
         workers: int | None = None) -> ScanResult:
    """Classify every lattice point of the cube; output order is independent of ``workers``."""
    triples = lattice(resolution)
    workers = _workers(workers)
    if workers == 1:
        points = _scan_chunk((N, gamma, engine, triples))
    else:
        size = math.ceil(len(triples) / workers)
        chunks = [(N, gamma, engine, triples[k:k + size]) for k in range(0, len(triples), size)]
        with ProcessPoolExecutor(workers) as ex:
            points = [pt for part in ex.map(_scan_chunk, chunks) for pt in part]
    return ScanResult(N, float(gamma), resolution, engine, points)


# -- fair surfaces ------------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfacePoint:
    p0: float
    p2: float
    p1: float
    lo: float
    hi: float
    mu: float
    converged: bool


@dataclass
class FairSurfaceMesh:
    N: int
    gamma: float
    engine: str
    target: str
    resolution: int
    tol: float
    points: list[SurfacePoint] = field(default_factory=list)
    skipped: list[tuple[float, float]] = field(default_factory=list)

    @property
    def tag(self) -> str:
        """``B``, ``C'`` or their ``-approx`` variants for the count-averaged engine."""
        return self.target + ("-approx" if self.engine == "li" else "")

    def columns(self) -> dict[tuple[float, float], list[float]]:
        out: dict[tuple[float, float], list[float]] = {}
        for pt in self.points:
            out.setdefault((pt.p0, pt.p2), []).append(pt.p1)
        return out

    def triples(self) -> np.ndarray:
        return np.array([(pt.p0, pt.p2, pt.p1) for pt in self.points]).reshape(-1, 3)

    def column(self, p0: float, p2: float) -> list[float]:
        return [pt.p1 for pt in self.points if math.isclose(pt.p0, p0) and math.isclose(pt.p2, p2)]

    def to_dict(self) -> dict:
        return {
            "version": MESH_FORMAT_VERSION,
            "N": self.N,
            "gamma": self.gamma,
            "engine": self.engine,
            "target": self.target,
            "tag": self.tag,
            "resolution": self.resolution,
            "points": [[pt.p0, pt.p2, pt.p1] for pt in self.points],
            "brackets": [[pt.lo, pt.hi] for pt in self.points],
            "skipped_columns": [list(c) for c in self.skipped],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _bisect(f, lo, hi, flo, fhi, tol, xtol, max_iter=200):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol:
            return mid, lo, hi, fm, True
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo <= xtol:
            break
    mid = 0.5 * (lo + hi)
    return mid, lo, hi, f(mid), False


def _surface_column(ev: ProfitEvaluator, target: str, p0: float, p2: float, R: int, tol: float, xtol: float):
    f = lambda p1: ev.mu(p0, p1, p2, target)
    ticks = [j / R for j in range(R + 1)]
    vals = [f(t) for t in ticks]
    found = []
    for j in range(R):
        a, b, fa, fb = ticks[j], ticks[j + 1], vals[j], vals[j + 1]
        if fa == 0:
            found.append(SurfacePoint(p0, p2, a, a, a, 0.0, True))
        elif fa * fb < 0:
            root, lo, hi, fr, ok = _bisect(f, a, b, fa, fb, tol, xtol)
            found.append(SurfacePoint(p0, p2, root, lo, hi, fr, ok))
    if vals[-1] == 0:
        found.append(SurfacePoint(p0, p2, 1.0, 1.0, 1.0, 0.0, True))
    return found


def _surface_chunk(args):
    N, gamma, engine, target, R, tol, xtol, columns = args
    ev = ProfitEvaluator(N, gamma, engine)
    out = []
    for p0, p2 in columns:
        try:
            out.append((p0, p2, _surface_column(ev, target, p0, p2, R, tol, xtol)))
        except (MultipleRecurrentClasses, NumericalFailure) as exc:
            log.info("skipping column p0=%g p2=%g: %s", p0, p2, exc)
            out.append((p0, p2, None))
    return out


def fair_surface(N: int, gamma: float = 0.5, target: str = "B", engine: str = "exact", resolution: int = 20,
                 tol: float = 1e-10, xtol: float = 1e-13, workers: int | None = None) -> FairSurfaceMesh:
    """Points ``(p0, p2, p1*)`` with ``mu(p1*) = 0`` for every sign change along p1.

    Columns on which the solver fails anywhere are skipped and listed in
    ``skipped``.
    """
    target = normalize_game(target)
    if target not in ("B", "C'"):
        raise ValueError(f"fair surfaces are computed for B and C', not {target!r}")
    R = resolution
    ticks = [j / R for j in range(R + 1)]
    columns = [(a, c) for a in ticks for c in ticks]
    workers = _workers(workers)
    if workers == 1:
        results = _surface_chunk((N, gamma, engine, target, R, tol, xtol, columns))
    else:
        size = math.ceil(len(columns) / workers)
        chunks = [(N, gamma, engine, target, R, tol, xtol, columns[k:k + size]) for k in range(0, len(columns), size)]
        with ProcessPoolExecutor(workers) as ex:
            results = [c for part in ex.map(_surface_chunk, chunks) for c in part]
    mesh = FairSurfaceMesh(N, float(gamma), engine, target, R, tol)
    for p0, p2, pts in results:
        if pts is None:
            mesh.skipped.append((p0, p2))
        else:
            mesh.points.extend(pts)
    return mesh


# -- the inversion pocket ------------------------------------------------------------------------

def surface_gap(N: int, gamma: float = 0.5, resolution: int = 20, engine: str = "exact",
                workers: int | None = None) -> dict[tuple[float, float], float]:
    """``p1*(mu_B = 0) - p1*(mu_C' = 0)`` on every column where each surface is crossed once.

    Both profits increase with p1 on such columns, so a positive gap means the
    column holds Parrondo points (between the two surfaces) and a negative gap
    means it holds anti-Parrondo points.
    """
    return _gap(*_both_surfaces(N, gamma, resolution, engine, workers))


def _both_surfaces(N, gamma, resolution, engine, workers):
    return tuple(fair_surface(N, gamma, t, engine, resolution, workers=workers).columns() for t in ("B", "C'"))


def _gap(colB, colC):
    return {k: colB[k][0] - colC[k][0] for k in colB if len(colB[k]) == 1 and len(colC.get(k, ())) == 1}


def inverted_columns(gap: dict[tuple[float, float], float], atol: float = 1e-12) -> list[tuple[float, float]]:
    """Columns off the line ``p0 + p2 = 1`` whose orientation is opposite to the majority on their side."""
    sides = {-1: [], 1: []}
    for (p0, p2), d in gap.items():
        s = p0 + p2 - 1
        if abs(s) > 1e-9 and abs(d) > atol:
            sides[1 if s > 0 else -1].append(((p0, p2), d > 0))
    out = []
    for members in sides.values():
        if not members:
            continue
        majority = sum(pos for _, pos in members) * 2 >= len(members)
        out += [k for k, pos in members if pos != majority]
    return sorted(out)


def pocket_witnesses(N: int = 4, gamma: float = 0.5, resolution: int = 20, engine: str = "exact",
                     workers: int | None = None) -> list[tuple[RegionPoint, RegionPoint]]:
    """Pairs of inverted columns mirrored across ``p0 + p2 = 1``, each shown by a classified point.

    The mirror of column ``(p0, p2)`` is ``(1 - p2, 1 - p0)``.  Each returned
    point sits at the p1 midway between the two fair surfaces of its column.
    """
    colB, colC = _both_surfaces(N, gamma, resolution, engine, workers)
    inv = set(inverted_columns(_gap(colB, colC)))
    ev = ProfitEvaluator(N, gamma, engine)
    R = resolution
    key = lambda a, b: (round(a * R) / R, round(b * R) / R)
    out = []
    for p0, p2 in sorted(inv):
        if p0 + p2 >= 1:
            continue
        mirror = key(1 - p2, 1 - p0)
        if mirror not in inv:
            continue
        pair = []
        for c in ((p0, p2), mirror):
            mid = 0.5 * (colB[c][0] + colC[c][0])
            pair.append(ev.classify(c[0], mid, c[1]))
        out.append(tuple(pair))
    return out


__all__ = [
    "surface_gap",
    "inverted_columns",
    "pocket_witnesses",
    "RegionPoint",
    "ProfitEvaluator",
    "ScanResult",
    "FairSurfaceMesh",
    "SurfacePoint",
    "classify",
    "classify_values",
    "scan",
    "fair_surface",
    "lattice",
]
