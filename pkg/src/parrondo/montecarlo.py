"""Turn-by-turn simulation of the games with explicit payoffs.

Random numbers come from numpy's counter-based Philox generator.  A run is
identified by ``(seed, stream)``; the stream index is the spawn key of the
seed sequence, so replicas with different streams are independent and any
single replica is reproducible bit for bit.

Each turn consumes three uniforms: one chooses the game (mixtures only),
one chooses the player and one tosses the coin (or picks the neighbor in
game A').
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .chains import GameParams, build_li_Aprime, build_li_B, normalize_game

CHUNK = 1 << 18
DEFAULT_BATCHES = 100

# game codes used by the kernels
PLAY_B, PLAY_A, PLAY_APRIME = 0, 1, 2
_MIXTURES = {"B": (PLAY_B, PLAY_B), "A": (PLAY_A, PLAY_A), "A'": (PLAY_APRIME, PLAY_APRIME),
             "C": (PLAY_A, PLAY_B), "C'": (PLAY_APRIME, PLAY_B)}


def default_burn_in(N: int) -> int:
    return min(10 ** 6, 1000 * N * N)


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``turns`` is the total number of turns played, including the
    ``burn_in`` turns that are discarded.  ``initial_state`` is an
    integer-encoded configuration (all players losers by default).
    """

    params: GameParams
    game: str = "B"
    turns: int = 10 ** 6
    burn_in: int | None = None
    seed: int = 0
    stream: int = 0
    initial_state: int = 0
    batches: int = DEFAULT_BATCHES

    def __post_init__(self):
        object.__setattr__(self, "game", normalize_game(self.game))
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", default_burn_in(self.params.N))
        if self.turns < 1:
            raise ValueError("turns must be positive")
        if not 0 <= self.burn_in < self.turns:
            raise ValueError(f"burn_in={self.burn_in} must be smaller than turns={self.turns}")
        if self.batches < 2 or self.turns - self.burn_in < self.batches:
            raise ValueError("need at least two batches and one measured turn per batch")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.params.N > 62 and self.initial_state:
            raise ValueError("integer initial states are limited to N <= 62")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SimResult:
    mean_profit: float
    std_error: float
    total_turns: int
    measured_turns: int
    seed: int
    stream: int = 0
    batch_means: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "mean_profit": self.mean_profit,
            "std_error": self.std_error,
            "total_turns": self.total_turns,
            "measured_turns": self.measured_turns,
            "seed": self.seed,
            "stream": self.stream,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@njit(cache=True)
def _play_chunk(x, u, t0, burn_in, measured, nbatch, first, second, p, gamma, sums,
                rec_game, rec_player, rec_payoff, rec_state):
    N = x.shape[0]
    recording = rec_game.shape[0] > 0
    for k in range(u.shape[0]):
        game = first if u[k, 0] < gamma else second
        i = int(u[k, 1] * N)
        if i == N:
            i = N - 1
        payoff = 0
        if game == PLAY_APRIME:
            j = i - 1 if u[k, 2] < 0.5 else i + 1
            j = j % N
            x[i] = 0
            x[j] = 1
        else:
            if game == PLAY_A:
                prob = 0.5
            else:
                prob = p[x[(i - 1) % N] + x[(i + 1) % N]]
            if u[k, 2] < prob:
                x[i] = 1
                payoff = 1
            else:
                x[i] = 0
                payoff = -1
        t = t0 + k
        if t >= burn_in:
            b = ((t - burn_in) * nbatch) // measured
            sums[b] += payoff
        if recording:
            rec_game[k] = game
            rec_player[k] = i + 1
            rec_payoff[k] = payoff
            s = 0
            for a in range(N):
                s = (s << 1) | x[a]
            rec_state[k] = s


@njit(cache=True)
def _play_li_chunk(i, u, t0, burn_in, measured, nbatch, mixed, gamma,
                   a_up, a_down, up, down, win, sums):
    for k in range(u.shape[0]):
        payoff = 0
        if mixed and u[k, 0] < gamma:
            v = u[k, 1]
            if v < a_up[i]:
                i += 1
            elif v < a_up[i] + a_down[i]:
                i -= 1
        else:
            v = u[k, 1]
            if v < up[i]:
                i += 1
                payoff = 1
            elif v < up[i] + down[i]:
                i -= 1
                payoff = -1
            elif v < up[i] + down[i] + win[i]:
                payoff = 1
            else:
                payoff = -1
        t = t0 + k
        if t >= burn_in:
            b = ((t - burn_in) * nbatch) // measured
            sums[b] += payoff
    return i


def _batch_sizes(measured: int, nbatch: int) -> np.ndarray:
    edges = (np.arange(nbatch + 1) * measured + nbatch - 1) // nbatch
    return np.diff(edges)


def _summarize(cfg: SimConfig, sums: np.ndarray) -> SimResult:
    measured = cfg.turns - cfg.burn_in
    sizes = _batch_sizes(measured, cfg.batches)
    means = sums / sizes
    se = float(np.std(means, ddof=1) / np.sqrt(cfg.batches))
    return SimResult(float(sums.sum() / measured), se, cfg.turns, measured, cfg.seed, cfg.stream, means)


def _initial_bits(state: int, N: int) -> np.ndarray:
    return np.array([(state >> (N - 1 - a)) & 1 for a in range(N)], dtype=np.int64)


def simulate(cfg: SimConfig, record: bool = False):
    """Play ``cfg.turns`` turns of the configured game and estimate the mean profit.

    The standard error comes from batch means over the post-burn-in turns.
    With ``record=True`` the per-turn trajectory is returned as well, as a
    dict of arrays ``game``, ``player``, ``payoff`` and ``state``.
    """
    params = cfg.params
    N = params.N
    first, second = _MIXTURES[cfg.game]
    gamma = float(params.gamma) if first != second else 1.0
    p = np.array([float(v) for v in params.p])
    x = _initial_bits(cfg.initial_state, N)
    rng = cfg.generator()
    measured = cfg.turns - cfg.burn_in
    sums = np.zeros(cfg.batches)
    empty_i = np.zeros(0, dtype=np.int64)
    trace = {"game": [], "player": [], "payoff": [], "state": []}
    t = 0
    while t < cfg.turns:
        n = min(CHUNK, cfg.turns - t)
        u = rng.random((n, 3))
        if record:
            rg, rp, rpay, rs = (np.zeros(n, dtype=np.int64) for _ in range(4))
        else:
            rg = rp = rpay = rs = empty_i
        _play_chunk(x, u, t, cfg.burn_in, measured, cfg.batches, first, second, p, gamma, sums, rg, rp, rpay, rs)
        if record:
            for key, arr in zip(("game", "player", "payoff", "state"), (rg, rp, rpay, rs)):
                trace[key].append(arr)
        t += n
    result = _summarize(cfg, sums)
    if record:
        return result, {k: np.concatenate(v) for k, v in trace.items()}
    return result


def simulate_reduced_li(cfg: SimConfig) -> SimResult:
    """Simulate the count-averaged chain with payoffs attached to its split diagonal.

    Estimates the approximation of the mean profit, not the exact one.
    """
    if cfg.game not in ("B", "C'"):
        raise ValueError("the count-averaged chain is simulated for games B and C' only")
    params = cfg.params
    PB = build_li_B(params)
    up = np.append(PB.data.diagonal(1), 0.0)
    down = np.insert(PB.data.diagonal(-1), 0, 0.0)
    win = np.asarray(PB.diag_win, dtype=float)
    PA = build_li_Aprime(params.N)
    a_up = np.append(PA.data.diagonal(1), 0.0)
    a_down = np.insert(PA.data.diagonal(-1), 0, 0.0)
    mixed = cfg.game == "C'"
    rng = cfg.generator()
    measured = cfg.turns - cfg.burn_in
    sums = np.zeros(cfg.batches)
    i = int(bin(cfg.initial_state).count("1"))
    t = 0
    while t < cfg.turns:
        n = min(CHUNK, cfg.turns - t)
        u = rng.random((n, 2))
        i = _play_li_chunk(i, u, t, cfg.burn_in, measured, cfg.batches, mixed, float(params.gamma),
                           a_up, a_down, up, down, win, sums)
        t += n
    return _summarize(cfg, sums)


def replicate(cfg: SimConfig, replicas: int, workers: int = 1) -> list[SimResult]:
    """Independent runs on streams ``cfg.stream .. cfg.stream + replicas - 1``."""
    from dataclasses import replace

    configs = [replace(cfg, stream=cfg.stream + r) for r in range(replicas)]
    if workers <= 1:
        return [simulate(c) for c in configs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(simulate, configs))


__all__ = ["SimConfig", "SimResult", "simulate", "simulate_reduced_li", "replicate", "default_burn_in"]
