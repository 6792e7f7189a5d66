"""Seeded Monte Carlo estimation of objectives under a fixed strategy pair.

Every run ``k`` draws from its own generator
``Generator(Philox(SeedSequence(seed, spawn_key=(k,))))`` in blocks of
:data:`BLOCK` uniforms, so a run's payoff depends only on ``(seed, k)``
and never on the batch it was simulated in or on the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable

import numpy as np

from .discretize import ExtremeGame
from .model import Average, Discounted, Objective, Player, Reach, Total
from .rational import format_float
from .solver import Strategy

State = Hashable

BLOCK = 256
BATCH = 2048
RNG_NAME = "numpy Philox4x64 via SeedSequence(seed, spawn_key=(run,))"


def run_generator(seed: int, run: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(run,))))


@dataclass(frozen=True)
class SimConfig:
    runs: int
    seed: int
    horizon: int
    objective: Objective

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class SimReport:
    mean: float
    std_error: float
    runs_completed: int
    truncation_bound: float | None = None
    std_error_defined: bool = True
    payoffs: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "mean": format_float(self.mean),
            "std_error": format_float(self.std_error),
            "std_error_defined": self.std_error_defined,
            "runs_completed": self.runs_completed,
            "truncation_bound": None if self.truncation_bound is None else format_float(self.truncation_bound),
            "rng": RNG_NAME,
        }

    def to_csv(self) -> str:
        if self.payoffs is None:
            raise ValueError("per-run payoffs were not kept")
        return "run,payoff\n" + "".join(f"{k},{format_float(p)}\n" for k, p in enumerate(self.payoffs))


# ---------------------------------------------------------------------------
# induced Markov chain

class _Chain:
    def __init__(self, game: ExtremeGame, sb: Strategy, sd: Strategy, objective: Objective):
        self.states = list(game.states)
        index = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        dists = []
        for s in self.states:
            strat = sb if game.owner[s] is Player.BOX else sd
            if s not in strat.choice:
                raise ValueError(f"strategy of {strat.player.value} undefined at {s!r}")
            dists.append(game.actions[s][strat.choice[s]].distribution)
        width = max(len(d) for d in dists)
        self.succ = np.zeros((n, width), dtype=np.int64)
        self.cum = np.full((n, width), 2.0)
        for i, d in enumerate(dists):
            acc = Fraction(0)
            for j, (t, p) in enumerate(d):
                acc += p
                self.succ[i, j] = index[t]
                self.cum[i, j] = float(acc)
            self.cum[i, len(d) - 1] = 1.0
            self.succ[i, len(d):] = self.succ[i, len(d) - 1]
        self.reward = np.array([float(game.reward.get(s, 0)) for s in self.states])
        stop = np.array([s in game.terminals for s in self.states])
        if isinstance(objective, Reach):
            self.goal = np.array([s in objective.goal for s in self.states])
            stop |= self.goal
        else:
            self.goal = None
        self.stop = stop
        self.initial = index[game.initial if game.initial is not None else self.states[0]]

    def step(self, cur: np.ndarray, u: np.ndarray) -> np.ndarray:
        j = (u[:, None] >= self.cum[cur]).sum(axis=1)
        return self.succ[cur, j]


class _Payoff:
    """Accumulates the objective's payoff of one path, state by state."""

    def __init__(self, objective: Objective, horizon: int):
        self.objective = objective
        self.horizon = horizon
        self.gamma = float(objective.gamma) if isinstance(objective, Discounted) else 1.0
        self.burn = horizon // 10

    def weight(self, i):
        """Weight of the reward collected at step ``i`` (array-friendly)."""
        if isinstance(self.objective, Discounted):
            return self.gamma ** i
        if isinstance(self.objective, Average):
            return np.where(np.asarray(i) >= self.burn, 1.0, 0.0) / (self.horizon - self.burn)
        return 1.0


def _simulate_batch(chain: _Chain, pay: _Payoff, objective, seed: int, runs: range) -> np.ndarray:
    m = len(runs)
    gens = [run_generator(seed, k) for k in runs]
    cur = np.full(m, chain.initial, dtype=np.int64)
    total = np.zeros(m)
    active = np.ones(m, dtype=bool)
    reach = isinstance(objective, Reach)
    hit = np.zeros(m, dtype=bool)
    i = 0
    while True:
        # state i of the path is cur
        if reach:
            hit |= active & chain.goal[cur]
        else:
            w = pay.weight(i)
            total += np.where(active, chain.reward[cur] * w, 0.0)
        active &= ~chain.stop[cur]
        if i + 1 >= pay.horizon:
            break
        if not active.any():
            break
        if i % BLOCK == 0:
            idx = np.nonzero(active)[0]
            block = np.zeros((m, BLOCK))
            for j in idx:
                block[j] = gens[j].random(BLOCK)
        u = block[:, i % BLOCK]
        nxt = chain.step(cur, u)
        cur = np.where(active, nxt, cur)
        i += 1
    return hit.astype(float) if reach else total


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("POLYGAME_THREADS", "1")))
    except ValueError:
        return 1


def sample_path(
    game: ExtremeGame,
    sb: Strategy,
    sd: Strategy,
    horizon: int,
    rng: np.random.Generator,
    objective: Objective = Total(),
) -> tuple[list, float]:
    """One play of at most ``horizon`` states and its payoff.

    The play stops early on a terminal state or, for reachability, on a goal
    state.  Uniforms are drawn from ``rng`` in blocks exactly as
    :func:`estimate` does, so ``sample_path(..., run_generator(seed, k))``
    reproduces run ``k`` of an estimate.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    chain = _Chain(game, sb, sd, objective)
    pay = _Payoff(objective, horizon)
    cur = chain.initial
    path = [cur]
    total = 0.0
    hit = False
    i = 0
    while True:
        if chain.goal is not None:
            hit = hit or bool(chain.goal[cur])
        else:
            total += float(chain.reward[cur] * pay.weight(i))
        if chain.stop[cur] or i + 1 >= horizon:
            break
        if i % BLOCK == 0:
            block = rng.random(BLOCK)
        cur = int(chain.step(np.array([cur]), block[i % BLOCK:i % BLOCK + 1])[0])
        path.append(cur)
        i += 1
    payoff = float(hit) if chain.goal is not None else total
    return [chain.states[k] for k in path], payoff


def estimate(game: ExtremeGame, sb: Strategy, sd: Strategy, config: SimConfig, keep_payoffs: bool = False) -> SimReport:
    """Mean payoff and its standard error over ``config.runs`` independent plays."""
    objective = config.objective
    chain = _Chain(game, sb, sd, objective)
    pay = _Payoff(objective, config.horizon)
    batches = [range(a, min(a + BATCH, config.runs)) for a in range(0, config.runs, BATCH)]

    def work(r):
        return _simulate_batch(chain, pay, objective, config.seed, r)

    threads = _threads()
    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, batches))
    else:
        parts = [work(r) for r in batches]
    payoffs = np.concatenate(parts)

    mean = float(payoffs.mean())
    if config.runs > 1:
        std_error = float(payoffs.std(ddof=1) / math.sqrt(config.runs))
        defined = True
    else:
        std_error, defined = 0.0, False
    bound = None
    if isinstance(objective, Discounted):
        g = float(objective.gamma)
        r_max = float(chain.reward.max(initial=0.0))
        bound = g ** config.horizon * r_max / (1 - g)
    return SimReport(mean, std_error, config.runs, bound, defined, payoffs if keep_payoffs else None)


# ---------------------------------------------------------------------------
# exact finite-horizon expectations

def step_distributions(game: ExtremeGame, sb: Strategy, sd: Strategy, n: int, start: State | None = None) -> list[dict]:
    """Exact ``P(X_i = s')`` for ``i = 0..n`` in the induced chain."""
    start = game.initial if start is None else start
    dist = {start: Fraction(1)}
    out = [dist]
    for _ in range(n):
        nxt: dict = {}
        for s, p in dist.items():
            strat = sb if game.owner[s] is Player.BOX else sd
            for t, q in game.actions[s][strat.choice[s]].distribution:
                nxt[t] = nxt.get(t, Fraction(0)) + p * q
        dist = nxt
        out.append(dist)
    return out


def expected_finite_reward(
    game: ExtremeGame,
    sb: Strategy,
    sd: Strategy,
    n: int,
    f: Callable[[int, int], Fraction],
    start: State | None = None,
) -> Fraction:
    """``sum_i sum_s' P(X_i = s') f(i, n) r(s')`` computed from step marginals."""
    total = Fraction(0)
    for i, dist in enumerate(step_distributions(game, sb, sd, n, start)):
        total += sum((p * Fraction(game.reward.get(s, 0)) for s, p in dist.items()), Fraction(0)) * f(i, n)
    return total
