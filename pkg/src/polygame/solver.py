"""Solving extreme games: values, optimal strategies, certificates.

Values are binary64.  Reachability, total and discounted objectives use
value iteration (Jacobi or Gauss-Seidel sweeps); the average objective
uses Hoffman-Karp strategy iteration with unichain gain/bias evaluations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .discretize import ExtremeGame, check_irreducible, check_stopping
from .errors import NotConverged, PreconditionFailed, SingularSystem, TooManyStrategies
from .model import Average, Discounted, Objective, Player, Reach, Total, check_objective
from .rational import format_float

State = Hashable

# two backups within this distance count as a tie (lowest index wins)
TIE_TOL = 1e-12
# slack for "optimal action" when building reachability attractors
REACH_SLACK = 1e-6
DENSE_LIMIT = 600


@dataclass(frozen=True)
class Strategy:
    """Deterministic memoryless strategy: owned state -> action index."""

    player: Player
    choice: Mapping[State, int]

    def __getitem__(self, s: State) -> int:
        return self.choice[s]

    def to_json(self) -> dict:
        return {str(s): int(a) for s, a in self.choice.items()}


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-9
    max_iterations: int = 10**6
    sweep: str = "jacobi"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.sweep not in ("jacobi", "gauss-seidel"):
            raise ValueError("sweep must be 'jacobi' or 'gauss-seidel'")


@dataclass
class SolveResult:
    values: dict
    strategy_box: Strategy
    strategy_diamond: Strategy
    iterations: int
    residual: float
    objective: Objective | None = None
    converged: bool = True
    bias: dict | None = field(default=None)

    def to_json(self) -> dict:
        out = {
            "objective": objective_to_json(self.objective),
            "converged": self.converged,
            "iterations": int(self.iterations),
            "residual": format_float(self.residual),
            "values": {str(s): format_float(v) for s, v in self.values.items()},
            "strategy_box": self.strategy_box.to_json(),
            "strategy_diamond": self.strategy_diamond.to_json(),
        }
        if self.bias is not None:
            out["bias"] = {str(s): format_float(v) for s, v in self.bias.items()}
        return out


def objective_to_json(obj: Objective | None) -> dict | None:
    if obj is None:
        return None
    if isinstance(obj, Reach):
        return {"kind": "reach", "goal": sorted(str(s) for s in obj.goal)}
    if isinstance(obj, Discounted):
        return {"kind": "discounted", "gamma": str(obj.gamma)}
    return {"kind": obj.name}


# ---------------------------------------------------------------------------
# numeric form of an extreme game

class _Compiled:
    def __init__(self, game: ExtremeGame):
        self.game = game
        self.states = list(game.states)
        self.index = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        self.n = n
        offsets = [0]
        rows, cols, vals = [], [], []
        a = 0
        for s in self.states:
            for act in game.actions[s]:
                for t, p in act.distribution:
                    rows.append(a)
                    cols.append(self.index[t])
                    vals.append(float(p))
                a += 1
            offsets.append(a)
        self.offsets = np.array(offsets, dtype=np.int64)
        self.n_actions = a
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(a, n))
        self.box = np.array([game.owner[s] is Player.BOX for s in self.states])
        self.reward = np.array([float(game.reward.get(s, 0)) for s in self.states])
        self.terminal = np.array([s in game.terminals for s in self.states])
        self._dense = None

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self.P.toarray()
        return self._dense

    def actions_of(self, i: int) -> range:
        return range(self.offsets[i], self.offsets[i + 1])

    def goal_mask(self, objective) -> np.ndarray:
        return np.array([s in objective.goal for s in self.states])

    def opt(self, q: np.ndarray) -> np.ndarray:
        starts = self.offsets[:-1]
        return np.where(self.box, np.maximum.reduceat(q, starts), np.minimum.reduceat(q, starts))

    def rows_for(self, choice: np.ndarray) -> np.ndarray:
        return self.offsets[:-1] + choice

    def induced(self, choice: np.ndarray):
        rows = self.rows_for(choice)
        if self.n <= DENSE_LIMIT:
            return self.dense[rows]
        return self.P[rows]


def _compile(game) -> _Compiled:
    return game if isinstance(game, _Compiled) else _Compiled(game)


def _backup(cg: _Compiled, v: np.ndarray, objective, goal=None) -> np.ndarray:
    best = cg.opt(cg.P @ v)
    if isinstance(objective, Reach):
        return np.where(goal, 1.0, best)
    if isinstance(objective, Discounted):
        return cg.reward + float(objective.gamma) * best
    return cg.reward + best


def _initial(cg: _Compiled, objective, goal) -> np.ndarray:
    if isinstance(objective, Reach):
        return goal.astype(float)
    return np.zeros(cg.n)


def _gauss_seidel_sweep(cg: _Compiled, v: np.ndarray, objective, goal) -> np.ndarray:
    v = v.copy()
    P = cg.P
    gamma = float(objective.gamma) if isinstance(objective, Discounted) else 1.0
    for i in range(cg.n):
        if goal is not None and goal[i]:
            v[i] = 1.0
            continue
        lo, hi = cg.offsets[i], cg.offsets[i + 1]
        q = [P.data[P.indptr[a]:P.indptr[a + 1]] @ v[P.indices[P.indptr[a]:P.indptr[a + 1]]] for a in range(lo, hi)]
        best = max(q) if cg.box[i] else min(q)
        if isinstance(objective, Reach):
            v[i] = best
        else:
            v[i] = cg.reward[i] + gamma * best
    return v


def value_iterates(game, objective: Objective, opts: SolveOptions = SolveOptions()) -> Iterator[np.ndarray]:
    """Yield ``v_0, v_1, ...`` of value iteration for a non-average objective."""
    cg = _compile(game)
    goal = cg.goal_mask(objective) if isinstance(objective, Reach) else None
    v = _initial(cg, objective, goal)
    yield v
    while True:
        if opts.sweep == "jacobi":
            v = _backup(cg, v, objective, goal)
        else:
            v = _gauss_seidel_sweep(cg, v, objective, goal)
        yield v


# ---------------------------------------------------------------------------
# strategy extraction

def _argopt(q: np.ndarray, maximize: bool) -> int:
    best = q.max() if maximize else q.min()
    tol = TIE_TOL * max(1.0, abs(best))
    hits = np.nonzero(q >= best - tol)[0] if maximize else np.nonzero(q <= best + tol)[0]
    return int(hits[0])


def _greedy(cg: _Compiled, v: np.ndarray) -> np.ndarray:
    q = cg.P @ v
    return np.array([_argopt(q[cg.offsets[i]:cg.offsets[i + 1]], cg.box[i]) for i in range(cg.n)], dtype=np.int64)


def _reach_choice(cg: _Compiled, v: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Greedy choice, except □ walks an attractor toward the goal.

    Plain argmax can pick an action that keeps the play inside an end
    component forever; choosing, among near-optimal actions, one that moves
    into the already-secured region avoids that.
    """
    choice = _greedy(cg, v)
    q = cg.P @ v
    P = cg.P
    secured = goal.copy()
    open_ = [i for i in range(cg.n) if not goal[i] and v[i] > REACH_SLACK]
    while True:
        joined = {}
        for i in open_:
            acts = cg.actions_of(i)
            if cg.box[i]:
                best = q[acts.start:acts.stop].max()
                for a in acts:
                    if q[a] >= best - REACH_SLACK:
                        idx = P.indices[P.indptr[a]:P.indptr[a + 1]]
                        if secured[idx].any():
                            joined[i] = a - acts.start
                            break
            else:
                if all(secured[P.indices[P.indptr[a]:P.indptr[a + 1]]].any() for a in acts):
                    joined[i] = None
        if not joined:
            break
        for i, a in joined.items():
            secured[i] = True
            if a is not None:
                choice[i] = a
        open_ = [i for i in open_ if i not in joined]
    return choice


def _split(cg: _Compiled, choice: np.ndarray) -> tuple[Strategy, Strategy]:
    box = {s: int(choice[i]) for i, s in enumerate(cg.states) if cg.box[i]}
    dia = {s: int(choice[i]) for i, s in enumerate(cg.states) if not cg.box[i]}
    return Strategy(Player.BOX, box), Strategy(Player.DIAMOND, dia)


def _as_vector(cg: _Compiled, values) -> np.ndarray:
    if isinstance(values, np.ndarray):
        return values.astype(float)
    return np.array([float(values[s]) for s in cg.states])


def extract_strategies(game: ExtremeGame, values, objective: Objective, bias=None) -> tuple[Strategy, Strategy]:
    """Optimal deterministic memoryless pair read off a (near-)fixpoint.

    □ takes the arg-max of the one-step backup and ◇ the arg-min, ties going
    to the lowest action index.  For the average objective the backup is
    taken on the bias; when ``bias`` is omitted it is recomputed.
    """
    cg = _compile(game)
    if isinstance(objective, Average):
        if bias is None:
            bias = solve(cg.game, objective).bias
        return _split(cg, _greedy(cg, _as_vector(cg, bias)))
    v = _as_vector(cg, values)
    if isinstance(objective, Reach):
        return _split(cg, _reach_choice(cg, v, cg.goal_mask(objective)))
    return _split(cg, _greedy(cg, v))


def _choice_array(cg: _Compiled, sb: Strategy, sd: Strategy) -> np.ndarray:
    out = np.zeros(cg.n, dtype=np.int64)
    for i, s in enumerate(cg.states):
        strat = sb if cg.box[i] else sd
        if s not in strat.choice:
            raise ValueError(f"strategy for {strat.player.value} is undefined at {s!r}")
        a = int(strat.choice[s])
        if not 0 <= a < cg.offsets[i + 1] - cg.offsets[i]:
            raise ValueError(f"action index {a} out of range at {s!r}")
        out[i] = a
    return out


# ---------------------------------------------------------------------------
# fixed strategy pairs

def _can_reach(P, target: np.ndarray) -> np.ndarray:
    """States with positive probability of eventually visiting ``target``."""
    reach = target.copy()
    while True:
        nxt = reach | (np.asarray(P @ reach.astype(float)).ravel() > 0)
        if (nxt == reach).all():
            return reach
        reach = nxt


def _solve_linear(A, b) -> np.ndarray:
    if sp.issparse(A):
        x = spla.spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("singular linear system")
        return np.atleast_1d(x)
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def _identity(P, k):
    return sp.identity(k, format="csr") if sp.issparse(P) else np.eye(k)


def _evaluate_choice(cg: _Compiled, choice: np.ndarray, objective) -> np.ndarray:
    P = cg.induced(choice)
    n = cg.n
    if isinstance(objective, Discounted):
        return _solve_linear(_identity(P, n) - float(objective.gamma) * P, cg.reward)
    if isinstance(objective, Reach):
        goal = cg.goal_mask(objective)
        live = _can_reach(P, goal) & ~goal
        v = goal.astype(float)
        idx = np.nonzero(live)[0]
        if len(idx):
            Pq = P[idx][:, idx]
            rhs = np.asarray(P[idx][:, np.nonzero(goal)[0]].sum(axis=1)).ravel()
            v[idx] = _solve_linear(_identity(P, len(idx)) - Pq, rhs)
        return v
    if isinstance(objective, Total):
        term = cg.terminal
        if not _can_reach(P, term).all():
            raise SingularSystem("strategy pair does not stop almost surely")
        v = np.zeros(n)
        idx = np.nonzero(~term)[0]
        if len(idx):
            Pq = P[idx][:, idx]
            v[idx] = _solve_linear(_identity(P, len(idx)) - Pq, cg.reward[idx])
        return v
    gain, _ = _gain_bias(cg, choice)
    return np.full(n, gain)


def _recurrent_class(P) -> np.ndarray:
    """Mask of the unique closed class; raises if the chain is not unichain."""
    G = P if sp.issparse(P) else sp.csr_matrix(P)
    G = G.copy()
    G.data = (G.data > 0).astype(float)
    ncomp, labels = connected_components(G, directed=True, connection="strong")
    closed = []
    for c in range(ncomp):
        members = labels == c
        out = np.asarray(G[members].sum(axis=0)).ravel()
        if not (out[~members] > 0).any():
            closed.append(members)
    if len(closed) != 1:
        raise SingularSystem(f"induced chain has {len(closed)} closed classes; not unichain")
    return closed[0]


def stationary_distribution(P) -> np.ndarray:
    rec = _recurrent_class(P)
    idx = np.nonzero(rec)[0]
    Pr = P[idx][:, idx]
    Pr = Pr.toarray() if sp.issparse(Pr) else np.asarray(Pr)
    k = len(idx)
    A = np.vstack([(np.eye(k) - Pr).T[:-1], np.ones(k)])
    b = np.zeros(k)
    b[-1] = 1.0
    pi = np.zeros(P.shape[0])
    pi[idx] = _solve_linear(A, b)
    return pi


def _gain_bias(cg: _Compiled, choice: np.ndarray) -> tuple[float, np.ndarray]:
    """Gain and bias (normalized to h = 0 on the first recurrent state)."""
    P = cg.induced(choice)
    n = cg.n
    pi = stationary_distribution(P)
    gain = float(pi @ cg.reward)
    ref = int(np.nonzero(pi > 0)[0][0])
    Pd = P.toarray() if sp.issparse(P) else P
    A = np.eye(n) - Pd
    A[ref] = 0.0
    A[ref, ref] = 1.0
    b = cg.reward - gain
    b[ref] = 0.0
    return gain, _solve_linear(A, b)


def evaluate_fixed(game: ExtremeGame, sb: Strategy, sd: Strategy, objective: Objective) -> dict:
    """Exact (up to the linear solver) values of the chain induced by a pair."""
    cg = _compile(game)
    check_objective(cg.game, objective)
    v = _evaluate_choice(cg, _choice_array(cg, sb, sd), objective)
    return dict(zip(cg.states, v.tolist()))


# ---------------------------------------------------------------------------
# average reward: Hoffman-Karp strategy iteration

def _improve(cg: _Compiled, choice: np.ndarray, h: np.ndarray, mask: np.ndarray, maximize: bool) -> tuple[np.ndarray, bool]:
    q = cg.P @ h
    new = choice.copy()
    changed = False
    for i in np.nonzero(mask)[0]:
        lo, hi = cg.offsets[i], cg.offsets[i + 1]
        cur = q[lo + choice[i]]
        seg = q[lo:hi]
        a = _argopt(seg, maximize)
        gap = (seg[a] - cur) if maximize else (cur - seg[a])
        if gap > 1e-10 * max(1.0, abs(cur)):
            new[i] = a
            changed = True
    return new, changed


def _average(cg: _Compiled, opts: SolveOptions) -> tuple[np.ndarray, float, np.ndarray, int]:
    choice = np.zeros(cg.n, dtype=np.int64)
    evaluations = 0
    for _ in range(opts.max_iterations):
        # ◇ best response to the current □ strategy
        while True:
            gain, h = _gain_bias(cg, choice)
            evaluations += 1
            choice, changed = _improve(cg, choice, h, ~cg.box, maximize=False)
            if not changed:
                break
        choice, changed = _improve(cg, choice, h, cg.box, maximize=True)
        if not changed:
            return choice, gain, h, evaluations
    raise RuntimeError("strategy iteration did not terminate")


def _average_residual(cg: _Compiled, gain_vec: np.ndarray, h: np.ndarray, tol_opt: float = 1e-9) -> float:
    q_g = cg.P @ gain_vec
    r1 = np.abs(gain_vec - cg.opt(q_g))
    q_h = cg.P @ h
    best = np.empty(cg.n)
    for i in range(cg.n):
        lo, hi = cg.offsets[i], cg.offsets[i + 1]
        seg_g = q_g[lo:hi]
        target = seg_g.max() if cg.box[i] else seg_g.min()
        ok = np.abs(seg_g - target) <= tol_opt
        seg = q_h[lo:hi][ok]
        best[i] = seg.max() if cg.box[i] else seg.min()
    r2 = np.abs(gain_vec + h - cg.reward - best)
    return float(max(r1.max(initial=0.0), r2.max(initial=0.0)))


# ---------------------------------------------------------------------------
# main entry points

def _residual(cg: _Compiled, v: np.ndarray, objective, goal) -> float:
    return float(np.max(np.abs(_backup(cg, v, objective, goal) - v), initial=0.0))


def solve(game: ExtremeGame, objective: Objective, opts: SolveOptions = SolveOptions()) -> SolveResult:
    """Game values and an optimal deterministic memoryless strategy pair."""
    cg = _compile(game)
    game = cg.game
    check_objective(game, objective)
    if isinstance(objective, Total) and not check_stopping(game):
        raise PreconditionFailed("Stopping", "total reward needs an almost surely stopping game")
    if isinstance(objective, Average) and not check_irreducible(game):
        raise PreconditionFailed("Irreducible", "average reward needs an irreducible game")

    if isinstance(objective, Average):
        choice, gain, h, evals = _average(cg, opts)
        values = np.full(cg.n, gain)
        sb, sd = _split(cg, choice)
        return SolveResult(
            values=dict(zip(cg.states, values.tolist())),
            strategy_box=sb,
            strategy_diamond=sd,
            iterations=evals,
            residual=_average_residual(cg, values, h),
            objective=objective,
            bias=dict(zip(cg.states, h.tolist())),
        )

    goal = cg.goal_mask(objective) if isinstance(objective, Reach) else None
    it = value_iterates(cg, objective, opts)
    v = next(it)
    iterations = 0
    converged = False
    change = float("inf")
    for nxt in it:
        iterations += 1
        change = float(np.max(np.abs(nxt - v), initial=0.0))
        v = nxt
        if change <= opts.tolerance:
            converged = True
            break
        if iterations >= opts.max_iterations:
            break

    residual = _residual(cg, v, objective, goal)
    if isinstance(objective, Reach):
        choice = _reach_choice(cg, v, goal)
    else:
        choice = _greedy(cg, v)

    if converged:
        try:
            u = _evaluate_choice(cg, choice, objective)
        except SingularSystem:
            u = None
        if u is not None and np.max(np.abs(u - v), initial=0.0) <= 1e-6:
            ru = _residual(cg, u, objective, goal)
            if ru <= min(residual, opts.tolerance):
                v, residual = u, ru

    sb, sd = _split(cg, choice)
    result = SolveResult(
        values=dict(zip(cg.states, v.tolist())),
        strategy_box=sb,
        strategy_diamond=sd,
        iterations=iterations,
        residual=residual,
        objective=objective,
        converged=converged,
    )
    if not converged:
        raise NotConverged(result)
    return result


def verify_fixpoint(game: ExtremeGame, values, objective: Objective, tol: float = 1e-7, bias=None) -> bool:
    """Check that ``values`` is a Bellman fixpoint within ``tol`` (sup norm).

    For the average objective both the gain and the bias optimality
    equations are checked; ``bias`` defaults to the one computed by
    :func:`solve`.
    """
    cg = _compile(game)
    v = _as_vector(cg, values)
    if isinstance(objective, Average):
        if bias is None:
            bias = solve(cg.game, objective).bias
        return _average_residual(cg, v, _as_vector(cg, bias)) <= tol
    goal = cg.goal_mask(objective) if isinstance(objective, Reach) else None
    if _residual(cg, v, objective, goal) > tol:
        return False
    if isinstance(objective, Reach):
        # Reach fixpoints are not unique: any fixpoint bounds the value from
        # above, and it is the least one iff it vanishes wherever ◇ can keep
        # the play out of G against the □ strategy read off the values.
        if v.min(initial=0.0) < -tol or v.max(initial=0.0) > 1 + tol:
            return False
        trapped = _avoiders(cg, _reach_choice(cg, v, goal), goal)
        return not trapped.any() or v[trapped].max() <= tol
    return True


def _avoiders(cg: _Compiled, choice: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """States from which ◇ can avoid ``goal`` forever when □ plays ``choice``."""
    P = cg.P
    alive = ~goal.copy()
    changed = True
    while changed:
        changed = False
        for i in np.nonzero(alive)[0]:
            acts = [cg.offsets[i] + choice[i]] if cg.box[i] else range(cg.offsets[i], cg.offsets[i + 1])
            if not any(alive[P.indices[P.indptr[a]:P.indptr[a + 1]]].all() for a in acts):
                alive[i] = False
                changed = True
    return alive


def brute_force_value(game: ExtremeGame, objective: Objective, limit: int = 10**6) -> tuple[dict, dict]:
    """sup-inf and inf-sup values over all deterministic memoryless pairs."""
    cg = _compile(game)
    check_objective(cg.game, objective)
    box_idx = [i for i in range(cg.n) if cg.box[i]]
    dia_idx = [i for i in range(cg.n) if not cg.box[i]]
    sizes = cg.offsets[1:] - cg.offsets[:-1]
    nb = int(np.prod([sizes[i] for i in box_idx], dtype=object)) if box_idx else 1
    nd = int(np.prod([sizes[i] for i in dia_idx], dtype=object)) if dia_idx else 1
    if nb * nd > limit:
        raise TooManyStrategies(f"{nb} x {nd} strategy pairs exceed the limit {limit}")
    table = np.empty((nb, nd, cg.n))
    choice = np.zeros(cg.n, dtype=np.int64)
    for bi, bchoice in enumerate(itertools.product(*(range(sizes[i]) for i in box_idx))):
        choice[box_idx] = bchoice
        for di, dchoice in enumerate(itertools.product(*(range(sizes[i]) for i in dia_idx))):
            choice[dia_idx] = dchoice
            table[bi, di] = _evaluate_choice(cg, choice, objective)
    supinf = table.min(axis=1).max(axis=0)
    infsup = table.max(axis=0).min(axis=0)
    return dict(zip(cg.states, supinf.tolist())), dict(zip(cg.states, infsup.tolist()))
