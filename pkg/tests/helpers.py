"""Named instances and independent oracles shared by the test modules."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from polygame.discretize import build_extreme_game
from polygame.model import Average, Discounted, Player, Reach, from_imdp_intervals, make_psg
from polygame.errors import NotInSimplex
from polygame.polytope import barycentric, dirac, enumerate_vertices, triangulate
from polygame.random_games import random_distribution, random_polytope

F = Fraction


def e1(owner=Player.BOX):
    """s0 moves to goal g with probability in [0.3, 0.7], otherwise to sink z."""
    seg = from_imdp_intervals(["g", "z"], {"g": F(3, 10)}, {"g": F(7, 10)})
    return make_psg(
        ["s0", "g", "z"],
        {"s0": owner, "g": Player.BOX, "z": Player.BOX},
        {"s0": [seg], "g": [dirac("g")], "z": [dirac("z")]},
        terminals=["g", "z"],
        labels={"goal": ["g"]},
    )


def e4(owner=Player.BOX):
    """s0 (reward 1) escapes to terminal t with probability in [0.5, 0.9]."""
    poly = from_imdp_intervals(["s0", "t"], {"t": F(1, 2)}, {"t": F(9, 10)})
    return make_psg(
        ["s0", "t"], {"s0": owner, "t": Player.BOX},
        {"s0": [poly], "t": [dirac("t")]},
        reward={"s0": 1}, terminals=["t"],
    )


def e5():
    """a (reward 0) moves to b with probability in [0.2, 0.8]; b (reward 1) returns to a."""
    poly = from_imdp_intervals(["a", "b"], {"b": F(1, 5)}, {"b": F(4, 5)})
    return make_psg(
        ["a", "b"], {"a": Player.BOX, "b": Player.BOX},
        {"a": [poly], "b": [dirac("a")]},
        reward={"b": 1},
    )


def geometric():
    """Single state, Dirac self-loop, reward 1."""
    return make_psg(["s"], {"s": Player.BOX}, {"s": [dirac("s")]}, reward={"s": 1})


def extreme(game):
    return build_extreme_game(game)


# ---------------------------------------------------------------------------
# exact linear algebra, written independently of polygame.polytope

def gauss_solve(a, b):
    """Unique solution of the square-or-tall system ``a x = b`` or ``None``."""
    m = [list(map(F, row)) + [F(v)] for row, v in zip(a, b)]
    n = len(a[0]) if a else 0
    r = 0
    pivots = []
    for c in range(n):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        piv = m[r][c]
        m[r] = [x / piv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    if r < n:
        return None
    if any(row[-1] != 0 for row in m[r:]):
        return None
    x = [F(0)] * n
    for i, c in enumerate(pivots):
        x[c] = m[i][-1]
    return x


def all_rows(poly):
    """Every row of the polytope including the simplex rows, as (vec, rel, bound)."""
    n = len(poly.support)
    rows = [(tuple([F(1)] * n), "=", F(1))]
    rows += [(tuple(F(int(i == j)) for j in range(n)), ">=", F(0)) for i in range(n)]
    for con in poly.constraints:
        coeffs = dict(con.coeffs)
        vec = tuple(F(coeffs.get(s, 0)) for s in poly.support)
        rows.append((vec, con.relation, F(con.bound)))
    return rows


def satisfies(rows, x):
    for vec, rel, b in rows:
        v = sum((c * xi for c, xi in zip(vec, x)), F(0))
        if (rel == "<=" and v > b) or (rel == ">=" and v < b) or (rel == "=" and v != b):
            return False
    return True


def active_subset_vertices(poly):
    """Basic feasible solutions: every choice of n rows, solved and filtered."""
    rows = all_rows(poly)
    n = len(poly.support)
    eqs = [r for r in rows if r[1] == "="]
    ineqs = [r for r in rows if r[1] != "="]
    found = set()
    for k in range(0, n + 1):
        for subset in itertools.combinations(ineqs, k):
            chosen = eqs + list(subset)
            x = gauss_solve([r[0] for r in chosen], [r[2] for r in chosen])
            if x is not None and satisfies(rows, x):
                found.add(tuple(x))
    return found


# ---------------------------------------------------------------------------
# exhaustive path expectations

def path_expectation(game, sb, sd, n, f, start=None):
    """Sum over all positive-probability paths of length n+1 of P(path) * sum_i f(i,n) r(path_i)."""
    start = game.initial if start is None else start

    def step(s):
        strat = sb if game.owner[s] is Player.BOX else sd
        return game.actions[s][strat.choice[s]].distribution

    def walk(path, p):
        if len(path) == n + 1:
            return p * sum((f(i, n) * F(game.reward.get(s, 0)) for i, s in enumerate(path)), F(0))
        return sum((walk(path + (t,), p * F(q)) for t, q in step(path[-1]) if q != 0), F(0))

    return walk((start,), F(1))


# ---------------------------------------------------------------------------
# independent float evaluation of a fixed joint choice

def induced_matrix(eg, choice):
    idx = {s: i for i, s in enumerate(eg.states)}
    p = np.zeros((len(eg.states), len(eg.states)))
    for i, s in enumerate(eg.states):
        for t, q in eg.actions[s][choice[i]].distribution:
            p[i, idx[t]] += float(q)
    return p


def evaluate_choice(eg, choice, objective):
    p = induced_matrix(eg, choice)
    n = len(p)
    r = np.array([float(eg.reward[s]) for s in eg.states])
    if isinstance(objective, Discounted):
        return np.linalg.solve(np.eye(n) - float(objective.gamma) * p, r)
    if isinstance(objective, Average):
        # stationary distribution of the unichain induced chain
        a = np.vstack([p.T - np.eye(n), np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(a, b, rcond=None)[0]
        return np.full(n, float(pi @ r))
    if isinstance(objective, Reach):
        goal = np.array([s in objective.goal for s in eg.states])
        reach = goal.copy()
        while True:
            nxt = reach | ((p > 0) & reach[None, :]).any(axis=1)
            if (nxt == reach).all():
                break
            reach = nxt
        x = np.where(goal, 1.0, 0.0)
        rest = np.nonzero(reach & ~goal)[0]
        if len(rest):
            q = p[np.ix_(rest, rest)]
            b = p[np.ix_(rest, np.nonzero(goal)[0])].sum(axis=1)
            x[rest] = np.linalg.solve(np.eye(len(rest)) - q, b)
        return x
    term = np.array([s in eg.terminals for s in eg.states])
    rest = np.nonzero(~term)[0]
    x = np.zeros(n)
    x[rest] = np.linalg.solve(np.eye(len(rest)) - p[np.ix_(rest, rest)], r[rest])
    return x


def minimax(eg, objective):
    """(supinf, infsup) by direct enumeration with :func:`evaluate_choice`."""
    box = [i for i, s in enumerate(eg.states) if eg.owner[s] is Player.BOX]
    dia = [i for i, s in enumerate(eg.states) if eg.owner[s] is not Player.BOX]
    sizes = [len(eg.actions[s]) for s in eg.states]
    rows = []
    for bc in itertools.product(*(range(sizes[i]) for i in box)):
        row = []
        for dc in itertools.product(*(range(sizes[i]) for i in dia)):
            choice = [0] * len(sizes)
            for i, a in zip(box, bc):
                choice[i] = a
            for i, a in zip(dia, dc):
                choice[i] = a
            row.append(evaluate_choice(eg, choice, objective))
        rows.append(row)
    table = np.array(rows)
    return table.min(axis=1).max(axis=0), table.max(axis=0).min(axis=0)


# ---------------------------------------------------------------------------
# random polytopes and triangulation invariants

def random_polys(seed, count, max_support=4, max_constraints=6, min_support=1):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(min_support, max_support)
        out.append(random_polytope(rng, [f"s{i}" for i in range(n)], max_constraints))
    return out


def _weights(simplex, point):
    """Independent barycentric solve; ``None`` if the point is outside."""
    n = len(point)
    a = [[v[i] for v in simplex.vertices] for i in range(n)] + [[F(1)] * len(simplex.vertices)]
    w = gauss_solve(a, list(point) + [F(1)])
    if w is None or any(x < 0 for x in w):
        return None
    return w


def sample_points(rng, verts, count):
    pts = []
    for _ in range(count):
        w = random_distribution(rng, len(verts), denominator=rng.choice([5, 12, 60]))
        # often push points onto faces so boundaries are exercised
        if len(verts) > 1 and rng.random() < 0.3:
            w[rng.randrange(len(w))] = F(0)
            total = sum(w)
            w = [x / total for x in w]
        pts.append(tuple(sum((wi * v[k] for wi, v in zip(w, verts)), F(0)) for k in range(len(verts[0]))))
    return pts


def check_triangulation(poly, rng, count):
    verts = enumerate_vertices(poly)
    simp = triangulate(poly, verts)
    dim = poly.dimension
    used = set()
    for s in simp:
        used |= set(s.vertex_indices)
        assert s.dimension == dim
        assert all(verts[i] == v for i, v in zip(s.vertex_indices, s.vertices))
    assert used == set(range(len(verts)))
    for p in sample_points(rng, list(verts.vertices), count):
        inside = 0
        interior = 0
        for s in simp:
            w = _weights(s, p)
            if w is None:
                with pytest.raises(NotInSimplex):
                    barycentric(s, p)
                continue
            inside += 1
            interior += all(x > 0 for x in w)
            coords = barycentric(s, p)
            assert coords.reconstruct(s) == p
        assert inside >= 1
        assert interior <= 1
    # centroid of each simplex lies in no other simplex's relative interior
    for a in simp:
        c = tuple(sum(v[k] for v in a.vertices) / len(a.vertices) for k in range(len(a.vertices[0])))
        for b in simp:
            if b is not a:
                w = _weights(b, c)
                assert w is None or not all(x > 0 for x in w)
