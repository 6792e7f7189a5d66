import itertools
import json
import random
from fractions import Fraction as F

import numpy as np

from helpers import e1, e4, e5
from polygame.discretize import (
    avoid_set, build_extreme_game, check_irreducible, check_stopping, to_dot, to_json,
)
from polygame.model import Player, make_psg
from polygame.polytope import LinearConstraint, build_dist_polytope, dirac, enumerate_vertices
from polygame.random_games import random_polytope


def test_interval_game_actions():
    eg = build_extreme_game(e1())
    assert [a.as_dict() for a in eg.actions["s0"]] == [{"g": F(7, 10), "z": F(3, 10)}, {"g": F(3, 10), "z": F(7, 10)}]
    assert eg.n_actions("g") == 1


def test_all_dirac_one_action_each():
    g = make_psg(["a", "b"], {"a": "box", "b": "diamond"}, {"a": [dirac("b")], "b": [dirac("a")]})
    eg = build_extreme_game(g)
    assert all(eg.n_actions(s) == 1 for s in eg.states)


def test_concatenation_order():
    seg = build_dist_polytope(["a", "b"], [LinearConstraint.of({"a": 1}, "<=", F(1, 2))])
    quad = build_dist_polytope(["a", "b", "c"], [LinearConstraint.of({"a": 1}, ">=", F(1, 5)),
                                                LinearConstraint.of({"a": 1}, "<=", F(2, 5)),
                                                LinearConstraint.of({"b": 1}, ">=", F(1, 5)),
                                                LinearConstraint.of({"b": 1}, "<=", F(2, 5))])
    g = make_psg(["a", "b", "c"], {s: "box" for s in "abc"},
                 {"a": [seg, quad], "b": [dirac("b")], "c": [dirac("c")]})
    eg = build_extreme_game(g)
    acts = eg.actions["a"]
    assert len(acts) == 6
    assert [(x.polytope_index, x.vertex_index) for x in acts] == [(0, 0), (0, 1)] + [(1, j) for j in range(4)]
    verts = enumerate_vertices(quad).as_dicts()
    assert [x.as_dict() for x in acts[2:]] == verts
    assert eg.strategy_space_size(Player.BOX) == 6


def test_actions_sum_to_one():
    eg = build_extreme_game(e5())
    for s in eg.states:
        for a in eg.actions[s]:
            assert sum(p for _, p in a.distribution) == 1
            assert a.support() <= set(eg.states)


def test_relabel_commutes():
    g = e4()
    mapping = {"s0": "x", "t": "y"}
    renamed = make_psg(["x", "y"], {"x": "box", "y": "box"},
                       {"x": [_rename(g.theta["s0"][0], mapping)], "y": [dirac("y")]},
                       reward={"x": 1}, terminals=["y"])
    assert build_extreme_game(g).relabel(mapping) == build_extreme_game(renamed)


def _rename(poly, mapping):
    cons = [LinearConstraint.of({mapping[s]: c for s, c in con.coeffs}, con.relation, con.bound)
            for con in poly.constraints]
    return build_dist_polytope([mapping[s] for s in poly.support], cons)


# -- preconditions ------------------------------------------------------------

def test_stopping_examples():
    assert check_stopping(build_extreme_game(e4()))
    loop = make_psg(["s", "t"], {"s": "box", "t": "box"}, {"s": [dirac("s"), dirac("t")], "t": [dirac("t")]},
                    terminals=["t"])
    assert not check_stopping(build_extreme_game(loop))
    assert avoid_set(build_extreme_game(loop), {"t"}) == {"s"}
    allterm = make_psg(["t"], {"t": "box"}, {"t": [dirac("t")]}, terminals=["t"])
    assert check_stopping(build_extreme_game(allterm))


def test_irreducible_examples():
    assert check_irreducible(build_extreme_game(e5()))
    assert not check_irreducible(build_extreme_game(e1()))
    single = make_psg(["s"], {"s": "box"}, {"s": [dirac("s")]})
    assert check_irreducible(build_extreme_game(single))


def _joint_choices(eg):
    return itertools.product(*[range(eg.n_actions(s)) for s in eg.states])


def _matrix(eg, choice):
    idx = eg.index()
    n = len(eg.states)
    p = np.zeros((n, n))
    for i, s in enumerate(eg.states):
        for t, q in eg.actions[s][choice[i]].distribution:
            p[i, idx[t]] += float(q)
    return p


def _reaches(p):
    n = len(p)
    r = (p > 0) | np.eye(n, dtype=bool)
    for k in range(n):
        r = r | (r[:, [k]] & r[[k], :])
    return r


def brute_stopping(eg):
    idx = eg.index()
    term = [idx[t] for t in eg.terminals]
    for choice in _joint_choices(eg):
        p = _matrix(eg, choice)
        n = len(p)
        can = _reaches(p)[:, term].any(axis=1) if term else np.zeros(n, dtype=bool)
        if not can.all():
            return False
        # absorption probability from the linear system on non-terminal states
        rest = [i for i in range(n) if i not in term]
        if rest:
            q = p[np.ix_(rest, rest)]
            b = p[np.ix_(rest, term)].sum(axis=1)
            x = np.linalg.solve(np.eye(len(rest)) - q, b)
            if not np.allclose(x, 1.0, atol=1e-9):
                return False
    return True


def brute_irreducible(eg):
    return all(_reaches(_matrix(eg, c)).all() for c in _joint_choices(eg))


def random_structural_games(seed, count):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        n = rng.randint(1, 4)
        names = [f"s{i}" for i in range(n)]
        terminals = {s for s in names if rng.random() < 0.2}
        theta = {}
        for s in names:
            if s in terminals:
                theta[s] = [dirac(s)]
                continue
            polys = []
            for _ in range(rng.randint(1, 2)):
                sup = rng.sample(names, rng.randint(1, min(3, n)))
                polys.append(random_polytope(rng, sup, 3))
            theta[s] = polys
        g = make_psg(names, {s: rng.choice(["box", "diamond"]) for s in names}, theta, terminals=terminals)
        eg = build_extreme_game(g)
        if all(eg.n_actions(s) <= 3 for s in names):
            out.append(eg)
    return out


def test_stopping_agrees_with_brute_force():
    games = random_structural_games(1, 300)
    verdicts = [check_stopping(eg) for eg in games]
    assert verdicts == [brute_stopping(eg) for eg in games]
    assert any(verdicts) and not all(verdicts)


def test_irreducible_agrees_with_brute_force():
    games = random_structural_games(2, 300)
    verdicts = [check_irreducible(eg) for eg in games]
    assert verdicts == [brute_irreducible(eg) for eg in games]
    assert any(verdicts) and not all(verdicts)


# -- export -------------------------------------------------------------------

def test_json_export_exact():
    out = to_json(build_extreme_game(e1()))
    assert out["actions"]["s0"][0]["distribution"] == {"g": "0.7", "z": "0.3"}
    assert json.loads(json.dumps(out)) == out


def test_dot_export():
    dot = to_dot(build_extreme_game(e1()))
    assert dot.startswith("digraph") and '"s0"' in dot and dot.rstrip().endswith("}")
