import itertools
import json
import random
from fractions import Fraction as F

import numpy as np
import pytest

from helpers import e1, e4, e5, geometric, minimax
from polygame.discretize import build_extreme_game
from polygame.errors import NotConverged, PreconditionFailed, SingularSystem, TooManyStrategies
from polygame.model import Average, Discounted, Player, Reach, Total, make_psg
from polygame.polytope import dirac, from_point
from polygame.random_games import random_game
from polygame.solver import (
    SolveOptions, Strategy, brute_force_value, evaluate_fixed, extract_strategies, solve,
    value_iterates, verify_fixpoint,
)

GOAL = Reach({"g"})


def box(**choice):
    return Strategy(Player.BOX, choice)


def dia(**choice):
    return Strategy(Player.DIAMOND, choice)


# -- named instances ----------------------------------------------------------

def test_e1_box_and_diamond():
    r = solve(build_extreme_game(e1()), GOAL)
    assert abs(r.values["s0"] - 0.7) <= 1e-9
    assert r.strategy_box["s0"] == 0
    r = solve(build_extreme_game(e1(Player.DIAMOND)), GOAL)
    assert abs(r.values["s0"] - 0.3) <= 1e-9
    assert r.strategy_diamond["s0"] == 1


def test_e4_total():
    assert abs(solve(build_extreme_game(e4()), Total()).values["s0"] - 2.0) <= 1e-9
    assert abs(solve(build_extreme_game(e4(Player.DIAMOND)), Total()).values["s0"] - 10 / 9) <= 1e-9


def test_e5_average():
    r = solve(build_extreme_game(e5()), Average())
    assert all(abs(v - 4 / 9) <= 1e-7 for v in r.values.values())
    assert r.strategy_box["a"] == 1
    assert r.bias is not None


def test_geometric_discounted():
    r = solve(build_extreme_game(geometric()), Discounted(F(1, 2)))
    assert abs(r.values["s"] - 2.0) <= 1e-12


@pytest.mark.parametrize("sweep", ["jacobi", "gauss-seidel"])
def test_sweeps_agree(sweep):
    eg = build_extreme_game(e4())
    r = solve(eg, Total(), SolveOptions(sweep=sweep))
    assert abs(r.values["s0"] - 2.0) <= 1e-9


# -- extraction ---------------------------------------------------------------

def test_extract_e1_and_e5():
    eg = build_extreme_game(e1())
    sb, _ = extract_strategies(eg, {"s0": 0.7, "g": 1.0, "z": 0.0}, GOAL)
    assert sb["s0"] == 0
    eg = build_extreme_game(e5())
    r = solve(eg, Average())
    sb, _ = extract_strategies(eg, r.values, Average(), bias=r.bias)
    assert sb["a"] == 1


def test_extract_tie_lowest_index():
    g = make_psg(["s", "t"], {"s": "box", "t": "box"}, {"s": [dirac("t"), dirac("t"), dirac("t")], "t": [dirac("t")]},
                 terminals=["t"])
    eg = build_extreme_game(g)
    sb, _ = extract_strategies(eg, {"s": 0.0, "t": 0.0}, Total())
    assert sb["s"] == 0


def test_reach_extraction_leaves_end_component():
    # s can loop on itself or move to g; both actions have value 1 under v
    g = make_psg(["s", "g"], {"s": "box", "g": "box"}, {"s": [dirac("s"), dirac("g")], "g": [dirac("g")]},
                 terminals=["g"])
    eg = build_extreme_game(g)
    r = solve(eg, GOAL)
    assert r.values["s"] == pytest.approx(1.0)
    assert r.strategy_box["s"] == 1
    assert evaluate_fixed(eg, r.strategy_box, r.strategy_diamond, GOAL)["s"] == pytest.approx(1.0)


# -- fixed strategy evaluation ------------------------------------------------

def test_evaluate_fixed_examples():
    eg = build_extreme_game(e4())
    assert evaluate_fixed(eg, box(s0=0, t=0), dia(), Total())["s0"] == pytest.approx(2.0, abs=1e-12)
    eg = build_extreme_game(e5())
    vals = evaluate_fixed(eg, box(a=0, b=0), dia(), Average())
    assert vals["a"] == pytest.approx(1 / 6, abs=1e-12)


def test_evaluate_fixed_reach_trap():
    g = make_psg(["s", "g"], {"s": "box", "g": "box"}, {"s": [dirac("s"), dirac("g")], "g": [dirac("g")]},
                 terminals=["g"])
    eg = build_extreme_game(g)
    assert evaluate_fixed(eg, box(s=0, g=0), dia(), GOAL)["s"] == 0.0


def test_evaluate_fixed_singular_total():
    g = make_psg(["s", "t"], {"s": "box", "t": "box"}, {"s": [dirac("s"), dirac("t")], "t": [dirac("t")]},
                 reward={"s": 1}, terminals=["t"])
    eg = build_extreme_game(g)
    with pytest.raises(SingularSystem):
        evaluate_fixed(eg, box(s=0, t=0), dia(), Total())
    assert evaluate_fixed(eg, box(s=1, t=0), dia(), Total())["s"] == pytest.approx(1.0)


# -- preconditions and failure modes ------------------------------------------

def test_total_needs_stopping():
    g = make_psg(["s", "t"], {"s": "box", "t": "box"}, {"s": [dirac("s"), dirac("t")], "t": [dirac("t")]},
                 terminals=["t"])
    with pytest.raises(PreconditionFailed) as exc:
        solve(build_extreme_game(g), Total())
    assert exc.value.condition == "Stopping"


def test_average_needs_irreducible():
    with pytest.raises(PreconditionFailed) as exc:
        solve(build_extreme_game(e1()), Average())
    assert exc.value.condition == "Irreducible"


def test_not_converged_carries_partial_result():
    eg = build_extreme_game(geometric())
    with pytest.raises(NotConverged) as exc:
        solve(eg, Discounted(F(99, 100)), SolveOptions(max_iterations=5))
    part = exc.value.result
    assert part.converged is False and part.iterations == 5
    assert part.values["s"] == pytest.approx(sum(0.99 ** i for i in range(5)))


def test_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(tolerance=0)
    with pytest.raises(ValueError):
        SolveOptions(sweep="random")


def test_too_many_strategies():
    eg = build_extreme_game(e1())
    with pytest.raises(TooManyStrategies):
        brute_force_value(eg, GOAL, limit=1)


# -- certificates -------------------------------------------------------------

def test_verify_examples():
    for game, obj in [(e1(), GOAL), (e4(), Total()), (e5(), Average()), (geometric(), Discounted(F(1, 2)))]:
        eg = build_extreme_game(game)
        r = solve(eg, obj)
        assert verify_fixpoint(eg, r.values, obj, 1e-7, bias=r.bias)
        s0 = eg.states[0]
        bumped = dict(r.values)
        bumped[s0] += 1e-3
        assert not verify_fixpoint(eg, bumped, obj, 1e-7, bias=r.bias)
    eg = build_extreme_game(e1())
    assert not verify_fixpoint(eg, {s: 0.0 for s in eg.states}, GOAL)


def test_verify_rejects_spurious_reach_fixpoint():
    # s loops forever or moves to a coin flip; v(s) = 1 is a Bellman fixpoint but not the value
    coin = from_point({"g": F(1, 2), "z": F(1, 2)})
    g = make_psg(["s", "g", "z"], {"s": "box", "g": "box", "z": "box"},
                 {"s": [dirac("s"), coin], "g": [dirac("g")], "z": [dirac("z")]}, terminals=["g", "z"])
    eg = build_extreme_game(g)
    assert verify_fixpoint(eg, {"s": 0.5, "g": 1.0, "z": 0.0}, GOAL)
    assert not verify_fixpoint(eg, {"s": 1.0, "g": 1.0, "z": 0.0}, GOAL)


# -- oracle -------------------------------------------------------------------

def test_brute_force_examples():
    si, iss = brute_force_value(build_extreme_game(e1()), GOAL)
    assert si["s0"] == pytest.approx(0.7) and iss["s0"] == pytest.approx(0.7)
    si, iss = brute_force_value(build_extreme_game(e5()), Average())
    assert si["a"] == pytest.approx(4 / 9) and iss["a"] == pytest.approx(4 / 9)


def test_brute_force_single_action():
    g = make_psg(["a", "b"], {"a": "box", "b": "diamond"},
                 {"a": [from_point({"a": F(1, 3), "b": F(2, 3)})], "b": [dirac("a")]}, reward={"a": 1})
    eg = build_extreme_game(g)
    si, iss = brute_force_value(eg, Discounted(F(1, 2)))
    ev = evaluate_fixed(eg, box(a=0), dia(b=0), Discounted(F(1, 2)))
    assert si == iss == ev


def instances(seed, n):
    rng = random.Random(seed)
    out = []
    for kind in ("reach", "discounted", "stopping", "irreducible"):
        for _ in range(n):
            g, obj = random_game(rng, kind)
            out.append((build_extreme_game(g), obj))
    return out


def test_library_oracle_matches_independent_enumeration():
    for eg, obj in instances(77, 15):
        si, iss = brute_force_value(eg, obj)
        ind_si, ind_iss = minimax(eg, obj)
        assert np.allclose([si[s] for s in eg.states], ind_si, atol=1e-9)
        assert np.allclose([iss[s] for s in eg.states], ind_iss, atol=1e-9)


def _strategies(eg, player):
    owned = [s for s in eg.states if eg.owner[s] is player]
    for combo in itertools.product(*(range(eg.n_actions(s)) for s in owned)):
        yield Strategy(player, dict(zip(owned, combo)))


def test_extracted_strategies_are_optimal():
    for eg, obj in instances(78, 8):
        r = solve(eg, obj)
        for sd in _strategies(eg, Player.DIAMOND):
            vals = evaluate_fixed(eg, r.strategy_box, sd, obj)
            assert all(vals[s] >= r.values[s] - 1e-7 for s in eg.states)
        for sb in _strategies(eg, Player.BOX):
            vals = evaluate_fixed(eg, sb, r.strategy_diamond, obj)
            assert all(vals[s] <= r.values[s] + 1e-7 for s in eg.states)


# -- value iteration properties -----------------------------------------------

def test_monotone_iterates():
    for eg, obj in instances(79, 10):
        if isinstance(obj, (Average, Discounted)):
            continue
        prev = None
        for k, v in enumerate(value_iterates(eg, obj)):
            if prev is not None:
                assert (v >= prev - 1e-15).all()
            prev = v
            if k == 60:
                break


def test_discounted_contraction():
    for eg, obj in instances(80, 10):
        if not isinstance(obj, Discounted):
            continue
        it = value_iterates(eg, obj)
        vs = [next(it) for _ in range(30)]
        for a, b, c in zip(vs, vs[1:], vs[2:]):
            assert np.abs(c - b).max() <= 0.9 * np.abs(b - a).max() + 1e-12


@pytest.mark.parametrize("scale", [F(1, 3), F(5)])
def test_reward_scaling(scale):
    rng = random.Random(81)
    for kind in ("discounted", "stopping", "irreducible"):
        for _ in range(5):
            g, obj = random_game(rng, kind)
            scaled = make_psg(g.states, g.owner, g.theta, {s: r * scale for s, r in g.reward.items()},
                              g.terminals, g.initial)
            a = solve(build_extreme_game(g), obj)
            b = solve(build_extreme_game(scaled), obj)
            for s in g.states:
                assert b.values[s] == pytest.approx(float(scale) * a.values[s], abs=1e-7)
            sa, _ = brute_force_value(build_extreme_game(g), obj)
            sb_, _ = brute_force_value(build_extreme_game(scaled), obj)
            assert all(sb_[s] == pytest.approx(float(scale) * sa[s], abs=1e-7) for s in g.states)


def test_values_in_range():
    for eg, obj in instances(82, 10):
        r = solve(eg, obj)
        vals = np.array(list(r.values.values()))
        assert (vals >= -1e-12).all()
        if isinstance(obj, Reach):
            assert (vals <= 1 + 1e-12).all()
        assert r.residual <= 1e-9 or isinstance(obj, Average)


def test_result_json_deterministic():
    eg = build_extreme_game(e5())
    a = json.dumps(solve(eg, Average()).to_json(), sort_keys=True)
    b = json.dumps(solve(eg, Average()).to_json(), sort_keys=True)
    assert a == b
    out = solve(build_extreme_game(e1()), GOAL).to_json()
    assert out["objective"] == {"kind": "reach", "goal": ["g"]}
    assert out["strategy_box"] == {"s0": 0, "g": 0, "z": 0}
