"""Acceptance gate: one test per criterion, summarised by conftest.py."""

import functools
import json
import os
import random
import subprocess
import sys
import time
from fractions import Fraction as F
from pathlib import Path

from helpers import (
    active_subset_vertices, check_triangulation, e1, e4, e5, geometric, path_expectation, random_polys,
)
from polygame.discretize import build_extreme_game
from polygame.dsl import dump, expand, generate_roborta, parse, pretty, roborta_source
from polygame.model import Average, Discounted, Player, Reach, Total
from polygame.polytope import LinearConstraint, build_dist_polytope, enumerate_vertices
from polygame.random_games import random_game, suite
from polygame.simulate import SimConfig, estimate, expected_finite_reward
from polygame.solver import Strategy, brute_force_value, evaluate_fixed, solve, verify_fixpoint

HERE = Path(__file__).parent
GOAL = Reach({"g"})

CRITERIA = {
    "test_determinacy_suite": "1 determinacy gap <= 1e-9 on 200 reach/discounted, 50 total, 50 average",
    "test_solver_matches_oracle": "2 solve within 1e-7 of sup-inf on the same suite",
    "test_named_instances": "3 named values E1 E4 E5 geometric",
    "test_vertex_enumeration": "4 vertex sets equal the active-subset oracle",
    "test_triangulation": "5 triangulation invariants on 50 polytopes x 1000 points",
    "test_certificates": "6 certificates accept solutions and reject 1e-3 perturbations",
    "test_finite_horizon_identity": "7 finite-horizon reward identity by path enumeration",
    "test_grid_end_to_end": "8 4x4 grid expands, solves and matches Monte Carlo",
    "test_golden_fragments": "9 grid fragments match golden AST after round trip",
    "test_reproducible_cli": "10 repeated CLI solve and simulate are byte-identical",
}


@functools.lru_cache(maxsize=None)
def determinacy_suite():
    """Extreme games and objectives, with the oracle outputs and elapsed seconds."""
    start = time.perf_counter()
    out = []
    for _kind, game, obj in suite(2024, {"reach": 200, "stopping": 50, "irreducible": 50}):
        eg = build_extreme_game(game)
        objectives = [obj, Discounted(F(9, 10))] if isinstance(obj, Reach) else [obj]
        for o in objectives:
            out.append((eg, o, brute_force_value(eg, o)))
    return out, time.perf_counter() - start


def test_determinacy_suite():
    cases, elapsed = determinacy_suite()
    kinds = [type(o).__name__ for _, o, _ in cases]
    assert [kinds.count(k) for k in ("Reach", "Discounted", "Total", "Average")] == [200, 200, 50, 50]
    assert all(len(eg.states) <= 4 + isinstance(o, Total) for eg, o, _ in cases)
    gap = max(abs(si[s] - iss[s]) for eg, _, (si, iss) in cases for s in eg.states)
    print(f"max gap {gap:.3e}, {elapsed:.1f} s")
    assert gap <= 1e-9
    assert elapsed < 120


def test_solver_matches_oracle():
    cases, _ = determinacy_suite()
    dist = max(abs(solve(eg, o).values[s] - si[s]) for eg, o, (si, _) in cases for s in eg.states)
    print(f"max |solve - supinf| {dist:.3e}")
    assert dist <= 1e-7


def test_named_instances():
    assert abs(solve(build_extreme_game(e1()), GOAL).values["s0"] - 0.7) <= 1e-9
    assert abs(solve(build_extreme_game(e1(Player.DIAMOND)), GOAL).values["s0"] - 0.3) <= 1e-9
    assert abs(solve(build_extreme_game(e4()), Total()).values["s0"] - 2.0) <= 1e-9
    assert abs(solve(build_extreme_game(e4(Player.DIAMOND)), Total()).values["s0"] - 10 / 9) <= 1e-9
    assert all(abs(v - 4 / 9) <= 1e-7 for v in solve(build_extreme_game(e5()), Average()).values.values())
    assert abs(solve(build_extreme_game(geometric()), Discounted(F(1, 2))).values["s"] - 2.0) <= 1e-12


def test_vertex_enumeration():
    polys = random_polys(404, 100, max_support=4)
    assert all(p.dimension <= 3 for p in polys)
    for poly in polys:
        assert set(enumerate_vertices(poly).vertices) == active_subset_vertices(poly)
    example = build_dist_polytope(["x", "y", "z"], [LinearConstraint.of({"x": 1}, "<=", F(1, 2))])
    assert len(enumerate_vertices(example)) == 4


def test_triangulation():
    rng = random.Random(505)
    # point polytopes triangulate trivially, so draw until 50 have positive dimension
    polys = [p for p in random_polys(505, 200, max_support=4, min_support=3) if p.dimension >= 1][:50]
    assert len(polys) == 50
    for poly in polys:
        check_triangulation(poly, rng, 1000)
    print(f"dimensions {sorted(p.dimension for p in polys)}")


def test_certificates():
    cases, _ = determinacy_suite()
    missed = 0
    for eg, o, _ in cases:
        r = solve(eg, o)
        assert verify_fixpoint(eg, r.values, o, 1e-7, bias=r.bias)
        for s in eg.states:
            for delta in (1e-3, -1e-3):
                bumped = dict(r.values)
                bumped[s] += delta
                missed += verify_fixpoint(eg, bumped, o, 1e-7, bias=r.bias)
    assert missed == 0


def test_finite_horizon_identity():
    rng = random.Random(707)
    gamma = F(9, 10)
    shapes = (lambda i, n: F(1), lambda i, n: gamma ** i, lambda i, n: F(1, n + 1))
    for k in range(20):
        game, _ = random_game(rng, ("reach", "discounted")[k % 2], max_states=3)
        eg = build_extreme_game(game)
        pick = {s: rng.randrange(eg.n_actions(s)) for s in eg.states}
        sb = Strategy(Player.BOX, {s: a for s, a in pick.items() if eg.owner[s] is Player.BOX})
        sd = Strategy(Player.DIAMOND, {s: a for s, a in pick.items() if eg.owner[s] is not Player.BOX})
        for n in range(9):
            for f in shapes:
                got = expected_finite_reward(eg, sb, sd, n, f)
                want = path_expectation(eg, sb, sd, n, f)
                assert got == want and abs(float(got) - float(want)) <= 1e-12


def grid_terrain(seed, w, length):
    rng = random.Random(seed)
    q = [[F(rng.randint(0, 3), 10) for _ in range(length)] for _ in range(w)]
    lat = [[F(rng.randint(-5, 5), 10) for _ in range(length)] for _ in range(w)]
    fr = [[F(rng.randint(-5, 5), 10) for _ in range(length)] for _ in range(w)]
    return q, lat, fr


def test_grid_end_to_end():
    q, lat, fr = grid_terrain(2024, 4, 4)
    for adversarial in (True, False):
        ast = generate_roborta(4, 4, q, lat, fr, adversarial_terrain=adversarial)
        assert parse(roborta_source(4, 4, q, lat, fr, adversarial_terrain=adversarial)) == ast
        game = expand(ast)
        eg = build_extreme_game(game)
        obj = Reach(frozenset(game.labels["goal"]))
        r = solve(eg, obj)
        assert all(-1e-9 <= v <= 1 + 1e-9 for v in r.values.values())
        exact = evaluate_fixed(eg, r.strategy_box, r.strategy_diamond, obj)[eg.initial]
        assert abs(exact - r.values[eg.initial]) <= 1e-7
        rep = estimate(eg, r.strategy_box, r.strategy_diamond,
                       SimConfig(runs=100_000, seed=8, horizon=1000, objective=obj))
        print(f"adversarial={adversarial} states={len(game.states)} value={exact:.6f} "
              f"mc={rep.mean:.6f} se={rep.std_error:.2e}")
        assert abs(rep.mean - exact) <= 3 * rep.std_error + 1e-12


def test_golden_fragments():
    for name in ("robl", "rigl"):
        ast = parse((HERE / "golden" / f"{name}.psg").read_text())
        printed = pretty(ast)
        assert printed == (HERE / "golden" / f"{name}.pretty.psg").read_text()
        again = parse(printed)
        assert again == ast
        assert dump(again) + "\n" == (HERE / "golden" / f"{name}.ast.txt").read_text()


def _cli(args, threads):
    env = dict(os.environ, POLYGAME_THREADS=str(threads))
    proc = subprocess.run([sys.executable, "-m", "polygame", *args], capture_output=True, env=env, check=True)
    return proc.stdout


def test_reproducible_cli():
    data = HERE / "data"
    runs = [
        ["solve", "--discounted", "9/10", str(data / "tiny.psg")],
        ["solve", "--average", str(data / "e5.json")],
        ["simulate", "--total", "--runs", "5000", "--seed", "17", str(data / "e4.json")],
        ["simulate", "--reach", "goal", "--runs", "5000", "--seed", "17", str(data / "e1.psg")],
    ]
    for args in runs:
        outs = [_cli(args, t) for t in (1, 1, 4)]
        assert outs[0] == outs[1] == outs[2]
        json.loads(outs[0])
