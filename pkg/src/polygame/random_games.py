"""Seeded generators of small random PSGs for property and oracle tests.

Polytopes are made nonempty by construction: a random rational
distribution ``x`` is drawn first and every constraint ``a . mu <rel> b``
gets a bound ``b`` that ``x`` satisfies.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .discretize import build_extreme_game, check_irreducible, check_stopping
from .model import PSG, Discounted, Objective, Player, Reach, Total, Average
from .polytope import DistPolytope, LinearConstraint, build_dist_polytope, dirac

KINDS = ("reach", "discounted", "stopping", "irreducible")


def random_distribution(rng: random.Random, n: int, denominator: int = 12) -> list[Fraction]:
    """Rational point of the simplex with positive weights summing to one."""
    cuts = sorted(rng.randint(0, denominator) for _ in range(n - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [denominator])]
    # shift a little mass so every coordinate is strictly positive
    eps = Fraction(1, 4 * denominator * n)
    return [Fraction(p, denominator) * (1 - n * eps) + eps for p in parts]


def random_polytope(
    rng: random.Random,
    support: list,
    max_constraints: int = 5,
    floors: dict | None = None,
) -> DistPolytope:
    """Random nonempty polytope over ``support``; ``floors`` adds ``mu(s) >= f``."""
    floors = floors or {}
    x = random_distribution(rng, len(support))
    if floors:
        # move the witness point onto the floors so they stay satisfiable
        total_floor = sum(floors.values(), Fraction(0))
        x = [floors.get(s, Fraction(0)) + (1 - total_floor) * xi for s, xi in zip(support, x)]
    cons = [LinearConstraint.of({s: 1}, ">=", f) for s, f in floors.items()]
    for _ in range(rng.randint(0, max_constraints)):
        coeffs = {s: rng.randint(-3, 3) for s in support}
        if all(c == 0 for c in coeffs.values()):
            continue
        value = sum((Fraction(coeffs[s]) * xi for s, xi in zip(support, x)), Fraction(0))
        rel = rng.choice(["<=", "<=", ">=", ">=", "="])
        slack = Fraction(rng.randint(0, 4), 8)
        bound = value + slack if rel == "<=" else value - slack if rel == ">=" else value
        cons.append(LinearConstraint.of(coeffs, rel, bound))
    return build_dist_polytope(support, cons)


def _pairs(game: PSG) -> int:
    eg = build_extreme_game(game)
    return eg.strategy_space_size(Player.BOX) * eg.strategy_space_size(Player.DIAMOND)


def random_game(
    rng: random.Random,
    kind: str,
    max_states: int = 4,
    max_polytopes: int = 2,
    max_support: int = 3,
    max_constraints: int = 5,
    max_pairs: int = 2000,
) -> tuple[PSG, Objective]:
    """Random instance of the given kind together with its objective.

    ``reach`` and ``discounted`` games have arbitrary structure,
    ``stopping`` games put mass at least 1/10 on a terminal from every
    state, and ``irreducible`` games give every state mass at least 1/10
    from every state (three states at most, so supports stay small).
    Instances whose extreme game has more than ``max_pairs`` deterministic
    strategy pairs are redrawn.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    while True:
        game, objective = _draw(rng, kind, max_states, max_polytopes, max_support, max_constraints)
        if _pairs(game) > max_pairs:
            continue
        eg = build_extreme_game(game)
        if kind == "stopping" and not check_stopping(eg):
            continue
        if kind == "irreducible" and not check_irreducible(eg):
            continue
        return game, objective


def _draw(rng, kind, max_states, max_polytopes, max_support, max_constraints):
    if kind == "irreducible":
        n = rng.randint(2, min(3, max_states, max_support))
    else:
        n = rng.randint(1, max_states)
    names = [f"s{i}" for i in range(n)]
    owner = {s: rng.choice([Player.BOX, Player.DIAMOND]) for s in names}
    reward = {s: Fraction(rng.randint(0, 3)) for s in names}
    theta: dict = {}
    terminals: set = set()
    states = list(names)

    if kind == "stopping":
        term = "t"
        states.append(term)
        owner[term] = Player.BOX
        reward[term] = Fraction(0)
        terminals.add(term)
        theta[term] = (dirac(term),)
        for s in names:
            polys = []
            for _ in range(rng.randint(1, max_polytopes)):
                k = rng.randint(0, min(max_support - 1, n))
                support = rng.sample(names, k) + [term]
                polys.append(random_polytope(rng, support, max_constraints, floors={term: Fraction(1, 10)}))
            theta[s] = tuple(polys)
        objective: Objective = Total()
    elif kind == "irreducible":
        for s in names:
            floors = {t: Fraction(1, 10) for t in names}
            theta[s] = tuple(random_polytope(rng, list(names), max_constraints, floors=floors)
                             for _ in range(rng.randint(1, max_polytopes)))
        objective = Average()
    else:
        for s in names:
            theta[s] = tuple(random_polytope(rng, rng.sample(names, rng.randint(1, min(max_support, n))),
                                             max_constraints)
                             for _ in range(rng.randint(1, max_polytopes)))
        if kind == "reach":
            goal = frozenset(rng.sample(names, rng.randint(1, max(1, n // 2))))
            objective = Reach(goal)
        else:
            objective = Discounted(Fraction(9, 10))
    return PSG(states=tuple(states), owner=owner, theta=theta, reward=reward,
               terminals=frozenset(terminals)), objective


def suite(seed: int, counts: dict[str, int]) -> list[tuple[str, PSG, Objective]]:
    """Deterministic list of ``(kind, game, objective)`` instances."""
    rng = random.Random(seed)
    out = []
    for kind in KINDS:
        for _ in range(counts.get(kind, 0)):
            game, obj = random_game(rng, kind)
            out.append((kind, game, obj))
    return out
