"""Finite vertex game of a PSG and the side conditions its solvers need.

The extreme game keeps a PSG's states but replaces every polytope by the
finite set of its vertices: at state ``s`` the actions are the pairs
``(polytope k, vertex j)``.  Optimal values and deterministic memoryless
strategies of the PSG are found on this finite game.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Mapping

from .model import PSG, Player
from .polytope import enumerate_vertices
from .rational import format_fraction

State = Hashable


@dataclass(frozen=True)
class ExtremeAction:
    polytope_index: int
    vertex_index: int
    distribution: tuple[tuple[State, Fraction], ...]
    label: str | None = None

    def support(self) -> frozenset:
        return frozenset(s for s, p in self.distribution if p != 0)

    def as_dict(self) -> dict[State, Fraction]:
        return dict(self.distribution)


@dataclass(frozen=True)
class ExtremeGame:
    states: tuple[State, ...]
    owner: Mapping[State, Player]
    reward: Mapping[State, Fraction]
    terminals: frozenset
    actions: Mapping[State, tuple[ExtremeAction, ...]]
    initial: State | None = None
    labels: Mapping[str, frozenset] = field(default_factory=dict)

    def index(self) -> dict[State, int]:
        return {s: i for i, s in enumerate(self.states)}

    def n_actions(self, s: State) -> int:
        return len(self.actions[s])

    def strategy_space_size(self, player: Player) -> int:
        size = 1
        for s in self.states:
            if self.owner[s] is player:
                size *= len(self.actions[s])
        return size

    def relabel(self, mapping: Mapping[State, State]) -> "ExtremeGame":
        """Same game with every state renamed through ``mapping``."""
        def act(a):
            return ExtremeAction(a.polytope_index, a.vertex_index,
                                 tuple((mapping[t], p) for t, p in a.distribution), a.label)

        return ExtremeGame(
            states=tuple(mapping[s] for s in self.states),
            owner={mapping[s]: o for s, o in self.owner.items()},
            reward={mapping[s]: r for s, r in self.reward.items()},
            terminals=frozenset(mapping[s] for s in self.terminals),
            actions={mapping[s]: tuple(act(a) for a in acts) for s, acts in self.actions.items()},
            initial=mapping.get(self.initial),
            labels={k: frozenset(mapping[s] for s in v) for k, v in self.labels.items()},
        )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("POLYGAME_THREADS", "1")))
    except ValueError:
        return 1


def build_extreme_game(game: PSG) -> ExtremeGame:
    """Enumerate vertices of every polytope; actions keep polytope then vertex order."""
    def state_actions(s):
        acts = []
        names = game.action_labels.get(s, ())
        for k, poly in enumerate(game.theta[s]):
            verts = enumerate_vertices(poly)
            label = names[k] if k < len(names) else None
            for j, v in enumerate(verts.vertices):
                dist = tuple((t, p) for t, p in zip(verts.support, v) if p != 0)
                acts.append(ExtremeAction(k, j, dist, label))
        return tuple(acts)

    threads = _threads()
    if threads > 1 and len(game.states) > 64:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(state_actions, game.states))
    else:
        results = [state_actions(s) for s in game.states]
    return ExtremeGame(
        states=tuple(game.states),
        owner=dict(game.owner),
        reward={s: Fraction(game.reward.get(s, 0)) for s in game.states},
        terminals=frozenset(game.terminals),
        actions=dict(zip(game.states, results)),
        initial=game.initial,
        labels=dict(game.labels),
    )


def _trap(game: ExtremeGame, excluded: frozenset) -> set:
    """Greatest set X avoiding ``excluded`` in which every state can stay."""
    x = set(game.states) - excluded
    changed = True
    while changed:
        changed = False
        for s in list(x):
            if not any(a.support() <= x for a in game.actions[s]):
                x.discard(s)
                changed = True
    return x


def check_stopping(game: ExtremeGame) -> bool:
    """True iff every memoryless pure strategy pair reaches a terminal a.s."""
    return not _trap(game, game.terminals)


def check_irreducible(game: ExtremeGame) -> bool:
    """True iff every strategy pair reaches every state from every state."""
    return all(not _trap(game, frozenset([t])) for t in game.states)


def avoid_set(game: ExtremeGame, excluded) -> frozenset:
    """States from which the two players together can avoid ``excluded`` forever."""
    return frozenset(_trap(game, frozenset(excluded)))


# ---------------------------------------------------------------------------
# export

def to_json(game: ExtremeGame) -> dict:
    return {
        "states": [str(s) for s in game.states],
        "initial": None if game.initial is None else str(game.initial),
        "owner": {str(s): game.owner[s].value for s in game.states},
        "reward": {str(s): format_fraction(game.reward[s]) for s in game.states},
        "terminals": sorted(str(s) for s in game.terminals),
        "labels": {k: sorted(str(s) for s in v) for k, v in sorted(game.labels.items())},
        "actions": {
            str(s): [
                {
                    "polytope": a.polytope_index,
                    "vertex": a.vertex_index,
                    "label": a.label,
                    "distribution": {str(t): format_fraction(p) for t, p in a.distribution},
                }
                for a in game.actions[s]
            ]
            for s in game.states
        },
    }


def _dot_id(s) -> str:
    return '"' + str(s).replace('"', '\\"') + '"'


def to_dot(game: ExtremeGame) -> str:
    """Graphviz rendering: boxes for □ states, diamonds for ◇, points for actions."""
    lines = ["digraph extreme_game {", "  rankdir=LR;"]
    for s in game.states:
        shape = "box" if game.owner[s] is Player.BOX else "diamond"
        extra = ", peripheries=2" if s in game.terminals else ""
        lines.append(f'  {_dot_id(s)} [shape={shape}{extra}];')
    for s in game.states:
        for i, a in enumerate(game.actions[s]):
            node = _dot_id(f"{s}#a{i}")
            name = a.label or f"K{a.polytope_index}"
            lines.append(f'  {node} [shape=point, xlabel="{name}/v{a.vertex_index}"];')
            lines.append(f"  {_dot_id(s)} -> {node} [arrowhead=none];")
            for t, p in a.distribution:
                lines.append(f'  {node} -> {_dot_id(t)} [label="{format_fraction(p)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
