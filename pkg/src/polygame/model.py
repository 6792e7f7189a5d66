"""Polytopal stochastic games: data model, objectives and validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence, Union

from .polytope import DistPolytope, LinearConstraint, build_dist_polytope, enumerate_vertices
from .rational import to_fraction

State = Hashable


class Player(str, enum.Enum):
    """``BOX`` maximizes, ``DIAMOND`` minimizes."""

    BOX = "box"
    DIAMOND = "diamond"

    @property
    def symbol(self) -> str:
        return "□" if self is Player.BOX else "◇"


@dataclass(frozen=True)
class PSG:
    """A turn-based game whose moves are (polytope, distribution) choices.

    ``theta[s]`` lists the polytopes available at ``s``; the owner of ``s``
    picks one polytope and any distribution inside it.  Terminal states must
    carry the single Dirac polytope on themselves and zero reward.
    ``labels`` names state sets (used to resolve reachability goals) and
    ``action_labels`` optionally names each polytope of ``theta[s]``.
    """

    states: tuple[State, ...]
    owner: Mapping[State, Player]
    theta: Mapping[State, tuple[DistPolytope, ...]]
    reward: Mapping[State, Fraction]
    terminals: frozenset = frozenset()
    initial: State | None = None
    labels: Mapping[str, frozenset] = field(default_factory=dict)
    action_labels: Mapping[State, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "terminals", frozenset(self.terminals))
        if self.initial is None and self.states:
            object.__setattr__(self, "initial", self.states[0])

    def index(self) -> dict[State, int]:
        return {s: i for i, s in enumerate(self.states)}


# ---------------------------------------------------------------------------
# objectives

@dataclass(frozen=True)
class Reach:
    goal: frozenset

    def __post_init__(self):
        object.__setattr__(self, "goal", frozenset(self.goal))
        if not self.goal:
            raise ValueError("reachability goal set must be nonempty")

    name = "reach"


@dataclass(frozen=True)
class Total:
    name = "total"


@dataclass(frozen=True)
class Discounted:
    gamma: Fraction

    def __post_init__(self):
        g = self.gamma
        if isinstance(g, float):
            g = Fraction(str(g))
        g = to_fraction(g)
        if not 0 < g < 1:
            raise ValueError(f"discount factor must lie in (0, 1), got {g}")
        object.__setattr__(self, "gamma", g)

    name = "discounted"


@dataclass(frozen=True)
class Average:
    name = "average"


Objective = Union[Reach, Total, Discounted, Average]


def check_objective(game, objective: Objective) -> None:
    """Raise ``ValueError`` if the objective does not fit ``game``'s states."""
    if isinstance(objective, Reach):
        unknown = objective.goal - set(game.states)
        if unknown:
            raise ValueError(f"goal states not in the game: {sorted(map(str, unknown))}")


# ---------------------------------------------------------------------------
# diagnostics

@dataclass(frozen=True)
class Issue:
    code: str
    locus: str
    message: str

    def to_json(self) -> dict:
        return {"code": self.code, "locus": self.locus, "message": self.message}


@dataclass
class Diagnostics:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [e.code for e in self.errors]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [e.to_json() for e in self.errors],
            "warnings": [w.to_json() for w in self.warnings],
        }


def _is_self_dirac(poly: DistPolytope, s: State) -> bool:
    try:
        verts = enumerate_vertices(poly).as_dicts()
    except Exception:
        return False
    return len(verts) == 1 and verts[0] == {s: 1}


def validate(game: PSG) -> Diagnostics:
    """Collect every violation of the PSG invariants.  Never raises."""
    diag = Diagnostics()
    err = diag.errors.append
    warn = diag.warnings.append
    try:
        states = list(game.states)
    except Exception as exc:  # pragma: no cover - guards against non-iterables
        err(Issue("BadStates", "states", str(exc)))
        return diag
    members = set()
    for s in states:
        if s in members:
            err(Issue("DuplicateState", str(s), f"state {s!r} declared twice"))
        members.add(s)

    if game.initial not in members:
        err(Issue("UnknownInitial", "initial", f"initial state {game.initial!r} is not declared"))
    for t in sorted(set(game.terminals) - members, key=str):
        err(Issue("UnknownState", f"terminals/{t}", f"terminal {t!r} is not a declared state"))
    for name, group in sorted(game.labels.items()):
        for t in sorted(set(group) - members, key=str):
            err(Issue("UnknownState", f"labels/{name}", f"label member {t!r} is not a declared state"))

    for s in states:
        loc = str(s)
        owner = game.owner.get(s) if hasattr(game.owner, "get") else None
        if owner not in (Player.BOX, Player.DIAMOND):
            err(Issue("NoOwner", loc, f"state {s!r} has no valid owner"))

        r = game.reward.get(s, Fraction(0)) if hasattr(game.reward, "get") else None
        if not isinstance(r, (int, Fraction)) or isinstance(r, bool):
            err(Issue("BadReward", loc, f"reward {r!r} is not an exact rational"))
            r = Fraction(0)
        elif r < 0:
            err(Issue("NegativeReward", loc, f"reward {r} is negative"))

        polys = game.theta.get(s) if hasattr(game.theta, "get") else None
        if not polys:
            err(Issue("NoPolytope", loc, f"state {s!r} has no polytope"))
            polys = ()
        for k, poly in enumerate(polys):
            ploc = f"{loc}/theta[{k}]"
            if not isinstance(poly, DistPolytope):
                err(Issue("BadPolytope", ploc, "not a DistPolytope"))
                continue
            outside = [t for t in poly.support if t not in members]
            if outside:
                err(Issue("UnknownState", ploc, f"support mentions undeclared states {sorted(map(str, outside))}"))
                continue
            try:
                if not enumerate_vertices(poly).vertices:
                    err(Issue("EmptyPolytope", ploc, "polytope is infeasible"))
            except Exception as exc:
                err(Issue("BadPolytope", ploc, str(exc)))

        if s in game.terminals:
            if r != 0:
                err(Issue("TerminalRewardNonzero", loc, f"terminal state has reward {r}"))
            if len(polys) != 1 or not _is_self_dirac(polys[0], s):
                err(Issue("TerminalNotDirac", loc, "terminal state must have exactly the Dirac self-loop polytope"))
        elif polys and all(isinstance(p, DistPolytope) and _is_self_dirac(p, s) for p in polys):
            warn(Issue("SuggestTerminal", loc, "state only loops on itself; consider declaring it terminal"))
    return diag


# ---------------------------------------------------------------------------
# interval (IMDP-style) polytopes

def from_imdp_intervals(
    support: Sequence[State],
    lower: Mapping[State, object] | None = None,
    upper: Mapping[State, object] | None = None,
) -> DistPolytope:
    """Polytope ``{mu : lower[s] <= mu(s) <= upper[s]}`` over ``support``.

    Missing bounds default to 0 and 1.  Raises :class:`EmptyPolytope` when the
    intervals cannot be met by any distribution.
    """
    lower = dict(lower or {})
    upper = dict(upper or {})
    for key in list(lower) + list(upper):
        if key not in support:
            from .errors import UnknownState

            raise UnknownState(f"interval given for {key!r}, which is not in the support")
    cons: list[LinearConstraint] = []
    for s in support:
        lo = to_fraction(lower.get(s, 0))
        hi = to_fraction(upper.get(s, 1))
        if not 0 <= lo <= hi <= 1:
            raise ValueError(f"need 0 <= lower <= upper <= 1 at {s!r}, got [{lo}, {hi}]")
        if lo > 0:
            cons.append(LinearConstraint.of({s: 1}, ">=", lo))
        if hi < 1:
            cons.append(LinearConstraint.of({s: 1}, "<=", hi))
    return build_dist_polytope(support, cons)


def make_psg(
    states: Iterable[State],
    owner: Mapping[State, Player | str],
    theta: Mapping[State, Iterable[DistPolytope]],
    reward: Mapping[State, object] | None = None,
    terminals: Iterable[State] = (),
    initial: State | None = None,
    labels: Mapping[str, Iterable[State]] | None = None,
) -> PSG:
    """Convenience constructor normalizing owners, rewards and labels."""
    states = tuple(states)
    reward = reward or {}
    return PSG(
        states=states,
        owner={s: Player(owner[s]) for s in states if s in owner},
        theta={s: tuple(theta[s]) for s in states if s in theta},
        reward={s: to_fraction(reward.get(s, 0)) for s in states},
        terminals=frozenset(terminals),
        initial=initial,
        labels={k: frozenset(v) for k, v in (labels or {}).items()},
    )
