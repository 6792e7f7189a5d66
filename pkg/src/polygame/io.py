"""JSON reading and writing of PSGs.

Numbers are strings holding exact decimals or ``p/q`` fractions.  A polytope
is one of::

    {"support": [...], "constraints": [{"coeffs": {s: c}, "rel": ">=", "bound": b}, ...]}
    {"dirac": s}
    {"point": {s: p, ...}}
    {"intervals": {s: [lo, hi], ...}}

and may carry an optional ``"label"``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ModelError
from .model import PSG, Player, from_imdp_intervals
from .polytope import DistPolytope, LinearConstraint, build_dist_polytope, dirac, from_point
from .rational import format_fraction, to_fraction


def _num(x):
    if isinstance(x, bool):
        raise ModelError(f"expected a number, got {x!r}")
    if isinstance(x, float):
        raise ModelError(f"write the number {x!r} as a decimal string to keep it exact")
    try:
        return to_fraction(x)
    except (TypeError, ValueError) as exc:
        raise ModelError(str(exc)) from exc


def _polytope(obj: dict, where: str) -> DistPolytope:
    if not isinstance(obj, dict):
        raise ModelError(f"{where}: a polytope must be a JSON object")
    if "dirac" in obj:
        return dirac(obj["dirac"])
    if "point" in obj:
        return from_point({s: _num(p) for s, p in obj["point"].items()})
    if "intervals" in obj:
        iv = obj["intervals"]
        return from_imdp_intervals(list(iv), {s: _num(b[0]) for s, b in iv.items()},
                                   {s: _num(b[1]) for s, b in iv.items()})
    if "support" not in obj:
        raise ModelError(f"{where}: polytope needs 'support', 'dirac', 'point' or 'intervals'")
    cons = []
    for c in obj.get("constraints", []):
        rel = c.get("rel", "<=")
        if rel not in ("<=", "=", ">="):
            raise ModelError(f"{where}: bad relation {rel!r}")
        cons.append(LinearConstraint.of({s: _num(v) for s, v in c["coeffs"].items()}, rel, _num(c["bound"])))
    try:
        return build_dist_polytope(obj["support"], cons)
    except ValueError as exc:
        raise ModelError(f"{where}: {exc}") from exc


def psg_from_json(data: dict) -> PSG:
    """Build a PSG; polytope problems raise :class:`ModelError` subclasses."""
    try:
        states = tuple(data["states"])
        theta_in = data["theta"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"missing field {exc}") from exc
    owner = {}
    for s, o in data.get("owner", {}).items():
        try:
            owner[s] = Player(o)
        except ValueError as exc:
            raise ModelError(f"owner of {s!r} must be 'box' or 'diamond'") from exc
    theta, action_labels = {}, {}
    for s, polys in theta_in.items():
        try:
            theta[s] = tuple(_polytope(p, f"theta[{s}][{k}]") for k, p in enumerate(polys))
        except (ValueError, KeyError, TypeError) as exc:
            raise ModelError(f"theta[{s}]: {exc}") from exc
        names = [p.get("label") for p in polys]
        if any(n is not None for n in names):
            action_labels[s] = tuple(n or f"K{k}" for k, n in enumerate(names))
    return PSG(
        states=states,
        owner=owner,
        theta=theta,
        reward={s: _num(r) for s, r in data.get("reward", {}).items()},
        terminals=frozenset(data.get("terminals", [])),
        initial=data.get("initial"),
        labels={k: frozenset(v) for k, v in data.get("labels", {}).items()},
        action_labels=action_labels,
    )


def polytope_to_json(poly: DistPolytope) -> dict:
    return {
        "support": [str(s) for s in poly.support],
        "constraints": [
            {"coeffs": {str(s): format_fraction(c) for s, c in con.coeffs},
             "rel": con.relation, "bound": format_fraction(con.bound)}
            for con in poly.constraints
        ],
    }


def psg_to_json(game: PSG) -> dict:
    theta = {}
    for s in game.states:
        names = game.action_labels.get(s, ())
        out = []
        for k, p in enumerate(game.theta.get(s, ())):
            d = polytope_to_json(p)
            if k < len(names):
                d["label"] = names[k]
            out.append(d)
        theta[str(s)] = out
    return {
        "states": [str(s) for s in game.states],
        "initial": None if game.initial is None else str(game.initial),
        "owner": {str(s): game.owner[s].value for s in game.states if s in game.owner},
        "reward": {str(s): format_fraction(game.reward.get(s, 0)) for s in game.states},
        "terminals": sorted(str(s) for s in game.terminals),
        "labels": {k: sorted(str(s) for s in v) for k, v in sorted(game.labels.items())},
        "theta": theta,
    }


def load_psg(path: str | Path) -> PSG:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return psg_from_json(data)


def dump_psg(game: PSG, path: str | Path) -> None:
    Path(path).write_text(json.dumps(psg_to_json(game), indent=2) + "\n", encoding="utf-8")
