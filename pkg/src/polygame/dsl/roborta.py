"""Generator for the two-robot grid benchmark.

Roborta (player □) starts at ``(0, 0)`` and wants to reach row ``y = L``;
Rigoborto (player ◇) starts at ``(W-1, L-1)`` and wants to catch her first.
They move in turns.  Each cell ``(x, y)`` has a terrain quality
``Q[x,y]`` in ``[0, 0.5]`` and lateral/frontal slopes ``L[x,y]``, ``F[x,y]``
in ``[-1, 1]`` that make a move slide sideways, forward or backward with
probabilities constrained by linear rows.

Roborta's move is two commands: she picks a direction (``robl``, ``robr``,
``robf``), then a continuation owned by Rigoborto resolves the terrain
uncertainty against her.  Rigoborto's moves (``rigl``, ``rigr``, ``rigb``)
take one step, with the uncertainty resolved in his favour.

Modelling choices worth knowing:

* a backward slide decreases ``y`` (clamped at 0);
* Rigoborto's forward slide is clamped to the last grid row, so he never
  leaves the grid;
* ``Collision`` is raised when Rigoborto's new position equals Roborta's.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..errors import BadTerrainValue
from ..rational import format_fraction, to_fraction
from .ast import ModelAst
from .parser import parse

_ROWS = """    1-({Q}+(1-(1-abs({L}))*(1-abs({F})))/2) >= pc,
    (1-max(0,-{L}))*pl - (1-{Q})*(1-max(0,{L}))*pr >= 0,
    (1-max(0,{L}))*pr - (1-{Q})*(1-max(0,-{L}))*pl >= 0,
    (1-max(0,{F}))*pf - (1-{Q})*(1-max(0,-{F}))*pb >= 0,
    (1-max(0,-{F}))*pb - (1-{Q})*(1-max(0,{F}))*pf >= 0"""


def _cell_rows(x: str, y: str) -> str:
    return _ROWS.format(Q=f"Q[{x},{y}]", L=f"L[{x},{y}]", F=f"F[{x},{y}]")


def _matrix(name: str, m, width: int, length: int, lo: Fraction, hi: Fraction) -> list[list[Fraction]]:
    rows = [list(r) for r in m]
    if len(rows) != width or any(len(r) != length for r in rows):
        raise ValueError(f"matrix {name} must have shape {width}x{length} (indexed [x][y])")
    out = []
    for x, r in enumerate(rows):
        line = []
        for y, v in enumerate(r):
            q = Fraction(str(v)) if isinstance(v, float) else to_fraction(v)
            if not lo <= q <= hi:
                raise BadTerrainValue(name, x, y, v)
            line.append(q)
        out.append(line)
    return out


def _matrix_text(name: str, m) -> str:
    rows = ", ".join("[" + ", ".join(format_fraction(v) for v in r) + "]" for r in m)
    return f"matrix {name} = [{rows}];"


def roborta_source(width: int, length: int, Q: Sequence, L: Sequence, F: Sequence,
                   adversarial_terrain: bool = True) -> str:
    """``.psg`` source of a ``width`` x ``length`` grid with the given terrain.

    With ``adversarial_terrain=False`` Roborta owns the continuation commands,
    i.e. she resolves the terrain uncertainty of her own moves.
    """
    if width < 1 or length < 1:
        raise ValueError("grid dimensions must be positive")
    q = _matrix("Q", Q, width, length, Fraction(0), Fraction(1, 2))
    lm = _matrix("L", L, width, length, Fraction(-1), Fraction(1))
    fm = _matrix("F", F, width, length, Fraction(-1), Fraction(1))

    rob_moves = {  # name, code, intended update
        "robl": (1, "(robx'=max(0,robx-1))"),
        "robr": (2, "(robx'=min(W-1,robx+1))"),
        "robf": (3, "(roby'=roby+1)"),
    }
    rob_slides = [
        ("pl", "(robx'=max(0,robx-1))"),
        ("pr", "(robx'=min(W-1,robx+1))"),
        ("pf", "(roby'=roby+1)"),
        ("pb", "(roby'=max(0,roby-1))"),
    ]
    lines = [
        "smg",
        "",
        f"const int W = {width};",
        f"const int L = {length};",
        "",
        _matrix_text("Q", q),
        _matrix_text("L", lm),
        _matrix_text("F", fm),
        "",
        "player roborta",
        "  [robl], [robr], [robf]" + ("" if adversarial_terrain else ", [robl-cont], [robr-cont], [robf-cont]"),
        "endplayer",
        "",
        "player rigoborto",
        ("  [robl-cont], [robr-cont], [robf-cont], " if adversarial_terrain else "  ") + "[rigl], [rigr], [rigb]",
        "endplayer",
        "",
        "module roborta",
        "  robx : [0..W-1] init 0;",
        "  roby : [0..L] init 0;",
        "  rob_mov : [0..3] init 0;",
        "  turn : [0..1] init 0;",
        "",
    ]
    for name, (code, _) in rob_moves.items():
        lines.append(f"  [{name}] (turn = 0) & (roby<L) & !Collision -> (rob_mov'={code}) & (turn'=1);")
    for name, (code, intended) in rob_moves.items():
        lines.append(f"  [{name}-cont] (turn = 1) & (rob_mov = {code}) ->")
        parts = [f"{p} : {u} & (rob_mov'=0)" for p, u in rob_slides] + [f"pc : {intended} & (rob_mov'=0)"]
        lines.append("    " + parts[0])
        lines += [f"  + {p}" for p in parts[1:]]
        lines.append("  {")
        lines.append(_cell_rows("robx", "roby"))
        lines.append("  };")
    lines += [
        "endmodule",
        "",
        "module rigoborto",
        "  rigx : [0..W-1] init W-1;",
        "  rigy : [0..L-1] init L-1;",
        "  Collision : bool init false;",
        "",
    ]
    rig_slides = {
        "pl": ("max(0,rigx-1)", "rigy"),
        "pr": ("min(W-1,rigx+1)", "rigy"),
        "pf": ("rigx", "min(L-1,rigy+1)"),
        "pb": ("rigx", "max(0,rigy-1)"),
    }
    rig_moves = {
        "rigl": ("max(0,rigx-1)", "rigy"),
        "rigr": ("min(W-1,rigx+1)", "rigy"),
        "rigb": ("rigx", "max(0,rigy-1)"),
    }

    def rig_update(nx: str, ny: str) -> str:
        upd = []
        if nx != "rigx":
            upd.append(f"(rigx'={nx})")
        if ny != "rigy":
            upd.append(f"(rigy'={ny})")
        upd.append("(turn'=0)")
        upd.append(f"(Collision'=(robx={nx} & roby={ny}))")
        return " & ".join(upd)

    for name, target in rig_moves.items():
        lines.append(f"  [{name}] (turn = 1) & (rob_mov = 0) & (rigy<L) & (roby<L) & !Collision ->")
        parts = [f"{p} : {rig_update(*t)}" for p, t in rig_slides.items()] + [f"pc : {rig_update(*target)}"]
        lines.append("    " + parts[0])
        lines += [f"  + {p}" for p in parts[1:]]
        lines.append("  {")
        lines.append(_cell_rows("rigx", "rigy"))
        lines.append("  };")
    lines += [
        "endmodule",
        "",
        'label "goal" = roby=L;',
        'label "caught" = Collision;',
        "",
    ]
    return "\n".join(lines)


def generate_roborta(width: int, length: int, Q: Sequence, L: Sequence, F: Sequence,
                     adversarial_terrain: bool = True) -> ModelAst:
    """Syntax tree of the grid game; terrain matrices are indexed ``[x][y]``."""
    return parse(roborta_source(width, length, Q, L, F, adversarial_terrain))
