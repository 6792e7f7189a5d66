"""Syntax tree of ``.psg`` models.

Nodes are frozen dataclasses; source locations are kept in ``loc`` but do not
take part in equality, so a reparsed pretty-print compares equal to the
original tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

Loc = Optional[tuple]


def _loc():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Num:
    value: Fraction
    loc: Loc = _loc()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    loc: Loc = _loc()


@dataclass(frozen=True)
class Var:
    name: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class Index:
    """Matrix entry ``M[i, j]``."""

    matrix: str
    indices: tuple
    loc: Loc = _loc()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    loc: Loc = _loc()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: "Expr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    loc: Loc = _loc()


Expr = Union[Num, BoolLit, Var, Index, Call, Unary, Binary]


# ---------------------------------------------------------------------------
# declarations

@dataclass(frozen=True)
class Constant:
    name: str
    type: str  # "int", "double", "bool" or "" when untyped
    expr: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class Matrix:
    name: str
    rows: tuple  # tuple of tuples of Fraction
    loc: Loc = _loc()

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "int" or "bool"
    low: Optional[Expr]
    high: Optional[Expr]
    init: Optional[Expr]
    loc: Loc = _loc()


@dataclass(frozen=True)
class Assignment:
    var: str
    expr: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class Branch:
    prob: Optional[Expr]  # None means probability 1
    updates: tuple  # tuple[Assignment, ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class Row:
    """Linear (in)equality between two expressions over probability symbols."""

    lhs: Expr
    relation: str  # ">=", "<=", "="
    rhs: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class Command:
    label: str
    guard: Expr
    branches: tuple  # tuple[Branch, ...]
    uncertainty: tuple = ()  # tuple[Row, ...]
    loc: Loc = _loc()

    @property
    def symbols(self) -> tuple[str, ...]:
        if not self.uncertainty:
            return ()
        return tuple(b.prob.name for b in self.branches)

    @property
    def is_uncertain(self) -> bool:
        return bool(self.uncertainty)

    def implicit_rows(self) -> tuple[Row, ...]:
        """Rows every uncertainty block carries implicitly.

        The sum of the symbols equals one, and every symbol is nonnegative
        (written as ``min(p1, ..., pk) >= 0``).
        """
        if not self.uncertainty:
            return ()
        syms = [Var(s) for s in self.symbols]
        total = syms[0]
        for s in syms[1:]:
            total = Binary("+", total, s)
        return (Row(total, "=", Num(Fraction(1))), Row(Call("min", tuple(syms)), ">=", Num(Fraction(0))))


@dataclass(frozen=True)
class Module:
    name: str
    variables: tuple  # tuple[Variable, ...]
    commands: tuple  # tuple[Command, ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class PlayerDecl:
    name: str
    labels: tuple  # command labels, in declaration order
    modules: tuple = ()  # whole modules assigned to this player
    loc: Loc = _loc()


@dataclass(frozen=True)
class LabelDef:
    name: str
    expr: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class RewardItem:
    guard: Expr
    value: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class RewardStruct:
    name: Optional[str]
    items: tuple  # tuple[RewardItem, ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class ModelAst:
    constants: tuple = ()
    matrices: tuple = ()
    players: tuple = ()
    modules: tuple = ()
    labels: tuple = ()
    rewards: tuple = ()
    header: str = "smg"

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(v for m in self.modules for v in m.variables)

    @property
    def commands(self) -> tuple[Command, ...]:
        return tuple(c for m in self.modules for c in m.commands)

    @property
    def reward_items(self) -> tuple[RewardItem, ...]:
        return self.rewards[0].items if self.rewards else ()

    def constant_map(self) -> dict[str, Constant]:
        return {c.name: c for c in self.constants}

    def matrix_map(self) -> dict[str, Matrix]:
        return {m.name: m for m in self.matrices}

    def player_of(self) -> dict[str, str]:
        """Command label -> owning player name."""
        owner: dict[str, str] = {}
        for p in self.players:
            for lab in p.labels:
                owner[lab] = p.name
            for mod in self.modules:
                if mod.name in p.modules:
                    for c in mod.commands:
                        owner[c.label] = p.name
        return owner

    def command(self, label: str) -> Command:
        for c in self.commands:
            if c.label == label:
                return c
        raise KeyError(label)


def walk(expr: Expr):
    """Yield every node of an expression tree, parents first."""
    yield expr
    if isinstance(expr, (Index, Call)):
        for a in (expr.indices if isinstance(expr, Index) else expr.args):
            yield from walk(a)
    elif isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)


def dump(node, indent: int = 0) -> str:
    """Stable, location-free textual dump of a syntax tree (used by golden tests)."""
    pad = "  " * indent
    if isinstance(node, tuple):
        if not node:
            return pad + "()"
        return "\n".join(dump(x, indent) for x in node)
    if isinstance(node, Fraction):
        return pad + (str(node.numerator) if node.denominator == 1 else f"{node.numerator}/{node.denominator}")
    if isinstance(node, (Num, BoolLit, Var, Index, Call, Unary, Binary)):
        return pad + _expr_dump(node)
    if node is None or isinstance(node, (str, int, bool)):
        return pad + repr(node)
    name = type(node).__name__
    lines = [pad + name]
    for f in node.__dataclass_fields__:
        if f == "loc":
            continue
        value = getattr(node, f)
        if isinstance(value, tuple) and value and not isinstance(value[0], (str, Fraction, tuple)):
            lines.append(f"{pad}  {f}:")
            lines.append(dump(value, indent + 2))
        elif isinstance(value, tuple) and value and isinstance(value[0], tuple):
            lines.append(f"{pad}  {f}: " + "; ".join(", ".join(dump(x).strip() for x in row) for row in value))
        elif isinstance(value, (Num, BoolLit, Var, Index, Call, Unary, Binary)):
            lines.append(f"{pad}  {f}: {_expr_dump(value)}")
        else:
            lines.append(f"{pad}  {f}: {value!r}" if not isinstance(value, tuple) else f"{pad}  {f}: {list(value)!r}")
    return "\n".join(lines)


def _expr_dump(e) -> str:
    if isinstance(e, Num):
        v = e.value
        return f"Num({v.numerator})" if v.denominator == 1 else f"Num({v.numerator}/{v.denominator})"
    if isinstance(e, BoolLit):
        return f"Bool({str(e.value).lower()})"
    if isinstance(e, Var):
        return f"Var({e.name})"
    if isinstance(e, Index):
        return f"Index({e.matrix}; " + ", ".join(_expr_dump(a) for a in e.indices) + ")"
    if isinstance(e, Call):
        return f"Call({e.func}; " + ", ".join(_expr_dump(a) for a in e.args) + ")"
    if isinstance(e, Unary):
        return f"Unary({e.op} {_expr_dump(e.operand)})"
    return f"Binary({e.op} {_expr_dump(e.left)}, {_expr_dump(e.right)})"
