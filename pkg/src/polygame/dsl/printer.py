"""Canonical pretty-printer: ``parse(pretty(ast)) == ast``."""

from __future__ import annotations

from ..rational import format_fraction
from .ast import (
    Binary, BoolLit, Call, Command, Index, ModelAst, Num, Row, Unary, Var,
)

_PREC = {"|": 1, "&": 2, "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4, "+": 5, "-": 5, "*": 6, "/": 6}
_NOT, _NEG, _ATOM = 3, 7, 8


def _prec(e) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _NOT if e.op == "!" else _NEG
    if isinstance(e, Num) and e.value < 0:
        return _NEG
    return _ATOM


def _num(value) -> str:
    return format_fraction(value)


def expr_str(e) -> str:
    if isinstance(e, Num):
        text = format_fraction(abs(e.value))
        if "/" in text:
            text = f"({text})"
        return "-" + text if e.value < 0 else text
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{e.matrix}[" + ",".join(expr_str(a) for a in e.indices) + "]"
    if isinstance(e, Call):
        return f"{e.func}(" + ",".join(expr_str(a) for a in e.args) + ")"
    if isinstance(e, Unary):
        inner = expr_str(e.operand)
        mine = _prec(e)
        if _prec(e.operand) < mine:
            inner = f"({inner})"
        return e.op + inner
    p = _PREC[e.op]
    left, right = expr_str(e.left), expr_str(e.right)
    if p == 4:
        if _prec(e.left) <= p:
            left = f"({left})"
    elif _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    op = {"&": " & ", "|": " | "}.get(e.op, e.op)
    return f"{left}{op}{right}"


def _row(r: Row) -> str:
    return f"{expr_str(r.lhs)} {r.relation} {expr_str(r.rhs)}"


def _command(c: Command, indent: str = "  ") -> str:
    parts = []
    for b in c.branches:
        upd = " & ".join(f"({u.var}'={expr_str(u.expr)})" for u in b.updates) or "true"
        parts.append(upd if b.prob is None else f"{expr_str(b.prob)} : {upd}")
    head = f"{indent}[{c.label}] {expr_str(c.guard)} ->"
    if len(parts) == 1 and not c.uncertainty:
        return f"{head} {parts[0]};"
    lines = [head, f"{indent}    {parts[0]}"]
    lines += [f"{indent}  + {p}" for p in parts[1:]]
    if c.uncertainty:
        lines.append(f"{indent}  {{")
        rows = [f"{indent}    {_row(r)}" for r in c.uncertainty]
        lines.append(",\n".join(rows))
        lines.append(f"{indent}  }};")
    else:
        lines[-1] += ";"
    return "\n".join(lines)


def pretty(ast: ModelAst) -> str:
    out: list[str] = [ast.header or "smg", ""]
    for c in ast.constants:
        t = f"{c.type} " if c.type else ""
        out.append(f"const {t}{c.name} = {expr_str(c.expr)};")
    if ast.constants:
        out.append("")
    for m in ast.matrices:
        rows = ", ".join("[" + ", ".join(_num(v) for v in row) + "]" for row in m.rows)
        out.append(f"matrix {m.name} = [{rows}];")
    if ast.matrices:
        out.append("")
    for p in ast.players:
        items = [f"[{lab}]" for lab in p.labels] + list(p.modules)
        out.append(f"player {p.name}")
        out.append("  " + ", ".join(items))
        out.append("endplayer")
        out.append("")
    for m in ast.modules:
        out.append(f"module {m.name}")
        for v in m.variables:
            init = f" init {expr_str(v.init)}" if v.init is not None else ""
            if v.kind == "bool":
                out.append(f"  {v.name} : bool{init};")
            else:
                out.append(f"  {v.name} : [{expr_str(v.low)}..{expr_str(v.high)}]{init};")
        if m.variables and m.commands:
            out.append("")
        for c in m.commands:
            out.append(_command(c))
        out.append("endmodule")
        out.append("")
    for lab in ast.labels:
        out.append(f'label "{lab.name}" = {expr_str(lab.expr)};')
    if ast.labels:
        out.append("")
    for rs in ast.rewards:
        out.append("rewards" + (f' "{rs.name}"' if rs.name is not None else ""))
        for item in rs.items:
            out.append(f"  {expr_str(item.guard)} : {expr_str(item.value)};")
        out.append("endrewards")
        out.append("")
    return "\n".join(out).rstrip("\n") + "\n"
