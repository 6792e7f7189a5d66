"""Reachable state-space construction: ``.psg`` syntax tree -> PSG.

States are variable valuations reached by breadth-first search from the
initial valuation.  Successors are discovered in command order and, within a
command, in branch order.  A state id lists every variable in lexicographic
name order, e.g. ``"rigx=3,rigy=3,rob_mov=0,robx=0,roby=0,turn=0"``.

Each enabled command becomes one polytope:

* a command with literal probabilities yields the single-point polytope of
  its distribution;
* a command with an uncertainty block yields the polytope of the block's
  rows (plus ``sum p = 1`` and ``p >= 0``) over its probability symbols,
  with coefficients evaluated at the source state.  Branches that share a
  successor are summed, which makes the state-level polytope a projection
  of the symbol-level one.

A state without enabled commands becomes a terminal with a Dirac self-loop.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from ..errors import EmptyPolytope, MixedOwners, SemanticError, Unbounded
from ..model import PSG, Player
from ..polytope import DistPolytope, LinearConstraint, build_dist_polytope, dirac, from_point, project
from .ast import Binary, BoolLit, Call, Command, Index, ModelAst, Num, Unary, Var, walk
from .parser import _check_scope, check, parse_expression

DEFAULT_STATE_CAP = 1_000_000


def _err(message: str, node=None, cls=SemanticError):
    loc = getattr(node, "loc", None) or (None, None)
    return cls(message, *loc)


class _Env:
    """Constants, matrices and variable bounds of one model."""

    def __init__(self, ast: ModelAst):
        self.ast = ast
        self.consts: dict[str, object] = {}
        for c in ast.constants:
            v = self.eval(c.expr, {})
            if c.type == "int" and (isinstance(v, bool) or Fraction(v).denominator != 1):
                raise _err(f"constant {c.name} must be an integer", c)
            if c.type == "bool" and not isinstance(v, bool):
                raise _err(f"constant {c.name} must be boolean", c)
            if c.type == "double" and isinstance(v, bool):
                raise _err(f"constant {c.name} must be numeric", c)
            self.consts[c.name] = v
        self.matrices = ast.matrix_map()
        self.bounds: dict[str, tuple] = {}
        init: dict[str, object] = {}
        for var in ast.variables:
            if var.kind == "bool":
                self.bounds[var.name] = None
                v = False if var.init is None else self.eval(var.init, {})
                if not isinstance(v, bool):
                    raise _err(f"initial value of {var.name} must be boolean", var)
            else:
                lo, hi = self.integer(var.low, var), self.integer(var.high, var)
                if lo > hi:
                    raise _err(f"empty range for {var.name}", var)
                self.bounds[var.name] = (lo, hi)
                v = lo if var.init is None else self.integer(var.init, var)
                if not lo <= v <= hi:
                    raise _err(f"initial value {v} of {var.name} outside [{lo}..{hi}]", var)
            init[var.name] = v
        self.order = sorted(self.bounds)
        self.initial = tuple(init[n] for n in self.order)

    def integer(self, e, where) -> int:
        v = self.eval(e, {})
        if isinstance(v, bool) or Fraction(v).denominator != 1:
            raise _err("expected an integer", where)
        return int(v)

    # -- evaluation ---------------------------------------------------------
    def lookup(self, e: Var, vals: Mapping):
        if e.name in vals:
            return vals[e.name]
        if e.name in self.consts:
            return self.consts[e.name]
        raise _err(f"unknown identifier {e.name!r}", e)

    def eval(self, e, vals: Mapping):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Var):
            return self.lookup(e, vals)
        if isinstance(e, Index):
            return self.entry(e, vals)
        if isinstance(e, Call):
            args = [self.number(a, vals) for a in e.args]
            if e.func == "abs":
                if len(args) != 1:
                    raise _err("abs takes one argument", e)
                return abs(args[0])
            return max(args) if e.func == "max" else min(args)
        if isinstance(e, Unary):
            if e.op == "!":
                return not self.boolean(e.operand, vals)
            return -self.number(e.operand, vals)
        op = e.op
        if op == "&":
            return self.boolean(e.left, vals) and self.boolean(e.right, vals)
        if op == "|":
            return self.boolean(e.left, vals) or self.boolean(e.right, vals)
        if op in ("=", "!="):
            a, b = self.eval(e.left, vals), self.eval(e.right, vals)
            if isinstance(a, bool) != isinstance(b, bool):
                raise _err("cannot compare a boolean with a number", e)
            return (a == b) if op == "=" else (a != b)
        a, b = self.number(e.left, vals), self.number(e.right, vals)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise _err("division by zero", e)
            return Fraction(a) / b
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]

    def number(self, e, vals) -> Fraction:
        v = self.eval(e, vals)
        if isinstance(v, bool):
            raise _err("expected a number, got a boolean", e)
        return Fraction(v)

    def boolean(self, e, vals) -> bool:
        v = self.eval(e, vals)
        if not isinstance(v, bool):
            raise _err("expected a boolean", e)
        return v

    def entry(self, e: Index, vals) -> Fraction:
        m = self.matrices.get(e.matrix)
        if m is None:
            raise _err(f"unknown matrix {e.matrix!r}", e)
        i, j = (self.number(a, vals) for a in e.indices)
        rows, cols = m.shape
        if i.denominator != 1 or j.denominator != 1 or not (0 <= i < rows and 0 <= j < cols):
            raise _err(f"index [{i},{j}] outside matrix {e.matrix} of shape {rows}x{cols}", e)
        return m.rows[int(i)][int(j)]

    # -- linear forms over probability symbols -------------------------------
    def linear(self, e, vals, symbols) -> tuple[Fraction, dict]:
        """``(constant, {symbol: coefficient})`` of an expression linear in the symbols."""
        if isinstance(e, Var) and e.name in symbols:
            return Fraction(0), {e.name: Fraction(1)}
        if isinstance(e, Unary) and e.op == "-":
            c, f = self.linear(e.operand, vals, symbols)
            return -c, {k: -v for k, v in f.items()}
        if isinstance(e, Binary) and e.op in "+-*/":
            c1, f1 = self.linear(e.left, vals, symbols)
            c2, f2 = self.linear(e.right, vals, symbols)
            if e.op in "+-":
                s = 1 if e.op == "+" else -1
                f = dict(f1)
                for k, v in f2.items():
                    f[k] = f.get(k, 0) + s * v
                return c1 + s * c2, f
            if e.op == "*":
                if f1 and f2:
                    raise _err("uncertainty rows must be linear in the probability symbols", e)
                if f1:
                    return c1 * c2, {k: v * c2 for k, v in f1.items()}
                return c1 * c2, {k: v * c1 for k, v in f2.items()}
            if f2:
                raise _err("cannot divide by a probability symbol", e)
            if c2 == 0:
                raise _err("division by zero", e)
            return c1 / c2, {k: v / c2 for k, v in f1.items()}
        for n in _symbols_in(e, symbols):
            raise _err(f"symbol {n} may only appear linearly (not inside {type(e).__name__.lower()})", e)
        return self.number(e, vals), {}


def _symbols_in(e, symbols):
    return [n.name for n in walk(e) if isinstance(n, Var) and n.name in symbols]


@dataclass
class _Owners:
    of_label: dict
    names: tuple


def _owners(ast: ModelAst) -> _Owners:
    if len(ast.players) > 2:
        raise SemanticError("at most two players are supported")
    players = {}
    for k, p in enumerate(ast.players):
        players[p.name] = Player.BOX if k == 0 else Player.DIAMOND
    of_label = {lab: players[p] for lab, p in ast.player_of().items()}
    if not ast.players:
        of_label = {c.label: Player.BOX for c in ast.commands}
    return _Owners(of_label, tuple(p.name for p in ast.players))


def _row_constraints(env: _Env, cmd: Command, vals) -> list[LinearConstraint]:
    symbols = cmd.symbols
    cons = []
    for row in cmd.uncertainty:
        c1, f1 = env.linear(row.lhs, vals, symbols)
        c2, f2 = env.linear(row.rhs, vals, symbols)
        coeffs = dict(f1)
        for k, v in f2.items():
            coeffs[k] = coeffs.get(k, 0) - v
        bound = c2 - c1
        if all(v == 0 for v in coeffs.values()):
            ok = {">=": 0 >= bound, "<=": 0 <= bound, "=": bound == 0}[row.relation]
            if not ok:
                raise _err(f"[{cmd.label}]: row is unsatisfiable at this state", row, EmptyPolytope)
            continue
        cons.append(LinearConstraint.of(coeffs, row.relation, bound))
    return cons


def _symbol_polytope(env: _Env, cmd: Command, vals, where: str) -> DistPolytope:
    try:
        return build_dist_polytope(cmd.symbols, _row_constraints(env, cmd, vals))
    except EmptyPolytope as exc:
        raise EmptyPolytope(f"{where}, command [{cmd.label}]: uncertainty block is infeasible ({exc})") from exc


def command_polytope(ast: ModelAst, valuation: Mapping[str, object], label: str) -> DistPolytope:
    """Symbol-level polytope of command ``label`` evaluated at ``valuation``."""
    env = _Env(ast)
    cmd = ast.command(label)
    vals = {k: (v if isinstance(v, bool) else Fraction(v)) for k, v in valuation.items()}
    if not cmd.uncertainty:
        dist = {}
        for k, b in enumerate(cmd.branches):
            dist[f"branch{k}"] = Fraction(1) if b.prob is None else env.number(b.prob, vals)
        return from_point(dist)
    return _symbol_polytope(env, cmd, vals, "valuation")


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def state_id(names, values) -> str:
    return ",".join(f"{n}={_format_value(v)}" for n, v in zip(names, values))


def parse_state_id(sid: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for part in sid.split(","):
        name, _, text = part.partition("=")
        out[name] = {"true": True, "false": False}.get(text, None)
        if out[name] is None:
            out[name] = int(text)
    return out


def expand(
    ast: ModelAst,
    *,
    labels: Mapping[str, object] | None = None,
    state_cap: int = DEFAULT_STATE_CAP,
    reward: str | None = None,
) -> PSG:
    """Explore the reachable valuations of ``ast`` and build the PSG.

    ``labels`` adds state predicates (expressions or source strings) on top
    of the model's ``label`` declarations.  ``reward`` selects a reward
    structure by name; the first one is used by default.
    """
    check(ast)
    env = _Env(ast)
    owners = _owners(ast)
    names = env.order
    index = {n: k for k, n in enumerate(names)}
    commands = ast.commands

    predicates = [(lab.name, lab.expr) for lab in ast.labels]
    scope = {v.name: v for v in ast.variables}
    for name, e in (labels or {}).items():
        if isinstance(e, str):
            e = parse_expression(e)
        _check_scope(ast, e, env.consts, scope)
        predicates = [(n, x) for n, x in predicates if n != name] + [(name, e)]

    if reward is None:
        items = ast.reward_items
    else:
        match = [r for r in ast.rewards if r.name == reward]
        if not match:
            raise SemanticError(f"no reward structure named {reward!r}")
        items = match[0].items

    ids: dict[tuple, str] = {env.initial: state_id(names, env.initial)}
    queue = deque([env.initial])
    states: list[str] = []
    owner: dict[str, Player] = {}
    theta: dict[str, tuple] = {}
    rewards: dict[str, Fraction] = {}
    terminals: set[str] = set()
    action_labels: dict[str, tuple] = {}
    members: dict[str, list] = {name: [] for name, _ in predicates}

    # block rows depend on the valuation only through the variables they read
    block_vars = {}
    for k, cmd in enumerate(commands):
        used = set()
        for row in cmd.uncertainty:
            used |= {n.name for n in walk(row.lhs) if isinstance(n, Var)}
            used |= {n.name for n in walk(row.rhs) if isinstance(n, Var)}
        block_vars[k] = tuple(sorted(used & set(names)))
    shapes: dict[tuple, DistPolytope] = {}

    def uncertain_polytope(k, cmd, vals, succ, sid):
        groups: dict[str, int] = {}
        pattern = tuple(groups.setdefault(t, len(groups)) for t in succ)
        key = (k, tuple(vals[v] for v in block_vars[k]), pattern)
        shape = shapes.get(key)
        if shape is None:
            sym_poly = _symbol_polytope(env, cmd, vals, f"state {sid}")
            shape = project(sym_poly, dict(zip(cmd.symbols, pattern)))
            shapes[key] = shape
        order = list(groups)
        return DistPolytope(
            tuple(order[i] for i in shape.support),
            tuple(LinearConstraint.of({order[i]: c for i, c in con.coeffs}, con.relation, con.bound)
                  for con in shape.constraints),
        )

    def successor(vals, key, branch, cmd):
        new = list(key)
        for u in branch.updates:
            v = env.eval(u.expr, vals)
            bounds = env.bounds[u.var]
            if bounds is None:
                if not isinstance(v, bool):
                    raise _err(f"[{cmd.label}]: {u.var} expects a boolean", u)
            else:
                if isinstance(v, bool) or Fraction(v).denominator != 1:
                    raise _err(f"[{cmd.label}]: {u.var} expects an integer", u)
                v = int(v)
                if not bounds[0] <= v <= bounds[1]:
                    raise _err(f"[{cmd.label}]: update {u.var}'={v} leaves [{bounds[0]}..{bounds[1]}]", u)
            new[index[u.var]] = v
        t = tuple(new)
        if t not in ids:
            if len(ids) >= state_cap:
                raise Unbounded(f"state space exceeds the cap of {state_cap} states")
            ids[t] = state_id(names, t)
            queue.append(t)
        return ids[t]

    while queue:
        key = queue.popleft()
        sid = ids[key]
        vals = dict(zip(names, key))
        states.append(sid)
        for name, e in predicates:
            if env.boolean(e, vals):
                members[name].append(sid)
        r = Fraction(0)
        for item in items:
            if env.boolean(item.guard, vals):
                r += env.number(item.value, vals)
        if r < 0:
            raise SemanticError(f"negative reward {r} at state {sid}")
        rewards[sid] = r

        enabled = [c for c in commands if env.boolean(c.guard, vals)]
        if not enabled:
            owner[sid] = Player.BOX
            theta[sid] = (dirac(sid),)
            if r == 0:
                terminals.add(sid)
            continue
        who = {owners.of_label[c.label] for c in enabled}
        if len(who) > 1:
            labs = ", ".join(f"[{c.label}]" for c in enabled)
            raise MixedOwners(f"state {sid} enables commands of both players: {labs}")
        owner[sid] = who.pop()
        polys = []
        for cmd in enabled:
            succ = [successor(vals, key, b, cmd) for b in cmd.branches]
            if not cmd.uncertainty:
                dist: dict[str, Fraction] = {}
                for b, t in zip(cmd.branches, succ):
                    p = Fraction(1) if b.prob is None else env.number(b.prob, vals)
                    if not 0 <= p <= 1:
                        raise _err(f"[{cmd.label}]: probability {p} at state {sid} is not in [0, 1]", b)
                    dist[t] = dist.get(t, Fraction(0)) + p
                if sum(dist.values()) != 1:
                    raise _err(f"[{cmd.label}]: probabilities at state {sid} sum to {sum(dist.values())}", cmd)
                polys.append(from_point({t: p for t, p in dist.items() if p != 0}))
            else:
                polys.append(uncertain_polytope(commands.index(cmd), cmd, vals, succ, sid))
        theta[sid] = tuple(polys)
        action_labels[sid] = tuple(c.label for c in enabled)

    return PSG(
        states=tuple(states),
        owner=owner,
        theta=theta,
        reward=rewards,
        terminals=frozenset(terminals),
        initial=states[0],
        labels={name: frozenset(v) for name, v in members.items()},
        action_labels=action_labels,
    )
