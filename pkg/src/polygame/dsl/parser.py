"""Recursive-descent parser for ``.psg`` models.

Grammar summary (``//`` starts a line comment)::

    model    := ["smg"] decl*
    decl     := const | matrix | player | module | label | rewards
    const    := "const" [int|double|bool] NAME "=" expr ";"
    matrix   := "matrix" NAME "=" "[" "[" expr,* "]",* "]" ";"
    player   := "player" NAME item ("," item)* "endplayer"
    item     := "[" label "]" | MODULE_NAME
    module   := "module" NAME (vardecl | command)* "endmodule"
    vardecl  := NAME ":" ("[" expr ".." expr "]" | "bool") ["init" expr] ";"
    command  := "[" label "]" expr "->" branch ("+" branch)* [block] ";"
    branch   := [expr ":"] (update ("&" update)* | "true")
    update   := "(" NAME' "=" expr ")"
    block    := "{" row ("," row)* [","] "}"
    row      := sum (">=" | "<=" | "=") sum
    label    := "label" STRING "=" expr ";"
    rewards  := "rewards" [STRING] (expr ":" expr ";")* "endrewards"

Operator precedence, loosest first: ``|``/``||``, ``&``/``&&``, ``!``,
relations, ``+ -``, ``* /``, unary minus.  Command labels may contain
hyphens (``robl-cont``).  Matrices live in their own namespace: ``L`` may be
both an integer constant and a matrix, told apart by the ``[`` that follows
a matrix name.
"""

from __future__ import annotations

from fractions import Fraction

from ..errors import DuplicateLabel, PsgSyntaxError, SemanticError, UnknownIdentifier
from .ast import (
    Assignment, Binary, BoolLit, Branch, Call, Command, Constant, Index, LabelDef,
    Matrix, ModelAst, Module, Num, PlayerDecl, RewardItem, RewardStruct, Row,
    Unary, Var, Variable, walk,
)
from .lexer import Token, tokenize

FUNCTIONS = {"max", "min", "abs"}
RELATIONS = ("=", "!=", "<", "<=", ">", ">=")
ROW_RELATIONS = (">=", "<=", "=")


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self.module_names: set[str] = set()

    # -- token helpers ------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value: str, kind: str | None = None) -> bool:
        t = self.tok
        return t.value == value and (kind is None or t.kind == kind) and t.kind in ("SYMBOL", "KEYWORD")

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def error(self, message: str, tok: Token | None = None):
        t = tok or self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.value)
        return PsgSyntaxError(f"{message}, found {found}", t.line, t.column)

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.error(f"expected {value!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise self.error(f"expected {what}")
        return self.advance()

    @staticmethod
    def loc(t: Token) -> tuple[int, int]:
        return (t.line, t.column)

    # -- model --------------------------------------------------------------
    def model(self) -> ModelAst:
        header = "smg"
        if self.at("smg"):
            self.advance()
        constants, matrices, players, modules, labels, rewards = [], [], [], [], [], []
        while self.tok.kind != "EOF":
            if self.at("const"):
                constants.append(self.constant())
            elif self.at("matrix"):
                matrices.append(self.matrix())
            elif self.at("player"):
                players.append(self.player())
            elif self.at("module"):
                modules.append(self.module())
            elif self.at("label"):
                labels.append(self.label())
            elif self.at("rewards"):
                rewards.append(self.rewards())
            else:
                raise self.error("expected a declaration")
        return ModelAst(tuple(constants), tuple(matrices), tuple(players), tuple(modules),
                        tuple(labels), tuple(rewards), header)

    def constant(self) -> Constant:
        start = self.expect("const")
        ctype = ""
        if self.at("int") or self.at("double") or self.at("bool"):
            ctype = self.advance().value
        name = self.expect_kind("IDENT", "constant name").value
        self.expect("=")
        e = self.expr()
        self.expect(";")
        return Constant(name, ctype, e, self.loc(start))

    def matrix(self) -> Matrix:
        start = self.expect("matrix")
        name = self.expect_kind("IDENT", "matrix name").value
        self.expect("=")
        self.expect("[")
        rows = [self.matrix_row()]
        while self.at(","):
            self.advance()
            rows.append(self.matrix_row())
        self.expect("]")
        self.expect(";")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise SemanticError(f"matrix {name} has rows of different lengths", *self.loc(start))
        return Matrix(name, tuple(rows), self.loc(start))

    def matrix_row(self) -> tuple:
        self.expect("[")
        vals = [self.matrix_entry()]
        while self.at(","):
            self.advance()
            vals.append(self.matrix_entry())
        self.expect("]")
        return tuple(vals)

    def matrix_entry(self) -> Fraction:
        t = self.tok
        e = self.expr()
        value = _fold(e)
        if value is None:
            raise SemanticError("matrix entries must be numeric literals", t.line, t.column)
        return value

    def player(self) -> PlayerDecl:
        start = self.expect("player")
        name = self.expect_kind("IDENT", "player name").value
        labels, modules = [], []
        while True:
            if self.at("["):
                labels.append(self.command_label())
            elif self.tok.kind == "IDENT":
                modules.append(self.advance().value)
            else:
                raise self.error("expected [label] or module name")
            if self.at(","):
                self.advance()
                continue
            break
        self.expect("endplayer")
        return PlayerDecl(name, tuple(labels), tuple(modules), self.loc(start))

    def command_label(self) -> str:
        self.expect("[")
        parts = [self.expect_kind("IDENT", "action label").value]
        while self.at("-"):
            self.advance()
            parts.append(self.expect_kind("IDENT", "action label").value)
        self.expect("]")
        return "-".join(parts)

    def module(self) -> Module:
        start = self.expect("module")
        name = self.expect_kind("IDENT", "module name").value
        variables, commands = [], []
        while not self.at("endmodule"):
            if self.at("["):
                commands.append(self.command())
            elif self.tok.kind == "IDENT" and self.peek().value == ":":
                variables.append(self.variable())
            else:
                raise self.error("expected a variable declaration, a command or 'endmodule'")
        self.expect("endmodule")
        return Module(name, tuple(variables), tuple(commands), self.loc(start))

    def variable(self) -> Variable:
        t = self.advance()
        self.expect(":")
        if self.at("bool"):
            self.advance()
            kind, low, high = "bool", None, None
        else:
            self.expect("[")
            low = self.expr()
            self.expect("..")
            high = self.expr()
            self.expect("]")
            kind = "int"
        init = None
        if self.at("init"):
            self.advance()
            init = self.expr()
        self.expect(";")
        return Variable(t.value, kind, low, high, init, self.loc(t))

    def command(self) -> Command:
        start = self.tok
        label = self.command_label()
        guard = self.expr()
        self.expect("->")
        branches = [self.branch()]
        while self.at("+"):
            self.advance()
            branches.append(self.branch())
        rows = []
        if self.at("{"):
            self.advance()
            if not self.at("}"):
                rows.append(self.row())
                while self.at(","):
                    self.advance()
                    if self.at("}"):
                        break
                    rows.append(self.row())
            self.expect("}")
        self.expect(";")
        return Command(label, guard, tuple(branches), tuple(rows), self.loc(start))

    def _at_update(self) -> bool:
        return self.at("true") or (self.at("(") and self.peek().kind == "PRIMED")

    def branch(self) -> Branch:
        start = self.tok
        prob = None
        if not self._at_update():
            prob = self.expr()
            self.expect(":")
        if self.at("true"):
            self.advance()
            return Branch(prob, (), self.loc(start))
        updates = [self.assignment()]
        while self.at("&") and self.peek().value == "(" and self.peek(2).kind == "PRIMED":
            self.advance()
            updates.append(self.assignment())
        return Branch(prob, tuple(updates), self.loc(start))

    def assignment(self) -> Assignment:
        self.expect("(")
        t = self.expect_kind("PRIMED", "primed variable")
        self.expect("=")
        e = self.expr()
        self.expect(")")
        return Assignment(t.value, e, self.loc(t))

    def row(self) -> Row:
        start = self.tok
        lhs = self.additive()
        if not any(self.at(r) for r in ROW_RELATIONS):
            raise self.error("expected '>=', '<=' or '=' in uncertainty row")
        rel = self.advance().value
        rhs = self.additive()
        return Row(lhs, rel, rhs, self.loc(start))

    def label(self) -> LabelDef:
        start = self.expect("label")
        name = self.expect_kind("STRING", "label name in quotes").value
        self.expect("=")
        e = self.expr()
        self.expect(";")
        return LabelDef(name, e, self.loc(start))

    def rewards(self) -> RewardStruct:
        start = self.expect("rewards")
        name = self.advance().value if self.tok.kind == "STRING" else None
        items = []
        while not self.at("endrewards"):
            if self.at("["):
                raise self.error("transition rewards are not supported; use state rewards")
            t = self.tok
            g = self.expr()
            self.expect(":")
            v = self.expr()
            self.expect(";")
            items.append(RewardItem(g, v, self.loc(t)))
        self.expect("endrewards")
        return RewardStruct(name, tuple(items), self.loc(start))

    # -- expressions --------------------------------------------------------
    def expr(self):
        return self.disjunction()

    def disjunction(self):
        left = self.conjunction()
        while self.at("|") or self.at("||"):
            t = self.advance()
            left = Binary("|", left, self.conjunction(), self.loc(t))
        return left

    def conjunction(self):
        left = self.negation()
        while self.at("&") or self.at("&&"):
            t = self.advance()
            left = Binary("&", left, self.negation(), self.loc(t))
        return left

    def negation(self):
        if self.at("!"):
            t = self.advance()
            return Unary("!", self.negation(), self.loc(t))
        return self.relation()

    def relation(self):
        left = self.additive()
        if any(self.at(r) for r in RELATIONS):
            t = self.advance()
            left = Binary(t.value, left, self.additive(), self.loc(t))
            if any(self.at(r) for r in RELATIONS):
                raise self.error("relations do not chain; add parentheses")
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at("+") or self.at("-"):
            t = self.advance()
            left = Binary(t.value, left, self.multiplicative(), self.loc(t))
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at("*") or self.at("/"):
            t = self.advance()
            left = Binary(t.value, left, self.unary(), self.loc(t))
        return left

    def unary(self):
        if self.at("-"):
            t = self.advance()
            return Unary("-", self.unary(), self.loc(t))
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return Num(Fraction(t.value), self.loc(t))
        if self.at("true") or self.at("false"):
            self.advance()
            return BoolLit(t.value == "true", self.loc(t))
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "IDENT":
            self.advance()
            if t.value in FUNCTIONS and self.at("("):
                self.advance()
                args = [self.expr()]
                while self.at(","):
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                return Call(t.value, tuple(args), self.loc(t))
            if self.at("["):
                self.advance()
                idx = [self.expr()]
                while self.at(","):
                    self.advance()
                    idx.append(self.expr())
                self.expect("]")
                return Index(t.value, tuple(idx), self.loc(t))
            return Var(t.value, self.loc(t))
        raise self.error("expected an expression")


def _fold(e) -> Fraction | None:
    """Value of a literal-only arithmetic expression, else ``None``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Unary) and e.op == "-":
        v = _fold(e.operand)
        return None if v is None else -v
    if isinstance(e, Binary) and e.op in "+-*/":
        a, b = _fold(e.left), _fold(e.right)
        if a is None or b is None or (e.op == "/" and b == 0):
            return None
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else None}[e.op]
    return None


# ---------------------------------------------------------------------------
# static checks

def _where(node) -> tuple:
    return node.loc if node.loc else (None, None)


def check(ast: ModelAst) -> None:
    """Scoping, labeling and uncertainty-block rules.  Raises on violation."""
    consts: dict[str, Constant] = {}
    for c in ast.constants:
        if c.name in consts:
            raise SemanticError(f"constant {c.name} declared twice", *_where(c))
        for n in walk(c.expr):
            if isinstance(n, Var) and n.name not in consts:
                raise UnknownIdentifier(f"unknown identifier {n.name!r} in constant {c.name}", *_where(n))
            _check_matrix_ref(ast, n)
        consts[c.name] = c
    seen_matrix: set[str] = set()
    for m in ast.matrices:
        if m.name in seen_matrix:
            raise SemanticError(f"matrix {m.name} declared twice", *_where(m))
        seen_matrix.add(m.name)

    variables: dict[str, Variable] = {}
    for v in ast.variables:
        if v.name in variables or v.name in consts:
            raise SemanticError(f"identifier {v.name} declared twice", *_where(v))
        variables[v.name] = v
    for v in ast.variables:
        for e in (v.low, v.high, v.init):
            if e is not None:
                _check_scope(ast, e, consts, {})

    scope = {**variables}
    labels: dict[str, Command] = {}
    for cmd in ast.commands:
        if cmd.label in labels:
            raise DuplicateLabel(f"action label [{cmd.label}] used by two commands", *_where(cmd))
        labels[cmd.label] = cmd
        _check_scope(ast, cmd.guard, consts, scope)
        _check_command(ast, cmd, consts, scope)

    owner: dict[str, str] = {}
    pnames: set[str] = set()
    modules = {m.name: m for m in ast.modules}
    for p in ast.players:
        if p.name in pnames:
            raise DuplicateLabel(f"player {p.name} declared twice", *_where(p))
        pnames.add(p.name)
        claimed = list(p.labels)
        for mname in p.modules:
            if mname not in modules:
                raise UnknownIdentifier(f"player {p.name} names unknown module {mname!r}", *_where(p))
            claimed += [c.label for c in modules[mname].commands]
        for lab in claimed:
            if lab not in labels:
                raise UnknownIdentifier(f"player {p.name} claims unknown action [{lab}]", *_where(p))
            if lab in owner:
                raise DuplicateLabel(f"action [{lab}] assigned to players {owner[lab]} and {p.name}", *_where(p))
            owner[lab] = p.name
    if ast.players:
        for lab, cmd in labels.items():
            if lab not in owner:
                raise SemanticError(f"action [{lab}] is not assigned to any player", *_where(cmd))

    seen_labels: set[str] = set()
    for lab in ast.labels:
        if lab.name in seen_labels:
            raise DuplicateLabel(f'label "{lab.name}" defined twice', *_where(lab))
        seen_labels.add(lab.name)
        _check_scope(ast, lab.expr, consts, scope)
    names: set = set()
    for rs in ast.rewards:
        if rs.name in names:
            raise DuplicateLabel(f"reward structure {rs.name!r} defined twice", *_where(rs))
        names.add(rs.name)
        for item in rs.items:
            _check_scope(ast, item.guard, consts, scope)
            _check_scope(ast, item.value, consts, scope)


def _check_matrix_ref(ast: ModelAst, n) -> None:
    if isinstance(n, Index) and n.matrix not in ast.matrix_map():
        raise UnknownIdentifier(f"unknown matrix {n.matrix!r}", *_where(n))
    if isinstance(n, Index) and len(n.indices) != 2:
        raise SemanticError(f"matrix {n.matrix} takes two indices", *_where(n))


def _check_scope(ast, e, consts, scope, symbols=()) -> None:
    for n in walk(e):
        if isinstance(n, Var) and n.name not in consts and n.name not in scope and n.name not in symbols:
            raise UnknownIdentifier(f"unknown identifier {n.name!r}", *_where(n))
        _check_matrix_ref(ast, n)


def _check_command(ast, cmd: Command, consts, scope) -> None:
    symbolic = [b for b in cmd.branches
                if isinstance(b.prob, Var) and b.prob.name not in consts and b.prob.name not in scope]
    if cmd.uncertainty:
        if len(symbolic) != len(cmd.branches):
            raise SemanticError(
                f"[{cmd.label}]: with an uncertainty block every branch needs its own probability symbol",
                *_where(cmd))
        syms = [b.prob.name for b in cmd.branches]
        if len(set(syms)) != len(syms):
            raise SemanticError(f"[{cmd.label}]: probability symbols must be distinct", *_where(cmd))
        for row in cmd.uncertainty:
            _check_scope(ast, row.lhs, consts, scope, syms)
            _check_scope(ast, row.rhs, consts, scope, syms)
    else:
        if symbolic:
            b = symbolic[0]
            raise SemanticError(
                f"[{cmd.label}]: symbolic probability {b.prob.name!r} requires an uncertainty block",
                *_where(b.prob))
        if len(cmd.branches) > 1 and any(b.prob is None for b in cmd.branches):
            raise SemanticError(f"[{cmd.label}]: every branch of a probabilistic choice needs a probability",
                                *_where(cmd))
        for b in cmd.branches:
            if b.prob is not None:
                _check_scope(ast, b.prob, consts, scope)
    for b in cmd.branches:
        targets = [u.var for u in b.updates]
        if len(set(targets)) != len(targets):
            raise SemanticError(f"[{cmd.label}]: a branch assigns a variable twice", *_where(b))
        for u in b.updates:
            if u.var not in scope:
                raise UnknownIdentifier(f"[{cmd.label}]: update of unknown variable {u.var!r}", *_where(u))
            _check_scope(ast, u.expr, consts, scope)


def parse(source: str) -> ModelAst:
    """Parse and statically check a ``.psg`` model."""
    ast = _Parser(source).model()
    check(ast)
    return ast


def parse_expression(source: str):
    """Parse a standalone expression, such as a goal predicate ``roby=L``."""
    p = _Parser(source)
    e = p.expr()
    if p.tok.kind != "EOF":
        raise p.error("unexpected trailing input")
    return e
