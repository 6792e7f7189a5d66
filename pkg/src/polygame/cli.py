"""Command-line front end: ``polygame <subcommand> ...``.

Exit codes: 0 success, 1 model error, 2 precondition failure, 3 non-convergence,
64 usage error.  Errors are reported on stderr as JSON
``{"error": {"code": ..., "message": ..., "exit": ...}}``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import random
import sys
from pathlib import Path

from . import __version__
from .discretize import build_extreme_game, check_irreducible, check_stopping, to_dot, to_json
from .dsl import expand, parse, roborta_source
from .dsl.parser import parse_expression
from .errors import (
    DslError, NotConverged, PolygameError, PreconditionFailed, TooManyStrategies,
)
from .io import load_psg
from .model import Average, Discounted, Reach, Total, validate
from .polytope import enumerate_vertices
from .rational import format_float, format_fraction, to_fraction
from .simulate import SimConfig, estimate
from .solver import SolveOptions, brute_force_value, objective_to_json, solve

EXIT_OK, EXIT_MODEL, EXIT_PRECONDITION, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(obj, args, text: str | None = None) -> None:
    body = text if (getattr(args, "format", "json") == "text" and text is not None) else (
        json.dumps(obj, indent=2, ensure_ascii=False) + "\n")
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)


def _fail(code: str, message: str, exit_code: int, **extra) -> int:
    err = {"code": code, "message": message, "exit": exit_code}
    err.update({k: v for k, v in extra.items() if v is not None})
    sys.stderr.write(json.dumps({"error": err}, ensure_ascii=False) + "\n")
    return exit_code


# ---------------------------------------------------------------------------
# loading

def _split_top(spec: str) -> list[str]:
    """Split on commas that are not nested inside brackets or parentheses."""
    parts, depth, cur = [], 0, []
    for ch in spec:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return [p for p in parts if p]


def _load(path: str, reach: str | None):
    """PSG plus the goal set named by ``--reach`` (or None)."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(path)
    if p.suffix == ".psg":
        ast = parse(p.read_text(encoding="utf-8"))
        extra, goal_labels = {}, []
        if reach is not None:
            declared = {lab.name for lab in ast.labels}
            items = [reach] if reach in declared else _split_top(reach)
            for k, item in enumerate(items):
                if item in declared:
                    goal_labels.append(item)
                else:
                    name = f"--reach[{k}]"
                    extra[name] = parse_expression(item)
                    goal_labels.append(name)
        game = expand(ast, labels=extra)
        goal = None
        if reach is not None:
            goal = frozenset().union(*(game.labels[n] for n in goal_labels))
            game = dataclasses.replace(game, labels={k: v for k, v in game.labels.items() if k not in extra})
        return game, goal
    game = load_psg(p)
    goal = None
    if reach is not None:
        items = [reach] if (reach in game.labels or reach in game.states) else _split_top(reach)
        goal = set()
        for item in items:
            if item in game.labels:
                goal |= game.labels[item]
            elif item in game.states:
                goal.add(item)
            else:
                raise UsageError(f"--reach: {item!r} is neither a label nor a state of {path}")
        goal = frozenset(goal)
    return game, goal


def _objective(args, goal):
    if args.reach is not None:
        if not goal:
            raise PolygameError("--reach selects no state")
        return Reach(goal)
    if args.total:
        return Total()
    if args.discounted is not None:
        try:
            return Discounted(to_fraction(args.discounted))
        except (ValueError, TypeError) as exc:
            raise UsageError(f"--discounted: {exc}") from exc
    return Average()


def _checked_game(args):
    game, goal = _load(args.input, getattr(args, "reach", None))
    diag = validate(game)
    if not diag.ok:
        first = diag.errors[0]
        raise _InvalidModel(diag, f"{first.code} at {first.locus}: {first.message}")
    return game, goal


class _InvalidModel(PolygameError):
    code = "InvalidModel"

    def __init__(self, diag, message):
        self.diag = diag
        super().__init__(message)


def _preconditions(eg, objective) -> dict:
    out = {}
    if isinstance(objective, Total):
        out["stopping"] = check_stopping(eg)
    if isinstance(objective, Average):
        out["irreducible"] = check_irreducible(eg)
    return out


def _require(pre: dict) -> None:
    if pre.get("stopping") is False:
        raise PreconditionFailed("Stopping", "total reward needs an almost surely stopping game")
    if pre.get("irreducible") is False:
        raise PreconditionFailed("Irreducible", "average reward needs an irreducible game")


def _options(args) -> SolveOptions:
    try:
        return SolveOptions(tolerance=args.tol, max_iterations=args.max_iters, sweep=args.sweep)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands

def cmd_check(args) -> int:
    game, _ = _load(args.input, None)
    diag = validate(game)
    out = diag.to_json()
    out["states"] = len(game.states)
    text = "\n".join([f"{len(game.states)} states"] +
                     [f"error {e.code} {e.locus}: {e.message}" for e in diag.errors] +
                     [f"warning {w.code} {w.locus}: {w.message}" for w in diag.warnings]) + "\n"
    _emit(out, args, text)
    return EXIT_OK if diag.ok else EXIT_MODEL


def cmd_vertices(args) -> int:
    game, _ = _checked_game(args)
    states = []
    lines = []
    for s in game.states:
        names = game.action_labels.get(s, ())
        polys = []
        for k, poly in enumerate(game.theta[s]):
            vs = enumerate_vertices(poly)
            polys.append({
                "index": k,
                "label": names[k] if k < len(names) else None,
                "support": [str(t) for t in poly.support],
                "vertices": [{str(t): format_fraction(p) for t, p in v.items()} for v in vs.as_dicts()],
            })
            lines.append(f"{s} K{k}: " + "; ".join(
                ", ".join(f"{t}:{format_fraction(p)}" for t, p in v.items()) for v in vs.as_dicts()))
        states.append({"state": str(s), "owner": game.owner[s].value, "polytopes": polys})
    _emit({"states": states}, args, "\n".join(lines) + "\n")
    return EXIT_OK


def _result_text(result, game) -> str:
    lines = [f"iterations {result.iterations}, residual {format_float(result.residual)}"]
    for s in game.states:
        strat = result.strategy_box.choice.get(s, result.strategy_diamond.choice.get(s))
        lines.append(f"{s}\t{format_float(result.values[s])}\taction {strat}")
    return "\n".join(lines) + "\n"


def cmd_solve(args) -> int:
    game, goal = _checked_game(args)
    objective = _objective(args, goal)
    eg = build_extreme_game(game)
    pre = _preconditions(eg, objective)
    _require(pre)
    try:
        result = solve(eg, objective, _options(args))
    except NotConverged as exc:
        out = _solve_json(exc.result, eg, pre)
        _emit(out, args, _result_text(exc.result, eg))
        raise
    _emit(_solve_json(result, eg, pre), args, _result_text(result, eg))
    return EXIT_OK


def _solve_json(result, eg, pre) -> dict:
    out = {"initial": str(eg.initial), "states": len(eg.states),
           "initial_value": format_float(result.values[eg.initial])}
    if pre:
        out["preconditions"] = pre
    out.update(result.to_json())
    return out


def cmd_simulate(args) -> int:
    game, goal = _checked_game(args)
    objective = _objective(args, goal)
    eg = build_extreme_game(game)
    _require(_preconditions(eg, objective))
    result = solve(eg, objective, _options(args))
    try:
        config = SimConfig(runs=args.runs, seed=args.seed, horizon=args.horizon, objective=objective)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = estimate(eg, result.strategy_box, result.strategy_diamond, config, keep_payoffs=bool(args.csv))
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    out = {
        "objective": objective_to_json(objective),
        "initial": str(eg.initial),
        "solved_value": format_float(result.values[eg.initial]),
        "config": {"runs": args.runs, "seed": args.seed, "horizon": args.horizon},
        "report": report.to_json(),
    }
    text = (f"mean {format_float(report.mean)} +- {format_float(report.std_error)} "
            f"(solved {format_float(result.values[eg.initial])}, {report.runs_completed} runs)\n")
    _emit(out, args, text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    game, goal = _checked_game(args)
    objective = _objective(args, goal)
    eg = build_extreme_game(game)
    _require(_preconditions(eg, objective))
    supinf, infsup = brute_force_value(eg, objective, limit=args.limit)
    rows, gap = [], 0.0
    for s in eg.states:
        g = abs(supinf[s] - infsup[s])
        gap = max(gap, g)
        rows.append({"state": str(s), "supinf": format_float(supinf[s]),
                     "infsup": format_float(infsup[s]), "gap": format_float(g)})
    out = {"objective": objective_to_json(objective), "states": rows, "gap": format_float(gap)}
    text = "\n".join([f"{r['state']}\t{r['supinf']}\t{r['infsup']}" for r in rows] +
                     [f"determinacy gap {format_float(gap)}"]) + "\n"
    _emit(out, args, text)
    return EXIT_OK


def cmd_export(args) -> int:
    game, _ = _checked_game(args)
    eg = build_extreme_game(game)
    body = to_dot(eg) if args.format == "dot" else json.dumps(to_json(eg), indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    return EXIT_OK


def _terrain(args):
    w, n = args.width, args.length
    if args.terrain:
        data = json.loads(Path(args.terrain).read_text(encoding="utf-8"))
        return data["Q"], data["L"], data["F"]
    if args.random_terrain is not None:
        rng = random.Random(args.random_terrain)
        pick = lambda vals: [[rng.choice(vals) for _ in range(n)] for _ in range(w)]  # noqa: E731
        q = pick(["0", "0.1", "0.2", "0.3", "0.4", "0.5"])
        lat = pick(["-1", "-0.5", "0", "0.5", "1"])
        fr = pick(["-1", "-0.5", "0", "0.5", "1"])
        return q, lat, fr
    zero = [["0"] * n for _ in range(w)]
    return zero, zero, zero


def cmd_roborta(args) -> int:
    q, lat, fr = _terrain(args)
    src = roborta_source(args.width, args.length, q, lat, fr, adversarial_terrain=not args.controllable)
    if args.out:
        Path(args.out).write_text(src, encoding="utf-8")
    else:
        sys.stdout.write(src)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polygame", description="Solve and simulate polytopal stochastic games.")
    parser.add_argument("--version", action="version", version=f"polygame {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt=("json", "text")):
        p.add_argument("input", help="model file (.psg source or .json game)")
        p.add_argument("--format", choices=fmt, default=fmt[0])
        p.add_argument("--out", help="write output to this file instead of stdout")

    def objective(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--reach", metavar="LABELSET",
                       help="comma-separated labels, state ids (.json) or predicates (.psg)")
        g.add_argument("--total", action="store_true")
        g.add_argument("--discounted", metavar="GAMMA")
        g.add_argument("--average", action="store_true")
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--max-iters", type=int, default=10**6)
        p.add_argument("--sweep", choices=("jacobi", "gauss-seidel"), default="jacobi")

    p = sub.add_parser("check", help="validate a model")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("vertices", help="list polytope vertices per state")
    common(p)
    p.set_defaults(func=cmd_vertices)

    p = sub.add_parser("solve", help="values and optimal strategies")
    common(p)
    objective(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo under the solved optimal strategies")
    common(p)
    objective(p)
    p.add_argument("--runs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--csv", metavar="PATH", help="also write per-run payoffs as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="brute-force sup-inf / inf-sup values")
    common(p)
    objective(p)
    p.add_argument("--limit", type=int, default=10**6, help="maximum number of strategy pairs")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("export", help="write the extreme game as JSON or Graphviz")
    common(p, fmt=("json", "dot"))
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("roborta", help="emit the grid benchmark as .psg source")
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--terrain", metavar="JSON", help='file with {"Q": [[..]], "L": [[..]], "F": [[..]]}, indexed [x][y]')
    p.add_argument("--random-terrain", type=int, metavar="SEED", help="draw terrain from a seeded generator")
    p.add_argument("--controllable", action="store_true",
                   help="let Roborta resolve her own terrain uncertainty")
    p.add_argument("--out")
    p.set_defaults(func=cmd_roborta)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_USAGE)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_USAGE)
    except FileNotFoundError as exc:
        return _fail("NoInput", f"cannot read {exc.args[0] if exc.args else exc}", EXIT_USAGE)
    except PreconditionFailed as exc:
        return _fail(exc.code, str(exc), EXIT_PRECONDITION, condition=exc.condition)
    except NotConverged as exc:
        return _fail(exc.code, str(exc), EXIT_NOT_CONVERGED, residual=format_float(exc.result.residual))
    except TooManyStrategies as exc:
        return _fail(exc.code, str(exc), EXIT_PRECONDITION)
    except _InvalidModel as exc:
        return _fail(exc.code, str(exc), EXIT_MODEL, diagnostics=exc.diag.to_json())
    except DslError as exc:
        return _fail(exc.code, str(exc), EXIT_MODEL, line=exc.line, column=exc.column)
    except PolygameError as exc:
        return _fail(exc.code, str(exc), EXIT_MODEL)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
