"""Command-line driver for the whole pipeline.

Subcommands: `check` (parse + typecheck), `translate` (to the dependent
object calculus, text or JSON), `run-dot` (translate and evaluate),
`erase` (to the nominal target language), `run-fjd` (evaluate a target
program), and `subtype` (query the subtype checker or the declarative
oracle in a table's context).

Exit codes: 0 success, 1 type errors (diagnostics printed), 2 usage or
IO problems, 3 a run-* evaluation got stuck or failed a cast.  Output is
byte-identical across identical invocations.
"""

import json
import sys
from typing import Optional

import click

from . import dot, erasure, fjd
from .parser import parse_program, parse_type_text
from .syntax import Level, EMPTY_ENV, SourceError
from .subtyping import DEFAULT_FUEL, algo_subtype, decl_subtype_oracle
from .translate import translate_program
from .typecheck import TypedProgram, check_program

_LEVELS = click.Choice([lv.name for lv in Level], case_sensitive=False)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as err:
        raise click.FileError(path, hint=str(err))


def _check_file(path: str, level: Optional[str]) -> TypedProgram:
    """Parse and typecheck, exiting 1 with printed diagnostics on errors."""
    lv = Level[level.upper()] if level else None
    try:
        return check_program(parse_program(_read(path), path, lv))
    except SourceError as err:
        for d in err.diags:
            click.echo(d.render())
        sys.exit(1)


@click.group()
def main() -> None:
    """Tools for the layered class calculi and their compilation targets."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=_LEVELS, default=None, help="Override the file's level pragma.")
def check(file: str, level: Optional[str]) -> None:
    """Typecheck FILE and print diagnostics (exit 0 iff well-typed)."""
    tp = _check_file(file, level)
    click.echo(f"ok: main : {tp.main_type}")


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=_LEVELS, default=None, help="Override the file's level pragma.")
@click.option("--emit", type=click.Choice(["dot", "dot-json"]), default="dot", help="Output format.")
def translate(file: str, level: Optional[str], emit: str) -> None:
    """Translate FILE to a dependent-object-calculus term."""
    tp = _check_file(file, level)
    term = translate_program(tp)
    if emit == "dot":
        click.echo(dot.show_term(term))
    else:
        click.echo(json.dumps(_term_json(term), indent=2))


@main.command("run-dot")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=_LEVELS, default=None, help="Override the file's level pragma.")
@click.option("--max-steps", type=int, default=100_000, show_default=True, help="Evaluation fuel.")
@click.option("--trace", is_flag=True, help="Print every intermediate term.")
def run_dot(file: str, level: Optional[str], max_steps: int, trace: bool) -> None:
    """Translate FILE and evaluate the resulting term."""
    tp = _check_file(file, level)
    term = translate_program(tp)
    steps = [0]

    def on_step(n: int, t: dot.DotTerm) -> None:
        steps[0] = n
        if trace:
            click.echo(f"  step {n}: {dot.show_term(t)}")

    outcome = dot.evaluate(term, max_steps=max_steps, on_step=on_step)
    if isinstance(outcome, dot.Value):
        click.echo(f"value: {outcome.var} after {steps[0]} step(s)")
    elif isinstance(outcome, dot.OutOfFuel):
        click.echo(f"out of fuel after {max_steps} step(s)")
    else:
        click.echo(f"stuck: {outcome.reason}")
        sys.exit(3)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=_LEVELS, default=None, help="Override the file's level pragma.")
@click.option("--policy", type=click.Choice(list(erasure.POLICIES)), default="scala3",
              show_default=True, help="Intersection-erasure policy.")
@click.option("--dedup-bridges", is_flag=True, help="Drop bridges identical to inherited ones.")
def erase(file: str, level: Optional[str], policy: str, dedup_bridges: bool) -> None:
    """Erase FILE to the nominal target language."""
    tp = _check_file(file, level)
    try:
        program = erasure.erase_program(tp, policy=policy, dedup_bridges=dedup_bridges)
    except SourceError as err:
        for d in err.diags:
            click.echo(d.render())
        sys.exit(1)
    click.echo(fjd.show_program(program), nl=False)


@main.command("run-fjd")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--max-steps", type=int, default=100_000, show_default=True, help="Evaluation fuel.")
@click.option("--trace", is_flag=True, help="Print every intermediate term.")
def run_fjd(file: str, max_steps: int, trace: bool) -> None:
    """Typecheck and evaluate a target-language FILE."""
    try:
        program = fjd.parse_fjd(_read(file), file)
        table = fjd.fjd_typecheck(program, file)
    except SourceError as err:
        for d in err.diags:
            click.echo(d.render())
        sys.exit(1)

    def on_step(n: int, t: fjd.FjdExpr) -> None:
        if trace:
            click.echo(f"  step {n}: {fjd.show_expr(t)}")

    outcome = fjd.fjd_evaluate(table, max_steps=max_steps, on_step=on_step)
    if isinstance(outcome, fjd.Value):
        click.echo(f"value: {fjd.show_expr(outcome.expr)}")
    elif isinstance(outcome, fjd.OutOfFuel):
        click.echo(f"out of fuel after {max_steps} step(s)")
    elif isinstance(outcome, fjd.ClassCastFailure):
        click.echo(f"class cast failure: ({outcome.target}) applied to new {outcome.actual}")
        sys.exit(3)
    else:
        click.echo(f"stuck: {outcome.reason}")
        sys.exit(3)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.argument("s")
@click.argument("t")
@click.option("--level", type=_LEVELS, default=None, help="Override the file's level pragma.")
@click.option("--declarative", is_flag=True,
              help="Search the declarative rules instead of the subtype checker.")
@click.option("--fuel", type=int, default=None,
              help="Work budget (checker) or derivation-size bound (oracle).")
@click.option("--trace", is_flag=True, help="Print the derivation found.")
def subtype(file: str, s: str, t: str, level: Optional[str],
            declarative: bool, fuel: Optional[int], trace: bool) -> None:
    """Ask whether S <: T holds in FILE's class table (closed types)."""
    tp = _check_file(file, level)
    lv = tp.level
    try:
        ts = parse_type_text(s, lv, "<S>")
        tt = parse_type_text(t, lv, "<T>")
    except SourceError as err:
        for d in err.diags:
            click.echo(d.render())
        sys.exit(1)
    if declarative:
        out = decl_subtype_oracle(tp.lookup, EMPTY_ENV, ts, tt,
                                  fuel=fuel if fuel is not None else 30, trace=trace)
        if trace and out.trace:
            for line in out.trace:
                click.echo(line)
        if out.yes:
            click.echo(f"Yes ({out.applications} applications)")
        else:
            click.echo("Unknown")
            sys.exit(1)
        return
    result = algo_subtype(tp.lookup, EMPTY_ENV, ts, tt,
                          fuel=fuel if fuel is not None else DEFAULT_FUEL, trace=trace)
    if trace and result.trace:
        for line in result.trace:
            click.echo(line)
    if result.holds:
        click.echo(f"holds ({result.rule})")
    else:
        click.echo("does not hold" + (" (fuel exhausted)" if result.fuel_exhausted else ""))
        sys.exit(1)


# ---------------------------------------------------------------------------
# JSON encoding of target-calculus terms (--emit dot-json)
# ---------------------------------------------------------------------------

def _type_json(t: dot.DotType) -> object:
    if isinstance(t, dot.Top):
        return {"type": "top"}
    if isinstance(t, dot.Bot):
        return {"type": "bot"}
    if isinstance(t, dot.TypeMember):
        return {"type": "type-member", "label": t.label,
                "lower": _type_json(t.lower), "upper": _type_json(t.upper)}
    if isinstance(t, dot.MethodMember):
        return {"type": "method-member", "name": t.name,
                "params": [{"name": p.name, "type": _type_json(p.type)} for p in t.params],
                "result": _type_json(t.result)}
    if isinstance(t, dot.Sel):
        return {"type": "sel", "var": t.var, "label": t.label}
    if isinstance(t, dot.Rec):
        return {"type": "rec", "self": t.self_var, "body": _type_json(t.body)}
    if isinstance(t, (dot.And, dot.Or)):
        kind = "and" if isinstance(t, dot.And) else "or"
        return {"type": kind, "left": _type_json(t.left), "right": _type_json(t.right)}
    raise TypeError(f"not a target type: {t!r}")


def _decl_json(d: dot.DotDecl) -> object:
    if isinstance(d, dot.TypeTag):
        return {"decl": "type", "label": d.label, "type": _type_json(d.type)}
    if isinstance(d, dot.MethodDef):
        return {
            "decl": "method",
            "name": d.name,
            "params": [
                {"name": p.name, **({"type": _type_json(p.type)} if p.type is not None else {})}
                for p in d.params
            ],
            **({"result": _type_json(d.result)} if d.result is not None else {}),
            "body": _term_json(d.body),
        }
    raise TypeError(f"not a declaration: {d!r}")


def _term_json(t: dot.DotTerm) -> object:
    if isinstance(t, dot.Var):
        return {"term": "var", "name": t.name}
    if isinstance(t, dot.Obj):
        return {"term": "obj", "self": t.self_var, "decls": [_decl_json(d) for d in t.decls]}
    if isinstance(t, dot.Invoke):
        return {"term": "invoke", "receiver": _term_json(t.receiver), "method": t.method,
                "args": [_term_json(a) for a in t.args]}
    if isinstance(t, dot.Let):
        return {"term": "let", "var": t.var, "bound": _term_json(t.bound),
                "body": _term_json(t.body)}
    raise TypeError(f"not a target term: {t!r}")


if __name__ == "__main__":
    main()
