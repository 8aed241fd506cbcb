"""Featherweight Java with interfaces, default methods, and casts.

The erasure target: a monomorphic class language with nominal subtyping.
Proper classes extend one class (``Object`` by default) and implement
interfaces; interfaces extend interfaces and may carry both abstract
methods and concrete (default) bodies.  Overrides must repeat the
overridden signature exactly, casts ``(C)e`` always typecheck but may
fail at evaluation time, and constructors are canonical: one parameter
per field along the chain, ``super`` on the inherited prefix, one
assignment per own field.

Typing and reduction here are standard Featherweight-Java conventions.
Default-method dispatch is documented behavior: a concrete body on the
class chain wins; otherwise interfaces are searched in preorder over
declaration order (most-derived class first) and the first concrete
body found is used.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .syntax import Diagnostic, NO_POS, Pos, SourceError

OBJECT = "Object"


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class FjdExpr:
    """Base class for target-language expressions."""

    pos: Pos

    def __str__(self) -> str:
        return show_expr(self)


@dataclass(frozen=True)
class FVar(FjdExpr):
    name: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class FField(FjdExpr):
    receiver: FjdExpr
    fieldname: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class FInvoke(FjdExpr):
    receiver: FjdExpr
    method: str
    args: tuple[FjdExpr, ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class FNew(FjdExpr):
    cls: str
    args: tuple[FjdExpr, ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class FCast(FjdExpr):
    cls: str
    expr: FjdExpr
    pos: Pos = field(default=NO_POS, compare=False)


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FjdParam:
    """A typed name: field declaration, method parameter, ctor parameter."""

    type: str
    name: str


@dataclass(frozen=True)
class FjdMethod:
    result: str
    name: str
    params: tuple[FjdParam, ...]
    body: Optional[FjdExpr]  # None = abstract (interfaces only)
    pos: Pos = field(default=NO_POS, compare=False)

    @property
    def signature(self) -> tuple[tuple[str, ...], str]:
        return (tuple(p.type for p in self.params), self.result)


@dataclass(frozen=True)
class FjdClass:
    name: str
    parent: str  # "Object" when the extends clause names nothing else
    interfaces: tuple[str, ...]
    fields: tuple[FjdParam, ...]  # own fields only; inherited come first
    methods: tuple[FjdMethod, ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class FjdInterface:
    name: str
    parents: tuple[str, ...]
    methods: tuple[FjdMethod, ...]
    pos: Pos = field(default=NO_POS, compare=False)


FjdDecl = Union[FjdClass, FjdInterface]


@dataclass(frozen=True)
class FjdProgram:
    decls: tuple[FjdDecl, ...]
    main: FjdExpr


# ---------------------------------------------------------------------------
# Table: lookup, subtyping, member search
# ---------------------------------------------------------------------------

class FjdTable:
    """Name-indexed declarations with the derived hierarchy relations.

    Built by fjd_typecheck after the hierarchy has been validated; the
    lookup helpers assume resolvable, acyclic declarations.
    """

    def __init__(self, program: FjdProgram, file: str = "<fjd>"):
        self.program = program
        self.file = file
        self.decls: dict[str, FjdDecl] = {}
        for d in program.decls:
            self.decls[d.name] = d
        self._supers: dict[str, frozenset[str]] = {}
        self._fields: dict[str, tuple[FjdParam, ...]] = {}

    def is_class(self, name: str) -> bool:
        return name == OBJECT or isinstance(self.decls.get(name), FjdClass)

    def is_interface(self, name: str) -> bool:
        return isinstance(self.decls.get(name), FjdInterface)

    def direct_supers(self, name: str) -> tuple[str, ...]:
        d = self.decls.get(name)
        if isinstance(d, FjdClass):
            return (d.parent,) + d.interfaces
        if isinstance(d, FjdInterface):
            return d.parents
        return ()

    def supers(self, name: str) -> frozenset[str]:
        """All supertype names of `name`, including itself and Object."""
        cached = self._supers.get(name)
        if cached is not None:
            return cached
        acc = {name, OBJECT}
        for s in self.direct_supers(name):
            acc |= self.supers(s)
        result = frozenset(acc)
        self._supers[name] = result
        return result

    def subtype(self, s: str, t: str) -> bool:
        return t == OBJECT or s == t or t in self.supers(s)

    def class_chain(self, name: str) -> list[str]:
        """`name` and its proper-class ancestors, Object excluded."""
        chain = []
        cur = name
        while cur != OBJECT:
            chain.append(cur)
            d = self.decls[cur]
            assert isinstance(d, FjdClass)
            cur = d.parent
        return chain

    def fields(self, name: str) -> tuple[FjdParam, ...]:
        """All fields of class `name`, inherited prefix first."""
        if name == OBJECT:
            return ()
        cached = self._fields.get(name)
        if cached is not None:
            return cached
        d = self.decls[name]
        assert isinstance(d, FjdClass)
        result = self.fields(d.parent) + d.fields
        self._fields[name] = result
        return result

    def _interfaces_preorder(self, name: str) -> list[str]:
        """Interfaces reachable from `name` in declaration-order preorder:
        most-derived class first, each interface before its parents."""
        seen: set[str] = set()
        order: list[str] = []

        def visit(iface: str) -> None:
            if iface in seen:
                return
            seen.add(iface)
            order.append(iface)
            d = self.decls[iface]
            assert isinstance(d, FjdInterface)
            for p in d.parents:
                visit(p)

        roots: list[str]
        if self.is_class(name):
            roots = []
            for k in self.class_chain(name):
                d = self.decls[k]
                assert isinstance(d, FjdClass)
                roots.extend(d.interfaces)
        else:
            roots = [name]
        for r in roots:
            visit(r)
        return order

    def mtype(self, m: str, name: str) -> Optional[FjdMethod]:
        """Any declaration of m visible from `name` (signatures of every
        declaration agree once override checking has passed)."""
        if name == OBJECT:
            return None
        chain = self.class_chain(name) if self.is_class(name) else []
        for k in chain:
            d = self.decls[k]
            found = _own_method(d, m)
            if found is not None:
                return found
        for i in self._interfaces_preorder(name):
            found = _own_method(self.decls[i], m)
            if found is not None:
                return found
        return None

    def resolve(self, m: str, name: str) -> Optional[FjdMethod]:
        """The concrete body dispatch finds for m on an instance of class
        `name`: the class chain first, then the first-declared interface."""
        for k in self.class_chain(name):
            found = _own_method(self.decls[k], m)
            if found is not None and found.body is not None:
                return found
        for i in self._interfaces_preorder(name):
            found = _own_method(self.decls[i], m)
            if found is not None and found.body is not None:
                return found
        return None


def _own_method(d: FjdDecl, m: str) -> Optional[FjdMethod]:
    for method in d.methods:
        if method.name == m:
            return method
    return None


# ---------------------------------------------------------------------------
# Typechecking
# ---------------------------------------------------------------------------

def fjd_typecheck(program: FjdProgram, file: str = "<fjd>") -> FjdTable:
    """Validate the whole program; returns the table or raises SourceError.

    Checks: unique names, resolvable references of the right kind, an
    acyclic hierarchy, unique fields along chains, concrete class methods,
    exact override signatures, instantiability (every abstract method
    reachable from a class resolves to a concrete body), no defaults from
    two unrelated interfaces, and well-typed bodies and main expression.
    """
    checker = _FjdChecker(program, file)
    checker.run()
    return checker.table


class _FjdChecker:
    def __init__(self, program: FjdProgram, file: str):
        self.program = program
        self.file = file
        self.table = FjdTable(program, file)
        self.diags: list[Diagnostic] = []

    def error(self, rule: str, message: str, pos: Pos = NO_POS) -> None:
        self.diags.append(Diagnostic(rule, message, pos, self.file))

    def _flush(self) -> None:
        if self.diags:
            raise SourceError(self.diags)

    def run(self) -> None:
        self.check_hierarchy()
        self._flush()  # later phases assume a sane hierarchy
        for d in self.program.decls:
            self.check_decl(d)
        self.type_expr({}, self.program.main)
        self._flush()

    # -- hierarchy ---------------------------------------------------------

    def check_hierarchy(self) -> None:
        seen: set[str] = set()
        for d in self.program.decls:
            if d.name == OBJECT:
                self.error("FJD-DUP", "Object cannot be redeclared", d.pos)
            elif d.name in seen:
                self.error("FJD-DUP", f"duplicate declaration of {d.name!r}", d.pos)
            seen.add(d.name)
        t = self.table
        for d in self.program.decls:
            if isinstance(d, FjdClass):
                if not t.is_class(d.parent):
                    self.error("FJD-KIND", f"class {d.name!r} must extend a class, got {d.parent!r}", d.pos)
                refs = d.interfaces
            else:
                refs = d.parents
            for i in refs:
                if not t.is_interface(i):
                    self.error("FJD-KIND", f"{d.name!r} expects an interface, got {i!r}", d.pos)
        if self.diags:
            return  # cycle walk needs resolvable references
        state: dict[str, int] = {}  # 1 = on stack, 2 = done

        def walk(name: str) -> None:
            if name == OBJECT or state.get(name) == 2:
                return
            if state.get(name) == 1:
                self.error("FJD-CYCLE", f"inheritance cycle through {name!r}", self.table.decls[name].pos)
                state[name] = 2
                return
            state[name] = 1
            for s in self.table.direct_supers(name):
                walk(s)
            state[name] = 2

        for d in self.program.decls:
            walk(d.name)

    # -- declarations ------------------------------------------------------

    def check_decl(self, d: FjdDecl) -> None:
        t = self.table
        is_class = isinstance(d, FjdClass)
        if is_class:
            inherited = {f.name for f in t.fields(d.parent)}
            own: set[str] = set()
            for f in d.fields:
                if f.name in own or f.name in inherited:
                    self.error("FJD-DUP", f"duplicate field {f.name!r} in {d.name!r}", d.pos)
                own.add(f.name)
                self.check_type_name(f.type, d.pos)
        mnames: set[str] = set()
        for m in d.methods:
            if m.name in mnames:
                self.error("FJD-DUP", f"duplicate method {m.name!r} in {d.name!r}", m.pos)
            mnames.add(m.name)
            self.check_method(d, m)
        if is_class:
            self.check_instantiable(d)

    def check_method(self, d: FjdDecl, m: FjdMethod) -> None:
        if isinstance(d, FjdClass) and m.body is None:
            self.error("FJD-BODY", f"class method {d.name}.{m.name} must have a body", m.pos)
        names: set[str] = set()
        for p in m.params:
            if p.name in names or p.name == "this":
                self.error("FJD-DUP", f"duplicate parameter {p.name!r} in {d.name}.{m.name}", m.pos)
            names.add(p.name)
            self.check_type_name(p.type, m.pos)
        self.check_type_name(m.result, m.pos)
        # Overrides must repeat the overridden signature exactly.
        for s in sorted(self.table.supers(d.name) - {d.name, OBJECT}):
            above = _own_method(self.table.decls[s], m.name)
            if above is not None and above.signature != m.signature:
                self.error(
                    "FJD-OVERRIDE",
                    f"{d.name}.{m.name} has type ({', '.join(p.type for p in m.params)}): {m.result}"
                    f" but overrides {s}.{m.name} of type"
                    f" ({', '.join(p.type for p in above.params)}): {above.result}",
                    m.pos,
                )
        if m.body is not None:
            env = {"this": d.name}
            for p in m.params:
                env[p.name] = p.type
            got = self.type_expr(env, m.body)
            if got is not None and not self.table.subtype(got, m.result):
                self.error("FJD-TYPE", f"body of {d.name}.{m.name} has type {got}, expected {m.result}", m.pos)

    def check_instantiable(self, d: FjdClass) -> None:
        t = self.table
        reachable = sorted(t.supers(d.name) - {OBJECT})
        declared: set[str] = set()
        for s in reachable:
            declared |= {m.name for m in t.decls[s].methods}
        for m in sorted(declared):
            if t.resolve(m, d.name) is None:
                self.error("FJD-ABSTRACT", f"class {d.name!r} has no implementation of {m!r}", d.pos)
                continue
            self.check_defaults(d, m)

    def check_defaults(self, d: FjdClass, m: str) -> None:
        # A concrete body on the class chain settles m; otherwise defaults
        # from two unrelated interfaces are ambiguous.
        t = self.table
        for k in t.class_chain(d.name):
            found = _own_method(t.decls[k], m)
            if found is not None and found.body is not None:
                return
        providers = [
            i for i in t._interfaces_preorder(d.name)
            if (mm := _own_method(t.decls[i], m)) is not None and mm.body is not None
        ]
        maximal = [
            i for i in providers
            if not any(j != i and t.subtype(j, i) for j in providers)
        ]
        if len(maximal) > 1:
            self.error(
                "FJD-DIAMOND",
                f"class {d.name!r} inherits default {m!r} from unrelated interfaces "
                f"{' and '.join(sorted(maximal))}",
                d.pos,
            )

    def check_type_name(self, name: str, pos: Pos) -> None:
        if name != OBJECT and name not in self.table.decls:
            self.error("FJD-UNKNOWN", f"unknown type {name!r}", pos)

    # -- expressions -------------------------------------------------------

    def type_expr(self, env: dict[str, str], e: FjdExpr) -> Optional[str]:
        """The type of e, or None after reporting a diagnostic."""
        t = self.table
        if isinstance(e, FVar):
            if e.name in env:
                return env[e.name]
            self.error("FJD-VAR", f"unbound variable {e.name!r}", e.pos)
            return None
        if isinstance(e, FField):
            r = self.type_expr(env, e.receiver)
            if r is None:
                return None
            if not t.is_class(r):
                self.error("FJD-FIELD", f"field access needs a class receiver, got {r}", e.pos)
                return None
            for f in t.fields(r):
                if f.name == e.fieldname:
                    return f.type
            self.error("FJD-FIELD", f"no field {e.fieldname!r} on {r}", e.pos)
            return None
        if isinstance(e, FInvoke):
            r = self.type_expr(env, e.receiver)
            args = [self.type_expr(env, a) for a in e.args]
            if r is None:
                return None
            sig = t.mtype(e.method, r) if r != OBJECT else None
            if sig is None:
                self.error("FJD-METHOD", f"no method {e.method!r} on {r}", e.pos)
                return None
            return self.check_args(f"{r}.{e.method}", sig.params, args, e.pos, sig.result)
        if isinstance(e, FNew):
            args = [self.type_expr(env, a) for a in e.args]
            if e.cls != OBJECT and not isinstance(t.decls.get(e.cls), FjdClass):
                rule = "FJD-KIND" if e.cls in t.decls else "FJD-UNKNOWN"
                self.error(rule, f"cannot instantiate {e.cls!r}", e.pos)
                return None
            return self.check_args(f"new {e.cls}", t.fields(e.cls), args, e.pos, e.cls)
        if isinstance(e, FCast):
            self.check_type_name(e.cls, e.pos)
            self.type_expr(env, e.expr)
            return e.cls  # casts always typecheck to the target
        raise TypeError(f"not an FJD expression: {e!r}")

    def check_args(
        self,
        what: str,
        params: tuple[FjdParam, ...],
        args: list[Optional[str]],
        pos: Pos,
        result: str,
    ) -> Optional[str]:
        if len(params) != len(args):
            self.error("FJD-ARITY", f"{what} expects {len(params)} argument(s), got {len(args)}", pos)
            return None
        ok = True
        for p, a in zip(params, args):
            if a is None:
                ok = False
            elif not self.table.subtype(a, p.type):
                self.error("FJD-TYPE", f"{what}: argument {p.name!r} has type {a}, expected {p.type}", pos)
                ok = False
        return result if ok else None


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class Value:
    expr: FjdExpr  # new C(values)

    @property
    def cls(self) -> str:
        assert isinstance(self.expr, FNew)
        return self.expr.cls


@dataclass
class ClassCastFailure:
    expr: FjdExpr  # the failing cast, receiver already a value
    target: str
    actual: str


@dataclass
class Stuck:
    expr: FjdExpr
    reason: str


@dataclass
class OutOfFuel:
    expr: FjdExpr


FjdOutcome = Union[Value, ClassCastFailure, Stuck, OutOfFuel]


class _FStuck(Exception):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


class _FCastFailure(Exception):
    def __init__(self, at: FCast, actual: str) -> None:
        super().__init__(f"({at.cls}) applied to new {actual}")
        self.at = at
        self.actual = actual


def is_value(e: FjdExpr) -> bool:
    return isinstance(e, FNew) and all(is_value(a) for a in e.args)


def subst_fjd(mapping: dict[str, FjdExpr], e: FjdExpr) -> FjdExpr:
    """Replace variables per mapping; expressions bind nothing, so no
    capture is possible."""
    if isinstance(e, FVar):
        return mapping.get(e.name, e)
    if isinstance(e, FField):
        return FField(subst_fjd(mapping, e.receiver), e.fieldname, e.pos)
    if isinstance(e, FInvoke):
        return FInvoke(
            subst_fjd(mapping, e.receiver),
            e.method,
            tuple(subst_fjd(mapping, a) for a in e.args),
            e.pos,
        )
    if isinstance(e, FNew):
        return FNew(e.cls, tuple(subst_fjd(mapping, a) for a in e.args), e.pos)
    if isinstance(e, FCast):
        return FCast(e.cls, subst_fjd(mapping, e.expr), e.pos)
    raise TypeError(f"not an FJD expression: {e!r}")


def fjd_step(table: FjdTable, e: FjdExpr) -> FjdExpr:
    """One leftmost call-by-value step."""
    if isinstance(e, FField):
        if not is_value(e.receiver):
            return FField(fjd_step(table, e.receiver), e.fieldname, e.pos)
        assert isinstance(e.receiver, FNew)
        for f, a in zip(table.fields(e.receiver.cls), e.receiver.args):
            if f.name == e.fieldname:
                return a
        raise _FStuck(f"no field {e.fieldname!r} on new {e.receiver.cls}")
    if isinstance(e, FInvoke):
        if not is_value(e.receiver):
            return FInvoke(fjd_step(table, e.receiver), e.method, e.args, e.pos)
        for i, a in enumerate(e.args):
            if not is_value(a):
                stepped = e.args[:i] + (fjd_step(table, a),) + e.args[i + 1 :]
                return FInvoke(e.receiver, e.method, stepped, e.pos)
        assert isinstance(e.receiver, FNew)
        m = table.resolve(e.method, e.receiver.cls)
        if m is None or m.body is None:
            raise _FStuck(f"no concrete method {e.method!r} on new {e.receiver.cls}")
        if len(m.params) != len(e.args):
            raise _FStuck(f"arity mismatch calling {e.method!r}")
        mapping: dict[str, FjdExpr] = {"this": e.receiver}
        for p, a in zip(m.params, e.args):
            mapping[p.name] = a
        return subst_fjd(mapping, m.body)
    if isinstance(e, FNew):
        for i, a in enumerate(e.args):
            if not is_value(a):
                stepped = e.args[:i] + (fjd_step(table, a),) + e.args[i + 1 :]
                return FNew(e.cls, stepped, e.pos)
        raise _FStuck("cannot step a value")
    if isinstance(e, FCast):
        if not is_value(e.expr):
            return FCast(e.cls, fjd_step(table, e.expr), e.pos)
        assert isinstance(e.expr, FNew)
        if table.subtype(e.expr.cls, e.cls):
            return e.expr
        raise _FCastFailure(e, e.expr.cls)
    if isinstance(e, FVar):
        raise _FStuck(f"unbound variable {e.name!r}")
    raise _FStuck(f"cannot step {e!r}")


def fjd_evaluate(
    table: FjdTable,
    e: Optional[FjdExpr] = None,
    max_steps: int = 100_000,
    on_step: Optional[Callable[[int, FjdExpr], None]] = None,
) -> FjdOutcome:
    """Iterate fjd_step up to max_steps; a failed cast is its own outcome,
    never Stuck, and running out of fuel is never Stuck either."""
    t = table.program.main if e is None else e
    steps = 0
    while True:
        if is_value(t):
            return Value(t)
        if steps >= max_steps:
            return OutOfFuel(t)
        try:
            t = fjd_step(table, t)
        except _FStuck as err:
            return Stuck(t, err.reason)
        except _FCastFailure as err:
            return ClassCastFailure(err.at, err.at.cls, err.actual)
        steps += 1
        if on_step is not None:
            on_step(steps, t)


# ---------------------------------------------------------------------------
# Concrete syntax: printing
# ---------------------------------------------------------------------------

def show_expr(e: FjdExpr) -> str:
    if isinstance(e, FVar):
        return e.name
    if isinstance(e, FField):
        return f"{_show_receiver(e.receiver)}.{e.fieldname}"
    if isinstance(e, FInvoke):
        args = ", ".join(show_expr(a) for a in e.args)
        return f"{_show_receiver(e.receiver)}.{e.method}({args})"
    if isinstance(e, FNew):
        args = ", ".join(show_expr(a) for a in e.args)
        return f"new {e.cls}({args})"
    if isinstance(e, FCast):
        return f"({e.cls}){_show_receiver(e.expr)}"
    raise TypeError(f"not an FJD expression: {e!r}")


def _show_receiver(e: FjdExpr) -> str:
    # Casts bind looser than selection, so a cast receiver needs parens.
    if isinstance(e, FCast):
        return f"({show_expr(e)})"
    return show_expr(e)


def _show_method(m: FjdMethod) -> str:
    params = ", ".join(f"{p.type} {p.name}" for p in m.params)
    head = f"{m.result} {m.name}({params})"
    if m.body is None:
        return f"  {head};"
    return f"  {head} {{ return {show_expr(m.body)}; }}"


def show_program(program: FjdProgram) -> str:
    """Canonical text form; parse_fjd . show_program is the identity on
    tables (constructors are regenerated in canonical form)."""
    table = FjdTable(program)
    blocks = []
    for d in program.decls:
        lines = []
        if isinstance(d, FjdClass):
            head = ", ".join((d.parent,) + d.interfaces)
            lines.append(f"class {d.name} < {head} {{")
            for f in d.fields:
                lines.append(f"  {f.type} {f.name};")
            all_fields = table.fields(d.name)
            inherited = all_fields[: len(all_fields) - len(d.fields)]
            params = ", ".join(f"{p.type} {p.name}" for p in all_fields)
            stmts = [f"super({', '.join(p.name for p in inherited)});"]
            stmts += [f"this.{p.name} = {p.name};" for p in d.fields]
            lines.append(f"  {d.name}({params}) {{ {' '.join(stmts)} }}")
        else:
            head = f" < {', '.join(d.parents)}" if d.parents else ""
            lines.append(f"interface {d.name}{head} {{")
        for m in d.methods:
            lines.append(_show_method(m))
        lines.append("}")
        blocks.append("\n".join(lines))
    blocks.append(f"main = {show_expr(program.main)}")
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# Concrete syntax: parsing
# ---------------------------------------------------------------------------

_PUNCT = ("(", ")", "{", "}", ",", ";", ".", "<", "=")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "ident" | "punct" | "eof"
    text: str
    pos: Pos


def _tokenize_fjd(text: str, file: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        pos = Pos(line, col)
        if c.isalpha() or c in "_$":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_$"):
                j += 1
            toks.append(_Tok("ident", text[i:j], pos))
            col += j - i
            i = j
            continue
        if c in _PUNCT:
            toks.append(_Tok("punct", c, pos))
            i += 1
            col += 1
            continue
        raise SourceError.single("FJD-PARSE", f"unexpected character {c!r}", pos, file)
    toks.append(_Tok("eof", "", Pos(line, col)))
    return toks


class _FjdParser:
    def __init__(self, text: str, file: str):
        self.file = file
        self.toks = _tokenize_fjd(text, file)
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.peek()
        self.i += 1
        return t

    def fail(self, message: str, pos: Optional[Pos] = None) -> SourceError:
        return SourceError.single("FJD-PARSE", message, pos or self.peek().pos, self.file)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            raise self.fail(f"expected {text!r}, got {t.text!r}")
        return self.next()

    def ident(self) -> _Tok:
        t = self.peek()
        if t.kind != "ident":
            raise self.fail(f"expected a name, got {t.text!r}")
        return self.next()

    def at(self, text: str, ahead: int = 0) -> bool:
        return self.peek(ahead).text == text

    # -- declarations ------------------------------------------------------

    def program(self) -> FjdProgram:
        decls: list[FjdDecl] = []
        ctors: list[tuple[FjdClass, "_RawCtor"]] = []
        while not self.at("main"):
            if self.at("class"):
                decls.append(self.class_decl(ctors))
            elif self.at("interface"):
                decls.append(self.interface_decl())
            else:
                raise self.fail("expected 'class', 'interface', or 'main'")
        self.expect("main")
        self.expect("=")
        main = self.expr()
        if self.peek().kind != "eof":
            raise self.fail("trailing input after main expression")
        program = FjdProgram(tuple(decls), main)
        _check_ctors(program, ctors, self.file)
        return program

    def name_list(self) -> list[str]:
        names = [self.ident().text]
        while self.at(","):
            self.next()
            names.append(self.ident().text)
        return names

    def class_decl(self, ctors: list) -> FjdClass:
        pos = self.expect("class").pos
        name = self.ident().text
        parent, interfaces = OBJECT, []
        if self.at("<"):
            self.next()
            supers = self.name_list()
            parent, interfaces = supers[0], supers[1:]
        self.expect("{")
        fields: list[FjdParam] = []
        methods: list[FjdMethod] = []
        ctor: Optional[_RawCtor] = None
        while not self.at("}"):
            if self.peek().kind == "ident" and self.at("(", 1):
                if self.peek().text != name:
                    raise self.fail(f"constructor must be named {name!r}")
                if ctor is not None:
                    raise self.fail("duplicate constructor")
                ctor = self.ctor()
            elif self.at(";", 2):
                ftype = self.ident().text
                fname = self.ident().text
                self.expect(";")
                fields.append(FjdParam(ftype, fname))
            else:
                methods.append(self.method())
        self.expect("}")
        decl = FjdClass(name, parent, tuple(interfaces), tuple(fields), tuple(methods), pos)
        if ctor is not None:
            ctors.append((decl, ctor))
        return decl

    def interface_decl(self) -> FjdInterface:
        pos = self.expect("interface").pos
        name = self.ident().text
        parents = []
        if self.at("<"):
            self.next()
            parents = self.name_list()
        self.expect("{")
        methods = []
        while not self.at("}"):
            methods.append(self.method())
        self.expect("}")
        return FjdInterface(name, tuple(parents), tuple(methods), pos)

    def params(self) -> list[FjdParam]:
        self.expect("(")
        out = []
        while not self.at(")"):
            if out:
                self.expect(",")
            ptype = self.ident().text
            pname = self.ident().text
            out.append(FjdParam(ptype, pname))
        self.expect(")")
        return out

    def method(self) -> FjdMethod:
        result = self.ident()
        name = self.ident().text
        params = tuple(self.params())
        if self.at(";"):
            self.next()
            return FjdMethod(result.text, name, params, None, result.pos)
        self.expect("{")
        self.expect("return")
        body = self.expr()
        self.expect(";")
        self.expect("}")
        return FjdMethod(result.text, name, params, body, result.pos)

    def ctor(self) -> "_RawCtor":
        pos = self.ident().pos  # class name, validated by the caller
        params = self.params()
        self.expect("{")
        self.expect("super")
        self.expect("(")
        super_args: list[str] = []
        while not self.at(")"):
            if super_args:
                self.expect(",")
            super_args.append(self.ident().text)
        self.expect(")")
        self.expect(";")
        assigns: list[tuple[str, str]] = []
        while not self.at("}"):
            self.expect("this")
            self.expect(".")
            target = self.ident().text
            self.expect("=")
            source = self.ident().text
            self.expect(";")
            assigns.append((target, source))
        self.expect("}")
        return _RawCtor(tuple(params), tuple(super_args), tuple(assigns), pos)

    # -- expressions -------------------------------------------------------

    def expr(self) -> FjdExpr:
        # "(" Name ")" starts a cast only when an expression follows.
        if (
            self.at("(")
            and self.peek(1).kind == "ident"
            and self.at(")", 2)
            and (self.peek(3).kind == "ident" or self.at("(", 3) or self.at("new", 3))
        ):
            pos = self.next().pos
            cls = self.ident().text
            self.expect(")")
            return FCast(cls, self.expr(), pos)
        return self.postfix()

    def postfix(self) -> FjdExpr:
        e = self.primary()
        while self.at("."):
            self.next()
            name = self.ident()
            if self.at("("):
                self.next()
                args = []
                while not self.at(")"):
                    if args:
                        self.expect(",")
                    args.append(self.expr())
                self.expect(")")
                e = FInvoke(e, name.text, tuple(args), name.pos)
            else:
                e = FField(e, name.text, name.pos)
        return e

    def primary(self) -> FjdExpr:
        if self.at("new"):
            pos = self.next().pos
            cls = self.ident().text
            self.expect("(")
            args = []
            while not self.at(")"):
                if args:
                    self.expect(",")
                args.append(self.expr())
            self.expect(")")
            return FNew(cls, tuple(args), pos)
        if self.at("("):
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        t = self.ident()
        return FVar(t.text, t.pos)


@dataclass(frozen=True)
class _RawCtor:
    params: tuple[FjdParam, ...]
    super_args: tuple[str, ...]
    assigns: tuple[tuple[str, str], ...]
    pos: Pos


def _check_ctors(program: FjdProgram, ctors: list, file: str) -> None:
    """Constructors are part of the concrete syntax but carry no content;
    each must be the canonical one for its field layout."""
    table = FjdTable(program, file)
    diags: list[Diagnostic] = []
    for decl, ctor in ctors:
        try:
            all_fields = table.fields(decl.name)
        except (KeyError, AssertionError, RecursionError):
            continue  # unresolvable or cyclic parent; fjd_typecheck reports it
        inherited = all_fields[: len(all_fields) - len(decl.fields)]
        want = (
            all_fields,
            tuple(p.name for p in inherited),
            tuple((f.name, f.name) for f in decl.fields),
        )
        if (ctor.params, ctor.super_args, ctor.assigns) != want:
            diags.append(Diagnostic(
                "FJD-CTOR",
                f"constructor of {decl.name!r} must take every field in order, "
                f"pass the inherited prefix to super, and assign each own field",
                ctor.pos,
                file,
            ))
    if diags:
        raise SourceError(diags)


def parse_fjd(text: str, file: str = "<fjd>") -> FjdProgram:
    """Parse the concrete syntax: class/interface declarations and a final
    `main = expr`."""
    return _FjdParser(text, file).program()
