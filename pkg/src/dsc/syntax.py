"""Abstract syntax for the source calculus family.

The surface language is a family of five nested calculi, selected by a level
gate: FJ (monomorphic classes), FGJ (adds type parameters), PS (adds traits
and intersections), PLS (adds unions, Nothing and Boolean) and DS (adds type
members, path-dependent types and blocks).  One AST covers all five; the
parser and checker reject constructs above the active level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional, Union as PyUnion


class Level(IntEnum):
    """Calculus levels, ordered by inclusion."""

    FJ = 0
    FGJ = 1
    PS = 2
    PLS = 3
    DS = 4

    @staticmethod
    def parse(name: str) -> "Level":
        try:
            return Level[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown level {name!r}") from None


# Identifier reserved for self-reference inside class bodies.
THIS = "this"

# Class names that are always valid but never defined in a table.
BUILTIN_CLASSES = ("Object", "Boolean", "Nothing")


@dataclass(frozen=True)
class Pos:
    """Source position (1-based line and column)."""

    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_POS = Pos()


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class SourceType:
    """Base class for source-level types."""

    def __str__(self) -> str:
        return _show_type(self, 0)


@dataclass(frozen=True)
class TypeVar(SourceType):
    """A type variable.  flavor records its binding site: a class header
    ("class") or a method signature ("method"); translation treats the two
    differently."""

    name: str
    flavor: str = "class"  # "class" | "method"


@dataclass(frozen=True)
class Applied(SourceType):
    """A class or trait name applied to type arguments (possibly none)."""

    name: str
    args: tuple[SourceType, ...] = ()


@dataclass(frozen=True)
class Intersection(SourceType):
    left: SourceType
    right: SourceType


@dataclass(frozen=True)
class UnionType(SourceType):
    left: SourceType
    right: SourceType


@dataclass(frozen=True)
class Selection(SourceType):
    """A path-dependent type x.L: member L of the term variable x."""

    prefix: str
    label: str


OBJECT = Applied("Object")
NOTHING = Applied("Nothing")
BOOLEAN = Applied("Boolean")


def _show_type(t: SourceType, prec: int) -> str:
    # prec: 0 = union context, 1 = intersection context, 2 = atom
    if isinstance(t, TypeVar):
        return t.name
    if isinstance(t, Applied):
        if not t.args:
            return t.name
        return f"{t.name}[{', '.join(str(a) for a in t.args)}]"
    if isinstance(t, Selection):
        return f"{t.prefix}.{t.label}"
    if isinstance(t, Intersection):
        s = f"{_show_type(t.left, 1)} & {_show_type(t.right, 2)}"
        return f"({s})" if prec >= 2 else s
    if isinstance(t, UnionType):
        s = f"{_show_type(t.left, 0)} | {_show_type(t.right, 1)}"
        return f"({s})" if prec >= 1 else s
    raise TypeError(f"not a source type: {t!r}")


def intersect_all(types: list[SourceType]) -> SourceType:
    """Left-associated intersection of a nonempty list (Object if empty)."""
    if not types:
        return OBJECT
    out = types[0]
    for t in types[1:]:
        out = Intersection(out, t)
    return out


def type_nodes(t: SourceType) -> Iterator[SourceType]:
    """All subterm types of t, including t itself."""
    yield t
    if isinstance(t, Applied):
        for a in t.args:
            yield from type_nodes(a)
    elif isinstance(t, (Intersection, UnionType)):
        yield from type_nodes(t.left)
        yield from type_nodes(t.right)


def free_vars(t: SourceType) -> set[str]:
    """Free identifiers of a type: type variables plus selection prefixes."""
    out: set[str] = set()
    for n in type_nodes(t):
        if isinstance(n, TypeVar):
            out.add(n.name)
        elif isinstance(n, Selection):
            out.add(n.prefix)
    return out


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class Expr:
    """Base class for source expressions."""

    pos: Pos

    def __str__(self) -> str:
        return _show_expr(self)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Getter(Expr):
    receiver: Expr
    fieldname: str
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Invoke(Expr):
    """A method call whose receiver and arguments are variables (the normal
    form method calls take after desugaring)."""

    receiver: str
    method: str
    targs: tuple[SourceType, ...]
    args: tuple[str, ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class InvokeGeneral(Expr):
    """A method call with arbitrary receiver/argument expressions; desugared
    into blocks + Invoke before typing at level DS.  At levels below DS this
    is the primitive call form."""

    receiver: Expr
    method: str
    targs: tuple[SourceType, ...]
    args: tuple[Expr, ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class New(Expr):
    type: Applied
    args: tuple[Expr, ...]
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    els: Expr
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class Block(Expr):
    """{val x = init; body}"""

    var: str
    init: Expr
    body: Expr
    pos: Pos = field(default=NO_POS, compare=False)


def _show_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Getter):
        return f"{_show_receiver(e.receiver)}.{e.fieldname}"
    if isinstance(e, Invoke):
        targs = f"[{', '.join(str(t) for t in e.targs)}]" if e.targs else ""
        return f"{e.receiver}.{e.method}{targs}({', '.join(e.args)})"
    if isinstance(e, InvokeGeneral):
        targs = f"[{', '.join(str(t) for t in e.targs)}]" if e.targs else ""
        args = ", ".join(_show_expr(a) for a in e.args)
        return f"{_show_receiver(e.receiver)}.{e.method}{targs}({args})"
    if isinstance(e, New):
        if e.type == OBJECT:
            return "new Object"
        return f"new {e.type}({', '.join(_show_expr(a) for a in e.args)})"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, If):
        return f"if {_show_expr(e.cond)} then {_show_expr(e.then)} else {_show_expr(e.els)}"
    if isinstance(e, Block):
        return f"{{val {e.var} = {_show_expr(e.init)}; {_show_expr(e.body)}}}"
    raise TypeError(f"not an expression: {e!r}")


def _show_receiver(e: Expr) -> str:
    s = _show_expr(e)
    # new/if/block receivers need parens to re-parse unambiguously
    if isinstance(e, (New, If)):
        return f"({s})"
    return s


def expr_free_vars(e: Expr) -> set[str]:
    """Free term variables of an expression (including selection prefixes in
    embedded type arguments)."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Getter):
        return expr_free_vars(e.receiver)
    if isinstance(e, Invoke):
        out = {e.receiver, *e.args}
        for t in e.targs:
            out |= {v for v in free_vars(t)}
        return out
    if isinstance(e, InvokeGeneral):
        out = expr_free_vars(e.receiver)
        for a in e.args:
            out |= expr_free_vars(a)
        for t in e.targs:
            out |= free_vars(t)
        return out
    if isinstance(e, New):
        out = free_vars(e.type)
        for a in e.args:
            out |= expr_free_vars(a)
        return out
    if isinstance(e, BoolLit):
        return set()
    if isinstance(e, If):
        return expr_free_vars(e.cond) | expr_free_vars(e.then) | expr_free_vars(e.els)
    if isinstance(e, Block):
        return expr_free_vars(e.init) | (expr_free_vars(e.body) - {e.var})
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeParam:
    name: str
    bound: SourceType  # upper bound N


@dataclass(frozen=True)
class VParam:
    name: str
    type: SourceType


@dataclass(frozen=True)
class TypeMemberDecl:
    """type L >: lower <: upper"""

    label: str
    lower: SourceType
    upper: SourceType
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class MethodDecl:
    name: str
    tparams: tuple[TypeParam, ...]
    params: tuple[VParam, ...]
    result: SourceType
    body: Optional[Expr]  # None = abstract (traits only)
    pos: Pos = field(default=NO_POS, compare=False)


@dataclass(frozen=True)
class ClassDecl:
    kind: str  # "class" | "trait"
    name: str
    tparams: tuple[TypeParam, ...]
    vparams: tuple[VParam, ...]  # empty for traits
    parent: Optional[Applied]  # proper classes only
    parent_ctor_args: tuple[str, ...]  # names forwarded to the parent ctor
    trait_parents: tuple[Applied, ...]
    type_members: tuple[TypeMemberDecl, ...]
    methods: tuple[MethodDecl, ...]
    pos: Pos = field(default=NO_POS, compare=False)

    @property
    def is_trait(self) -> bool:
        return self.kind == "trait"

    def method(self, name: str) -> Optional[MethodDecl]:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def type_member(self, label: str) -> Optional[TypeMemberDecl]:
        for d in self.type_members:
            if d.label == label:
                return d
        return None


@dataclass(frozen=True)
class ClassTable:
    classes: dict[str, ClassDecl]
    level: Level = Level.DS

    def __contains__(self, name: str) -> bool:
        return name in self.classes

    def get(self, name: str) -> ClassDecl:
        try:
            return self.classes[name]
        except KeyError:
            raise KeyError(f"unknown class {name!r}") from None

    def names(self) -> list[str]:
        return list(self.classes)


@dataclass(frozen=True)
class Program:
    table: ClassTable
    main: Expr


# ---------------------------------------------------------------------------
# Typing environments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermBind:
    name: str
    type: SourceType


@dataclass(frozen=True)
class TypeBind:
    name: str
    bound: SourceType
    flavor: str = "class"


EnvBind = PyUnion[TermBind, TypeBind]


@dataclass(frozen=True)
class TypeEnv:
    """An ordered typing context of term bindings x:T and type-variable
    bounds X<:N.  Immutable; extension returns a new env."""

    binds: tuple[EnvBind, ...] = ()

    def bind_term(self, name: str, type_: SourceType) -> "TypeEnv":
        return TypeEnv(self.binds + (TermBind(name, type_),))

    def bind_tvar(self, name: str, bound: SourceType, flavor: str = "class") -> "TypeEnv":
        return TypeEnv(self.binds + (TypeBind(name, bound, flavor),))

    def bind_tparams(self, tparams: tuple[TypeParam, ...], flavor: str) -> "TypeEnv":
        env = self
        for p in tparams:
            env = env.bind_tvar(p.name, p.bound, flavor)
        return env

    def lookup_term(self, name: str) -> Optional[SourceType]:
        for b in reversed(self.binds):
            if isinstance(b, TermBind) and b.name == name:
                return b.type
        return None

    def lookup_tvar(self, name: str) -> Optional[TypeBind]:
        for b in reversed(self.binds):
            if isinstance(b, TypeBind) and b.name == name:
                return b
        return None

    def truncate_at(self, name: str) -> "TypeEnv":
        """Γ_[x]: the prefix of Γ ending at (and including) x's binding."""
        for i in range(len(self.binds) - 1, -1, -1):
            b = self.binds[i]
            if isinstance(b, TermBind) and b.name == name:
                return TypeEnv(self.binds[: i + 1])
        raise KeyError(f"unbound variable {name!r}")

    def term_names(self) -> list[str]:
        return [b.name for b in self.binds if isinstance(b, TermBind)]

    def bound_names(self) -> set[str]:
        return {b.name for b in self.binds}

    def __str__(self) -> str:
        parts = []
        for b in self.binds:
            if isinstance(b, TermBind):
                parts.append(f"{b.name}: {b.type}")
            else:
                parts.append(f"{b.name} <: {b.bound}")
        return ", ".join(parts)


EMPTY_ENV = TypeEnv()


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subst:
    """A simultaneous substitution: type variables to types (keyed by name
    and flavor) plus term-variable renaming of selection prefixes."""

    tmap: dict[tuple[str, str], SourceType] = field(default_factory=dict)
    vmap: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def types(pairs: dict[tuple[str, str], SourceType]) -> "Subst":
        return Subst(tmap=dict(pairs))

    @staticmethod
    def for_params(tparams: tuple[TypeParam, ...], args: tuple[SourceType, ...],
                   flavor: str) -> "Subst":
        if len(tparams) != len(args):
            raise ValueError(f"arity mismatch: {len(tparams)} params, {len(args)} args")
        return Subst(tmap={(p.name, flavor): a for p, a in zip(tparams, args)})

    @staticmethod
    def rename(vmap: dict[str, str]) -> "Subst":
        return Subst(vmap=dict(vmap))

    def is_identity(self) -> bool:
        return not self.tmap and not self.vmap

    def compose_rename(self, vmap: dict[str, str]) -> "Subst":
        merged = dict(self.vmap)
        merged.update(vmap)
        return Subst(tmap=self.tmap, vmap=merged)


def apply_subst(s: Subst, t: SourceType) -> SourceType:
    if isinstance(t, TypeVar):
        return s.tmap.get((t.name, t.flavor), t)
    if isinstance(t, Applied):
        if not t.args:
            return t
        return Applied(t.name, tuple(apply_subst(s, a) for a in t.args))
    if isinstance(t, Intersection):
        return Intersection(apply_subst(s, t.left), apply_subst(s, t.right))
    if isinstance(t, UnionType):
        return UnionType(apply_subst(s, t.left), apply_subst(s, t.right))
    if isinstance(t, Selection):
        return Selection(s.vmap.get(t.prefix, t.prefix), t.label)
    raise TypeError(f"not a source type: {t!r}")


def subst_expr(s: Subst, e: Expr) -> Expr:
    """Apply a substitution to the types embedded in an expression and rename
    free term variables per its vmap.  Block binders shadow the renaming."""
    if isinstance(e, Var):
        return Var(s.vmap.get(e.name, e.name), e.pos)
    if isinstance(e, Getter):
        return Getter(subst_expr(s, e.receiver), e.fieldname, e.pos)
    if isinstance(e, Invoke):
        return Invoke(
            s.vmap.get(e.receiver, e.receiver),
            e.method,
            tuple(apply_subst(s, t) for t in e.targs),
            tuple(s.vmap.get(a, a) for a in e.args),
            e.pos,
        )
    if isinstance(e, InvokeGeneral):
        return InvokeGeneral(
            subst_expr(s, e.receiver),
            e.method,
            tuple(apply_subst(s, t) for t in e.targs),
            tuple(subst_expr(s, a) for a in e.args),
            e.pos,
        )
    if isinstance(e, New):
        ty = apply_subst(s, e.type)
        assert isinstance(ty, Applied)
        return New(ty, tuple(subst_expr(s, a) for a in e.args), e.pos)
    if isinstance(e, BoolLit):
        return e
    if isinstance(e, If):
        return If(subst_expr(s, e.cond), subst_expr(s, e.then), subst_expr(s, e.els), e.pos)
    if isinstance(e, Block):
        inner = s
        if e.var in s.vmap:
            vmap = dict(s.vmap)
            del vmap[e.var]
            inner = Subst(tmap=s.tmap, vmap=vmap)
        return Block(e.var, subst_expr(s, e.init), subst_expr(inner, e.body), e.pos)
    raise TypeError(f"not an expression: {e!r}")


def copy_expr(e: Expr) -> Expr:
    """Rebuild an expression with fresh node identities.  Passes that key
    per-node side tables by id() copy first so shared subtrees cannot alias."""
    if isinstance(e, Var):
        return Var(e.name, e.pos)
    if isinstance(e, Getter):
        return Getter(copy_expr(e.receiver), e.fieldname, e.pos)
    if isinstance(e, Invoke):
        return Invoke(e.receiver, e.method, e.targs, e.args, e.pos)
    if isinstance(e, InvokeGeneral):
        return InvokeGeneral(copy_expr(e.receiver), e.method, e.targs,
                             tuple(copy_expr(a) for a in e.args), e.pos)
    if isinstance(e, New):
        return New(e.type, tuple(copy_expr(a) for a in e.args), e.pos)
    if isinstance(e, BoolLit):
        return BoolLit(e.value, e.pos)
    if isinstance(e, If):
        return If(copy_expr(e.cond), copy_expr(e.then), copy_expr(e.els), e.pos)
    if isinstance(e, Block):
        return Block(e.var, copy_expr(e.init), copy_expr(e.body), e.pos)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    """A structured error: the violated rule, a message, and a position."""

    rule: str
    message: str
    pos: Pos = NO_POS
    file: str = "<input>"

    def render(self) -> str:
        return f"{self.file}:{self.pos.line}:{self.pos.col}: error[{self.rule}]: {self.message}"

    def __str__(self) -> str:
        return self.render()


class SourceError(Exception):
    """Raised for unrecoverable input problems; carries diagnostics."""

    def __init__(self, diags: list[Diagnostic]):
        self.diags = diags
        super().__init__("; ".join(d.render() for d in diags))

    @staticmethod
    def single(rule: str, message: str, pos: Pos = NO_POS, file: str = "<input>") -> "SourceError":
        return SourceError([Diagnostic(rule, message, pos, file)])
