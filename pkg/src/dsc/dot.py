"""Core object calculus used as the compilation target.

Terms, types, syntactic sugar (lets, lambdas, zero- and multi-parameter
methods), a store-based small-step evaluator, and a fuel-bounded derivation
search for the target subtyping relation including the AND-BIND and AND-I'
extensions.

Everything is a frozen dataclass so terms and types can key memo tables.
`expand_term` / `expand_type` rewrite sugar to the one-parameter core and are
idempotent on core forms; the evaluator and the derivation search expand their
input up front and the renaming helpers assume expanded forms.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Callable, Iterable, Optional


# ---------------------------------------------------------------------------
# syntax


class DotType:
    """A type of the target calculus."""

    def __str__(self) -> str:
        return show_type(self)


@dataclass(frozen=True)
class Top(DotType):
    pass


@dataclass(frozen=True)
class Bot(DotType):
    pass


@dataclass(frozen=True)
class DotParam:
    """A method parameter; the type ascription is optional on definitions."""

    name: str
    type: Optional[DotType] = None


@dataclass(frozen=True)
class TypeMember(DotType):
    """A type-member declaration type `L: lower..upper`.

    The alias form `L = T` is represented with equal bounds.
    """

    label: str
    lower: DotType
    upper: DotType


@dataclass(frozen=True)
class MethodMember(DotType):
    """A method declaration type `m(x: S): U`; U may mention x.

    Zero or several parameters is sugar; each parameter type may mention the
    parameters before it.
    """

    name: str
    params: tuple[DotParam, ...]
    result: DotType


@dataclass(frozen=True)
class Sel(DotType):
    """A type selection `x.L` on a term variable."""

    var: str
    label: str


@dataclass(frozen=True)
class Rec(DotType):
    """A recursive record type `{z => T}`; T may mention z."""

    self_var: str
    body: DotType


@dataclass(frozen=True)
class And(DotType):
    left: DotType
    right: DotType


@dataclass(frozen=True)
class Or(DotType):
    left: DotType
    right: DotType


TOP = Top()
BOT = Bot()


def _cache_hash(cls):
    """Memoize the generated dataclass hash; type nodes are deeply shared and
    the derivation-search memo hashes them constantly."""
    base = cls.__hash__

    def __hash__(self):  # noqa: A001
        h = self.__dict__.get("_hash")
        if h is None:
            h = base(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


for _cls in (Top, Bot, DotParam, TypeMember, MethodMember, Sel, Rec, And, Or):
    _cache_hash(_cls)


class DotTerm:
    """A term of the target calculus."""

    def __str__(self) -> str:
        return show_term(self)


@dataclass(frozen=True)
class Var(DotTerm):
    name: str


@dataclass(frozen=True)
class Obj(DotTerm):
    """An object literal `{z => decls}`; decl labels must be disjoint."""

    self_var: str
    decls: tuple["DotDecl", ...]


@dataclass(frozen=True)
class Invoke(DotTerm):
    """A method invocation; exactly one argument in the core."""

    receiver: DotTerm
    method: str
    args: tuple[DotTerm, ...]


@dataclass(frozen=True)
class Let(DotTerm):
    """`let var = bound in body`, sugar for an immediate `apply` call."""

    var: str
    bound: DotTerm
    body: DotTerm


class DotDecl:
    """A declaration inside an object literal."""

    def __str__(self) -> str:
        return show_decl(self)


@dataclass(frozen=True)
class TypeTag(DotDecl):
    """A type-member definition `L = T`."""

    label: str
    type: DotType


@dataclass(frozen=True)
class MethodDef(DotDecl):
    """A method definition; ascriptions are optional, several params is sugar."""

    name: str
    params: tuple[DotParam, ...]
    result: Optional[DotType]
    body: DotTerm


def decl_label(d: DotDecl) -> str:
    return d.label if isinstance(d, TypeTag) else d.name


# ---------------------------------------------------------------------------
# constructors for the printed sugar


def intersect(types: Iterable[DotType]) -> DotType:
    out: Optional[DotType] = None
    for t in types:
        out = t if out is None else And(out, t)
    return TOP if out is None else out


def unit() -> Obj:
    """The empty object `{_ =>}`, used as the dummy zero-param argument."""
    return Obj("_", ())


def lam(var: str, body: DotTerm) -> Obj:
    """A lambda as a one-method object `{_ => apply(var) = body}`."""
    return Obj("_", (MethodDef("apply", (DotParam(var),), None, body),))


def arrow(param: DotParam, result: DotType) -> Rec:
    """The function type `(x: S) => U` as a single-method record."""
    return Rec("_", MethodMember("apply", (param,), result))


def rec_all(self_var: str, members: Iterable[DotType]) -> Rec:
    """`{z => T1, T2, ...}` packaged as one intersection body."""
    return Rec(self_var, intersect(members))


def alias(label: str, t: DotType) -> TypeMember:
    """The type-level alias `L = T`, i.e. equal bounds."""
    return TypeMember(label, t, t)


# ---------------------------------------------------------------------------
# free variables


def type_fv(t: DotType) -> frozenset[str]:
    if isinstance(t, (Top, Bot)):
        return frozenset()
    if isinstance(t, TypeMember):
        return type_fv(t.lower) | type_fv(t.upper)
    if isinstance(t, MethodMember):
        free: set[str] = set()
        bound: set[str] = set()
        for p in t.params:
            if p.type is not None:
                free |= type_fv(p.type) - bound
            bound.add(p.name)
        free |= type_fv(t.result) - bound
        return frozenset(free)
    if isinstance(t, Sel):
        return frozenset((t.var,))
    if isinstance(t, Rec):
        return type_fv(t.body) - {t.self_var}
    if isinstance(t, (And, Or)):
        return type_fv(t.left) | type_fv(t.right)
    raise TypeError(f"not a type: {t!r}")


def decl_fv(d: DotDecl) -> frozenset[str]:
    if isinstance(d, TypeTag):
        return type_fv(d.type)
    free: set[str] = set()
    bound: set[str] = set()
    for p in d.params:
        if p.type is not None:
            free |= type_fv(p.type) - bound
        bound.add(p.name)
    if d.result is not None:
        free |= type_fv(d.result) - bound
    free |= term_fv(d.body) - bound
    return frozenset(free)


def term_fv(t: DotTerm) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Obj):
        free: set[str] = set()
        for d in t.decls:
            free |= decl_fv(d)
        return frozenset(free) - {t.self_var}
    if isinstance(t, Invoke):
        free = set(term_fv(t.receiver))
        for a in t.args:
            free |= term_fv(a)
        return frozenset(free)
    if isinstance(t, Let):
        return term_fv(t.bound) | (term_fv(t.body) - {t.var})
    raise TypeError(f"not a term: {t!r}")


def labels_disjoint(t: DotTerm) -> bool:
    """Every object literal in t declares pairwise distinct labels."""
    if isinstance(t, Obj):
        names = [decl_label(d) for d in t.decls]
        if len(names) != len(set(names)):
            return False
        for d in t.decls:
            if isinstance(d, MethodDef) and not labels_disjoint(d.body):
                return False
        return True
    if isinstance(t, Invoke):
        return labels_disjoint(t.receiver) and all(labels_disjoint(a) for a in t.args)
    if isinstance(t, Let):
        return labels_disjoint(t.bound) and labels_disjoint(t.body)
    return True


# ---------------------------------------------------------------------------
# renaming (expects expanded forms)


def _avoid(base: str, used: frozenset[str] | set[str]) -> str:
    if base not in used:
        return base
    i = 0
    while f"{base}{i}" in used:
        i += 1
    return f"{base}{i}"


def rename_type(t: DotType, old: str, new: str) -> DotType:
    """Substitute the variable `new` for free occurrences of `old`."""
    if old == new or isinstance(t, (Top, Bot)):
        return t
    if isinstance(t, TypeMember):
        return TypeMember(t.label, rename_type(t.lower, old, new), rename_type(t.upper, old, new))
    if isinstance(t, MethodMember):
        (p,) = t.params
        ptype = rename_type(p.type, old, new) if p.type is not None else None
        if p.name == old:
            return MethodMember(t.name, (DotParam(p.name, ptype),), t.result)
        result = t.result
        name = p.name
        if p.name == new:
            name = _avoid(new + "'", type_fv(result) | {old, new})
            result = rename_type(result, p.name, name)
        return MethodMember(t.name, (DotParam(name, ptype),), rename_type(result, old, new))
    if isinstance(t, Sel):
        return Sel(new, t.label) if t.var == old else t
    if isinstance(t, Rec):
        if t.self_var == old:
            return t
        body = t.body
        z = t.self_var
        if z == new:
            z = _avoid(new + "'", type_fv(body) | {old, new})
            body = rename_type(body, t.self_var, z)
        return Rec(z, rename_type(body, old, new))
    if isinstance(t, And):
        return And(rename_type(t.left, old, new), rename_type(t.right, old, new))
    if isinstance(t, Or):
        return Or(rename_type(t.left, old, new), rename_type(t.right, old, new))
    raise TypeError(f"not a type: {t!r}")


def rename_decl(d: DotDecl, old: str, new: str) -> DotDecl:
    if old == new:
        return d
    if isinstance(d, TypeTag):
        return TypeTag(d.label, rename_type(d.type, old, new))
    (p,) = d.params
    ptype = rename_type(p.type, old, new) if p.type is not None else None
    if p.name == old:
        return MethodDef(d.name, (DotParam(p.name, ptype),), d.result, d.body)
    result, body, name = d.result, d.body, p.name
    if p.name == new:
        used = term_fv(body) | {old, new}
        if result is not None:
            used |= type_fv(result)
        name = _avoid(new + "'", used)
        if result is not None:
            result = rename_type(result, p.name, name)
        body = rename_term(body, p.name, name)
    if result is not None:
        result = rename_type(result, old, new)
    return MethodDef(d.name, (DotParam(name, ptype),), result, rename_term(body, old, new))


def rename_term(t: DotTerm, old: str, new: str) -> DotTerm:
    if old == new:
        return t
    if isinstance(t, Var):
        return Var(new) if t.name == old else t
    if isinstance(t, Obj):
        if t.self_var == old:
            return t
        decls = t.decls
        z = t.self_var
        if z == new:
            used: set[str] = {old, new}
            for d in decls:
                used |= decl_fv(d)
            z = _avoid(new + "'", used)
            decls = tuple(rename_decl(d, t.self_var, z) for d in decls)
        return Obj(z, tuple(rename_decl(d, old, new) for d in decls))
    if isinstance(t, Invoke):
        return Invoke(
            rename_term(t.receiver, old, new),
            t.method,
            tuple(rename_term(a, old, new) for a in t.args),
        )
    raise TypeError(f"rename expects an expanded term: {t!r}")


# ---------------------------------------------------------------------------
# sugar expansion


def expand_type(t: DotType) -> DotType:
    if isinstance(t, (Top, Bot, Sel)):
        return t
    if isinstance(t, TypeMember):
        return TypeMember(t.label, expand_type(t.lower), expand_type(t.upper))
    if isinstance(t, MethodMember):
        params = [
            DotParam(p.name, expand_type(p.type) if p.type is not None else None)
            for p in t.params
        ]
        result = expand_type(t.result)
        if not params:
            params = [DotParam("_", TOP)]
        while len(params) > 1:
            result = arrow(params.pop(), result)
        return MethodMember(t.name, (params[0],), result)
    if isinstance(t, Rec):
        return Rec(t.self_var, expand_type(t.body))
    if isinstance(t, And):
        return And(expand_type(t.left), expand_type(t.right))
    if isinstance(t, Or):
        return Or(expand_type(t.left), expand_type(t.right))
    raise TypeError(f"not a type: {t!r}")


def expand_decl(d: DotDecl) -> DotDecl:
    if isinstance(d, TypeTag):
        return TypeTag(d.label, expand_type(d.type))
    params = [
        DotParam(p.name, expand_type(p.type) if p.type is not None else None)
        for p in d.params
    ]
    result = expand_type(d.result) if d.result is not None else None
    body = expand_term(d.body)
    if not params:
        params = [DotParam("_", TOP)]
    while len(params) > 1:
        last = params.pop()
        result = arrow(last, result) if result is not None else None
        body = lam(last.name, body)
    return MethodDef(d.name, (params[0],), result, body)


def expand_term(t: DotTerm) -> DotTerm:
    if isinstance(t, Var):
        return t
    if isinstance(t, Obj):
        return Obj(t.self_var, tuple(expand_decl(d) for d in t.decls))
    if isinstance(t, Invoke):
        recv = expand_term(t.receiver)
        args = [expand_term(a) for a in t.args] or [unit()]
        out = Invoke(recv, t.method, (args[0],))
        for a in args[1:]:
            out = Invoke(out, "apply", (a,))
        return out
    if isinstance(t, Let):
        return Invoke(lam(t.var, expand_term(t.body)), "apply", (expand_term(t.bound),))
    raise TypeError(f"not a term: {t!r}")


def expand(x):
    if isinstance(x, DotType):
        return expand_type(x)
    if isinstance(x, DotTerm):
        return expand_term(x)
    if isinstance(x, DotDecl):
        return expand_decl(x)
    raise TypeError(f"not a node: {x!r}")


# ---------------------------------------------------------------------------
# alpha equality (on expanded forms; declaration order is significant)


def alpha_equal(a, b) -> bool:
    return _alpha(expand(a), expand(b), {}, {}, 0)


def _avar(x: str, y: str, ma: dict, mb: dict) -> bool:
    if x in ma or y in mb:
        return x in ma and y in mb and ma[x] == mb[y]
    return x == y


def _alpha(a, b, ma: dict, mb: dict, depth: int) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (Top, Bot)):
        return True
    if isinstance(a, TypeMember):
        return (
            a.label == b.label
            and _alpha(a.lower, b.lower, ma, mb, depth)
            and _alpha(a.upper, b.upper, ma, mb, depth)
        )
    if isinstance(a, MethodMember):
        if a.name != b.name:
            return False
        (pa,), (pb,) = a.params, b.params
        if (pa.type is None) != (pb.type is None):
            return False
        if pa.type is not None and not _alpha(pa.type, pb.type, ma, mb, depth):
            return False
        ma2, mb2 = {**ma, pa.name: depth}, {**mb, pb.name: depth}
        return _alpha(a.result, b.result, ma2, mb2, depth + 1)
    if isinstance(a, Sel):
        return a.label == b.label and _avar(a.var, b.var, ma, mb)
    if isinstance(a, Rec):
        ma2, mb2 = {**ma, a.self_var: depth}, {**mb, b.self_var: depth}
        return _alpha(a.body, b.body, ma2, mb2, depth + 1)
    if isinstance(a, (And, Or)):
        return _alpha(a.left, b.left, ma, mb, depth) and _alpha(a.right, b.right, ma, mb, depth)
    if isinstance(a, Var):
        return _avar(a.name, b.name, ma, mb)
    if isinstance(a, Obj):
        if len(a.decls) != len(b.decls):
            return False
        ma2, mb2 = {**ma, a.self_var: depth}, {**mb, b.self_var: depth}
        return all(
            _alpha(da, db, ma2, mb2, depth + 1) for da, db in zip(a.decls, b.decls)
        )
    if isinstance(a, Invoke):
        if a.method != b.method or not _alpha(a.receiver, b.receiver, ma, mb, depth):
            return False
        (xa,), (xb,) = a.args, b.args
        return _alpha(xa, xb, ma, mb, depth)
    if isinstance(a, TypeTag):
        return a.label == b.label and _alpha(a.type, b.type, ma, mb, depth)
    if isinstance(a, MethodDef):
        if a.name != b.name:
            return False
        (pa,), (pb,) = a.params, b.params
        if (pa.type is None) != (pb.type is None) or (a.result is None) != (b.result is None):
            return False
        if pa.type is not None and not _alpha(pa.type, pb.type, ma, mb, depth):
            return False
        ma2, mb2 = {**ma, pa.name: depth}, {**mb, pb.name: depth}
        if a.result is not None and not _alpha(a.result, b.result, ma2, mb2, depth + 1):
            return False
        return _alpha(a.body, b.body, ma2, mb2, depth + 1)
    raise TypeError(f"not a node: {a!r}")


# ---------------------------------------------------------------------------
# printing


def show_type(t: DotType, prec: int = 0) -> str:
    # precedence: members 0 < `|` 1 < `&` 2 < atoms 3
    if isinstance(t, Top):
        s, p = "Top", 3
    elif isinstance(t, Bot):
        s, p = "Bot", 3
    elif isinstance(t, Sel):
        s, p = f"{t.var}.{t.label}", 3
    elif isinstance(t, Rec):
        s, p = f"{{{t.self_var} => {show_type(t.body, 0)}}}", 3
    elif isinstance(t, And):
        s, p = f"{show_type(t.left, 2)} & {show_type(t.right, 3)}", 2
    elif isinstance(t, Or):
        s, p = f"{show_type(t.left, 1)} | {show_type(t.right, 2)}", 1
    elif isinstance(t, TypeMember):
        if t.lower == t.upper:
            s = f"{t.label} = {show_type(t.upper, 1)}"
        else:
            s = f"{t.label}: {show_type(t.lower, 2)}..{show_type(t.upper, 2)}"
        p = 0
    elif isinstance(t, MethodMember):
        ps = ", ".join(
            p.name + (f": {show_type(p.type, 1)}" if p.type is not None else "")
            for p in t.params
        )
        s, p = f"{t.name}({ps}): {show_type(t.result, 1)}", 0
    else:
        raise TypeError(f"not a type: {t!r}")
    return f"({s})" if prec > p else s


def show_decl(d: DotDecl) -> str:
    if isinstance(d, TypeTag):
        return f"{d.label} = {show_type(d.type, 1)}"
    ps = ", ".join(
        p.name + (f": {show_type(p.type, 1)}" if p.type is not None else "")
        for p in d.params
    )
    res = f": {show_type(d.result, 1)}" if d.result is not None else ""
    return f"{d.name}({ps}){res} = {show_term(d.body)}"


def show_term(t: DotTerm) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Obj):
        if not t.decls:
            return f"{{{t.self_var} =>}}"
        return f"{{{t.self_var} => {', '.join(show_decl(d) for d in t.decls)}}}"
    if isinstance(t, Invoke):
        recv = show_term(t.receiver)
        if isinstance(t.receiver, (Obj, Let)):
            recv = f"({recv})"
        return f"{recv}.{t.method}({', '.join(show_term(a) for a in t.args)})"
    if isinstance(t, Let):
        return f"let {t.var} = {show_term(t.bound)} in {show_term(t.body)}"
    raise TypeError(f"not a term: {t!r}")


def to_json(x) -> object:
    """A plain-dict rendering of a term, type, or declaration."""
    if isinstance(x, Top):
        return {"kind": "top"}
    if isinstance(x, Bot):
        return {"kind": "bot"}
    if isinstance(x, TypeMember):
        return {"kind": "type-member", "label": x.label, "lower": to_json(x.lower), "upper": to_json(x.upper)}
    if isinstance(x, MethodMember):
        return {
            "kind": "method-member",
            "name": x.name,
            "params": [_param_json(p) for p in x.params],
            "result": to_json(x.result),
        }
    if isinstance(x, Sel):
        return {"kind": "sel", "var": x.var, "label": x.label}
    if isinstance(x, Rec):
        return {"kind": "rec", "self": x.self_var, "body": to_json(x.body)}
    if isinstance(x, And):
        return {"kind": "and", "left": to_json(x.left), "right": to_json(x.right)}
    if isinstance(x, Or):
        return {"kind": "or", "left": to_json(x.left), "right": to_json(x.right)}
    if isinstance(x, Var):
        return {"kind": "var", "name": x.name}
    if isinstance(x, Obj):
        return {"kind": "obj", "self": x.self_var, "decls": [to_json(d) for d in x.decls]}
    if isinstance(x, Invoke):
        return {
            "kind": "invoke",
            "receiver": to_json(x.receiver),
            "method": x.method,
            "args": [to_json(a) for a in x.args],
        }
    if isinstance(x, Let):
        return {"kind": "let", "var": x.var, "bound": to_json(x.bound), "body": to_json(x.body)}
    if isinstance(x, TypeTag):
        return {"kind": "type-tag", "label": x.label, "type": to_json(x.type)}
    if isinstance(x, MethodDef):
        return {
            "kind": "method-def",
            "name": x.name,
            "params": [_param_json(p) for p in x.params],
            "result": to_json(x.result) if x.result is not None else None,
            "body": to_json(x.body),
        }
    raise TypeError(f"not a node: {x!r}")


def _param_json(p: DotParam) -> dict:
    return {"name": p.name, "type": to_json(p.type) if p.type is not None else None}


# ---------------------------------------------------------------------------
# evaluation


class Store:
    """Allocated objects keyed by store variable, in allocation order."""

    def __init__(self) -> None:
        self.cells: dict[str, tuple[DotDecl, ...]] = {}

    def alloc(self, self_var: str, decls: tuple[DotDecl, ...]) -> str:
        var = f"#{len(self.cells)}"
        self.cells[var] = tuple(rename_decl(d, self_var, var) for d in decls)
        return var

    def method(self, var: str, name: str) -> Optional[MethodDef]:
        for d in self.cells.get(var, ()):
            if isinstance(d, MethodDef) and d.name == name:
                return d
        return None

    def __contains__(self, var: str) -> bool:
        return var in self.cells


@dataclass
class Value:
    var: str
    store: Store


@dataclass
class Stuck:
    term: DotTerm
    reason: str
    store: Store


@dataclass
class OutOfFuel:
    term: DotTerm
    store: Store


class _StuckError(Exception):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


def _is_value(store: Store, t: DotTerm) -> bool:
    return isinstance(t, Var) and t.name in store


def step(store: Store, t: DotTerm) -> DotTerm:
    """One leftmost step: receiver first, then argument, then the call itself."""
    if isinstance(t, Obj):
        return Var(store.alloc(t.self_var, t.decls))
    if isinstance(t, Invoke):
        (arg,) = t.args
        if not _is_value(store, t.receiver):
            return Invoke(step(store, t.receiver), t.method, (arg,))
        if not _is_value(store, arg):
            return Invoke(t.receiver, t.method, (step(store, arg),))
        recv = t.receiver.name  # type: ignore[union-attr]
        defn = store.method(recv, t.method)
        if defn is None:
            raise _StuckError(f"no method '{t.method}' on {recv}")
        (p,) = defn.params
        return rename_term(defn.body, p.name, arg.name)  # type: ignore[union-attr]
    if isinstance(t, Var):
        raise _StuckError(f"unbound variable '{t.name}'")
    raise _StuckError(f"cannot step {t!r}")


def evaluate(
    t: DotTerm,
    max_steps: int = 100_000,
    store: Optional[Store] = None,
    on_step: Optional[Callable[[int, DotTerm], None]] = None,
):
    """Iterate `step` up to max_steps; running out of fuel is never Stuck."""
    store = store if store is not None else Store()
    t = expand_term(t)
    steps = 0
    while True:
        if _is_value(store, t):
            return Value(t.name, store)  # type: ignore[union-attr]
        if steps >= max_steps:
            return OutOfFuel(t, store)
        try:
            t = step(store, t)
        except _StuckError as err:
            return Stuck(t, err.reason, store)
        steps += 1
        if on_step is not None:
            on_step(steps, t)


# ---------------------------------------------------------------------------
# environments and well-formedness


@dataclass(frozen=True)
class DotEnv:
    binds: tuple[tuple[str, DotType], ...] = ()

    def bind(self, var: str, t: DotType) -> "DotEnv":
        return DotEnv(self.binds + ((var, t),))

    def lookup(self, var: str) -> Optional[DotType]:
        for name, t in reversed(self.binds):
            if name == var:
                return t
        return None

    def truncate(self, var: str) -> "DotEnv":
        """The prefix up to and including the rightmost binding of var."""
        for i in range(len(self.binds) - 1, -1, -1):
            if self.binds[i][0] == var:
                return DotEnv(self.binds[: i + 1])
        raise KeyError(var)

    def names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.binds)

    def __contains__(self, var: str) -> bool:
        return any(name == var for name, _ in self.binds)

    def __str__(self) -> str:
        return ", ".join(f"{name}: {t}" for name, t in self.binds)


EMPTY_DOT_ENV = DotEnv()
_cache_hash(DotEnv)


def dot_wf(env: DotEnv, t: DotType) -> bool:
    """Free variables all bound; no member-existence obligations."""
    return type_fv(t) <= env.names()


# ---------------------------------------------------------------------------
# bounded subtyping derivation search
#
# Depth-first search under a shared application budget, run with iterative
# deepening: a goal holds at fuel n iff some derivation uses at most n rule
# applications.  The first derivation found at a rung is returned, so the
# reported size is an upper bound, not a minimum.  Transitivity chains are
# right-associated (the left premise may not itself start with TRANS), which
# loses no yes-answers up to rotation and keeps the branching bounded.
# Selection rules spawn a restricted typing search (VAR, VARUNPACK, SUB, and
# the AND-I' extension) whose SUB premises recurse into subtyping.  Budgets
# strictly decrease across premises, so the search terminates without path
# tracking; the memo records found sizes and exhausted budgets per goal.

DOT_FUEL_CAP = 500
DOT_VISIT_CAP = 400_000


class _SearchBudget(Exception):
    """Raised when the search exceeds its node-visit budget."""


@dataclass(frozen=True)
class DotSubtypeOutcome:
    answer: str  # "yes" | "unknown"
    applications: int = 0
    trace: tuple[str, ...] = ()

    @property
    def yes(self) -> bool:
        return self.answer == "yes"

    def __bool__(self) -> bool:
        return self.yes


class _DotSearch:
    def __init__(self, and_bind: bool, and_intro: bool) -> None:
        self.and_bind = and_bind
        self.and_intro = and_intro
        # goal -> [found size or None, found lines, exhausted budget or None]
        self.memo: dict = {}
        self.st_memo: dict = {}
        self._cands: dict = {}
        self._env_sels: dict = {}
        self._merges: dict = {}
        self._pools: dict = {}
        self._intern: dict = {}
        self.visits = 0
        self.max_visits = 0  # 0 means unbounded

    def _i(self, x):
        """Intern types and environments so memo keys compare by identity."""
        return self._intern.setdefault(x, x)

    # -- subtyping goals ---------------------------------------------------

    def prove(self, env: DotEnv, s: DotType, t: DotType, limit: int,
              allow_trans: bool = True):
        if limit <= 0:
            return None
        env, s, t = self._i(env), self._i(s), self._i(t)
        key = (env, s, t, allow_trans)
        hit = self.memo.get(key)
        if hit is not None:
            found_n, found_lines, fail_cap = hit
            if found_n is not None and found_n <= limit:
                return (found_n, found_lines)
            if fail_cap is not None and fail_cap >= limit:
                return None
        result = self._prove(env, s, t, limit, allow_trans)
        entry = self.memo.setdefault(key, [None, None, None])
        if result is not None:
            if entry[0] is None or result[0] < entry[0]:
                entry[0], entry[1] = result
        elif entry[2] is None or entry[2] < limit:
            entry[2] = limit
        return result

    def _prove(self, env: DotEnv, s: DotType, t: DotType, limit: int,
               allow_trans: bool):
        self.visits += 1
        if self.max_visits and self.visits > self.max_visits:
            raise _SearchBudget()

        def done(rule: str, n: int, sublines: list[str]):
            head = f"{rule}: {show_type(s)} <: {show_type(t)}"
            return (n, [head] + ["  " + line for line in sublines])

        def unary(rule: str, env2: DotEnv, s2: DotType, t2: DotType):
            r = self.prove(env2, s2, t2, limit - 1)
            return done(rule, 1 + r[0], r[1]) if r is not None else None

        def binary(rule: str, p1, p2):
            r1 = self.prove(p1[0], p1[1], p1[2], limit - 2, *p1[3:])
            if r1 is None:
                return None
            r2 = self.prove(p2[0], p2[1], p2[2], limit - 1 - r1[0])
            if r2 is None:
                return None
            return done(rule, 1 + r1[0] + r2[0], r1[1] + r2[1])

        # axioms
        if s == t:
            return done("REFL", 1, [])
        if isinstance(t, Top):
            return done("TOP", 1, [])
        if isinstance(s, Bot):
            return done("BOT", 1, [])
        if self.and_bind and isinstance(s, And) and isinstance(s.left, Rec) and isinstance(s.right, Rec):
            if isinstance(t, Rec) and alpha_equal(_merge_recs(s.left, s.right), t):
                return done("AND-BIND", 1, [])

        # structural rules, first derivation wins
        out = None
        if isinstance(s, And):
            out = unary("AND11", env, s.left, t) or unary("AND12", env, s.right, t)
        if out is None and isinstance(t, Or):
            out = unary("OR21", env, s, t.left) or unary("OR22", env, s, t.right)
        if out is None and isinstance(t, And):
            out = binary("AND2", (env, s, t.left), (env, s, t.right))
        if out is None and isinstance(s, Or):
            out = binary("OR1", (env, s.left, t), (env, s.right, t))
        if out is None and isinstance(s, TypeMember) and isinstance(t, TypeMember) \
                and s.label == t.label:
            out = binary("TYP", (env, t.lower, s.lower), (env, s.upper, t.upper))
        if (
            out is None
            and isinstance(s, MethodMember)
            and isinstance(t, MethodMember)
            and s.name == t.name
            and s.params[0].type is not None
            and t.params[0].type is not None
        ):
            x = self._fresh(env, (s, t))
            u1 = rename_type(s.result, s.params[0].name, x)
            u2 = rename_type(t.result, t.params[0].name, x)
            s2 = t.params[0].type
            out = binary("FUN", (env, s2, s.params[0].type), (env.bind(x, s2), u1, u2))
        if out is None and isinstance(s, Sel) and s.var in env:
            r = self.st_prove(env.truncate(s.var), s.var,
                              TypeMember(s.label, BOT, t), limit - 1)
            if r is not None:
                out = done("SEL1", 1 + r[0], r[1])
        if out is None and isinstance(t, Sel) and t.var in env:
            r = self.st_prove(env.truncate(t.var), t.var,
                              TypeMember(t.label, s, TOP), limit - 1)
            if r is not None:
                out = done("SEL2", 1 + r[0], r[1])
        if out is None and isinstance(s, Rec):
            z = self._fresh(env, (s, t))
            body = rename_type(s.body, s.self_var, z)
            if isinstance(t, Rec):
                body2 = rename_type(t.body, t.self_var, z)
                out = unary("BINDX", env.bind(z, body), body, body2)
            if out is None:
                out = unary("BIND1", env.bind(z, body), body, t)
        if out is not None:
            return out

        # transitivity through a bounded pool of middle types; the left
        # premise may not itself be a TRANS
        if allow_trans and limit > 3:
            for mid in self._pool(env, s, t):
                if mid == s or mid == t:
                    continue
                out = binary("TRANS", (env, s, mid, False), (env, mid, t))
                if out is not None:
                    return out
        return None

    # -- restricted typing goals (x ;! G) ----------------------------------

    def st_prove(self, env: DotEnv, x: str, goal: DotType, limit: int):
        if limit <= 0:
            return None
        env, goal = self._i(env), self._i(goal)
        key = (env, x, goal)
        hit = self.st_memo.get(key)
        if hit is not None:
            found_n, found_lines, fail_cap = hit
            if found_n is not None and found_n <= limit:
                return (found_n, found_lines)
            if fail_cap is not None and fail_cap >= limit:
                return None
        result = self._st_prove(env, x, goal, limit)
        entry = self.st_memo.setdefault(key, [None, None, None])
        if result is not None:
            if entry[0] is None or result[0] < entry[0]:
                entry[0], entry[1] = result
        elif entry[2] is None or entry[2] < limit:
            entry[2] = limit
        return result

    def _st_prove(self, env: DotEnv, x: str, goal: DotType, limit: int):
        self.visits += 1
        if self.max_visits and self.visits > self.max_visits:
            raise _SearchBudget()
        start = env.lookup(x)
        if start is None:
            return None

        cands = self._candidates(env, x, start)
        exact = [(n, lines) for t, n, lines in cands if t == goal]
        if exact:
            best = min(exact)
            if best[0] <= limit:
                return best

        if self.and_intro and isinstance(goal, And):
            r1 = self.st_prove(env, x, goal.left, limit - 2)
            if r1 is not None:
                r2 = self.st_prove(env, x, goal.right, limit - 1 - r1[0])
                if r2 is not None:
                    head = f"AND-I': {x} ;! {show_type(goal)}"
                    n = 1 + r1[0] + r2[0]
                    if n <= limit:
                        return (n, [head] + ["  " + l for l in r1[1] + r2[1]])

        for t, n, lines in cands:
            if n + 2 > limit or t == goal:
                continue
            r = self.prove(env, t, goal, limit - n - 1)
            if r is not None:
                head = f"SUB: {x} ;! {show_type(goal)}"
                return (n + 1 + r[0], [head] + ["  " + l for l in lines + r[1]])
        return None

    def _candidates(self, env: DotEnv, x: str, start: DotType):
        """Types reachable from Γ(x) by VARUNPACK and intersection splitting."""
        cached = self._cands.get((env, x))
        if cached is not None:
            return cached
        seen: dict[DotType, tuple[int, list[str]]] = {}
        queue: list[tuple[DotType, int, list[str]]] = [
            (start, 1, [f"VAR: {x} ;! {show_type(start)}"])
        ]
        out: list[tuple[DotType, int, list[str]]] = []
        while queue and len(seen) < 64:
            t, n, lines = queue.pop(0)
            prev = seen.get(t)
            if prev is not None and prev[0] <= n:
                continue
            seen[t] = (n, lines)
            out.append((t, n, lines))
            if isinstance(t, Rec):
                body = rename_type(t.body, t.self_var, x)
                queue.append((body, n + 1, lines + [f"VARUNPACK: {x} ;! {show_type(body)}"]))
            if isinstance(t, And):
                queue.append((t.left, n + 3, lines + [f"SUB: {x} ;! {show_type(t.left)}"]))
                queue.append((t.right, n + 3, lines + [f"SUB: {x} ;! {show_type(t.right)}"]))
        self._cands[(env, x)] = out
        return out

    # -- helpers ------------------------------------------------------------

    def _fresh(self, env: DotEnv, types: tuple[DotType, ...]) -> str:
        used = set(env.names())
        for t in types:
            used |= type_fv(t)
        i = 0
        while f"$b{i}" in used:
            i += 1
        return f"$b{i}"

    def _pool(self, env: DotEnv, s: DotType, t: DotType) -> list[DotType]:
        """Middle types for TRANS: record merges, then the goal's own
        subterms and environment selections, small candidates first."""
        cached = self._pools.get((env, s, t))
        if cached is not None:
            return cached
        pool: list[DotType] = []
        seen: set[DotType] = set()

        def add(u: DotType) -> None:
            if u not in seen and len(pool) < 64:
                seen.add(u)
                pool.append(u)

        if self.and_bind:
            merges = self._merges.get(s)
            if merges is None:
                merges = _merge_candidates(s)
                self._merges[s] = merges
            for u in merges:
                add(u)
        rest: list[DotType] = []
        rest_seen: set[DotType] = set()
        for root in (s, t):
            for sub in _subterms(root):
                if sub not in rest_seen:
                    rest_seen.add(sub)
                    rest.append(sub)
        sels = self._env_sels.get(env)
        if sels is None:
            sels = [Sel(name, label) for name, bound in env.binds
                    for label in _member_labels(bound)]
            self._env_sels[env] = sels
        for u in sels:
            if u not in rest_seen:
                rest_seen.add(u)
                rest.append(u)
        for u in sorted(rest, key=_node_size):
            add(u)
        self._pools[(env, s, t)] = pool
        return pool


def _merge_recs(left: Rec, right: Rec) -> Rec:
    """The AND-BIND merge of two record types under a common self variable."""
    z = left.self_var
    if z in type_fv(right.body) - {right.self_var}:
        z = _avoid(z, type_fv(left.body) | type_fv(right.body))
    lbody = rename_type(left.body, left.self_var, z)
    rbody = rename_type(right.body, right.self_var, z)
    return Rec(z, And(lbody, rbody))


def _flatten_and(t: DotType) -> list[DotType]:
    if isinstance(t, And):
        return _flatten_and(t.left) + _flatten_and(t.right)
    return [t]


def _merge_candidates(s: DotType) -> list[DotType]:
    ops = _flatten_and(s)
    out: list[DotType] = []
    for i in range(len(ops)):
        if not isinstance(ops[i], Rec):
            continue
        for j in range(i + 1, len(ops)):
            if not isinstance(ops[j], Rec):
                continue
            merged = _merge_recs(ops[i], ops[j])
            out.append(merged)
            rest = ops[:i] + [merged] + ops[i + 1 : j] + ops[j + 1 :]
            if len(rest) > 1:
                out.append(intersect(rest))
    return out


def _subterms(t: DotType):
    yield t
    if isinstance(t, TypeMember):
        yield from _subterms(t.lower)
        yield from _subterms(t.upper)
    elif isinstance(t, MethodMember):
        for p in t.params:
            if p.type is not None:
                yield from _subterms(p.type)
        yield from _subterms(t.result)
    elif isinstance(t, Rec):
        yield from _subterms(t.body)
    elif isinstance(t, (And, Or)):
        yield from _subterms(t.left)
        yield from _subterms(t.right)


def _member_labels(t: DotType) -> list[str]:
    out = []
    for sub in _subterms(t):
        if isinstance(sub, TypeMember) and sub.label not in out:
            out.append(sub.label)
    return out


_SIZE_CACHE: dict = {}


def _node_size(t: DotType) -> int:
    h = _SIZE_CACHE.get(t)
    if h is None:
        h = sum(1 for _ in _subterms(t))
        _SIZE_CACHE[t] = h
    return h


def bounded_dot_subtype(
    env: DotEnv,
    s: DotType,
    t: DotType,
    fuel: int = 100,
    and_bind: bool = True,
    and_intro: bool = True,
    max_visits: int = DOT_VISIT_CAP,
) -> DotSubtypeOutcome:
    """Search for a derivation of at most `fuel` rule applications.

    A "yes" answer is sound; "unknown" is inconclusive.  The AND-BIND axiom
    and the AND-I' typing rule are the two extensions and can be disabled.
    `max_visits` bounds total search work deterministically (0 = unbounded);
    an exhausted budget reports "unknown".
    """
    fuel = max(1, min(fuel, DOT_FUEL_CAP))
    if sys.getrecursionlimit() < 30_000:
        sys.setrecursionlimit(30_000)
    env = DotEnv(tuple((x, expand_type(b)) for x, b in env.binds))
    search = _DotSearch(and_bind, and_intro)
    search.max_visits = max_visits
    s, t = expand_type(s), expand_type(t)
    rungs, f = [], 3
    while f < fuel:
        rungs.append(f)
        f = f * 2
    rungs.append(fuel)
    try:
        for rung in rungs:
            result = search.prove(env, s, t, rung)
            if result is not None:
                return DotSubtypeOutcome("yes", result[0], tuple(result[1]))
    except _SearchBudget:
        pass
    return DotSubtypeOutcome("unknown")
