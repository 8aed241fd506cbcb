"""Class-table lookup: parents, linearization, member declarations, method
and type-member lookup with prefix/type-argument substitution, implementer
resolution, and abstract/concrete member accounting.

All lookups live on a `Lookup` wrapper around an immutable ClassTable; results
are memoized per instance.  Lookup failures raise MemberError carrying a rule
name; callers convert to diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Applied,
    ClassDecl,
    ClassTable,
    Expr,
    Intersection,
    Level,
    MethodDecl,
    NOTHING,
    OBJECT,
    Selection,
    SourceType,
    Subst,
    THIS,
    TypeMemberDecl,
    TypeParam,
    TypeVar,
    UnionType,
    VParam,
    apply_subst,
    subst_expr,
)


class MemberError(Exception):
    """A failed lookup: carries the violated rule and a message."""

    def __init__(self, rule: str, message: str):
        self.rule = rule
        self.message = message
        super().__init__(f"[{rule}] {message}")


@dataclass(frozen=True)
class MethodType:
    """[Y <: P] -> (x: U) -> U0, the looked-up signature of a method."""

    tparams: tuple[TypeParam, ...]
    params: tuple[VParam, ...]
    result: SourceType

    def __str__(self) -> str:
        tp = f"[{', '.join(f'{p.name} <: {p.bound}' for p in self.tparams)}]" if self.tparams else ""
        ps = ", ".join(f"{p.name}: {p.type}" for p in self.params)
        return f"{tp}({ps}): {self.result}"


@dataclass(frozen=True)
class TypeBounds:
    lower: SourceType
    upper: SourceType

    def __str__(self) -> str:
        return f"{self.lower} .. {self.upper}"


def _decl_subst(decl: ClassDecl, args: tuple[SourceType, ...],
                prefix: Optional[str] = None) -> Subst:
    """sigma-theta: declared class variables to args, `this` to prefix, applied
    simultaneously (arguments are never rewritten by the prefix renaming)."""
    if len(decl.tparams) != len(args):
        raise MemberError("ARITY", f"{decl.name} expects {len(decl.tparams)} type "
                                   f"arguments, got {len(args)}")
    tmap = {(p.name, "class"): a for p, a in zip(decl.tparams, args)}
    vmap = {THIS: prefix} if prefix is not None and prefix != THIS else {}
    return Subst(tmap=tmap, vmap=vmap)


def subst_method(s: Subst, m: MethodDecl) -> MethodDecl:
    return MethodDecl(
        m.name,
        tuple(TypeParam(p.name, apply_subst(s, p.bound)) for p in m.tparams),
        tuple(VParam(p.name, apply_subst(s, p.type)) for p in m.params),
        apply_subst(s, m.result),
        subst_expr(s, m.body) if m.body is not None else None,
        m.pos,
    )


def method_type_of(m: MethodDecl) -> MethodType:
    return MethodType(m.tparams, m.params, m.result)


def alpha_equal_mtype(a: MethodType, b: MethodType) -> Optional[MethodType]:
    """If a and b agree up to renaming of their binders (same bounds, same
    parameter types after renaming b's names to a's), return b renamed into
    a's names; otherwise None."""
    if len(a.tparams) != len(b.tparams) or len(a.params) != len(b.params):
        return None
    ren = Subst(
        tmap={(bp.name, "method"): TypeVar(ap.name, "method")
              for ap, bp in zip(a.tparams, b.tparams)},
        vmap={bp.name: ap.name for ap, bp in zip(a.params, b.params)},
    )
    b_renamed = MethodType(
        tuple(TypeParam(ap.name, apply_subst(ren, bp.bound))
              for ap, bp in zip(a.tparams, b.tparams)),
        tuple(VParam(ap.name, apply_subst(ren, bp.type))
              for ap, bp in zip(a.params, b.params)),
        apply_subst(ren, b.result),
    )
    for ap, bp in zip(a.tparams, b_renamed.tparams):
        if ap.bound != bp.bound:
            return None
    for ap, bp in zip(a.params, b_renamed.params):
        if ap.type != bp.type:
            return None
    return b_renamed


def intersection_operands(t: SourceType) -> list[SourceType]:
    """Flatten nested intersections into their operand list (left to right)."""
    if isinstance(t, Intersection):
        return intersection_operands(t.left) + intersection_operands(t.right)
    return [t]


class Lookup:
    """Memoizing lookup functions over one class table."""

    def __init__(self, table: ClassTable):
        self.table = table
        self._lin: dict[Applied, tuple[Applied, ...]] = {}
        self._name_order: dict[str, list[str]] = {}
        self._mnames: dict[str, tuple[list[str], list[str]]] = {}
        self._tnames: dict[str, list[str]] = {}

    # -- declarations -------------------------------------------------------

    def decl(self, name: str) -> ClassDecl:
        if name not in self.table.classes:
            raise MemberError("UNKNOWN-CLASS", f"unknown class {name!r}")
        return self.table.classes[name]

    def is_proper_class(self, t: SourceType) -> bool:
        if not isinstance(t, Applied):
            return False
        if t.name in ("Object", "Boolean"):
            return True
        if t.name == "Nothing":
            return False
        return t.name in self.table.classes and not self.decl(t.name).is_trait

    def is_trait(self, t: SourceType) -> bool:
        return (isinstance(t, Applied) and t.name in self.table.classes
                and self.decl(t.name).is_trait)

    def tparams(self, name: str) -> tuple[TypeParam, ...]:
        if name in ("Object", "Boolean", "Nothing"):
            return ()
        return self.decl(name).tparams

    def declared_applied(self, name: str) -> Applied:
        """C[X̄]: the class applied to its own declared type variables."""
        return Applied(name, tuple(TypeVar(p.name, "class") for p in self.tparams(name)))

    # -- parents and linearization -------------------------------------------

    def parents(self, n: Applied) -> list[Applied]:
        if n.name == "Object":
            return []
        if n.name == "Boolean":
            if self.table.level < Level.PLS:
                raise MemberError("UNKNOWN-CLASS", "Boolean requires level PLS")
            return [OBJECT]
        if n.name == "Nothing":
            raise MemberError("PARENTS", "Nothing has no members or parents")
        decl = self.decl(n.name)
        s = _decl_subst(decl, n.args)

        def sub(p: Applied) -> Applied:
            out = apply_subst(s, p)
            assert isinstance(out, Applied)
            return out

        if decl.is_trait:
            return [OBJECT] + [sub(p) for p in decl.trait_parents]
        assert decl.parent is not None
        return [sub(decl.parent)] + [sub(p) for p in decl.trait_parents]

    def linearize(self, n: Applied) -> tuple[Applied, ...]:
        if n in self._lin:
            return self._lin[n]
        out = tuple(self._linearize(n, ()))
        self._lin[n] = out
        return out

    def _linearize(self, n: Applied, in_progress: tuple[str, ...]) -> list[Applied]:
        if n.name in in_progress:
            raise MemberError("CT-CYCLE", f"inheritance cycle through {n.name!r}")
        ps = self.parents(n)
        acc: list[Applied] = []
        for p in reversed(ps):
            acc = _merge_right_priority(acc, self._linearize(p, in_progress + (n.name,)))
        return [n] + acc

    def _linearize_names(self, name: str) -> list[str]:
        """Name-level linearization order (for canonical member ordering)."""
        if name in self._name_order:
            return self._name_order[name]
        lin = self.linearize(self.declared_applied(name))
        order = [entry.name for entry in lin]
        self._name_order[name] = order
        return order

    # -- member declarations --------------------------------------------------

    def mdecls(self, n: Applied) -> list[MethodDecl]:
        """All methods declared by n's class, sigma-substituted (traits include
        abstract signatures)."""
        if n.name in ("Object", "Boolean", "Nothing"):
            return []
        decl = self.decl(n.name)
        s = _decl_subst(decl, n.args)
        if s.is_identity():
            return list(decl.methods)
        return [subst_method(s, m) for m in decl.methods]

    def tdecls(self, n: Applied) -> list[TypeMemberDecl]:
        if n.name in ("Object", "Boolean", "Nothing"):
            return []
        decl = self.decl(n.name)
        s = _decl_subst(decl, n.args)
        return [TypeMemberDecl(d.label, apply_subst(s, d.lower), apply_subst(s, d.upper),
                               d.pos)
                for d in decl.type_members]

    # -- abstract/concrete accounting ------------------------------------------

    def mnames(self, name: str) -> tuple[list[str], list[str]]:
        """(concrete, abstract) method names of a class, each in canonical
        first-introduction order (most basic class first)."""
        if name in self._mnames:
            return self._mnames[name]
        con, abs_ = self._mnames_sets(name)
        order = self._member_order(name, lambda d: [m.name for m in d.methods])
        out = (sorted(con, key=order.index), sorted(abs_, key=order.index))
        self._mnames[name] = out
        return out

    def _mnames_sets(self, name: str) -> tuple[set[str], set[str]]:
        if name in ("Object", "Boolean", "Nothing"):
            return set(), set()
        decl = self.decl(name)
        own_con = {m.name for m in decl.methods if m.body is not None}
        own_abs = {m.name for m in decl.methods if m.body is None}
        parents_con: set[str] = set()
        parents_abs: set[str] = set()
        for p in self.parents(self.declared_applied(name)):
            pc, pa = self._mnames_sets(p.name)
            parents_con |= pc
            parents_abs |= pa
        con = own_con | (parents_con - own_abs)
        abs_ = (own_abs | (parents_abs - parents_con)) - own_con
        return con, abs_

    def all_mnames(self, name: str) -> list[str]:
        con, abs_ = self.mnames(name)
        order = self._member_order(name, lambda d: [m.name for m in d.methods])
        return sorted(set(con) | set(abs_), key=order.index)

    def tnames(self, name: str) -> list[str]:
        """All type-member labels of a class, canonical order."""
        if name in self._tnames:
            return self._tnames[name]
        labels: set[str] = set()
        stack = [name]
        seen = set()
        while stack:
            c = stack.pop()
            if c in seen or c in ("Object", "Boolean", "Nothing"):
                continue
            seen.add(c)
            d = self.decl(c)
            labels |= {t.label for t in d.type_members}
            stack.extend(p.name for p in self.parents(self.declared_applied(c)))
        order = self._member_order(name, lambda d: [t.label for t in d.type_members])
        out = sorted(labels, key=order.index)
        self._tnames[name] = out
        return out

    def _member_order(self, name: str, names_of) -> list[str]:
        order: list[str] = []
        for entry in reversed(self._linearize_names(name)):
            if entry in ("Object", "Boolean", "Nothing"):
                continue
            for m in names_of(self.decl(entry)):
                if m not in order:
                    order.append(m)
        return order

    # -- method type lookup -----------------------------------------------------

    def mtype(self, prefix: str, m: str, t: SourceType) -> MethodType:
        """mtype(prefix.m, t): the signature of m on a receiver of (already
        bounded, non-variable) type t, with `this` renamed to the prefix."""
        if isinstance(t, Applied):
            if t.name in ("Object", "Boolean", "Nothing"):
                if t.name == "Boolean" and m == "if":
                    raise MemberError(
                        "M-NOTFOUND", "the conditional is not a source-level method")
                raise MemberError("M-NOTFOUND", f"no method {m!r} on {t}")
            decl = self.decl(t.name)
            declared = decl.method(m)
            if declared is not None:
                s = _decl_subst(decl, t.args, prefix)
                return method_type_of(subst_method(s, declared))
            ps = self.parents(t)
            if not ps:
                raise MemberError("M-NOTFOUND", f"no method {m!r} on {t}")
            joined = ps[0]
            for p in ps[1:]:
                joined = Intersection(joined, p)
            return self.mtype(prefix, m, joined)
        if isinstance(t, Intersection):
            left = right = None
            try:
                left = self.mtype(prefix, m, t.left)
            except MemberError as e:
                if e.rule != "M-NOTFOUND":
                    raise
            try:
                right = self.mtype(prefix, m, t.right)
            except MemberError as e:
                if e.rule != "M-NOTFOUND":
                    raise
            if left is not None and right is not None:
                renamed = alpha_equal_mtype(left, right)
                if renamed is None:
                    raise MemberError(
                        "M-MISMATCH",
                        f"method {m!r} has incompatible signatures on the two sides "
                        f"of {t}: {left} vs {right}")
                return MethodType(left.tparams, left.params,
                                  Intersection(left.result, renamed.result))
            if left is not None:
                return left
            if right is not None:
                return right
            raise MemberError("M-NOTFOUND", f"no method {m!r} on {t}")
        raise MemberError("M-NOTFOUND", f"method lookup needs a class type, got {t}")

    # -- type member lookup -------------------------------------------------------

    def ttype(self, prefix: str, label: str, t: SourceType) -> TypeBounds:
        """ttype(prefix.label, t): bounds of a type member on receiver type t."""
        if isinstance(t, Applied):
            if t.name in ("Object", "Boolean", "Nothing"):
                raise MemberError("T-NOTFOUND", f"no type member {label!r} on {t}")
            decl = self.decl(t.name)
            declared = decl.type_member(label)
            if declared is not None:
                s = _decl_subst(decl, t.args, prefix)
                return TypeBounds(apply_subst(s, declared.lower),
                                  apply_subst(s, declared.upper))
            ps = self.parents(t)
            if not ps:
                raise MemberError("T-NOTFOUND", f"no type member {label!r} on {t}")
            joined = ps[0]
            for p in ps[1:]:
                joined = Intersection(joined, p)
            return self.ttype(prefix, label, joined)
        if isinstance(t, Intersection):
            left = right = None
            try:
                left = self.ttype(prefix, label, t.left)
            except MemberError as e:
                if e.rule != "T-NOTFOUND":
                    raise
            try:
                right = self.ttype(prefix, label, t.right)
            except MemberError as e:
                if e.rule != "T-NOTFOUND":
                    raise
            if left is not None and right is not None:
                return TypeBounds(UnionType(left.lower, right.lower),
                                  Intersection(left.upper, right.upper))
            if left is not None:
                return left
            if right is not None:
                return right
            raise MemberError("T-NOTFOUND", f"no type member {label!r} on {t}")
        raise MemberError("T-NOTFOUND", f"type-member lookup needs a class type, got {t}")

    # -- implementer resolution ------------------------------------------------------

    def mimpl(self, m: str, n: Applied) -> Applied:
        """The first linearization element concretely implementing m."""
        for entry in self.linearize(n):
            if entry.name in ("Object", "Boolean", "Nothing"):
                continue
            declared = self.decl(entry.name).method(m)
            if declared is not None and declared.body is not None:
                return entry
        raise MemberError("M-NOIMPL", f"no concrete implementation of {m!r} in L({n})")

    def mbody(self, m: str, n: Applied) -> MethodDecl:
        """The implementer's declaration of m with its entry substitution
        applied (parameters, result, and body)."""
        entry = self.mimpl(m, n)
        decl = self.decl(entry.name)
        declared = decl.method(m)
        assert declared is not None and declared.body is not None
        return subst_method(_decl_subst(decl, entry.args), declared)

    def mdecl_at(self, m: str, n: Applied) -> Optional[MethodDecl]:
        """n's class's own declaration of m, substituted (None if undeclared)."""
        if n.name in ("Object", "Boolean", "Nothing"):
            return None
        decl = self.decl(n.name)
        declared = decl.method(m)
        if declared is None:
            return None
        return subst_method(_decl_subst(decl, n.args), declared)

    # -- value parameters -----------------------------------------------------------

    def vparams(self, t: SourceType) -> list[VParam]:
        if isinstance(t, Applied):
            if t.name in ("Object", "Boolean"):
                return []
            if t.name == "Nothing":
                raise MemberError("VPARAMS", "Nothing has no fields")
            decl = self.decl(t.name)
            if decl.is_trait:
                return []
            s = _decl_subst(decl, t.args)
            return [VParam(p.name, apply_subst(s, p.type)) for p in decl.vparams]
        if isinstance(t, Intersection):
            left = self.vparams(t.left)
            right = self.vparams(t.right)
            lset = {(p.name, p.type) for p in left}
            rset = {(p.name, p.type) for p in right}
            if rset <= lset:
                return left
            if lset <= rset:
                return right
            raise MemberError("VPARAMS", f"incomparable field lists on {t}")
        raise MemberError("VPARAMS", f"field lookup needs a class type, got {t}")


def _merge_right_priority(left: list[Applied], right: list[Applied]) -> list[Applied]:
    """The linearization merge: left ++ right, where identical elements on the
    right replace their left occurrences; the same class with different
    arguments is a conflict."""
    right_by_name = {e.name: e for e in right}
    out: list[Applied] = []
    for e in left:
        r = right_by_name.get(e.name)
        if r is None:
            out.append(e)
        elif r != e:
            raise MemberError(
                "LIN-CONFLICT",
                f"class {e.name!r} inherited twice with different arguments: "
                f"{e} vs {r}")
        # identical: dropped, the right occurrence survives
    return out + right
