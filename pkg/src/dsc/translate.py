"""Translation of checked source programs into the core object calculus.

Types map onto selections against a class-table object (`ct.C`) intersected
with type-argument equality records; expressions map onto calls against that
object.  Each class contributes a type tag and, for proper classes, a
constructor whose result object carries field getters, diamond-resolved
method bodies, parent type-argument equalities, and type members.

Method bodies are re-typed per constructing class (on identity-fresh copies)
because the conditional translation reads the typed result of each `if`.
"""

from __future__ import annotations

from typing import Optional

from . import dot as d
from .classtable import Lookup, MethodType
from .subtyping import bound as algo_bound
from .syntax import (
    Applied,
    BUILTIN_CLASSES,
    Block,
    BoolLit,
    EMPTY_ENV,
    Expr,
    Getter,
    If,
    Intersection,
    Invoke,
    InvokeGeneral,
    Level,
    New,
    Selection,
    SourceType,
    Subst,
    THIS,
    TypeEnv,
    TypeVar,
    UnionType,
    Var,
    copy_expr,
    subst_expr,
)
from .typecheck import Checker, TypedProgram


def translate_type(lookup: Lookup, t: SourceType, mtag: str = "mtag") -> d.DotType:
    """|T|: class types select on `ct`, class variables on `this`, method
    variables on the enclosing method's tag parameter."""
    if isinstance(t, Applied):
        if t.name == "Nothing":
            return d.BOT
        head: d.DotType = d.Sel("ct", t.name)
        if not t.args:
            return head
        names = [p.name for p in lookup.tparams(t.name)]
        eqs = [d.alias(x, translate_type(lookup, a, mtag))
               for x, a in zip(names, t.args)]
        return d.And(head, d.Rec("_", d.intersect(eqs)))
    if isinstance(t, TypeVar):
        return d.Sel(THIS if t.flavor == "class" else mtag, t.name)
    if isinstance(t, Intersection):
        return d.And(translate_type(lookup, t.left, mtag),
                     translate_type(lookup, t.right, mtag))
    if isinstance(t, UnionType):
        return d.Or(translate_type(lookup, t.left, mtag),
                    translate_type(lookup, t.right, mtag))
    if isinstance(t, Selection):
        return d.Sel(t.prefix, t.label)
    raise TypeError(f"not a source type: {t!r}")


def _retarget(t: d.DotType, tvars: frozenset[str]) -> d.DotType:
    """The constructor rewrite: this.X becomes ctag.X for the class's own
    type variables."""
    if isinstance(t, (d.Top, d.Bot)):
        return t
    if isinstance(t, d.Sel):
        if t.var == THIS and t.label in tvars:
            return d.Sel("ctag", t.label)
        return t
    if isinstance(t, d.TypeMember):
        return d.TypeMember(t.label, _retarget(t.lower, tvars), _retarget(t.upper, tvars))
    if isinstance(t, d.MethodMember):
        params = tuple(
            d.DotParam(p.name, _retarget(p.type, tvars) if p.type is not None else None)
            for p in t.params
        )
        return d.MethodMember(t.name, params, _retarget(t.result, tvars))
    if isinstance(t, d.Rec):
        if t.self_var == THIS:
            return t
        return d.Rec(t.self_var, _retarget(t.body, tvars))
    if isinstance(t, d.And):
        return d.And(_retarget(t.left, tvars), _retarget(t.right, tvars))
    if isinstance(t, d.Or):
        return d.Or(_retarget(t.left, tvars), _retarget(t.right, tvars))
    raise TypeError(f"not a type: {t!r}")


class Translator:
    """Stateful translation of one checked program; output is deterministic,
    with tag variables numbered in traversal order."""

    def __init__(self, tp: TypedProgram) -> None:
        self.tp = tp
        self.lookup = tp.lookup
        self.level = tp.level
        self.checker = Checker(tp.lookup, file="<translated>")
        self._bodies: list[Expr] = []  # keeps body copies alive; ids key the side table
        self._mtag_n = 0
        self._ctag_n = 0
        self._mtag = "mtag"

    @property
    def generics(self) -> bool:
        return self.level >= Level.FGJ

    # -- types ---------------------------------------------------------------

    def type(self, t: SourceType) -> d.DotType:
        return translate_type(self.lookup, t, self._mtag)

    def _type_of(self, e: Expr) -> SourceType:
        got = self.checker.types.get(id(e))
        return got if got is not None else self.tp.types[id(e)]

    # -- member types ----------------------------------------------------------

    def _tag_var(self, mt: MethodType) -> str:
        return "$mtag" if any(vp.name == "mtag" for vp in mt.params) else "mtag"

    def _member_from_mtype(self, name: str, mt: MethodType) -> d.MethodMember:
        params: list[d.DotParam] = []
        saved = self._mtag
        self._mtag = self._tag_var(mt)
        try:
            if self.generics:
                bounds = [d.TypeMember(p.name, d.BOT, self.type(p.bound))
                          for p in mt.tparams]
                params.append(d.DotParam(self._mtag, d.Rec(self._mtag, d.intersect(bounds))))
            params.extend(d.DotParam(vp.name, self.type(vp.type)) for vp in mt.params)
            result = self.type(mt.result)
        finally:
            self._mtag = saved
        return d.MethodMember(name, tuple(params), result)

    def base_args(self, name: str) -> list[d.DotType]:
        """Parent type-argument equalities, one visit per base, ending in the
        Object contribution."""
        out: list[d.DotType] = []
        visited: set[str] = set()

        def walk(cname: str) -> None:
            if cname in visited:
                return
            visited.add(cname)
            if cname in BUILTIN_CLASSES:
                out.append(d.TOP)
                return
            for p in self.lookup.parents(self.lookup.declared_applied(cname)):
                if p.args:
                    names = [tp.name for tp in self.lookup.tparams(p.name)]
                    out.extend(d.alias(x, self.type(a))
                               for x, a in zip(names, p.args))
                walk(p.name)

        walk(name)
        return out

    def class_iface(self, name: str) -> d.DotType:
        """The member type of a fully constructed instance: getters, joined
        method signatures, parent argument equalities, type-member bounds."""
        n = self.lookup.declared_applied(name)
        parts: list[d.DotType] = [
            d.MethodMember(vp.name, (), self.type(vp.type))
            for vp in self.lookup.vparams(n)
        ]
        for m in self.lookup.all_mnames(name):
            parts.append(self._member_from_mtype(m, self.lookup.mtype(THIS, m, n)))
        if self.generics:
            parts.extend(self.base_args(name))
        if self.level >= Level.DS:
            for label in self.lookup.tnames(name):
                tb = self.lookup.ttype(THIS, label, n)
                parts.append(d.TypeMember(label, self.type(tb.lower), self.type(tb.upper)))
        return d.intersect(parts)

    def class_tag(self, name: str) -> d.TypeTag:
        decl = self.lookup.decl(name)
        conj: list[d.DotType] = []
        if not decl.is_trait:
            assert decl.parent is not None
            conj.append(d.Sel("ct", decl.parent.name))
        conj.extend(d.Sel("ct", q.name) for q in decl.trait_parents)
        rec_parts = [self.class_iface(name)]
        rec_parts.extend(d.TypeMember(p.name, d.BOT, self.type(p.bound))
                         for p in decl.tparams)
        conj.append(d.Rec(THIS, d.intersect(rec_parts)))
        return d.TypeTag(name, d.intersect(conj))

    def _ctor_member(self, name: str) -> d.MethodMember:
        decl = self.lookup.decl(name)
        n = self.lookup.declared_applied(name)
        tvars = frozenset(p.name for p in decl.tparams)
        params: list[d.DotParam] = []
        if self.generics:
            bounds = [d.TypeMember(p.name, d.BOT, self.type(p.bound))
                      for p in decl.tparams]
            params.append(d.DotParam("ctag", d.Rec(THIS, d.intersect(bounds))))
        params.extend(
            d.DotParam(vp.name + "param", _retarget(self.type(vp.type), tvars))
            for vp in self.lookup.vparams(n)
        )
        return d.MethodMember("new" + name, tuple(params),
                              _retarget(self.type(n), tvars))

    def constructor(self, name: str) -> d.MethodDef:
        decl = self.lookup.decl(name)
        n = self.lookup.declared_applied(name)
        member = self._ctor_member(name)
        decls: list[d.DotDecl] = [
            d.MethodDef(vp.name, (), self.type(vp.type), d.Var(vp.name + "param"))
            for vp in self.lookup.vparams(n)
        ]
        for m in self.lookup.mnames(name)[0]:
            decls.append(self._method_def(name, n, m))
        if self.generics:
            decls.extend(d.TypeTag(t.label, t.upper)
                         for t in self.base_args(name)
                         if isinstance(t, d.TypeMember))
        if self.level >= Level.DS:
            for label in self.lookup.tnames(name):
                tb = self.lookup.ttype(THIS, label, n)
                decls.append(d.TypeTag(label, self.type(tb.upper)))
        decls.extend(d.TypeTag(p.name, d.Sel("ctag", p.name)) for p in decl.tparams)
        return d.MethodDef(member.name, member.params, member.result,
                           d.Obj(THIS, tuple(decls)))

    def _method_def(self, cname: str, n: Applied, m: str) -> d.MethodDef:
        """One constructed method: the joined signature over the body of the
        linearization's implementer, renamed into the joined binders."""
        mt = self.lookup.mtype(THIS, m, n)
        bd = self.lookup.mbody(m, n)
        ren = Subst(
            tmap={(bp.name, "method"): TypeVar(ap.name, "method")
                  for ap, bp in zip(mt.tparams, bd.tparams)},
            vmap={bp.name: ap.name for ap, bp in zip(mt.params, bd.params)},
        )
        assert bd.body is not None
        body = copy_expr(subst_expr(ren, bd.body))
        self._bodies.append(body)
        env = (EMPTY_ENV.bind_tparams(self.lookup.decl(cname).tparams, "class")
               .bind_term(THIS, n)
               .bind_tparams(mt.tparams, "method"))
        for vp in mt.params:
            env = env.bind_term(vp.name, vp.type)
        self.checker.type_expr(env, body)
        member = self._member_from_mtype(m, mt)
        saved = self._mtag
        self._mtag = self._tag_var(mt)
        try:
            dot_body = self.expr(env, body)
        finally:
            self._mtag = saved
        return d.MethodDef(m, member.params, member.result, dot_body)

    # -- expressions -----------------------------------------------------------

    def expr(self, env: TypeEnv, e: Expr) -> d.DotTerm:
        if isinstance(e, Var):
            return d.Var(e.name)
        if isinstance(e, Getter):
            return d.Invoke(self.expr(env, e.receiver), e.fieldname, ())
        if isinstance(e, BoolLit):
            return d.Invoke(d.Var("ct"), "true" if e.value else "false", ())
        if isinstance(e, If):
            v = self._fresh_mtag()
            tag = d.Obj("_", (d.TypeTag("A", self.type(self._type_of(e))),))
            return d.Let(v, tag, d.Invoke(
                self.expr(env, e.cond), "if",
                (d.Var(v), self.expr(env, e.then), self.expr(env, e.els))))
        if isinstance(e, New):
            if e.type.name == "Object":
                return d.unit()
            ctor = "new" + e.type.name
            if not self.generics:
                return d.Invoke(d.Var("ct"), ctor,
                                tuple(self.expr(env, a) for a in e.args))
            v = f"$ctag{self._ctag_n}"
            self._ctag_n += 1
            names = [p.name for p in self.lookup.tparams(e.type.name)]
            tag = d.Obj("_", tuple(d.TypeTag(x, self.type(a))
                                   for x, a in zip(names, e.type.args)))
            args = tuple(self.expr(env, a) for a in e.args)
            return d.Let(v, tag, d.Invoke(d.Var("ct"), ctor, (d.Var(v),) + args))
        if isinstance(e, Invoke):
            recv_type = env.lookup_term(e.receiver)
            assert recv_type is not None
            return self._call(env, e, d.Var(e.receiver), recv_type,
                              tuple(d.Var(a) for a in e.args))
        if isinstance(e, InvokeGeneral):
            if not self.generics:
                return d.Invoke(self.expr(env, e.receiver), e.method,
                                tuple(self.expr(env, a) for a in e.args))
            v = self._fresh_mtag()
            recv = self.expr(env, e.receiver)
            tag = self._call_tag(env, self._type_of(e.receiver), e.method, e.targs)
            args = tuple(self.expr(env, a) for a in e.args)
            return d.Let(v, tag, d.Invoke(recv, e.method, (d.Var(v),) + args))
        if isinstance(e, Block):
            inner = env.bind_term(e.var, self._type_of(e.init))
            return d.Let(e.var, self.expr(env, e.init), self.expr(inner, e.body))
        raise TypeError(f"not an expression: {e!r}")

    def _call(self, env: TypeEnv, e: Invoke, recv: d.DotTerm,
              recv_type: SourceType, args: tuple[d.DotTerm, ...]) -> d.DotTerm:
        if not self.generics:
            return d.Invoke(recv, e.method, args)
        v = self._fresh_mtag()
        tag = self._call_tag(env, recv_type, e.method, e.targs)
        return d.Let(v, tag, d.Invoke(recv, e.method, (d.Var(v),) + args))

    def _call_tag(self, env: TypeEnv, recv_type: SourceType, m: str,
                  targs: tuple[SourceType, ...]) -> d.Obj:
        """The `{_ => Y = |V|}` argument carrying a call's method type args."""
        b = algo_bound(self.lookup, env, recv_type)
        mt = self.lookup.mtype(THIS, m, b)
        names = [p.name for p in mt.tparams]
        return d.Obj("_", tuple(d.TypeTag(y, self.type(V))
                                for y, V in zip(names, targs)))

    def _fresh_mtag(self) -> str:
        v = f"$mtag{self._mtag_n}"
        self._mtag_n += 1
        return v

    # -- built-ins and assembly --------------------------------------------------

    def _boolean_member(self) -> d.MethodMember:
        bounds = d.Rec("_", d.TypeMember("A", d.BOT, d.TOP))
        return d.MethodMember("if", (
            d.DotParam("mtag", bounds),
            d.DotParam("t", d.Sel("mtag", "A")),
            d.DotParam("f", d.Sel("mtag", "A")),
        ), d.Sel("mtag", "A"))

    def _boolean_decls(self) -> list[d.DotDecl]:
        out: list[d.DotDecl] = [d.TypeTag("Boolean", self._boolean_member())]
        for name, pick in (("true", "t"), ("false", "f")):
            body = d.Obj("_", (d.MethodDef(
                "if", (d.DotParam("mtag"), d.DotParam("t"), d.DotParam("f")),
                None, d.Var(pick)),))
            out.append(d.MethodDef(name, (), d.Sel("ct", "Boolean"), body))
        return out

    def table_decls(self) -> tuple[d.DotDecl, ...]:
        decls: list[d.DotDecl] = [d.TypeTag("Object", d.TOP)]
        if self.level >= Level.PLS:
            decls.extend(self._boolean_decls())
        for name in self.tp.program.table.names():
            decls.append(self.class_tag(name))
            if not self.lookup.decl(name).is_trait:
                decls.append(self.constructor(name))
        return tuple(decls)

    def table_type(self) -> d.Rec:
        """The type of the class-table object (tags as aliases, constructors
        as method members)."""
        parts: list[d.DotType] = [d.TypeMember("Object", d.TOP, d.TOP)]
        if self.level >= Level.PLS:
            member = self._boolean_member()
            parts.append(d.TypeMember("Boolean", member, member))
            parts.append(d.MethodMember("true", (), d.Sel("ct", "Boolean")))
            parts.append(d.MethodMember("false", (), d.Sel("ct", "Boolean")))
        for name in self.tp.program.table.names():
            tag = self.class_tag(name)
            parts.append(d.TypeMember(tag.label, tag.type, tag.type))
            if not self.lookup.decl(name).is_trait:
                parts.append(self._ctor_member(name))
        return d.Rec("ct", d.intersect(parts))

    def program(self) -> d.DotTerm:
        decls = self.table_decls()
        main = self.expr(EMPTY_ENV, self.tp.program.main)
        return d.Let("ct", d.Obj("ct", decls), main)


def translate_program(tp: TypedProgram) -> d.DotTerm:
    """`let ct = {ct => table} in |main|`."""
    return Translator(tp).program()


def table_type(tp: TypedProgram) -> d.Rec:
    return Translator(tp).table_type()
