"""Expression typing, method/class/table checking, and override validation
for every language level.

Wherever a typing rule demands a subtype premise, the checker runs the
algorithmic relation; the declarative one exists only as a test oracle.
Diagnostics carry the name of the violated rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .classtable import (
    Lookup,
    MemberError,
    MethodType,
    TypeBounds,
    _decl_subst,
    alpha_equal_mtype,
    method_type_of,
)
from .parser import desugar_program
from .subtyping import DEFAULT_FUEL, FuelExhausted, Subtyper, algo_subtype
from .syntax import (
    Applied,
    BOOLEAN,
    Block,
    BoolLit,
    ClassDecl,
    Diagnostic,
    EMPTY_ENV,
    Expr,
    Getter,
    If,
    Intersection,
    Invoke,
    InvokeGeneral,
    Level,
    MethodDecl,
    New,
    Pos,
    Program,
    Selection,
    SourceError,
    SourceType,
    Subst,
    THIS,
    TypeEnv,
    TypeVar,
    UnionType,
    Var,
    apply_subst,
    subst_expr,
)

# Rule-name prefix for the typing judgment at each level.
_PREFIX = {Level.FJ: "T", Level.FGJ: "GT", Level.PS: "PT", Level.PLS: "PT",
           Level.DS: "DT"}


@dataclass
class TypedProgram:
    """A checked program: the (desugared) tree plus a type for every
    expression node, keyed by node identity."""

    program: Program
    lookup: Lookup
    main_type: SourceType
    types: dict[int, SourceType] = field(default_factory=dict)

    @property
    def level(self) -> Level:
        return self.program.table.level

    def type_of(self, e: Expr) -> SourceType:
        return self.types[id(e)]


class Checker:
    def __init__(self, lookup: Lookup, fuel: int = DEFAULT_FUEL,
                 file: str = "<input>"):
        self.lookup = lookup
        self.level = lookup.table.level
        self.fuel = fuel
        self.file = file
        self.types: dict[int, SourceType] = {}

    # -- small helpers ---------------------------------------------------------

    def _rule(self, stem: str) -> str:
        return f"{_PREFIX[self.level]}-{stem}"

    def _fail(self, rule: str, message: str, pos: Pos):
        raise SourceError([Diagnostic(rule, message, pos, self.file)])

    def _subtyper(self) -> Subtyper:
        return Subtyper(self.lookup, fuel=self.fuel)

    def _is_subtype(self, env: TypeEnv, s: SourceType, t: SourceType,
                    rule: str, pos: Pos, what: str) -> None:
        out = algo_subtype(self.lookup, env, s, t, fuel=self.fuel)
        if out.fuel_exhausted:
            self._fail("FUEL", f"{what}: could not decide {s} <: {t} "
                               f"within the fuel budget", pos)
        if not out.holds:
            self._fail(rule, f"{what}: {s} is not a subtype of {t}", pos)

    def _member(self, thunk, pos: Pos):
        """Run a lookup; convert a MemberError into a positioned diagnostic."""
        try:
            return thunk()
        except MemberError as e:
            raise SourceError([Diagnostic(e.rule, e.message, pos, self.file)])
        except FuelExhausted:
            self._fail("FUEL", "lookup exceeded the fuel budget", pos)

    # -- well-formedness with reasons ---------------------------------------------

    def check_wf(self, env: TypeEnv, t: SourceType, pos: Pos) -> None:
        if isinstance(t, TypeVar):
            if env.lookup_tvar(t.name) is None:
                self._fail("WF-VAR", f"type variable {t.name!r} is not in scope", pos)
            return
        if isinstance(t, Applied):
            if t.name in ("Object", "Boolean", "Nothing"):
                if t.args:
                    self._fail("WF-CLASS", f"{t.name} takes no type arguments", pos)
                return
            decl = self._member(lambda: self.lookup.decl(t.name), pos)
            if len(decl.tparams) != len(t.args):
                self._fail("WF-CLASS",
                           f"{t.name} expects {len(decl.tparams)} type "
                           f"arguments, got {len(t.args)}", pos)
            for a in t.args:
                self.check_wf(env, a, pos)
            s = _decl_subst(decl, t.args)
            for a, p in zip(t.args, decl.tparams):
                self._is_subtype(env, a, apply_subst(s, p.bound), "WF-CLASS", pos,
                                 f"type argument {a} of {t}")
            return
        if isinstance(t, Intersection):
            self.check_wf(env, t.left, pos)
            self.check_wf(env, t.right, pos)
            return
        if isinstance(t, UnionType):
            self.check_wf(env, t.left, pos)
            self.check_wf(env, t.right, pos)
            return
        if isinstance(t, Selection):
            u = env.lookup_term(t.prefix)
            if u is None:
                self._fail("WFD-TSEL", f"variable {t.prefix!r} is not in scope", pos)
            sub = self._subtyper()
            self._member(lambda: sub.ttype(env, t.prefix, t.label,
                                           sub.bound(env, u)), pos)
            return
        self._fail("WF-CLASS", f"unrecognized type {t}", pos)

    # -- expression typing ------------------------------------------------------------

    def type_expr(self, env: TypeEnv, e: Expr) -> SourceType:
        t = self._type_expr(env, e)
        self.types[id(e)] = t
        return t

    def _type_expr(self, env: TypeEnv, e: Expr) -> SourceType:
        if isinstance(e, Var):
            t = env.lookup_term(e.name)
            if t is None:
                self._fail(self._rule("VAR"), f"unbound variable {e.name!r}", e.pos)
            return t

        if isinstance(e, Getter):
            t0 = self.type_expr(env, e.receiver)
            sub = self._subtyper()
            fields = self._member(
                lambda: self.lookup.vparams(sub.bound(env, t0)), e.pos)
            for p in fields:
                if p.name == e.fieldname:
                    return p.type
            self._fail(self._rule("GETTER"),
                       f"no field {e.fieldname!r} on {t0}", e.pos)

        if isinstance(e, New):
            n = e.type
            if n.name in ("Boolean", "Nothing"):
                self._fail(self._rule("NEW"), f"{n.name} cannot be instantiated",
                           e.pos)
            if n.name != "Object":
                self._member(lambda: self.lookup.decl(n.name), e.pos)
                if not self.lookup.is_proper_class(n):
                    self._fail(self._rule("NEW"),
                               f"cannot instantiate trait {n.name}", e.pos)
            self.check_wf(env, n, e.pos)
            fields = self._member(lambda: self.lookup.vparams(n), e.pos)
            if len(fields) != len(e.args):
                self._fail(self._rule("NEW"),
                           f"new {n.name} expects {len(fields)} arguments, "
                           f"got {len(e.args)}", e.pos)
            for arg, p in zip(e.args, fields):
                s = self.type_expr(env, arg)
                self._is_subtype(env, s, p.type, self._rule("NEW"), e.pos,
                                 f"constructor argument for field {p.name!r}")
            return n

        if isinstance(e, BoolLit):
            return BOOLEAN

        if isinstance(e, If):
            t0 = self.type_expr(env, e.cond)
            self._is_subtype(env, t0, BOOLEAN, "LT-COND", e.pos,
                             "condition of if")
            t1 = self.type_expr(env, e.then)
            t2 = self.type_expr(env, e.els)
            return UnionType(t1, t2)

        if isinstance(e, Block):
            s = self.type_expr(env, e.init)
            inner = env.bind_term(e.var, s)
            t = self.type_expr(inner, e.body)
            sub = self._subtyper()
            out = self._member(lambda: sub.avoid(inner, t, e.var), e.pos)
            return out.upper

        if isinstance(e, InvokeGeneral):
            t0 = self.type_expr(env, e.receiver)
            return self._type_call(env, e, t0, prefix=THIS,
                                   arg_names=None, pos=e.pos)

        if isinstance(e, Invoke):
            t0 = env.lookup_term(e.receiver)
            if t0 is None:
                self._fail(self._rule("VAR"),
                           f"unbound variable {e.receiver!r}", e.pos)
            for x in e.args:
                if env.lookup_term(x) is None:
                    self._fail(self._rule("VAR"), f"unbound variable {x!r}", e.pos)
            return self._type_call(env, e, t0, prefix=e.receiver,
                                   arg_names=list(e.args), pos=e.pos)

        self._fail(self._rule("VAR"), f"cannot type expression {e}", e.pos)

    def _type_call(self, env: TypeEnv, e, t0: SourceType, prefix: str,
                   arg_names: Optional[list[str]], pos: Pos) -> SourceType:
        """Shared INVK premise chain: mtype on the receiver's bound, type-arg
        well-formedness and bound conformance, argument subtyping, and the
        (type- and term-) substituted result."""
        sub = self._subtyper()
        mt: MethodType = self._member(
            lambda: self.lookup.mtype(prefix, e.method, sub.bound(env, t0)), pos)
        rule = self._rule("INVK")
        if len(mt.tparams) != len(e.targs):
            self._fail(rule, f"method {e.method!r} expects {len(mt.tparams)} "
                             f"type arguments, got {len(e.targs)}", pos)
        if len(mt.params) != len(e.args):
            self._fail(rule, f"method {e.method!r} expects {len(mt.params)} "
                             f"arguments, got {len(e.args)}", pos)
        for v in e.targs:
            self.check_wf(env, v, pos)
        ren = Subst(
            tmap={(p.name, "method"): v for p, v in zip(mt.tparams, e.targs)},
            vmap={p.name: a for p, a in zip(mt.params, arg_names)}
            if arg_names is not None else {},
        )
        for v, p in zip(e.targs, mt.tparams):
            self._is_subtype(env, v, apply_subst(ren, p.bound), rule, pos,
                             f"type argument {v} of {e.method!r}")
        for i, p in enumerate(mt.params):
            want = apply_subst(ren, p.type)
            if arg_names is not None:
                got = env.lookup_term(arg_names[i])
            else:
                got = self.type_expr(env, e.args[i])
            self._is_subtype(env, got, want, rule, pos,
                             f"argument {i + 1} of {e.method!r}")
        return apply_subst(ren, mt.result)

    # -- override checks -------------------------------------------------------------

    def check_override_method(self, env: TypeEnv, m: MethodDecl, n: Applied,
                              p: Applied) -> Optional[Diagnostic]:
        """m is n's own declaration; p a parent type.  None when compatible
        or p has no such method."""
        try:
            parent_mt = self.lookup.mtype(THIS, m.name, p)
        except MemberError:
            return None  # OV-ABSENT
        own = method_type_of(m)
        renamed = alpha_equal_mtype(own, parent_mt)
        if renamed is None:
            return Diagnostic(
                "OV-PRESENT",
                f"method {m.name!r} in {n} does not match the signature "
                f"inherited from {p}: {own} vs {parent_mt}", m.pos, self.file)
        if self.level == Level.FJ:
            if own.result != renamed.result:
                return Diagnostic(
                    "T-METHOD",
                    f"method {m.name!r} in {n} changes the inherited result "
                    f"type {renamed.result} to {own.result}", m.pos, self.file)
            return None
        env2 = env.bind_tparams(m.tparams, "method")
        for vp in m.params:
            env2 = env2.bind_term(vp.name, vp.type)
        out = algo_subtype(self.lookup, env2, own.result, renamed.result,
                           fuel=self.fuel)
        if not out.holds:
            return Diagnostic(
                "OV-PRESENT",
                f"method {m.name!r} in {n} has result {own.result}, not a "
                f"subtype of the inherited result {renamed.result} from {p}",
                m.pos, self.file)
        return None

    def check_override_typemember(self, env: TypeEnv, label: str,
                                  own: TypeBounds, own_pos: Pos, n: Applied,
                                  p: Applied) -> Optional[Diagnostic]:
        """Type-member bounds may only narrow the bounds declared by p."""
        if p.name in ("Object", "Boolean", "Nothing"):
            return None
        decl = self.lookup.decl(p.name)
        if decl.type_member(label) is None:
            return None
        s = _decl_subst(decl, p.args)
        raw = decl.type_member(label)
        parent = TypeBounds(apply_subst(s, raw.lower), apply_subst(s, raw.upper))
        ok_lo = algo_subtype(self.lookup, env, parent.lower, own.lower,
                             fuel=self.fuel).holds
        ok_hi = algo_subtype(self.lookup, env, own.upper, parent.upper,
                             fuel=self.fuel).holds
        if not (ok_lo and ok_hi):
            return Diagnostic(
                "OV-TYPE",
                f"type member {label!r} in {n} declares bounds "
                f"{own.lower} .. {own.upper}, which widen the bounds "
                f"{parent.lower} .. {parent.upper} inherited from {p}",
                own_pos, self.file)
        return None

    # -- accidental override (trait diamonds) -------------------------------------------

    def _check_accidental(self, c: ClassDecl, n: Applied,
                          diags: list[Diagnostic]) -> None:
        """A concrete method may shadow another concrete implementation in
        the linearization only when both descend from a common base that
        declares the method."""
        lin = self.lookup.linearize(n)
        lin_names = {e.name for e in lin}
        concrete, _ = self.lookup.mnames(c.name)
        for m in concrete:
            try:
                impl = self.lookup.mimpl(m, n)
            except MemberError:
                continue
            impl_bases = {e.name for e in self.lookup.linearize(
                self.lookup.declared_applied(impl.name))}
            for other in lin:
                if other.name in impl_bases:
                    continue
                if other.name in ("Object", "Boolean", "Nothing"):
                    continue
                od = self.lookup.decl(other.name).method(m)
                if od is None or od.body is None:
                    continue
                other_bases = {e.name for e in self.lookup.linearize(
                    self.lookup.declared_applied(other.name))}
                common = (impl_bases & other_bases) - {"Object", "Boolean",
                                                       "Nothing"}
                if any(self.lookup.decl(b).method(m) is not None
                       for b in common):
                    continue
                diags.append(Diagnostic(
                    "ACCIDENTAL-OVERRIDE",
                    f"method {m!r} of {impl.name} cannot override the "
                    f"concrete member in {other.name}: no common base of "
                    f"the two declares {m!r}", c.pos, self.file))

    # -- class checking ------------------------------------------------------------------

    def check_class(self, c: ClassDecl) -> list[Diagnostic]:
        diags: list[Diagnostic] = []
        n = self.lookup.declared_applied(c.name)
        env = EMPTY_ENV.bind_tparams(c.tparams, "class").bind_term(THIS, n)
        rule = self._rule("CLASS") if not c.is_trait else self._rule("TRAIT")

        def note(rule_: str, msg: str, pos: Pos = c.pos) -> None:
            diags.append(Diagnostic(rule_, msg, pos, self.file))

        def guard(thunk):
            """First failed premise of a declaration aborts its remaining
            checks but not the other declarations'."""
            try:
                thunk()
            except SourceError as err:
                diags.extend(err.diags)
                return False
            return True

        # linearization defined (no cycles, no conflicting repeated bases)
        try:
            lin = self.lookup.linearize(n)
        except MemberError as e:
            note(e.rule, e.message)
            return diags

        # parent kinds and well-formed headers
        for p in c.tparams:
            guard(lambda p=p: self.check_wf(env, p.bound, c.pos))
        parents = self.lookup.parents(n)
        if not c.is_trait:
            proper = parents[0]
            if not self.lookup.is_proper_class(proper):
                note(rule, f"{c.name} extends {proper}, which is not a proper class")
            trait_ps = parents[1:]
        else:
            trait_ps = parents[1:]  # the implicit Object parent needs no check
        for q in trait_ps:
            if not self.lookup.is_trait(q):
                note(rule, f"{c.name} lists {q} as a trait parent, but it is "
                           f"not a trait")
        for p in parents:
            guard(lambda p=p: self.check_wf(env, p, c.pos))

        # fields and the parent-constructor prefix
        if not c.is_trait:
            for vp in c.vparams:
                guard(lambda vp=vp: self.check_wf(env, vp.type, c.pos))
            try:
                pf = self.lookup.vparams(parents[0])
            except MemberError as e:
                pf = None
                note(e.rule, e.message)
            if pf is not None:
                own_names = [vp.name for vp in c.vparams]
                g = list(c.parent_ctor_args)
                if [p.name for p in pf] != g:
                    note(rule, f"{c.name} must pass the parent constructor "
                               f"exactly its fields {[p.name for p in pf]}, "
                               f"got {g}")
                elif own_names[: len(g)] != g:
                    note(rule, f"parent constructor arguments {g} must be a "
                               f"prefix of {c.name}'s own fields {own_names}")
                else:
                    for vp, pp in zip(c.vparams, pf):
                        if vp.type != pp.type:
                            note(rule,
                                 f"field {vp.name!r} has type {vp.type}, but "
                                 f"the parent declares {pp.type}")

        # every member name must have a coherent joined signature
        for m_name in self.lookup.all_mnames(c.name):
            try:
                self.lookup.mtype(THIS, m_name, n)
            except MemberError as e:
                note(e.rule, e.message)
        for label in self.lookup.tnames(c.name):
            try:
                self.lookup.ttype(THIS, label, n)
            except MemberError as e:
                note(e.rule, e.message)

        # proper classes implement everything and keep consistent bounds
        if not c.is_trait:
            _, abstract = self.lookup.mnames(c.name)
            if abstract:
                note(rule, f"class {c.name} has abstract methods: "
                           f"mnames_abs({c.name}) = {{{', '.join(abstract)}}}")
            if self.level >= Level.DS:
                for label in self.lookup.tnames(c.name):
                    try:
                        tb = self.lookup.ttype(THIS, label, n)
                    except MemberError:
                        continue  # already reported above
                    out = algo_subtype(self.lookup, env, tb.lower, tb.upper,
                                       fuel=self.fuel)
                    if not out.holds:
                        note("DT-CLASS",
                             f"type member {label!r} of class {c.name} has "
                             f"inconsistent bounds {tb.lower} .. {tb.upper}")
        self._check_accidental(c, n, diags)

        # own type members: wf + narrowing against the full linearization
        for tm in c.type_members:
            if not guard(lambda tm=tm: self.check_wf(env, tm.lower, tm.pos)):
                continue
            if not guard(lambda tm=tm: self.check_wf(env, tm.upper, tm.pos)):
                continue
            own = TypeBounds(tm.lower, tm.upper)
            for entry in lin[1:]:
                d = self.check_override_typemember(env, tm.label, own, tm.pos,
                                                   n, entry)
                if d is not None:
                    diags.append(d)

        # own methods: wf, body, override against each parent
        for m in c.methods:
            guard(lambda m=m: self._check_method(env, c, n, parents, m, diags))

        return diags

    def _check_method(self, env: TypeEnv, c: ClassDecl, n: Applied,
                      parents: list[Applied], m: MethodDecl,
                      diags: list[Diagnostic]) -> None:
        """One declared method: well-formed joined signature, override
        compatibility with each parent, and the implementer's body checked
        through that joined signature."""
        try:
            mt = self.lookup.mtype(THIS, m.name, n)
        except MemberError:
            return  # incoherent join, reported by the member-name sweep
        menv = env.bind_tparams(mt.tparams, "method")
        for p in mt.tparams:
            self.check_wf(menv, p.bound, m.pos)
        penv = menv
        for vp in mt.params:
            self.check_wf(penv, vp.type, m.pos)
            penv = penv.bind_term(vp.name, vp.type)
        self.check_wf(penv, mt.result, m.pos)
        for p in parents:
            d = self.check_override_method(env, m, n, p)
            if d is not None:
                diags.append(d)
        try:
            bd = self.lookup.mbody(m.name, n)
        except MemberError:
            return  # no implementation anywhere; fine for traits
        if alpha_equal_mtype(mt, method_type_of(bd)) is None:
            return  # signature clash, reported via override diagnostics
        ren = Subst(
            tmap={(bp.name, "method"): TypeVar(ap.name, "method")
                  for ap, bp in zip(mt.tparams, bd.tparams)},
            vmap={bp.name: ap.name for ap, bp in zip(mt.params, bd.params)},
        )
        assert bd.body is not None
        body = subst_expr(ren, bd.body)
        e0 = self.type_expr(penv, body)
        self._is_subtype(penv, e0, mt.result, self._rule("METHOD"), m.pos,
                         f"body of method {m.name!r}")


def check_program(program: Program, fuel: int = DEFAULT_FUEL,
                  file: str = "<input>") -> TypedProgram:
    """Typecheck a parsed program; raises SourceError with every collected
    diagnostic on failure."""
    program = desugar_program(program)
    lookup = Lookup(program.table)
    checker = Checker(lookup, fuel=fuel, file=file)
    diags: list[Diagnostic] = []

    # table-level: acyclic, and (FGJ up) class type-variable names unique
    # across the table (the translation keys parent type-arguments by them)
    for name in program.table.names():
        try:
            lookup.linearize(lookup.declared_applied(name))
        except MemberError as e:
            diags.append(Diagnostic(e.rule, e.message,
                                    lookup.decl(name).pos, file))
    if diags:
        raise SourceError(diags)
    seen_tvars: dict[str, str] = {}
    for name in program.table.names():
        for p in lookup.decl(name).tparams:
            if p.name in seen_tvars:
                diags.append(Diagnostic(
                    "TVAR-CLASH",
                    f"type variable {p.name!r} of class {name} is already "
                    f"used by class {seen_tvars[p.name]}; class type "
                    f"variables must be unique across the table",
                    lookup.decl(name).pos, file))
            else:
                seen_tvars[p.name] = name

    for name in program.table.names():
        diags.extend(checker.check_class(lookup.decl(name)))
    if diags:
        raise SourceError(diags)

    main_type = checker.type_expr(EMPTY_ENV, program.main)
    return TypedProgram(program, lookup, main_type, checker.types)
