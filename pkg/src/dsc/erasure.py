"""Erasing the trait-and-generics fragment into the nominal target.

Types collapse to single class names: type arguments disappear, type
variables erase to their bounds, and an intersection keeps one of its
operands, chosen by a pluggable erasedGlb policy.  Method names are
mangled with their declaring class (m declared in C becomes ``m$C``) so
overrides keep exact signatures in the target, and each class receives
bridge methods forwarding the other mangled entry points of a method to
its implementer.  Expression erasure re-types every subterm and inserts
a checked cast exactly where the erased static type stops subtyping the
type the context requires.

Supported input is the fragment without unions, selections, type
members, and Booleans; anything else reports ER-UNSUPPORTED.
"""

from dataclasses import dataclass
from typing import Optional, Union

from . import fjd
from .classtable import Lookup, MemberError
from .fjd import FCast, FField, FInvoke, FNew, FVar, FjdClass, FjdExpr, FjdInterface, FjdMethod, FjdParam, FjdProgram
from .syntax import (
    Applied,
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
    SourceError,
    SourceType,
    THIS,
    TypeEnv,
    TypeVar,
    UnionType,
    Var,
    copy_expr,
)
from .typecheck import Checker, TypedProgram

POLICIES = ("java", "scala3", "basecount")


def _unsupported(what: str) -> SourceError:
    return SourceError.single("ER-UNSUPPORTED", f"erasure does not support {what}")


# ---------------------------------------------------------------------------
# Type erasure
# ---------------------------------------------------------------------------

def _is_proper_name(lookup: Lookup, name: str) -> bool:
    if name == "Object":
        return True
    return not lookup.decl(name).is_trait


def _lin_names(lookup: Lookup, name: str) -> tuple[str, ...]:
    if name == "Object":
        return ("Object",)
    return tuple(e.name for e in lookup.linearize(lookup.declared_applied(name)))


def name_subtype(lookup: Lookup, s: str, t: str) -> bool:
    """Nominal subtyping between erased class names: reachability in the
    source hierarchy, which the erased hierarchy mirrors name for name."""
    return t == "Object" or s == t or t in _lin_names(lookup, s)


def erased_glb(policy: str, lookup: Lookup, tp1: str, tp2: str) -> str:
    """Pick one of the two erased operands of an intersection.

    java: always the left one.  scala3: proper class over trait, then
    subtype over supertype, then the lexicographically smaller name.
    basecount: proper class over trait, then more base types (a longer
    linearization) over fewer, then the lexicographic tie-break.
    """
    if policy == "java":
        return tp1
    if policy not in POLICIES:
        raise ValueError(f"unknown erasure policy {policy!r}")
    if _is_proper_name(lookup, tp1) and not _is_proper_name(lookup, tp2):
        return tp1
    if _is_proper_name(lookup, tp2) and not _is_proper_name(lookup, tp1):
        return tp2
    if policy == "scala3":
        if name_subtype(lookup, tp1, tp2):
            return tp1
        if name_subtype(lookup, tp2, tp1):
            return tp2
    else:
        relative_length = len(_lin_names(lookup, tp1)) - len(_lin_names(lookup, tp2))
        if relative_length > 0:
            return tp1
        if relative_length < 0:
            return tp2
    return tp1 if tp1 <= tp2 else tp2


def erase_type(policy: str, lookup: Lookup, env: TypeEnv, t: SourceType) -> str:
    """|T|: a variable erases to its bound, an applied type to its class
    name, an intersection through erased_glb on its operands (folded
    with the source association)."""
    if isinstance(t, TypeVar):
        bind = env.lookup_tvar(t.name)
        if bind is None:
            raise SourceError.single("ER-UNSUPPORTED", f"unbound type variable {t.name!r}")
        return erase_type(policy, lookup, env, bind.bound)
    if isinstance(t, Applied):
        if t.name in ("Boolean", "Nothing"):
            raise _unsupported(f"the builtin type {t.name}")
        return t.name
    if isinstance(t, Intersection):
        return erased_glb(
            policy,
            lookup,
            erase_type(policy, lookup, env, t.left),
            erase_type(policy, lookup, env, t.right),
        )
    if isinstance(t, UnionType):
        raise _unsupported("union types")
    if isinstance(t, Selection):
        raise _unsupported("type selections")
    raise TypeError(f"not a source type: {t!r}")


def erased_receiver(lookup: Lookup, env: TypeEnv, m: str, t: SourceType) -> str:
    """The class name a call of m through static type t is made at: a
    variable defers to its bound, an intersection keeps the side that
    defines m (left preferred)."""
    c = _erased_receiver(lookup, env, m, t)
    try:
        lookup.mtype(THIS, m, lookup.declared_applied(c) if c != "Object" else Applied("Object", ()))
    except MemberError:
        raise SourceError.single("ER-RECEIVER", f"no method {m!r} on erased receiver {c!r}")
    return c


def _erased_receiver(lookup: Lookup, env: TypeEnv, m: str, t: SourceType) -> str:
    if isinstance(t, TypeVar):
        bind = env.lookup_tvar(t.name)
        if bind is None:
            raise SourceError.single("ER-UNSUPPORTED", f"unbound type variable {t.name!r}")
        return _erased_receiver(lookup, env, m, bind.bound)
    if isinstance(t, Applied):
        return t.name
    if isinstance(t, Intersection):
        try:
            lookup.mtype(THIS, m, t.left)
            defined = True
        except MemberError:
            defined = False
        return _erased_receiver(lookup, env, m, t.left if defined else t.right)
    raise _unsupported(f"call receivers of type {t}")


# ---------------------------------------------------------------------------
# Program erasure
# ---------------------------------------------------------------------------

class Eraser:
    """Erase one typed program under a fixed policy."""

    def __init__(self, tp: TypedProgram, policy: str = "scala3", dedup_bridges: bool = False):
        if tp.level > Level.PS:
            raise _unsupported(f"level {tp.level.name} programs (unions, selections, Boolean)")
        if policy not in POLICIES:
            raise ValueError(f"unknown erasure policy {policy!r}")
        self.tp = tp
        self.lookup = tp.lookup
        self.policy = policy
        self.dedup_bridges = dedup_bridges
        self.checker = Checker(tp.lookup, file="<erased>")
        self._bodies: list[Expr] = []  # keeps re-typed copies alive for the id-keyed table
        self._sigs: dict[tuple[str, str], FjdMethod] = {}
        self._methods: dict[str, tuple[FjdMethod, ...]] = {}

    # -- helpers -----------------------------------------------------------

    def _type_of(self, e: Expr) -> SourceType:
        got = self.checker.types.get(id(e))
        return got if got is not None else self.tp.types[id(e)]

    def _erase_type(self, env: TypeEnv, t: SourceType) -> str:
        return erase_type(self.policy, self.lookup, env, t)

    def fjd_signature(self, owner: str, m: str) -> FjdMethod:
        """The target-language signature of m$owner: the declaration of m
        in `owner`, erased under owner's own type-parameter context.  The
        body slot only records abstractness."""
        cached = self._sigs.get((owner, m))
        if cached is not None:
            return cached
        decl = self.lookup.decl(owner)
        md = decl.method(m)
        assert md is not None, f"{owner} does not declare {m}"
        env = EMPTY_ENV.bind_tparams(decl.tparams, "class").bind_tparams(md.tparams, "method")
        sig = FjdMethod(
            self._erase_type(env, md.result),
            f"{m}${owner}",
            tuple(FjdParam(self._erase_type(env, p.type), p.name) for p in md.params),
            None,
        )
        self._sigs[(owner, m)] = sig
        return sig

    def _call_owner(self, m: str, receiver: str) -> str:
        """The class whose mangled entry point a call of m at erased
        receiver class `receiver` targets: the first declarer of m in the
        receiver's linearization (the declaration the receiver sees)."""
        for entry in _lin_names(self.lookup, receiver):
            if entry in ("Object", "Boolean", "Nothing"):
                continue
            if self.lookup.decl(entry).method(m) is not None:
                return entry
        raise SourceError.single("ER-RECEIVER", f"no declaration of {m!r} reachable from {receiver!r}")

    def fjd_fields(self, name: str) -> tuple[FjdParam, ...]:
        """The erased fields of class `name`, inherited prefix first, each
        typed at its declaring class (these are the target constructor's
        parameters)."""
        if name == "Object":
            return ()
        decl = self.lookup.decl(name)
        if decl.is_trait:
            return ()
        env = EMPTY_ENV.bind_tparams(decl.tparams, "class")
        assert decl.parent is not None
        inherited = self.fjd_fields(decl.parent.name)
        own = decl.vparams[len(inherited):]
        return inherited + tuple(FjdParam(self._erase_type(env, p.type), p.name) for p in own)

    # -- expressions -------------------------------------------------------

    def erase_expr(self, env: TypeEnv, e: Expr) -> FjdExpr:
        return self._erase(env, e)[0]

    def _cast_to(self, env: TypeEnv, e: Expr, target: str) -> FjdExpr:
        """|e|^T: erase, then cast unless the erased static type already
        subtypes the target."""
        erased, s = self._erase(env, e)
        if name_subtype(self.lookup, s, target):
            return erased
        return FCast(target, erased)

    def _erase(self, env: TypeEnv, e: Expr) -> tuple[FjdExpr, str]:
        """The erased expression together with its target-language type."""
        if isinstance(e, Var):
            t = env.lookup_term(e.name)
            if t is None:
                raise SourceError.single("ER-UNSUPPORTED", f"unbound variable {e.name!r}")
            return FVar(e.name), self._erase_type(env, t)
        if isinstance(e, Getter):
            t0 = self._type_of(e.receiver)
            c = self._erase_type(env, t0)
            receiver = self._cast_to(env, e.receiver, c)
            for f in self.fjd_fields(c):
                if f.name == e.fieldname:
                    return FField(receiver, e.fieldname), f.type
            raise SourceError.single("ER-RECEIVER", f"no field {e.fieldname!r} on erased class {c!r}")
        if isinstance(e, (Invoke, InvokeGeneral)):
            if isinstance(e, Invoke):
                recv_expr: Expr = Var(e.receiver)
                arg_exprs: tuple[Expr, ...] = tuple(Var(a) for a in e.args)
                t0 = env.lookup_term(e.receiver)
                if t0 is None:
                    raise SourceError.single("ER-UNSUPPORTED", f"unbound variable {e.receiver!r}")
            else:
                recv_expr = e.receiver
                arg_exprs = e.args
                t0 = self._type_of(recv_expr)
            c = erased_receiver(self.lookup, env, e.method, t0)
            owner = self._call_owner(e.method, c)
            sig = self.fjd_signature(owner, e.method)
            if len(sig.params) != len(arg_exprs):
                raise SourceError.single("ER-RECEIVER", f"arity mismatch erasing a call of {e.method!r}")
            receiver = self._cast_to(env, recv_expr, c)
            args = tuple(self._cast_to(env, a, p.type) for a, p in zip(arg_exprs, sig.params))
            return FInvoke(receiver, sig.name, args), sig.result
        if isinstance(e, New):
            c = self._erase_type(env, e.type)
            params = self.fjd_fields(c)
            if len(params) != len(e.args):
                raise SourceError.single("ER-RECEIVER", f"arity mismatch erasing new {c}")
            args = tuple(self._cast_to(env, a, p.type) for a, p in zip(e.args, params))
            return FNew(c, args), c
        if isinstance(e, (BoolLit, If)):
            raise _unsupported("Boolean expressions")
        if isinstance(e, Block):
            raise _unsupported("block expressions")
        raise TypeError(f"not an erasable expression: {e!r}")

    # -- declarations ------------------------------------------------------

    def _erase_method(self, cname: str, mname: str) -> FjdMethod:
        """One declared method of cname, renamed to mname$cname, its body
        (if any) erased at the declared result type."""
        decl = self.lookup.decl(cname)
        md = decl.method(mname)
        assert md is not None
        sig = self.fjd_signature(cname, mname)
        if md.body is None:
            return sig
        env = (
            EMPTY_ENV.bind_tparams(decl.tparams, "class")
            .bind_term(THIS, self.lookup.declared_applied(cname))
            .bind_tparams(md.tparams, "method")
        )
        for p in md.params:
            env = env.bind_term(p.name, p.type)
        body = copy_expr(md.body)
        self._bodies.append(body)
        self.checker.type_expr(env, body)
        return FjdMethod(sig.result, sig.name, sig.params, self._cast_to(env, body, sig.result))

    def bridges(self, m: str, cname: str) -> list[FjdMethod]:
        """Forwarders m$E -> m$D for every linearization element E of cname
        declaring m other than the implementer D, each at E's own erased
        signature, with an argument cast exactly where the two erased
        parameter types differ."""
        n = self.lookup.declared_applied(cname)
        implementer = self.lookup.mimpl(m, n).name
        target = self.fjd_signature(implementer, m)
        out = []
        for entry in reversed(self.lookup.linearize(n)):
            name = entry.name
            if name in ("Object", "Boolean", "Nothing") or name == implementer:
                continue
            if self.lookup.decl(name).method(m) is None:
                continue
            sig = self.fjd_signature(name, m)
            args = tuple(
                FVar(p.name) if p.type == q.type else FCast(q.type, FVar(p.name))
                for p, q in zip(sig.params, target.params)
            )
            body = FInvoke(FVar(THIS), target.name, args)
            out.append(FjdMethod(sig.result, sig.name, sig.params, body))
        return out

    def erased_methods(self, name: str) -> tuple[FjdMethod, ...]:
        """All methods the erased declaration of `name` carries: its own
        (renamed, bodies erased) plus, for proper classes, the bridges."""
        cached = self._methods.get(name)
        if cached is not None:
            return cached
        decl = self.lookup.decl(name)
        methods = [self._erase_method(name, md.name) for md in decl.methods]
        if not decl.is_trait:
            inherited: set[FjdMethod] = set()
            if self.dedup_bridges and decl.parent is not None:
                chain = decl.parent.name
                while chain != "Object":
                    inherited.update(self.erased_methods(chain))
                    parent = self.lookup.decl(chain).parent
                    chain = parent.name if parent is not None else "Object"
            concrete, _ = self.lookup.mnames(name)
            for m in concrete:
                for bridge in self.bridges(m, name):
                    if bridge not in inherited:
                        methods.append(bridge)
        result = tuple(methods)
        self._methods[name] = result
        return result

    def erase_decl(self, name: str) -> Union[FjdClass, FjdInterface]:
        decl = self.lookup.decl(name)
        env = EMPTY_ENV.bind_tparams(decl.tparams, "class")
        methods = self.erased_methods(name)
        if decl.is_trait:
            return FjdInterface(name, tuple(q.name for q in decl.trait_parents), methods, decl.pos)
        assert decl.parent is not None
        inherited = self.fjd_fields(decl.parent.name)
        own = decl.vparams[len(inherited):]
        fields = tuple(FjdParam(self._erase_type(env, p.type), p.name) for p in own)
        return FjdClass(
            name,
            decl.parent.name,
            tuple(q.name for q in decl.trait_parents),
            fields,
            methods,
            decl.pos,
        )

    def program(self) -> FjdProgram:
        decls = tuple(self.erase_decl(name) for name in self.lookup.table.classes)
        main = self.erase_expr(EMPTY_ENV, self.tp.program.main)
        return FjdProgram(decls, main)


def erase_program(tp: TypedProgram, policy: str = "scala3", dedup_bridges: bool = False) -> FjdProgram:
    """Erase a typed program to the nominal target language."""
    return Eraser(tp, policy, dedup_bridges).program()


def erase_and_check(tp: TypedProgram, policy: str = "scala3", dedup_bridges: bool = False) -> tuple[FjdProgram, fjd.FjdTable]:
    """Erase, then typecheck the output (which must always succeed on
    supported input)."""
    program = erase_program(tp, policy, dedup_bridges)
    return program, fjd.fjd_typecheck(program)
