"""Concrete syntax: tokenizer, recursive-descent reader, pretty-printer, and
the call-desugaring pass that puts method calls into variable-receiver form.

Files use the `.dsc` extension.  A leading `//level: FJ|FGJ|PS|PLS|DS` comment
selects the calculus level (default DS); constructs above the active level are
parse-time errors.  A program is a sequence of class/trait declarations
followed by one `main = <expr>` line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .syntax import (
    Applied,
    Block,
    BoolLit,
    BOOLEAN,
    ClassDecl,
    ClassTable,
    Diagnostic,
    Expr,
    Getter,
    If,
    Intersection,
    Invoke,
    InvokeGeneral,
    Level,
    MethodDecl,
    New,
    NOTHING,
    NO_POS,
    OBJECT,
    Pos,
    Program,
    Selection,
    SourceError,
    SourceType,
    TypeMemberDecl,
    TypeParam,
    TypeVar,
    UnionType,
    Var,
    VParam,
)

KEYWORDS = {
    "class", "trait", "def", "type", "val", "new",
    "if", "then", "else", "true", "false", "main", "extends",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym><:|>:|[()\[\]{},;:.=&|<])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "name" | "kw" | symbol text | "eof"
    text: str
    pos: Pos


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise SourceError.single("SYNTAX", f"unexpected character {text[i]!r}",
                                     Pos(line, col), file)
        lexeme = m.group(0)
        if m.lastgroup == "name":
            kind = "kw" if lexeme in KEYWORDS else "name"
            tokens.append(Token(kind, lexeme, Pos(line, col)))
        elif m.lastgroup == "sym":
            tokens.append(Token(lexeme, lexeme, Pos(line, col)))
        # ws and comments are skipped, but still advance line/col
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        i = m.end()
    tokens.append(Token("eof", "", Pos(line, col)))
    return tokens


def read_level_pragma(text: str) -> Optional[Level]:
    for raw in text.splitlines():
        stripped = raw.strip()
        if not stripped:
            continue
        m = re.match(r"//\s*level\s*:\s*([A-Za-z]+)\s*$", stripped)
        if m:
            try:
                return Level.parse(m.group(1))
            except ValueError:
                raise SourceError.single("LEVEL", f"unknown level {m.group(1)!r}")
        if not stripped.startswith("//"):
            break
    return None


class _Parser:
    def __init__(self, tokens: list[Token], level: Level, file: str):
        self.tokens = tokens
        self.level = level
        self.file = file
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: Optional[str] = None, what: str = "") -> Token:
        if self.at(kind, text):
            return self.next()
        t = self.peek()
        wanted = text or kind
        got = t.text or "end of input"
        msg = f"expected {what or wanted!r}, found {got!r}"
        raise SourceError.single("SYNTAX", msg, t.pos, self.file)

    def fail(self, msg: str, pos: Optional[Pos] = None, rule: str = "SYNTAX"):
        raise SourceError.single(rule, msg, pos or self.peek().pos, self.file)

    def need_level(self, minimum: Level, feature: str, pos: Pos):
        if self.level < minimum:
            self.fail(f"{feature} requires level {minimum.name} (file is {self.level.name})",
                      pos, rule="LEVEL")

    def name(self, what: str = "identifier") -> Token:
        return self.expect("name", what=what)

    # -- types -------------------------------------------------------------

    def parse_type(self) -> SourceType:
        t = self.parse_intersection()
        while self.at("|"):
            pos = self.next().pos
            self.need_level(Level.PLS, "union types", pos)
            t = UnionType(t, self.parse_intersection())
        return t

    def parse_intersection(self) -> SourceType:
        t = self.parse_atom_type()
        while self.at("&"):
            pos = self.next().pos
            self.need_level(Level.PS, "intersection types", pos)
            t = Intersection(t, self.parse_atom_type())
        return t

    def parse_atom_type(self) -> SourceType:
        if self.accept("("):
            t = self.parse_type()
            self.expect(")")
            return t
        head = self.name("type")
        if self.accept("."):
            self.need_level(Level.DS, "type selections", head.pos)
            label = self.name("type member label")
            return Selection(head.text, label.text)
        if head.text in ("Nothing", "Boolean"):
            self.need_level(Level.PLS, f"the {head.text} type", head.pos)
        args: tuple[SourceType, ...] = ()
        if self.at("["):
            self.need_level(Level.FGJ, "type arguments", self.peek().pos)
            args = tuple(self.parse_type_list())
        return Applied(head.text, args)

    def parse_type_list(self) -> list[SourceType]:
        self.expect("[")
        out = [self.parse_type()]
        while self.accept(","):
            out.append(self.parse_type())
        self.expect("]")
        return out

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        e = self.parse_primary()
        while self.at("."):
            self.next()
            member = self.name("member")
            targs: tuple[SourceType, ...] = ()
            if self.at("["):
                self.need_level(Level.FGJ, "method type arguments", member.pos)
                targs = tuple(self.parse_type_list())
            if self.at("("):
                self.next()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.accept(","):
                        args.append(self.parse_expr())
                self.expect(")")
                e = InvokeGeneral(e, member.text, targs, tuple(args), member.pos)
            elif targs:
                self.fail("type arguments require a call argument list", member.pos)
            else:
                e = Getter(e, member.text, member.pos)
        return e

    def parse_primary(self) -> Expr:
        t = self.peek()
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        if self.accept("kw", "new"):
            head = self.name("class")
            args_t: tuple[SourceType, ...] = ()
            if self.at("["):
                self.need_level(Level.FGJ, "type arguments", self.peek().pos)
                args_t = tuple(self.parse_type_list())
            ctor_args: list[Expr] = []
            if self.accept("("):
                if not self.at(")"):
                    ctor_args.append(self.parse_expr())
                    while self.accept(","):
                        ctor_args.append(self.parse_expr())
                self.expect(")")
            elif head.text != "Object":
                self.fail("constructor call needs an argument list", head.pos)
            if head.text in ("Nothing", "Boolean"):
                self.fail(f"cannot instantiate {head.text}", head.pos)
            return New(Applied(head.text, args_t), tuple(ctor_args), t.pos)
        if self.accept("kw", "true"):
            self.need_level(Level.PLS, "boolean literals", t.pos)
            return BoolLit(True, t.pos)
        if self.accept("kw", "false"):
            self.need_level(Level.PLS, "boolean literals", t.pos)
            return BoolLit(False, t.pos)
        if self.accept("kw", "if"):
            self.need_level(Level.PLS, "conditionals", t.pos)
            cond = self.parse_expr()
            self.expect("kw", "then")
            then = self.parse_expr()
            self.expect("kw", "else")
            els = self.parse_expr()
            return If(cond, then, els, t.pos)
        if self.at("{"):
            self.need_level(Level.DS, "blocks", t.pos)
            self.next()
            self.expect("kw", "val")
            var = self.name("binder")
            self._check_binder(var)
            self.expect("=")
            init = self.parse_expr()
            self.expect(";")
            body = self.parse_expr()
            self.expect("}")
            return Block(var.text, init, body, t.pos)
        if self.at("name"):
            tok = self.next()
            return Var(tok.text, tok.pos)
        self.fail(f"expected an expression, found {t.text or 'end of input'!r}")
        raise AssertionError  # unreachable

    def _check_binder(self, tok: Token):
        if tok.text == "this":
            self.fail("'this' cannot be rebound", tok.pos)

    # -- declarations --------------------------------------------------------

    def parse_program(self) -> Program:
        classes: dict[str, ClassDecl] = {}
        while self.at("kw", "class") or self.at("kw", "trait"):
            decl = self.parse_class()
            if decl.name in classes:
                self.fail(f"duplicate class name {decl.name!r}", decl.pos, rule="DUP-CLASS")
            if decl.name in ("Object", "Boolean", "Nothing"):
                self.fail(f"{decl.name!r} is a built-in class name", decl.pos, rule="DUP-CLASS")
            classes[decl.name] = decl
        self.expect("kw", "main", what="a class/trait declaration or 'main'")
        self.expect("=")
        main = self.parse_expr()
        self.expect("eof", what="end of input")
        return Program(ClassTable(classes, self.level), main)

    def parse_class(self) -> ClassDecl:
        start = self.next()  # class | trait
        is_trait = start.text == "trait"
        if is_trait:
            self.need_level(Level.PS, "traits", start.pos)
        name = self.name("class name")

        tparams = self.parse_tparams() if self.at("[") else ()

        vparams: list[VParam] = []
        if self.at("("):
            if is_trait:
                self.fail("traits take no value parameters", self.peek().pos)
            self.next()
            if not self.at(")"):
                vparams.append(self.parse_vparam())
                while self.accept(","):
                    vparams.append(self.parse_vparam())
            self.expect(")")
        elif not is_trait:
            self.fail("a class needs a value-parameter list", self.peek().pos)

        parent: Optional[Applied] = None
        parent_ctor_args: tuple[str, ...] = ()
        trait_parents: list[Applied] = []
        if self.accept("<") or self.accept("kw", "extends"):
            first = True
            while True:
                head = self.name("parent")
                targs: tuple[SourceType, ...] = ()
                if self.at("["):
                    self.need_level(Level.FGJ, "type arguments", self.peek().pos)
                    targs = tuple(self.parse_type_list())
                applied = Applied(head.text, targs)
                if first and not is_trait:
                    parent = applied
                    if self.accept("("):
                        names = []
                        if not self.at(")"):
                            names.append(self.name("constructor argument").text)
                            while self.accept(","):
                                names.append(self.name("constructor argument").text)
                        self.expect(")")
                        parent_ctor_args = tuple(names)
                else:
                    self.need_level(Level.PS, "multiple parents", head.pos)
                    trait_parents.append(applied)
                first = False
                if not self.accept(","):
                    break
        elif not is_trait:
            self.fail("a class declaration needs a parent ('< Object' at least)",
                      self.peek().pos)

        type_members: list[TypeMemberDecl] = []
        methods: list[MethodDecl] = []
        self.expect("{")
        while not self.at("}"):
            if self.at("kw", "type"):
                type_members.append(self.parse_type_member())
            elif self.at("kw", "def"):
                methods.append(self.parse_method(is_trait))
            else:
                self.fail("expected a member declaration ('type' or 'def')")
        self.expect("}")

        self._check_member_dups(name, tparams, vparams, type_members, methods)
        return ClassDecl(
            kind="trait" if is_trait else "class",
            name=name.text,
            tparams=tuple(tparams),
            vparams=tuple(vparams),
            parent=parent,
            parent_ctor_args=parent_ctor_args,
            trait_parents=tuple(trait_parents),
            type_members=tuple(type_members),
            methods=tuple(methods),
            pos=start.pos,
        )

    def parse_tparams(self) -> tuple[TypeParam, ...]:
        self.need_level(Level.FGJ, "type parameters", self.peek().pos)
        self.expect("[")
        out = [self.parse_tparam()]
        while self.accept(","):
            out.append(self.parse_tparam())
        self.expect("]")
        return tuple(out)

    def parse_tparam(self) -> TypeParam:
        name = self.name("type parameter")
        bound: SourceType = OBJECT
        if self.accept("<:"):
            bound = self.parse_type()
        return TypeParam(name.text, bound)

    def parse_vparam(self) -> VParam:
        name = self.name("parameter")
        self._check_binder(name)
        self.expect(":")
        return VParam(name.text, self.parse_type())

    def parse_type_member(self) -> TypeMemberDecl:
        start = self.expect("kw", "type")
        self.need_level(Level.DS, "type members", start.pos)
        label = self.name("type member label")
        if self.accept("="):
            alias = self.parse_type()
            return TypeMemberDecl(label.text, alias, alias, start.pos)
        lower: SourceType = NOTHING
        upper: SourceType = OBJECT
        if self.accept(">:"):
            lower = self.parse_type()
        if self.accept("<:"):
            upper = self.parse_type()
        return TypeMemberDecl(label.text, lower, upper, start.pos)

    def parse_method(self, in_trait: bool) -> MethodDecl:
        start = self.expect("kw", "def")
        name = self.name("method name")
        tparams = self.parse_tparams() if self.at("[") else ()
        params: list[VParam] = []
        self.expect("(")
        if not self.at(")"):
            params.append(self.parse_vparam())
            while self.accept(","):
                params.append(self.parse_vparam())
        self.expect(")")
        self.expect(":")
        result = self.parse_type()
        body: Optional[Expr] = None
        if self.accept("="):
            body = self.parse_expr()
        elif not in_trait:
            self.fail("only trait methods may be abstract", start.pos)
        elif self.level < Level.PS:
            self.need_level(Level.PS, "abstract methods", start.pos)
        return MethodDecl(name.text, tparams, tuple(params), result, body, start.pos)

    def _check_member_dups(self, cls, tparams, vparams, type_members, methods):
        seen: set[str] = set()
        for group, label in ((tparams, "type parameter"), (vparams, "field")):
            for p in group:
                if p.name in seen:
                    self.fail(f"duplicate {label} {p.name!r} in {cls.text}",
                              cls.pos, rule="DUP-MEMBER")
                seen.add(p.name)
        member_names: set[str] = set()
        for d in type_members:
            if d.label in member_names:
                self.fail(f"duplicate type member {d.label!r} in {cls.text}",
                          d.pos, rule="DUP-MEMBER")
            member_names.add(d.label)
        for m in methods:
            if m.name in member_names:
                self.fail(f"duplicate method {m.name!r} in {cls.text}",
                          m.pos, rule="DUP-MEMBER")
            member_names.add(m.name)
            mseen = set(p.name for p in m.tparams)
            if len(mseen) != len(m.tparams):
                self.fail(f"duplicate type parameter in method {m.name!r}",
                          m.pos, rule="DUP-MEMBER")
            pseen: set[str] = set()
            for p in m.params:
                if p.name in mseen or p.name in pseen:
                    self.fail(f"duplicate parameter {p.name!r} in method {m.name!r}",
                              m.pos, rule="DUP-MEMBER")
                pseen.add(p.name)


# ---------------------------------------------------------------------------
# Name resolution: bare names that are bound as type parameters become
# TypeVar nodes, tagged with the binder's flavor.
# ---------------------------------------------------------------------------

def _resolve_type(t: SourceType, scope: dict[str, str], file: str) -> SourceType:
    if isinstance(t, Applied):
        if t.name in scope:
            if t.args:
                raise SourceError.single(
                    "SYNTAX", f"type variable {t.name!r} takes no arguments", NO_POS, file)
            return TypeVar(t.name, scope[t.name])
        return Applied(t.name, tuple(_resolve_type(a, scope, file) for a in t.args))
    if isinstance(t, Intersection):
        return Intersection(_resolve_type(t.left, scope, file),
                            _resolve_type(t.right, scope, file))
    if isinstance(t, UnionType):
        return UnionType(_resolve_type(t.left, scope, file),
                         _resolve_type(t.right, scope, file))
    return t  # TypeVar (already resolved) or Selection


def _resolve_expr(e: Expr, scope: dict[str, str], file: str) -> Expr:
    if isinstance(e, (Var, BoolLit)):
        return e
    if isinstance(e, Getter):
        return Getter(_resolve_expr(e.receiver, scope, file), e.fieldname, e.pos)
    if isinstance(e, InvokeGeneral):
        return InvokeGeneral(
            _resolve_expr(e.receiver, scope, file),
            e.method,
            tuple(_resolve_type(t, scope, file) for t in e.targs),
            tuple(_resolve_expr(a, scope, file) for a in e.args),
            e.pos,
        )
    if isinstance(e, Invoke):
        return Invoke(e.receiver, e.method,
                      tuple(_resolve_type(t, scope, file) for t in e.targs),
                      e.args, e.pos)
    if isinstance(e, New):
        ty = _resolve_type(e.type, scope, file)
        if not isinstance(ty, Applied):
            raise SourceError.single("SYNTAX", "cannot instantiate a type variable",
                                     e.pos, file)
        return New(ty, tuple(_resolve_expr(a, scope, file) for a in e.args), e.pos)
    if isinstance(e, If):
        return If(_resolve_expr(e.cond, scope, file),
                  _resolve_expr(e.then, scope, file),
                  _resolve_expr(e.els, scope, file), e.pos)
    if isinstance(e, Block):
        return Block(e.var, _resolve_expr(e.init, scope, file),
                     _resolve_expr(e.body, scope, file), e.pos)
    raise TypeError(f"not an expression: {e!r}")


def _resolve_class(c: ClassDecl, file: str) -> ClassDecl:
    cscope = {p.name: "class" for p in c.tparams}

    def rt(t, scope=cscope):
        return _resolve_type(t, scope, file)

    tparams = tuple(TypeParam(p.name, rt(p.bound)) for p in c.tparams)
    vparams = tuple(VParam(p.name, rt(p.type)) for p in c.vparams)
    parent = rt(c.parent) if c.parent is not None else None
    trait_parents = tuple(rt(p) for p in c.trait_parents)
    type_members = tuple(
        TypeMemberDecl(d.label, rt(d.lower), rt(d.upper), d.pos) for d in c.type_members
    )
    methods = []
    for m in c.methods:
        mscope = dict(cscope)
        for p in m.tparams:
            mscope[p.name] = "method"
        mtparams = tuple(TypeParam(p.name, _resolve_type(p.bound, mscope, file))
                         for p in m.tparams)
        mparams = tuple(VParam(p.name, _resolve_type(p.type, mscope, file))
                        for p in m.params)
        result = _resolve_type(m.result, mscope, file)
        body = _resolve_expr(m.body, mscope, file) if m.body is not None else None
        methods.append(MethodDecl(m.name, mtparams, mparams, result, body, m.pos))
    return ClassDecl(c.kind, c.name, tparams, vparams, parent, c.parent_ctor_args,
                     trait_parents, type_members, tuple(methods), c.pos)


def parse_program(text: str, file: str = "<input>",
                  level: Optional[Level] = None) -> Program:
    """Parse a `.dsc` program.  `level` overrides the file pragma."""
    file_level = read_level_pragma(text)
    if level is not None:
        active = level
    elif file_level is not None:  # Level.FJ is 0, so no `or` here
        active = file_level
    else:
        active = Level.DS
    parser = _Parser(tokenize(text, file), active, file)
    prog = parser.parse_program()
    classes = {name: _resolve_class(c, file) for name, c in prog.table.classes.items()}
    main = _resolve_expr(prog.main, {}, file)
    return Program(ClassTable(classes, active), main)


def parse_type_text(text: str, level: Level = Level.DS,
                    file: str = "<type>") -> SourceType:
    """Parse one standalone closed type (free names become class references),
    as needed for command-line subtype queries."""
    parser = _Parser(tokenize(text, file), level, file)
    t = parser.parse_type()
    parser.expect("eof", what="end of type")
    return _resolve_type(t, {}, file)


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

def _show_tparams(tparams: tuple[TypeParam, ...]) -> str:
    if not tparams:
        return ""
    parts = [p.name if p.bound == OBJECT else f"{p.name} <: {p.bound}" for p in tparams]
    return f"[{', '.join(parts)}]"


def _show_type_member(d: TypeMemberDecl) -> str:
    if d.lower == d.upper:
        return f"type {d.label} = {d.lower}"
    parts = [f"type {d.label}"]
    if d.lower != NOTHING:
        parts.append(f">: {d.lower}")
    if d.upper != OBJECT:
        parts.append(f"<: {d.upper}")
    return " ".join(parts)


def _show_method(m: MethodDecl) -> str:
    params = ", ".join(f"{p.name}: {p.type}" for p in m.params)
    sig = f"def {m.name}{_show_tparams(m.tparams)}({params}): {m.result}"
    if m.body is None:
        return sig
    return f"{sig} = {m.body}"


def _show_class(c: ClassDecl) -> str:
    head = f"{c.kind} {c.name}{_show_tparams(c.tparams)}"
    if not c.is_trait:
        head += f"({', '.join(f'{p.name}: {p.type}' for p in c.vparams)})"
    parents: list[str] = []
    if c.parent is not None:
        p = str(c.parent)
        if c.parent_ctor_args:
            p += f"({', '.join(c.parent_ctor_args)})"
        parents.append(p)
    parents.extend(str(p) for p in c.trait_parents)
    if parents:
        head += f" < {', '.join(parents)}"
    members = [f"  {_show_type_member(d)}" for d in c.type_members]
    members += [f"  {_show_method(m)}" for m in c.methods]
    if not members:
        return head + " {}"
    return head + " {\n" + "\n".join(members) + "\n}"


def pretty_print(program: Program) -> str:
    lines = [f"//level: {program.table.level.name}", ""]
    for c in program.table.classes.values():
        lines.append(_show_class(c))
        lines.append("")
    lines.append(f"main = {program.main}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Call desugaring: rewrite general calls into blocks over variable calls.
# Receivers are bound before arguments; positions that are already variables
# are left alone.
# ---------------------------------------------------------------------------

class FreshNames:
    """Deterministic fresh-name supply in the reserved `$n` namespace."""

    def __init__(self, prefix: str = "$"):
        self.prefix = prefix
        self.count = 0

    def next(self) -> str:
        name = f"{self.prefix}{self.count}"
        self.count += 1
        return name


def desugar_expr(e: Expr, fresh: FreshNames) -> Expr:
    if isinstance(e, (Var, BoolLit)):
        return e
    if isinstance(e, Getter):
        return Getter(desugar_expr(e.receiver, fresh), e.fieldname, e.pos)
    if isinstance(e, Invoke):
        return e
    if isinstance(e, InvokeGeneral):
        receiver = desugar_expr(e.receiver, fresh)
        args = [desugar_expr(a, fresh) for a in e.args]
        bindings: list[tuple[str, Expr]] = []

        def as_var(x: Expr) -> str:
            if isinstance(x, Var):
                return x.name
            v = fresh.next()
            bindings.append((v, x))
            return v

        rv = as_var(receiver)
        avs = tuple(as_var(a) for a in args)
        out: Expr = Invoke(rv, e.method, e.targs, avs, e.pos)
        for v, init in reversed(bindings):
            out = Block(v, init, out, e.pos)
        return out
    if isinstance(e, New):
        return New(e.type, tuple(desugar_expr(a, fresh) for a in e.args), e.pos)
    if isinstance(e, If):
        return If(desugar_expr(e.cond, fresh), desugar_expr(e.then, fresh),
                  desugar_expr(e.els, fresh), e.pos)
    if isinstance(e, Block):
        return Block(e.var, desugar_expr(e.init, fresh), desugar_expr(e.body, fresh), e.pos)
    raise TypeError(f"not an expression: {e!r}")


def desugar_program(program: Program) -> Program:
    """Desugar every method body and the main expression (levels below DS
    keep general calls as the primitive form and pass through unchanged)."""
    if program.table.level < Level.DS:
        return program
    fresh = FreshNames()
    classes = {}
    for name, c in program.table.classes.items():
        methods = tuple(
            MethodDecl(m.name, m.tparams, m.params, m.result,
                       desugar_expr(m.body, fresh) if m.body is not None else None,
                       m.pos)
            for m in c.methods
        )
        classes[name] = ClassDecl(c.kind, c.name, c.tparams, c.vparams, c.parent,
                                  c.parent_ctor_args, c.trait_parents, c.type_members,
                                  methods, c.pos)
    main = desugar_expr(program.main, fresh)
    return Program(ClassTable(classes, program.table.level), main)
