"""Shared fixtures-in-code for the test suite: tiny program builders,
randomized class-table generators, and a store-cell classifier used to
compare evaluation results across the two backends."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from dsc import dot
from dsc.classtable import Lookup
from dsc.parser import Level, parse_program
from dsc.syntax import (
    Applied,
    Intersection,
    Selection,
    SourceError,
    SourceType,
    TypeEnv,
    UnionType,
    EMPTY_ENV,
)
from dsc.translate import Translator
from dsc.typecheck import TypedProgram, check_program

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

OBJECT = Applied("Object", ())
NOTHING = Applied("Nothing", ())
BOOLEAN = Applied("Boolean", ())


def check_text(src: str, file: str = "<test>") -> TypedProgram:
    """Parse and typecheck a source program."""
    return check_program(parse_program(src, file), file)


def reject(src: str, file: str = "<test>"):
    """Typechecking must fail; returns the diagnostics."""
    try:
        check_text(src, file)
    except SourceError as err:
        return err.diags
    pytest.fail("expected a type error, but the program checked")


def rules(diags) -> set[str]:
    return {d.rule for d in diags}


def corpus_files() -> list[Path]:
    out = sorted(CORPUS.glob("*/*.dsc"))
    assert out, "corpus directory is empty"
    return out


def erasable_corpus_files() -> list[Path]:
    """Corpus programs in the erasure-supported fragment."""
    keep = ("fj", "fgj", "ps", "erasure")
    return [p for p in corpus_files() if p.parent.name in keep]


# ---------------------------------------------------------------------------
# randomized class tables


class TableSpec:
    """A generated source table plus enough metadata to build closed types
    and selection-friendly environments over it."""

    def __init__(self, src: str, names: dict[str, str],
                 generic: set[str], members: dict[str, list[str]]):
        self.src = src
        self.names = names  # name -> "class" | "trait"
        self.generic = generic
        self.members = members  # name -> inherited+own type member labels


def random_table(rng: random.Random, max_decls: int = 4,
                 max_depth: int = 3, level: str = "DS") -> TableSpec:
    """A small well-formed-by-construction table: single-parent classes,
    ordered trait mixing, optional type members with consistent bounds,
    optional one-parameter generics."""
    n = rng.randint(1, max_decls)
    lines = [f"//level: {level}"]
    kinds: dict[str, str] = {}
    depth: dict[str, int] = {}
    generic: set[str] = set()
    own: dict[str, list[str]] = {}
    ancestors: dict[str, set[str]] = {}
    label_count = 0
    allow_members = level == "DS"

    for i in range(n):
        name = f"D{i + 1}"
        prev = list(kinds)
        is_trait = rng.random() < 0.4
        parents: list[str] = []
        if is_trait:
            pool = [p for p in prev
                    if kinds[p] == "trait" and depth[p] < max_depth]
            rng.shuffle(pool)
            parents = pool[: rng.randint(0, min(2, len(pool)))]
            head = f"trait {name}"
            if parents:
                head += " < " + ", ".join(parents)
        else:
            is_gen = rng.random() < 0.25
            pool = [p for p in prev if kinds[p] == "class"
                    and depth[p] < max_depth and p not in generic]
            base = rng.choice(pool) if pool and rng.random() < 0.5 else "Object"
            traits = [p for p in prev
                      if kinds[p] == "trait" and depth[p] < max_depth]
            rng.shuffle(traits)
            traits = traits[: rng.randint(0, min(2, len(traits)))]
            parents = ([base] if base != "Object" else []) + traits
            head = f"class {name}"
            if is_gen:
                head += f"[T{i + 1}]"
                generic.add(name)
            head += "() < " + ", ".join([base] + traits)

        kinds[name] = "trait" if is_trait else "class"
        depth[name] = 1 + max((depth[p] for p in parents), default=0)
        ancestors[name] = set(parents)
        for p in parents:
            ancestors[name] |= ancestors[p]

        body: list[str] = []
        if allow_members and name not in generic and rng.random() < 0.6:
            label = f"M{label_count}"
            label_count += 1
            upper_pool = [p for p in prev if p not in generic] + ["Object"]
            upper = rng.choice(upper_pool)
            style = rng.random()
            if style < 0.4:
                body.append(f"  type {label} = {upper}")
            elif style < 0.8:
                body.append(f"  type {label} <: {upper}")
            else:
                subs = [s for s in prev
                        if s not in generic and upper in ancestors[s]]
                lower = rng.choice(subs) if subs and rng.random() < 0.5 \
                    else "Nothing"
                body.append(f"  type {label} >: {lower} <: {upper}")
            own.setdefault(name, []).append(label)

        if body:
            lines.append(head + " {\n" + "\n".join(body) + "\n}")
        else:
            lines.append(head + " {}")

    members: dict[str, list[str]] = {}
    for name in kinds:
        seen: list[str] = []
        for a in sorted(ancestors[name]) + [name]:
            for label in own.get(a, []):
                if label not in seen:
                    seen.append(label)
        members[name] = seen

    lines.append("main = new Object()")
    return TableSpec("\n".join(lines), kinds, generic, members)


def checked_table(rng: random.Random, **kw):
    """Generate tables until one typechecks (they almost always do);
    returns (spec, typed_program)."""
    while True:
        spec = random_table(rng, **kw)
        try:
            return spec, check_text(spec.src)
        except SourceError:
            continue


def selection_env(rng: random.Random, spec: TableSpec,
                  tp: TypedProgram) -> tuple[TypeEnv, list[SourceType]]:
    """An environment binding x1 to some proper class, plus the selection
    atoms that binding makes available."""
    hosts = [n for n, k in spec.names.items()
             if k == "class" and n not in spec.generic and spec.members[n]]
    if not hosts:
        return EMPTY_ENV, []
    host = rng.choice(hosts)
    env = EMPTY_ENV.bind_term("x1", Applied(host, ()))
    atoms = [Selection("x1", label) for label in spec.members[host]]
    return env, atoms


def type_atoms(rng: random.Random, spec: TableSpec,
               extra: list[SourceType]) -> list[SourceType]:
    atoms: list[SourceType] = [OBJECT, NOTHING, BOOLEAN]
    plain = [n for n in spec.names if n not in spec.generic]
    atoms += [Applied(n, ()) for n in plain]
    arg_names = plain + ["Object"]
    for n in spec.generic:
        atoms.append(Applied(n, (Applied(rng.choice(arg_names), ()),)))
    return atoms + extra


def random_type(rng: random.Random, atoms: list[SourceType],
                depth: int = 2) -> SourceType:
    if depth == 0 or rng.random() < 0.45:
        return rng.choice(atoms)
    left = random_type(rng, atoms, depth - 1)
    right = random_type(rng, atoms, depth - 1)
    ctor = Intersection if rng.random() < 0.5 else UnionType
    return ctor(left, right)


# ---------------------------------------------------------------------------
# monomorphic hierarchies and intersection trees (for erasure laws)


def random_hierarchy(rng: random.Random, max_decls: int = 6) -> Lookup:
    """A monomorphic trait/class hierarchy for erased-intersection tests."""
    n = rng.randint(2, max_decls)
    lines = ["//level: PS"]
    kinds: dict[str, str] = {}
    for i in range(n):
        name = f"H{i + 1}"
        prev = list(kinds)
        if rng.random() < 0.55:
            pool = [p for p in prev if kinds[p] == "trait"]
            rng.shuffle(pool)
            parents = pool[: rng.randint(0, min(2, len(pool)))]
            lines.append(f"trait {name}"
                         + (" < " + ", ".join(parents) if parents else "")
                         + " {}")
            kinds[name] = "trait"
        else:
            pool = [p for p in prev if kinds[p] == "class"]
            base = rng.choice(pool) if pool and rng.random() < 0.5 else "Object"
            traits = [p for p in prev if kinds[p] == "trait"]
            rng.shuffle(traits)
            traits = traits[: rng.randint(0, min(2, len(traits)))]
            lines.append(f"class {name}() < " + ", ".join([base] + traits)
                         + " {}")
            kinds[name] = "class"
    lines.append("main = new Object()")
    return check_text("\n".join(lines)).lookup


def random_tree(rng: random.Random, leaves: list[str], size: int):
    """A random binary intersection tree as nested pairs over leaf names."""
    if size <= 1:
        return rng.choice(leaves)
    split = rng.randint(1, size - 1)
    return (random_tree(rng, leaves, split),
            random_tree(rng, leaves, size - split))


def tree_leaves(tree) -> list[str]:
    if isinstance(tree, str):
        return [tree]
    return tree_leaves(tree[0]) + tree_leaves(tree[1])


# ---------------------------------------------------------------------------
# backend agreement


def _cell_labels(decls) -> frozenset:
    out = set()
    for member in decls:
        if isinstance(member, dot.MethodDef):
            out.add(("def", member.name))
        elif isinstance(member, dot.TypeTag):
            out.add(("type", member.label))
    return frozenset(out)


def value_class(tp: TypedProgram, value: dot.Value) -> str:
    """Name the proper class whose constructor allocated the result cell,
    by matching member labels against each translated constructor."""
    tr = Translator(tp)
    cell = _cell_labels(value.store.cells[value.var])
    hits = []
    for name in tp.program.table.names():
        if tp.lookup.decl(name).is_trait:
            continue
        ctor = tr.constructor(name)
        if _cell_labels(ctor.body.decls) == cell:
            hits.append(name)
    assert len(hits) == 1, f"ambiguous or unmatched result cell: {hits}"
    return hits[0]
