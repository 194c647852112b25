"""Terms, bags, resources, and formal sums with multiset semantics.

A term applies a function to a bag (multiset) of resources.  A resource
is either linear (must be consumed exactly once) or reusable (marked
with !, available any number of times).  Sums collect alternative
results with natural multiplicities; the empty sum 0 means failure and
is absorbing everywhere except under !, where a reusable 0 collapses to
the empty bag.

Equality and hashing on every node go through a nameless canonical
form, so two expressions compare equal exactly when they are alpha
equivalent up to reordering of bag elements and sum addends.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

_element_ids = itertools.count(1)


def _next_element_id() -> int:
    # next() on itertools.count is atomic under the GIL, so ids stay
    # unique even when terms are built from several threads.
    return next(_element_ids)


class Node:
    """Base for all syntax nodes: equality is alpha-equivalence."""

    def canon(self):
        """Nameless canonical form, cached on first use."""
        try:
            return self._canon_cache
        except AttributeError:
            c = canon_at(self, {}, 0)
            object.__setattr__(self, "_canon_cache", c)
            return c

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Node):
            return NotImplemented
        return self.canon() == other.canon()

    def __hash__(self):
        return hash(self.canon())

    def __repr__(self):
        from . import parser

        return parser.print_expr(self)


class Term(Node):
    """A term: variable, abstraction, or application of a term to a bag."""


class Resource(Node):
    """One bag element: a term usable exactly once, or reusable under !."""


@dataclass(frozen=True, eq=False, repr=False)
class Var(Term):
    name: str


@dataclass(frozen=True, eq=False, repr=False)
class Abs(Term):
    binder: str
    body: Term


@dataclass(frozen=True, eq=False, repr=False)
class App(Term):
    fun: Term
    arg: "Bag"
    label: int | None = None


@dataclass(frozen=True, eq=False, repr=False)
class Hole(Term):
    """Placeholder left where an outer shape removed reusable content."""

    index: int


@dataclass(frozen=True, eq=False, repr=False)
class Linear(Resource):
    content: Term
    ident: int = field(default_factory=_next_element_id)


@dataclass(frozen=True, eq=False, repr=False)
class Reusable(Resource):
    content: Term
    ident: int = field(default_factory=_next_element_id)


@dataclass(frozen=True, eq=False, repr=False)
class Bag(Node):
    elements: tuple[Resource, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        idents = [r.ident for r in self.elements]
        if len(set(idents)) != len(idents):
            raise ValueError("duplicate element ids in one bag")


Expression = Union[Term, Bag]


@dataclass(frozen=True, eq=False, repr=False)
class Sum(Node):
    """Formal sum of terms or of bags, with natural multiplicities.

    Addends are merged by canonical form and kept sorted, so the stored
    tuple is itself canonical.  The empty sum is zero.
    """

    addends: tuple[tuple[Expression, int], ...] = ()

    def __post_init__(self):
        merged: dict = {}
        kinds = set()
        for expr, mult in self.addends:
            if isinstance(expr, Sum):
                raise TypeError("sum addends must be terms or bags, not sums")
            if mult < 0:
                raise ValueError("negative multiplicity")
            if mult == 0:
                continue
            kinds.add(isinstance(expr, Bag))
            key = expr.canon()
            if key in merged:
                merged[key] = (merged[key][0], merged[key][1] + mult)
            else:
                merged[key] = (expr, mult)
        if len(kinds) > 1:
            raise ValueError("sum mixes terms and bags")
        normal = tuple(merged[k] for k in sorted(merged))
        object.__setattr__(self, "addends", normal)

    @classmethod
    def of(cls, *exprs: Expression) -> "Sum":
        return cls(tuple((e, 1) for e in exprs))

    @property
    def is_zero(self) -> bool:
        return not self.addends

    def __iter__(self) -> Iterator[tuple[Expression, int]]:
        return iter(self.addends)

    def __add__(self, other: "Sum") -> "Sum":
        if not isinstance(other, Sum):
            return NotImplemented
        return Sum(self.addends + other.addends)

    def scaled(self, k: int) -> "Sum":
        return Sum(tuple((e, m * k) for e, m in self.addends))

    def support(self) -> tuple[Expression, ...]:
        return tuple(e for e, _ in self.addends)

    def total(self) -> int:
        return sum(m for _, m in self.addends)

    def sole(self) -> Expression:
        if len(self.addends) == 1 and self.addends[0][1] == 1:
            return self.addends[0][0]
        raise ValueError(f"sum is not a single addend: {self!r}")


ZERO = Sum(())


def canon_at(node, bound: dict[str, int], depth: int, ignore_labels: bool = False):
    """Canonical form of a subexpression under the given binder context."""
    match node:
        case Var(name):
            level = bound.get(name)
            if level is None:
                return ("free", name)
            return ("bound", depth - level)
        case Hole(index):
            return ("hole", index)
        case Abs(binder, body):
            return ("abs", canon_at(body, {**bound, binder: depth}, depth + 1, ignore_labels))
        case App(fun, arg, lab):
            f = canon_at(fun, bound, depth, ignore_labels)
            a = canon_at(arg, bound, depth, ignore_labels)
            if lab is None or ignore_labels:
                return ("app", f, a)
            return ("app*", lab, f, a)
        case Linear(content):
            return ("lin", canon_at(content, bound, depth, ignore_labels))
        case Reusable(content):
            return ("reu", canon_at(content, bound, depth, ignore_labels))
        case Bag(elements):
            return ("bag", tuple(sorted(canon_at(r, bound, depth, ignore_labels) for r in elements)))
        case Sum(addends):
            return ("sum", tuple((canon_at(e, {}, 0, ignore_labels), m) for e, m in addends))
    raise TypeError(f"not a syntax node: {node!r}")


def alpha_eq(a: Node, b: Node) -> bool:
    """True when a and b are the same expression up to binder names."""
    return a.canon() == b.canon()


def canonicalize(e: Node):
    return e.canon()


def free_vars(e: Node) -> frozenset[str]:
    match e:
        case Var(name):
            return frozenset((name,))
        case Hole():
            return frozenset()
        case Abs(binder, body):
            return free_vars(body) - {binder}
        case App(fun, arg):
            return free_vars(fun) | free_vars(arg)
        case Linear(content) | Reusable(content):
            return free_vars(content)
        case Bag(elements):
            out: frozenset[str] = frozenset()
            for r in elements:
                out |= free_vars(r)
            return out
        case Sum(addends):
            out = frozenset()
            for a, _ in addends:
                out |= free_vars(a)
            return out
    raise TypeError(f"not a syntax node: {e!r}")


def size(e: Node) -> int:
    """Symbol count: variables, binders, applications, and ! marks."""
    match e:
        case Var() | Hole():
            return 1
        case Abs(_, body):
            return 1 + size(body)
        case App(fun, arg):
            return 1 + size(fun) + size(arg)
        case Linear(content):
            return size(content)
        case Reusable(content):
            return 1 + size(content)
        case Bag(elements):
            return sum(size(r) for r in elements)
        case Sum(addends):
            return sum(m * size(a) for a, m in addends)
    raise TypeError(f"not a syntax node: {e!r}")


_NAME_SUFFIX = re.compile(r"_[0-9]+$")


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    """Deterministic rename target: base, then base_1, base_2, ..."""
    avoid = set(avoid)
    if base not in avoid:
        return base
    root = _NAME_SUFFIX.sub("", base) or "v"
    k = 1
    while f"{root}_{k}" in avoid:
        k += 1
    return f"{root}_{k}"


def sum_abs(x: str, s: Sum) -> Sum:
    """Abstraction pushed through a sum of bodies."""
    return Sum(tuple((Abs(x, m), k) for m, k in s))


def mk_app(funs: Sum, args: Sum, label: int | None = None) -> Sum:
    """Application extended bilinearly over sums of terms and of bags."""
    return Sum(tuple((App(f, b, label), i * j) for f, i in funs for b, j in args))


def sum_app(funs: Sum, args: Sum) -> Sum:
    return mk_app(funs, args, None)


def cons_linear(content: Sum, rest: Sum, ident: int | None = None) -> Sum:
    """Prepend one linear element, distributing over both sums.

    When ident is given, every produced element keeps that id; this lets
    substitution rebuild a bag without disturbing element identity.
    """
    pairs = []
    for t, i in content:
        for b, j in rest:
            e = Linear(t) if ident is None else Linear(t, ident)
            pairs.append((Bag((e,) + b.elements), i * j))
    return Sum(tuple(pairs))


def sum_bag_linear(content: Sum, rest: Sum) -> Sum:
    return cons_linear(content, rest, None)


def cons_reusable(content: Sum, rest: Sum, ident: int | None = None) -> Sum:
    """Prepend one reusable element whose content is a whole sum.

    A sum under ! collapses into one bag: each addend becomes its own
    reusable element, repeated per multiplicity, and a zero content
    contributes no element at all.
    """
    if content.total() == 1 and ident is not None:
        elems: tuple[Resource, ...] = (Reusable(content.sole(), ident),)
    else:
        elems = tuple(Reusable(t) for t, k in content for _ in range(k))
    return Sum(tuple((Bag(elems + b.elements), j) for b, j in rest))


def sum_bag_reusable(content: Sum, rest: Sum) -> Sum:
    return cons_reusable(content, rest, None)


@dataclass(frozen=True)
class LamVar:
    name: str


@dataclass(frozen=True)
class LamAbs:
    binder: str
    body: "LamTerm"


@dataclass(frozen=True)
class LamApp:
    fun: "LamTerm"
    arg: "LamTerm"


LamTerm = Union[LamVar, LamAbs, LamApp]


def from_lambda(t: LamTerm) -> Term:
    """Embed a pure lambda term: every argument becomes [!argument]."""
    match t:
        case LamVar(name):
            return Var(name)
        case LamAbs(x, body):
            return Abs(x, from_lambda(body))
        case LamApp(fun, arg):
            return App(from_lambda(fun), Bag((Reusable(from_lambda(arg)),)))
    raise TypeError(f"not a lambda term: {t!r}")
