"""Redex discovery, the redex order, and the three reduction relations.

A redex is an abstraction applied to a bag.  Giant steps feed the whole
bag at once, baby steps feed one element (or finish an empty bag with a
zero substitution), and non-deterministic steps keep a single addend of
the giant result.  Redexes are addressed by paths; positions are outer
when they sit under no ! mark, and the leftmost redexes are the minimal
ones in the redex order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Union

from .substitution import bag_subst, classical_subst, linear_subst, partial_subst
from .syntax import (
    Abs,
    App,
    Bag,
    Linear,
    Node,
    Resource,
    Reusable,
    Sum,
    Term,
    Var,
    ZERO,
    canon_at,
    cons_linear,
    cons_reusable,
    free_vars,
    fresh_name,
    mk_app,
    sum_abs,
)


class InvalidPath(ValueError):
    """The path does not address a position of the given expression."""


class InvalidRedex(ValueError):
    """The path does not address an abstraction applied to a bag."""


class InvalidTrace(ValueError):
    """The trace does not replay: some step is not a reduction step."""


@dataclass(frozen=True)
class AbsBody:
    pass


@dataclass(frozen=True)
class AppFun:
    pass


@dataclass(frozen=True)
class AppArg:
    pass


@dataclass(frozen=True)
class BagElem:
    ident: int


@dataclass(frozen=True)
class ResourceContent:
    pass


PathStep = Union[AbsBody, AppFun, AppArg, BagElem, ResourceContent]


@dataclass(frozen=True)
class Path:
    steps: tuple[PathStep, ...] = ()

    def child(self, *more: PathStep) -> "Path":
        return Path(self.steps + more)


@dataclass(frozen=True)
class Redex:
    path: Path
    rule: str  # "Empty" | "LinearHead" | "ReusableHead" | "Giant"
    outer: bool
    leftmost: bool


@dataclass(frozen=True)
class Step:
    before: Term
    redex: Redex
    mode: str  # "baby" | "giant" | "nd"
    after: Union[Sum, Term]
    chosen: str | None = None  # printed local addend, nd mode only
    local: Term | None = None  # the chosen local reduct, nd mode only


@dataclass(frozen=True)
class Trace:
    initial: Term
    steps: tuple[Step, ...]
    mode: str
    final: Union[Sum, Term, None] = None
    truncated: bool = False
    crashed: bool = False


def resolve(m: Node, path: Path) -> Node:
    """The subexpression of m at the given path."""
    node = m
    for step in path.steps:
        match (node, step):
            case (Abs(_, body), AbsBody()):
                node = body
            case (App(fun, _, _), AppFun()):
                node = fun
            case (App(_, arg, _), AppArg()):
                node = arg
            case (Bag(elements), BagElem(ident)):
                found = [r for r in elements if r.ident == ident]
                if not found:
                    raise InvalidPath(f"no bag element with id {ident}")
                node = found[0]
            case (Linear(content) | Reusable(content), ResourceContent()):
                node = content
            case _:
                raise InvalidPath(f"step {step!r} does not match {type(node).__name__}")
    return node


def linear_position(m: Node, path: Path) -> bool:
    """True when the path passes through no reusable element."""
    node = m
    for step in path.steps:
        if isinstance(node, Reusable) and isinstance(step, ResourceContent):
            return False
        node = resolve(node, Path((step,)))
    return True


def _ranked_elements(bag: Bag, levels: dict[str, int], depth: int) -> list[Resource]:
    keyed = [(canon_at(r, levels, depth, ignore_labels=True), i, r) for i, r in enumerate(bag.elements)]
    return [r for _, _, r in sorted(keyed, key=lambda t: (t[0], t[1]))]


def serialize_path(m: Node, path: Path) -> tuple:
    """Id-free form of a path: bag elements become canonical ranks."""
    out: list = []
    node = m
    levels: dict[str, int] = {}
    depth = 0
    for step in path.steps:
        match (node, step):
            case (Abs(binder, body), AbsBody()):
                out.append("body")
                levels = {**levels, binder: depth}
                depth += 1
                node = body
            case (App(fun, _, _), AppFun()):
                out.append("fun")
                node = fun
            case (App(_, arg, _), AppArg()):
                out.append("arg")
                node = arg
            case (Bag(), BagElem(ident)):
                ranked = _ranked_elements(node, levels, depth)
                idx = [i for i, r in enumerate(ranked) if r.ident == ident]
                if not idx:
                    raise InvalidPath(f"no bag element with id {ident}")
                out.append(("elem", idx[0]))
                node = ranked[idx[0]]
            case (Linear(content) | Reusable(content), ResourceContent()):
                out.append("content")
                node = content
            case _:
                raise InvalidPath(f"step {step!r} does not match {type(node).__name__}")
    return tuple(out)


def resolve_path(m: Node, spath: Iterable) -> Path:
    """Turn an id-free path back into an addressed path on m."""
    steps: list[PathStep] = []
    node = m
    levels: dict[str, int] = {}
    depth = 0
    for tag in spath:
        if isinstance(tag, dict):
            tag = ("elem", tag["elem"])
        match (node, tag):
            case (Abs(binder, body), "body"):
                steps.append(AbsBody())
                levels = {**levels, binder: depth}
                depth += 1
                node = body
            case (App(fun, _, _), "fun"):
                steps.append(AppFun())
                node = fun
            case (App(_, arg, _), "arg"):
                steps.append(AppArg())
                node = arg
            case (Bag(), ("elem", rank)):
                ranked = _ranked_elements(node, levels, depth)
                if not 0 <= rank < len(ranked):
                    raise InvalidPath(f"bag rank {rank} out of range")
                node = ranked[rank]
                steps.append(BagElem(node.ident))
            case (Bag(), ("elemid", ident)):
                found = [r for r in node.elements if r.ident == ident]
                if not found:
                    raise InvalidPath(f"no bag element with id {ident}")
                node = found[0]
                steps.append(BagElem(ident))
            case (Linear(content) | Reusable(content), "content"):
                steps.append(ResourceContent())
                node = content
            case _:
                raise InvalidPath(f"tag {tag!r} does not match {type(node).__name__}")
    return Path(tuple(steps))


_TAG_ORDER = {"body": 0, "fun": 1, "arg": 2, "content": 4}


def path_sort_key(spath: tuple) -> tuple:
    return tuple((3, t[1]) if isinstance(t, tuple) else (_TAG_ORDER[t], 0) for t in spath)


def path_key(m: Node, path: Path) -> tuple:
    return path_sort_key(serialize_path(m, path))


def transport_path(src: Node, path: Path, dst: Node) -> Path:
    """Carry a path between alpha-equivalent expressions by rank."""
    return resolve_path(dst, serialize_path(src, path))


def _leftmost_paths(node: Node, prefix: tuple[PathStep, ...]) -> list[tuple[PathStep, ...]]:
    match node:
        case Var():
            return []
        case Abs(_, body):
            return _leftmost_paths(body, prefix + (AbsBody(),))
        case App(fun, arg, _):
            if isinstance(fun, Abs):
                return [prefix]
            got = _leftmost_paths(fun, prefix + (AppFun(),))
            if got:
                return got
            return _leftmost_paths(arg, prefix + (AppArg(),))
        case Bag(elements):
            acc = []
            for r in elements:
                if isinstance(r, Linear):
                    acc += _leftmost_paths(r.content, prefix + (BagElem(r.ident), ResourceContent()))
            return acc
    raise TypeError(f"not a syntax node: {node!r}")


def _bag_rule(bag: Bag) -> str:
    if not bag.elements:
        return "Empty"
    least = min(bag.elements, key=lambda r: (r.canon(), r.ident))
    return "LinearHead" if isinstance(least, Linear) else "ReusableHead"


def find_redexes(m: Term) -> list[Redex]:
    """All redexes of m, sorted by path, flagged outer and leftmost."""
    lm = {p for p in _leftmost_paths(m, ())}
    found: list[Redex] = []

    def walk(node: Node, prefix: tuple[PathStep, ...], outer: bool):
        match node:
            case Var():
                return
            case Abs(_, body):
                walk(body, prefix + (AbsBody(),), outer)
            case App(fun, arg, _):
                if isinstance(fun, Abs):
                    found.append(Redex(Path(prefix), _bag_rule(arg), outer, prefix in lm))
                walk(fun, prefix + (AppFun(),), outer)
                for r in arg.elements:
                    walk(
                        r.content,
                        prefix + (AppArg(), BagElem(r.ident), ResourceContent()),
                        outer and isinstance(r, Linear),
                    )

    walk(m, (), True)
    return sorted(found, key=lambda r: path_key(m, r.path))


def leftmost_set(m: Term) -> set[Redex]:
    return {r for r in find_redexes(m) if r.leftmost}


def is_onf(m: Term) -> bool:
    """Outer normal form: no redex outside every ! mark."""
    return not any(r.outer for r in find_redexes(m))


def precedes(p1: Path, p2: Path, m: Term) -> str:
    """Order two positions of m: "Before", "After", or "Incomparable".

    A position containing another comes first; at a divergence point a
    linear position precedes a non-linear one, and between two linear
    positions of an application the function side precedes the argument
    side.
    """
    resolve(m, p1)
    resolve(m, p2)
    s1, s2 = p1.steps, p2.steps
    if s1 == s2:
        return "Incomparable"
    k = 0
    while k < len(s1) and k < len(s2) and s1[k] == s2[k]:
        k += 1
    if k == len(s1):
        return "Before"
    if k == len(s2):
        return "After"
    root = resolve(m, Path(s1[:k]))
    lin1 = linear_position(root, Path(s1[k:]))
    lin2 = linear_position(root, Path(s2[k:]))
    if lin1 and not lin2:
        return "Before"
    if lin2 and not lin1:
        return "After"
    if lin1 and lin2 and isinstance(root, App):
        if isinstance(s1[k], AppFun) and isinstance(s2[k], AppArg):
            return "Before"
        if isinstance(s1[k], AppArg) and isinstance(s2[k], AppFun):
            return "After"
    return "Incomparable"


def plug(m: Term, path: Path, s: Sum) -> Sum:
    """Replace the subterm at path with a sum, distributing contexts.

    Abstractions and applications distribute addend by addend; a linear
    element distributes likewise, while a reusable element collapses the
    sum into sibling elements of a single bag.  Untouched subterms are
    shared, so element ids away from the path are stable; a reusable
    element filled with a one-addend sum keeps its id too.
    """
    return _plug(m, path.steps, s)


def _plug(node: Node, steps: tuple[PathStep, ...], s: Sum) -> Sum:
    if not steps:
        return s
    step = steps[0]
    match (node, step):
        case (Abs(binder, body), AbsBody()):
            return sum_abs(binder, _plug(body, steps[1:], s))
        case (App(fun, arg, label), AppFun()):
            return mk_app(_plug(fun, steps[1:], s), Sum.of(arg), label)
        case (App(fun, arg, label), AppArg()):
            return mk_app(Sum.of(fun), _plug_bag(arg, steps[1:], s), label)
        case _:
            raise InvalidPath(f"step {step!r} does not match {type(node).__name__}")


def _plug_bag(bag: Bag, steps: tuple[PathStep, ...], s: Sum) -> Sum:
    if not steps or not isinstance(steps[0], BagElem):
        raise InvalidPath("path into a bag must address an element")
    ident = steps[0].ident
    picked = [r for r in bag.elements if r.ident == ident]
    if not picked:
        raise InvalidPath(f"no bag element with id {ident}")
    r = picked[0]
    rest = Sum.of(Bag(tuple(e for e in bag.elements if e.ident != ident)))
    if len(steps) < 2 or not isinstance(steps[1], ResourceContent):
        raise InvalidPath("path into an element must address its content")
    content = _plug(r.content, steps[2:], s)
    if isinstance(r, Linear):
        return cons_linear(content, rest, r.ident)
    return cons_reusable(content, rest, r.ident)


def _redex_node(m: Term, path: Path) -> App:
    node = resolve(m, path)
    if not (isinstance(node, App) and isinstance(node.fun, Abs)):
        raise InvalidRedex(f"no redex at {serialize_path(m, path)!r}")
    return node


def redex_at(m: Term, path: Path) -> Redex:
    node = _redex_node(m, path)
    lm = {p for p in _leftmost_paths(m, ())}
    return Redex(path, _bag_rule(node.arg), linear_position(m, path), path.steps in lm)


def _fresh_redex(node: App) -> tuple[str, Term, Bag]:
    """Binder, body, and bag of a redex, renamed so the binder is free
    to receive the bag's contents."""
    binder, body, bag = node.fun.binder, node.fun.body, node.arg
    if binder in free_vars(bag):
        new = fresh_name(binder, free_vars(bag) | free_vars(body))
        body = classical_subst(body, binder, Sum.of(Var(new))).sole()
        binder = new
    return binder, body, bag


def giant_local(node: App) -> Sum:
    """Whole-bag firing of one redex: bag substitution then zeroing."""
    binder, body, bag = _fresh_redex(node)
    return classical_subst(bag_subst(body, binder, bag), binder, ZERO)


def baby_local(node: App) -> Sum:
    """One-element firing: the canonically least element is consumed."""
    binder, body, bag = _fresh_redex(node)
    if not bag.elements:
        return classical_subst(body, binder, ZERO)
    least = min(bag.elements, key=lambda r: (r.canon(), r.ident))
    rest = Bag(tuple(e for e in bag.elements if e.ident != least.ident))
    if isinstance(least, Linear):
        new_body = linear_subst(body, binder, least.content)
    else:
        new_body = partial_subst(body, binder, least.content)
    return mk_app(sum_abs(binder, new_body), Sum.of(rest), None)


def giant_step(m: Term, r: Redex) -> Sum:
    return plug(m, r.path, giant_local(_redex_node(m, r.path)))


def baby_step(m: Term, r: Redex) -> Sum:
    return plug(m, r.path, baby_local(_redex_node(m, r.path)))


def baby_expand(m: Term, r: Redex) -> Sum:
    """Fire one redex with baby steps until the bag and binder are gone.

    Agrees with giant_step: feeding elements one at a time and then
    zeroing is the same as feeding the whole bag.
    """
    binder, body, bag = _fresh_redex(_redex_node(m, r.path))
    acc = ZERO
    work: list[tuple[Term, Bag, int]] = [(body, bag, 1)]
    while work:
        cur, remaining, mult = work.pop()
        if not remaining.elements:
            acc = acc + classical_subst(cur, binder, ZERO).scaled(mult)
            continue
        least = min(remaining.elements, key=lambda e: (e.canon(), e.ident))
        rest = Bag(tuple(e for e in remaining.elements if e.ident != least.ident))
        if isinstance(least, Linear):
            fed = linear_subst(cur, binder, least.content)
        else:
            fed = partial_subst(cur, binder, least.content)
        for t, k in fed:
            work.append((t, rest, mult * k))
    return plug(m, r.path, acc)


def nd_reducts(m: Term, r: Redex) -> list[tuple[Term, Term]]:
    """(local addend, whole term) pairs, one per giant-result addend,
    deduplicated and in canonical order of the local addend."""
    local = giant_local(_redex_node(m, r.path))
    out: list[tuple[Term, Term]] = []
    seen = set()
    for t, _ in local:
        if t.canon() in seen:
            continue
        seen.add(t.canon())
        whole = plug(m, r.path, Sum.of(t)).sole()
        out.append((t, whole))
    out.sort(key=lambda p: p[0].canon())
    return out


def nd_step(m: Term, r: Redex) -> set[Term]:
    """All one-addend outcomes of firing r; empty means the step crashes."""
    return {whole for _, whole in nd_reducts(m, r)}


def make_giant_step(m: Term, r: Redex) -> Step:
    return Step(m, replace(redex_at(m, r.path), rule="Giant"), "giant", giant_step(m, r))


def make_baby_step(m: Term, r: Redex) -> Step:
    return Step(m, redex_at(m, r.path), "baby", baby_step(m, r))


def make_nd_step(m: Term, r: Redex, local: Term, whole: Term) -> Step:
    from .parser import print_expr

    return Step(
        m,
        replace(redex_at(m, r.path), rule="Giant"),
        "nd",
        whole,
        chosen=print_expr(local),
        local=local,
    )


def fire_nd(m: Term, path: Path, chosen=None) -> Step:
    """Fire one nd step; chosen picks the local addend by canonical form
    (least when omitted).  Raises InvalidTrace when nothing matches."""
    r = redex_at(m, path)
    pairs = nd_reducts(m, r)
    if not pairs:
        raise InvalidTrace("the fired redex reduces to zero")
    if chosen is None:
        local, whole = pairs[0]
    else:
        matching = [(t, w) for t, w in pairs if canon_at(t, {}, 0, ignore_labels=True) == chosen]
        if not matching:
            raise InvalidTrace("chosen addend is not a reduct of the fired redex")
        local, whole = matching[0]
    return make_nd_step(m, r, local, whole)


def label(m: Term, targets: Iterable[Path]) -> Term:
    """Attach labels 1..n to the redexes at the given paths."""
    out = m
    for i, p in enumerate(sorted(targets, key=lambda p: path_key(m, p)), 1):
        _redex_node(out, p)
        out = _relabel(out, p.steps, i)
    return out


def _relabel(node: Node, steps: tuple[PathStep, ...], lab: int | None) -> Node:
    if not steps:
        if not isinstance(node, App):
            raise InvalidRedex("only applications carry labels")
        return replace(node, label=lab)
    step = steps[0]
    match (node, step):
        case (Abs(), AbsBody()):
            return replace(node, body=_relabel(node.body, steps[1:], lab))
        case (App(), AppFun()):
            return replace(node, fun=_relabel(node.fun, steps[1:], lab))
        case (App(), AppArg()):
            return replace(node, arg=_relabel(node.arg, steps[1:], lab))
        case (Bag(), BagElem(ident)):
            elems = tuple(
                replace(r, content=_relabel(r.content, steps[2:], lab)) if r.ident == ident else r
                for r in node.elements
            )
            if all(r.ident != ident for r in node.elements):
                raise InvalidPath(f"no bag element with id {ident}")
            if len(steps) < 2 or not isinstance(steps[1], ResourceContent):
                raise InvalidPath("path into an element must address its content")
            return Bag(elems)
        case _:
            raise InvalidPath(f"step {step!r} does not match {type(node).__name__}")


def labels_in(m: Node) -> dict[int, set[Path]]:
    found: dict[int, set[Path]] = {}

    def walk(node: Node, prefix: tuple[PathStep, ...]):
        match node:
            case Var():
                return
            case Abs(_, body):
                walk(body, prefix + (AbsBody(),))
            case App(fun, arg, lab):
                if lab is not None:
                    found.setdefault(lab, set()).add(Path(prefix))
                walk(fun, prefix + (AppFun(),))
                walk(arg, prefix + (AppArg(),))
            case Bag(elements):
                for r in elements:
                    walk(r.content, prefix + (BagElem(r.ident), ResourceContent()))
            case Linear(content) | Reusable(content):
                walk(content, prefix + (ResourceContent(),))

    walk(m, ())
    return found


def erase_labels(m: Node) -> Node:
    match m:
        case Var():
            return m
        case Abs():
            return replace(m, body=erase_labels(m.body))
        case App():
            return App(erase_labels(m.fun), erase_labels(m.arg), None)
        case Bag(elements):
            return Bag(tuple(replace(r, content=erase_labels(r.content)) for r in elements))
        case Linear() | Reusable():
            return replace(m, content=erase_labels(m.content))
        case Sum(addends):
            return Sum(tuple((erase_labels(e), k) for e, k in addends))
    raise TypeError(f"not a syntax node: {m!r}")


def residuals(labelled_term: Term, step: Step) -> dict[int, set[Path]]:
    """Where each labelled redex survives after the given nd step.

    The labelled term must erase to the step's source; residuals are
    collected in every labelled addend matching the step's result.
    """
    if step.mode != "nd":
        raise ValueError("residual tracking follows nd steps")
    if erase_labels(labelled_term) != step.before:
        raise InvalidTrace("labelled term does not erase to the step source")
    path = transport_path(step.before, step.redex.path, labelled_term)
    node = _redex_node(labelled_term, path)
    out: dict[int, set[Path]] = {}
    for t, _ in giant_local(node):
        whole = plug(labelled_term, path, Sum.of(t)).sole()
        if erase_labels(whole) == step.after:
            for lab, paths in labels_in(whole).items():
                out.setdefault(lab, set()).update(paths)
    return out


def _sum_replace(state: Sum, target: Term, after: Sum) -> Sum:
    """Replace one occurrence of an addend with a whole sum."""
    items = []
    removed = False
    for e, k in state:
        if not removed and e == target:
            if k > 1:
                items.append((e, k - 1))
            removed = True
        else:
            items.append((e, k))
    if not removed:
        raise InvalidTrace("stepped addend is not in the state")
    return Sum(tuple(items)) + after


def _sorted_redexes(m: Term, leftmost_only: bool) -> list[Redex]:
    rs = find_redexes(m)
    return [r for r in rs if r.leftmost] if leftmost_only else rs


def _nd_leftmost_run(m: Term, budget: int) -> Trace:
    steps: list[Step] = []
    cur = m
    for _ in range(budget):
        lm = _sorted_redexes(cur, True)
        if not lm:
            return Trace(m, tuple(steps), "nd", final=cur)
        pairs = nd_reducts(cur, lm[0])
        if not pairs:
            return Trace(m, tuple(steps), "nd", final=cur, crashed=True)
        local, whole = pairs[0]
        steps.append(make_nd_step(cur, lm[0], local, whole))
        cur = whole
    done = not _sorted_redexes(cur, True)
    return Trace(m, tuple(steps), "nd", final=cur, truncated=not done)


def _nd_paths_run(m: Term, budget: int, paths: Iterable) -> Trace:
    steps: list[Step] = []
    cur = m
    for spath in list(paths)[:budget]:
        step = fire_nd(cur, resolve_path(cur, spath))
        steps.append(step)
        cur = step.after
    return Trace(m, tuple(steps), "nd", final=cur)


@dataclass
class _SearchNode:
    term: Term
    parent: "_SearchNode | None"
    step: Step | None
    depth: int


def _trace_of(node: _SearchNode, mode: str, **flags) -> Trace:
    steps = []
    cur = node
    while cur.step is not None:
        steps.append(cur.step)
        cur = cur.parent
    steps.reverse()
    return Trace(cur.term, tuple(steps), mode, final=node.term, **flags)


def _in_ancestry(node: _SearchNode, key) -> bool:
    cur = node
    while cur is not None:
        if cur.term.canon() == key:
            return True
        cur = cur.parent
    return False


def _nd_all_run(m: Term, budget: int) -> list[Trace]:
    root = _SearchNode(m, None, None, 0)
    queue = deque([root])
    visited = {m.canon()}
    out: list[Trace] = []
    while queue:
        node = queue.popleft()
        rs = find_redexes(node.term)
        if not rs:
            out.append(_trace_of(node, "nd"))
            continue
        if node.depth >= budget:
            out.append(_trace_of(node, "nd", truncated=True))
            continue
        for r in rs:
            pairs = nd_reducts(node.term, r)
            if not pairs:
                out.append(_trace_of(node, "nd", crashed=True))
                continue
            for local, whole in pairs:
                step = make_nd_step(node.term, r, local, whole)
                child = _SearchNode(whole, node, step, node.depth + 1)
                if whole.canon() in visited:
                    # A repeated state still gets a trace, so every
                    # explored edge shows up in the output.
                    out.append(_trace_of(child, "nd", truncated=True))
                else:
                    visited.add(whole.canon())
                    queue.append(child)
    return out


@dataclass
class _SumNode:
    state: Sum
    parent: "_SumNode | None"
    step: Step | None
    depth: int


def _sum_trace_of(initial: Term, node: _SumNode, mode: str, **flags) -> Trace:
    steps = []
    cur = node
    while cur.step is not None:
        steps.append(cur.step)
        cur = cur.parent
    steps.reverse()
    crashed = flags.pop("crashed", node.state.is_zero)
    return Trace(initial, tuple(steps), mode, final=node.state, crashed=crashed, **flags)


def _sum_run(m: Term, mode: str, budget: int, leftmost_only: bool) -> list[Trace]:
    """Whole-sum reduction search: each step rewrites one addend
    occurrence, branching over addends (and over redexes unless
    leftmost_only)."""
    fire = giant_step if mode == "giant" else baby_step
    rule = "Giant" if mode == "giant" else None
    root = _SumNode(Sum.of(m), None, None, 0)
    queue = deque([root])
    visited = {root.state.canon()}
    out: list[Trace] = []
    while queue:
        node = queue.popleft()
        targets = [(e, _sorted_redexes(e, leftmost_only)) for e, _ in node.state]
        targets = [(e, rs) for e, rs in targets if rs]
        if not targets:
            out.append(_sum_trace_of(m, node, mode))
            continue
        if node.depth >= budget:
            out.append(_sum_trace_of(m, node, mode, truncated=True))
            continue
        for e, rs in targets:
            for r in rs if not leftmost_only else rs[:1]:
                after = fire(e, r)
                redex = redex_at(e, r.path)
                if rule:
                    redex = replace(redex, rule=rule)
                step = Step(e, redex, mode, after)
                child_state = _sum_replace(node.state, e, after)
                child = _SumNode(child_state, node, step, node.depth + 1)
                if child_state.canon() in visited:
                    out.append(_sum_trace_of(m, child, mode, truncated=True))
                else:
                    visited.add(child_state.canon())
                    queue.append(child)
    return out


def strategy_run(m: Term, mode: str = "nd", pick: str = "leftmost", budget: int = 100, paths=None) -> list[Trace]:
    """Run a reduction strategy from m.

    nd mode walks single terms: leftmost-first is deterministic (least
    leftmost redex, least addend), paths fires a given path sequence,
    and all searches every redex and addend with states deduplicated by
    canonical form.  giant and baby modes walk whole sums, branching
    over addends; leftmost restricts each addend to its leftmost redex.
    Traces stop at normal forms, at the step budget (truncated), on
    cycles (truncated), or when a choice reduces to zero (crashed).
    """
    if mode == "nd":
        if pick == "leftmost":
            return [_nd_leftmost_run(m, budget)]
        if pick == "paths":
            return [_nd_paths_run(m, budget, paths or ())]
        if pick == "all":
            return _nd_all_run(m, budget)
    elif mode in ("giant", "baby"):
        if pick == "paths":
            raise ValueError("path picking applies to nd mode only")
        return _sum_run(m, mode, budget, pick == "leftmost")
    raise ValueError(f"unknown strategy {mode!r}/{pick!r}")


def step_record(index: int, s: Step) -> dict:
    from .parser import print_expr

    def jsonable(spath):
        return [t if isinstance(t, str) else {"elem": t[1]} for t in spath]

    return {
        "index": index,
        "rule": s.redex.rule,
        "mode": s.mode,
        "redex_path": jsonable(serialize_path(s.before, s.redex.path)),
        "chosen_addend": s.chosen,
        "term_before": print_expr(s.before),
        "term_after": print_expr(s.after),
    }


def trace_records(t: Trace) -> list[dict]:
    return [step_record(i, s) for i, s in enumerate(t.steps)]


def trace_from_records(records: list[dict]) -> Trace:
    """Rebuild and validate an nd trace from its serialized steps."""
    from .parser import parse_term

    if not records:
        raise InvalidTrace("empty record list")
    required = ("index", "mode", "redex_path", "term_before", "term_after")
    for rec in records:
        missing = [k for k in required if k not in rec]
        if missing:
            raise InvalidTrace(f"step record lacks {', '.join(missing)}")
    cur = parse_term(records[0]["term_before"])
    initial = cur
    steps = []
    for rec in records:
        if rec["mode"] != "nd":
            raise InvalidTrace("only nd traces can be rebuilt from records")
        if parse_term(rec["term_before"]) != cur:
            raise InvalidTrace(f"step {rec['index']} does not chain")
        chosen = rec.get("chosen_addend")
        chosen_key = None
        if chosen is not None:
            chosen_key = canon_at(parse_term(chosen), {}, 0, ignore_labels=True)
        step = fire_nd(cur, resolve_path(cur, rec["redex_path"]), chosen_key)
        if parse_term(rec["term_after"]) != step.after:
            raise InvalidTrace(f"step {rec['index']} result does not match")
        steps.append(step)
        cur = step.after
    return Trace(initial, tuple(steps), "nd", final=cur)
