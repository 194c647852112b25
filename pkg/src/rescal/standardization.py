"""Standard reduction chains: checking, reordering, and construction.

A non-deterministic trace is *standard* when no step fires a residual of
a redex that came strictly earlier, in the position order, than the
redex fired just before it.  This module checks that property with the
label machinery of module reduction, and constructs standard chains
independently of labels: factor a chain into an outer part followed by
an inner part, make the outer part leftmost-first by repeated two-step
swaps, split the inner part by the holes of the outer shape, and
recurse into the hole contents.
"""

from collections import deque
from dataclasses import dataclass, replace

from .syntax import Abs, App, Bag, Hole, Linear, Reusable, Sum, Term, Var, canon_at
from .reduction import (
    AbsBody,
    AppArg,
    AppFun,
    BagElem,
    InvalidTrace,
    Path,
    PathStep,
    ResourceContent,
    Step,
    Trace,
    _redex_node,
    erase_labels,
    find_redexes,
    fire_nd,
    giant_local,
    label,
    labels_in,
    nd_reducts,
    path_key,
    plug,
    precedes,
    resolve,
    resolve_path,
    serialize_path,
    transport_path,
)

DEFAULT_SLACK = 2
_MAX_RECURSION = 64


class SearchExhausted(Exception):
    """A bounded search ended without a witness.

    Raised by factor_outer_inner when no outer-then-inner chain with the
    same endpoints exists within the length bound, and by reorder_outer
    when no two-step leftmost-first replacement of an adjacent step pair
    exists — the latter would contradict the swap property of leftmost
    steps and deserves a loud failure.
    """

    def __init__(self, message: str, explored: int = 0):
        super().__init__(message)
        self.explored = explored


class NoChainFound(Exception):
    """No non-deterministic chain between the endpoints within bound."""


@dataclass(frozen=True)
class StdReport:
    """Verdict of is_standard.

    When standard is false, violation is (index, prior, fired): step
    number index (0-based) fired a residual of the redex at serialized
    path prior, although prior came strictly before the path fired at
    step index - 1; both paths are in the coordinates of the term that
    step index - 1 reduced.
    """

    standard: bool
    violation: tuple[int, tuple, tuple] | None = None


@dataclass(frozen=True)
class HoleSite:
    index: int
    path: Path
    content: Term


@dataclass(frozen=True)
class OuterShape:
    """A term whose reusable contents are replaced by numbered holes."""

    skeleton: Term
    holes: tuple[HoleSite, ...]


def _key(local: Term) -> tuple:
    return canon_at(local, {}, 0, ignore_labels=True)


def _refire(cur: Term, old: Step) -> Step:
    """Fire old's move on an alpha-equivalent term."""
    path = transport_path(old.before, old.redex.path, cur)
    return fire_nd(cur, path, _key(old.local))


def _chain(initial: Term, steps) -> list[Step]:
    """Refire a sequence of steps from initial, threading terms exactly."""
    out: list[Step] = []
    cur = initial
    for s in steps:
        if cur != s.before:
            raise InvalidTrace("steps do not chain: a source differs from the previous result")
        step = _refire(cur, s)
        if step.after != s.after:
            raise InvalidTrace("step does not replay: recorded result is not a reduct")
        out.append(step)
        cur = step.after
    return out


def _validated(t: Trace) -> list[Step]:
    if t.mode != "nd" or any(s.mode != "nd" for s in t.steps):
        raise InvalidTrace("standardness is defined for nd traces")
    if t.steps and t.steps[0].before != t.initial:
        raise InvalidTrace("trace does not start at its initial term")
    for s in t.steps:
        if s.local is None:
            raise InvalidTrace("nd step lacks its chosen local reduct")
    return _chain(t.initial, t.steps)


def _trace(initial: Term, steps: list[Step]) -> Trace:
    final = steps[-1].after if steps else initial
    return Trace(initial, tuple(steps), "nd", final=final)


# ---------------------------------------------------------------- checking


def _labelled_outcomes(labelled: Term, path: Path, expected: Term):
    node = _redex_node(labelled, path)
    for t, _ in giant_local(node):
        whole = plug(labelled, path, Sum.of(t)).sole()
        if erase_labels(whole) == expected:
            yield whole


def is_standard(t: Trace) -> StdReport:
    """Check an nd trace for standardness.

    Each step's strictly-earlier redexes are labelled, the step is
    replayed on the labelled term, and the next step must not fire any
    position where a label survives.
    """
    steps = _validated(t)
    for i in range(len(steps) - 1):
        cur = steps[i].before
        fired = steps[i].redex.path
        prior = [r.path for r in find_redexes(cur) if precedes(r.path, fired, cur) == "Before"]
        if not prior:
            continue
        ordered = sorted(prior, key=lambda p: path_key(cur, p))
        labelled = label(cur, ordered)
        lpath = transport_path(cur, fired, labelled)
        nxt = steps[i + 1]
        nxt_fired = serialize_path(nxt.before, nxt.redex.path)
        for whole in _labelled_outcomes(labelled, lpath, steps[i].after):
            for lab, paths in labels_in(whole).items():
                for p in paths:
                    if serialize_path(whole, p) == nxt_fired:
                        violation = (
                            i + 1,
                            serialize_path(cur, ordered[lab - 1]),
                            serialize_path(cur, fired),
                        )
                        return StdReport(False, violation)
    return StdReport(True, None)


# ------------------------------------------------------------ outer shape


def outer_shape(m: Term) -> OuterShape:
    """Replace every outermost reusable content with a numbered hole."""
    sites: list[HoleSite] = []

    def walk(node, prefix: tuple[PathStep, ...], levels: dict[str, int], depth: int):
        match node:
            case Var() | Hole():
                return node
            case Abs(binder, body):
                inner = walk(body, prefix + (AbsBody(),), {**levels, binder: depth}, depth + 1)
                return replace(node, body=inner)
            case App(fun, arg, _):
                new_fun = walk(fun, prefix + (AppFun(),), levels, depth)
                new_arg = walk(arg, prefix + (AppArg(),), levels, depth)
                return replace(node, fun=new_fun, arg=new_arg)
            case Bag(elements):
                ranked = sorted(
                    range(len(elements)),
                    key=lambda i: (canon_at(elements[i], levels, depth, ignore_labels=True), i),
                )
                repl: dict[int, Term] = {}
                for i in ranked:
                    r = elements[i]
                    at = prefix + (BagElem(r.ident), ResourceContent())
                    if isinstance(r, Reusable):
                        repl[i] = Hole(len(sites))
                        sites.append(HoleSite(len(sites), Path(at), r.content))
                    else:
                        repl[i] = walk(r.content, at, levels, depth)
                return Bag(tuple(replace(r, content=repl[i]) for i, r in enumerate(elements)))
        raise TypeError(f"not a syntax node: {node!r}")

    skeleton = walk(m, (), {}, 0)
    return OuterShape(skeleton, tuple(sites))


def plug_shape(shape: OuterShape) -> Term:
    """Reinsert hole contents; inverse of outer_shape."""
    contents = {site.index: site.content for site in shape.holes}

    def fill(node):
        match node:
            case Hole(index):
                return contents[index]
            case Var():
                return node
            case Abs():
                return replace(node, body=fill(node.body))
            case App():
                return replace(node, fun=fill(node.fun), arg=fill(node.arg))
            case Bag(elements):
                return Bag(tuple(replace(r, content=fill(r.content)) for r in elements))
        raise TypeError(f"not a syntax node: {node!r}")

    return fill(shape.skeleton)


# ----------------------------------------------------------- factorization


def _factor_search(initial: Term, target: Term, max_len: int):
    """Shortest outer*-then-inner* nd chain between the endpoints."""
    start = (0, initial, [], [])
    queue = deque([start])
    visited = {(0, initial.canon())}
    explored = 0
    while queue:
        phase, cur, outs, ins = queue.popleft()
        if cur == target:
            return outs, ins
        explored += 1
        if len(outs) + len(ins) >= max_len:
            continue
        for r in find_redexes(cur):
            if r.outer and phase == 1:
                continue  # outer steps may not follow an inner one
            for local, whole in nd_reducts(cur, r):
                key = (0 if r.outer else 1, whole.canon())
                if key in visited:
                    continue
                visited.add(key)
                step = fire_nd(cur, r.path, _key(local))
                if r.outer:
                    queue.append((0, whole, outs + [step], ins))
                else:
                    queue.append((1, whole, outs, ins + [step]))
    raise SearchExhausted(
        f"no outer-then-inner chain of length <= {max_len} reaches the endpoint",
        explored,
    )


def factor_outer_inner(t: Trace, slack: int = DEFAULT_SLACK) -> tuple[Trace, Trace]:
    """Split a trace into an outer part followed by an inner part.

    Found by breadth-first search over chains of length at most the
    input length plus slack; the two returned traces share endpoints
    with the input.
    """
    steps = _validated(t)
    target = steps[-1].after if steps else t.initial
    outs, ins = _factor_search(t.initial, target, len(steps) + slack)
    mid = outs[-1].after if outs else t.initial
    return _trace(t.initial, outs), _trace(mid, _chain(mid, ins))


# ------------------------------------------------------------- reordering


def _leftmost_first_swap(a: Term, target: Term) -> list[Step]:
    """Replace a (non-leftmost, leftmost) step pair with a leftmost-first
    pair reaching the same term, searching all outer one-step successors."""
    for r1 in find_redexes(a):
        if not r1.leftmost:
            continue
        for l1, b in nd_reducts(a, r1):
            s1 = fire_nd(a, r1.path, _key(l1))
            for r2 in find_redexes(s1.after):
                if not r2.outer:
                    continue
                for l2, c in nd_reducts(s1.after, r2):
                    if c == target:
                        s2 = fire_nd(s1.after, r2.path, _key(l2))
                        if s2.after == target:
                            return [s1, s2]
    raise SearchExhausted(
        "no leftmost-first two-step replacement reaches the same term; "
        "this contradicts the swap property of leftmost steps"
    )


def _project(sub0: Term, group: list[Step], depth: int) -> list[Step]:
    """Restrict steps below a common position to the subterm itself."""
    out: list[Step] = []
    cur = sub0
    for s in group:
        src = resolve(s.before, Path(s.redex.path.steps[:depth]))
        rel = serialize_path(src, Path(s.redex.path.steps[depth:]))
        step = fire_nd(cur, resolve_path(cur, rel), _key(s.local))
        out.append(step)
        cur = step.after
    return out


def _emit(cur: Term, anchor: tuple[PathStep, ...], sub_steps: list[Step]):
    """Lift subterm steps back to the whole term at a stable position."""
    out: list[Step] = []
    for ss in sub_steps:
        sub = resolve(cur, Path(anchor))
        rel = transport_path(ss.before, ss.redex.path, sub)
        step = fire_nd(cur, Path(anchor + rel.steps), _key(ss.local))
        out.append(step)
        cur = step.after
    return cur, out


def _group_sort_key(initial: Term, anchor: tuple[PathStep, ...]) -> tuple:
    return (_key(resolve(initial, Path(anchor))), anchor[-2].ident if len(anchor) >= 2 else 0)


def _std_pure(initial: Term, steps: list[Step]) -> list[Step]:
    """Standardize a chain with no leftmost step by splitting it at the
    root constructor and recursing into disjoint regions."""
    if not steps:
        return []
    if any(not s.redex.path.steps for s in steps):
        raise InvalidTrace("a root step is leftmost; pure split does not apply")
    match initial:
        case Abs():
            anchor = (AbsBody(),)
            rec = _std_outer(initial.body, _project(initial.body, steps, 1))
            _, out = _emit(initial, anchor, rec)
            return out
        case App():
            fun_steps = [s for s in steps if isinstance(s.redex.path.steps[0], AppFun)]
            arg_steps = [s for s in steps if isinstance(s.redex.path.steps[0], AppArg)]
            if len(fun_steps) + len(arg_steps) != len(steps):
                raise InvalidTrace("step path does not start inside the application")
            out: list[Step] = []
            cur = initial
            if fun_steps:
                rec = _std_outer(initial.fun, _project(initial.fun, fun_steps, 1))
                cur, emitted = _emit(cur, (AppFun(),), rec)
                out += emitted
            groups: dict[tuple[PathStep, ...], list[Step]] = {}
            for s in arg_steps:
                anchor = s.redex.path.steps[:3]
                groups.setdefault(anchor, []).append(s)
            for anchor in sorted(groups, key=lambda a: _group_sort_key(initial, a)):
                sub0 = resolve(initial, Path(anchor))
                rec = _std_outer(sub0, _project(sub0, groups[anchor], len(anchor)))
                cur, emitted = _emit(cur, anchor, rec)
                out += emitted
            return out
    raise InvalidTrace(f"cannot split a chain at {type(initial).__name__}")


def _std_outer(initial: Term, steps: list[Step]) -> list[Step]:
    """Reorder an outer chain so every leftmost step comes first."""
    steps = _chain(initial, steps)
    if not steps:
        return []
    idx = next((i for i, s in enumerate(steps) if s.redex.leftmost), None)
    if idx is None:
        return _std_pure(initial, steps)
    while idx > 0:
        pair = _leftmost_first_swap(steps[idx - 1].before, steps[idx].after)
        steps = steps[: idx - 1] + pair + _chain(pair[-1].after, steps[idx + 1 :])
        idx -= 1
    return [steps[0]] + _std_outer(steps[0].after, steps[1:])


def reorder_outer(t: Trace) -> Trace:
    """Reorder an outer nd trace so all leftmost steps come first.

    Endpoints and length are preserved; each adjacent pair with a
    leftmost step second is replaced through _leftmost_first_swap.
    """
    steps = _validated(t)
    if any(not s.redex.outer for s in steps):
        raise InvalidTrace("reorder_outer expects an outer trace")
    return _trace(t.initial, _std_outer(t.initial, steps))


# ---------------------------------------------------------- construction


def _find_chain(m: Term, n: Term, bound: int) -> list[Step]:
    if m == n:
        return []
    queue = deque([(m, [])])
    visited = {m.canon()}
    while queue:
        cur, steps = queue.popleft()
        if len(steps) >= bound:
            continue
        for r in find_redexes(cur):
            for local, whole in nd_reducts(cur, r):
                if whole.canon() in visited:
                    continue
                visited.add(whole.canon())
                step = fire_nd(cur, r.path, _key(local))
                if whole == n:
                    return steps + [step]
                queue.append((whole, steps + [step]))
    raise NoChainFound(f"no nd chain of length <= {bound} from {m!r} to {n!r}")


def _first_reusable_cut(m: Term, path: Path) -> int:
    node = m
    for i, step in enumerate(path.steps):
        if isinstance(node, (Linear, Reusable)) and isinstance(step, ResourceContent):
            if isinstance(node, Reusable):
                return i + 1
            node = node.content
        elif isinstance(node, Abs) and isinstance(step, AbsBody):
            node = node.body
        elif isinstance(node, App) and isinstance(step, AppFun):
            node = node.fun
        elif isinstance(node, App) and isinstance(step, AppArg):
            node = node.arg
        elif isinstance(node, Bag) and isinstance(step, BagElem):
            found = [r for r in node.elements if r.ident == step.ident]
            if not found:
                raise InvalidTrace(f"no bag element with id {step.ident}")
            node = found[0]
        else:
            raise InvalidTrace(f"step {step!r} does not match {type(node).__name__}")
    raise InvalidTrace("inner step fires at an outer position")


def _standardize_steps(initial: Term, steps: list[Step], slack: int, depth: int) -> list[Step]:
    if depth > _MAX_RECURSION:
        raise SearchExhausted(f"standardization recursion exceeded depth {_MAX_RECURSION}")
    if not steps:
        return []
    target = steps[-1].after
    outs, ins = _factor_search(initial, target, len(steps) + slack)
    std_outer = _std_outer(initial, outs)
    mid = std_outer[-1].after if std_outer else initial
    ins = _chain(mid, ins)
    groups: dict[tuple[PathStep, ...], list[Step]] = {}
    for s in ins:
        prefix = s.redex.path.steps[: _first_reusable_cut(s.before, s.redex.path)]
        groups.setdefault(prefix, []).append(s)
    shape = outer_shape(mid)
    site_order = {site.path.steps: site.index for site in shape.holes}
    out = list(std_outer)
    cur = mid
    for prefix in sorted(groups, key=lambda p: site_order[p]):
        sub0 = resolve(mid, Path(prefix))
        sub_steps = _project(sub0, groups[prefix], len(prefix))
        rec = _standardize_steps(sub0, sub_steps, slack, depth + 1)
        cur, emitted = _emit(cur, prefix, rec)
        out += emitted
    return out


def standardize(m: Term, n: Term, bound: int = 8, slack: int = DEFAULT_SLACK) -> Trace:
    """Build a standard nd trace from m to n.

    A shortest chain is found by search, factored into outer then inner
    parts, the outer part is made leftmost-first, and the inner part is
    split by the holes of the outer shape and standardized recursively,
    gluing hole chains in canonical hole order.
    """
    chain = _find_chain(m, n, bound)
    std = _standardize_steps(m, chain, slack, 0)
    result = _trace(m, std)
    if result.final != n:
        raise SearchExhausted("standardized chain misses the endpoint")
    return result
