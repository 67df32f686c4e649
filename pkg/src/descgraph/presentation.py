"""Finite presentations of digraphs whose descendant sets are q-ary trees.

A presentation is a finite *core* digraph in which some vertices are marked
*frontier*.  Below every frontier vertex hangs an implicit infinite q-ary
tree, disjoint from everything else and attached only at that vertex.  A
vertex of the presented (infinite) digraph is named by a :class:`Ref`: either
a core id, or a frontier id together with a non-empty tree address.

Children of a core vertex are ordered by id.  Expanding a frontier vertex
``f`` creates children ``f.0 ... f.(q-1)``, so the order of children always
agrees with digit order and a stale implicit reference can be resolved by
walking down from its frontier vertex.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from . import canon
from .errors import MalformedAddress, NotFound, PreconditionError
from .tree_core import check_address, check_q


@dataclass(frozen=True, order=True)
class Ref:
    """A vertex of a presented digraph; ``addr == ""`` means a core vertex."""

    vid: str
    addr: str = ""

    @property
    def is_core(self) -> bool:
        return not self.addr

    def __str__(self) -> str:
        return f"{self.vid}/{self.addr}" if self.addr else self.vid

    @classmethod
    def parse(cls, text: str) -> "Ref":
        text = text.strip()
        if "/" in text:
            vid, addr = text.rsplit("/", 1)
            if not addr or not addr.isdigit():
                raise MalformedAddress(f"bad implicit vertex reference {text!r}")
            return cls(vid, addr)
        if not text:
            raise MalformedAddress("empty vertex reference")
        return cls(text)


def as_ref(x) -> Ref:
    if isinstance(x, Ref):
        return x
    return Ref.parse(x)


def implicit_id(vid: str, addr: str) -> str:
    """Core id given to ``Ref(vid, addr)`` when it is made explicit."""
    return vid + "".join("." + d for d in addr)


@dataclass(frozen=True)
class Violation:
    rule: str
    where: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"rule": self.rule, "where": self.where, "detail": self.detail}


@dataclass(frozen=True)
class Presentation:
    q: int
    vertices: frozenset
    edges: frozenset
    frontier: frozenset
    generators: frozenset
    parse_issues: tuple = field(default=(), compare=False, repr=False)

    @classmethod
    def build(cls, q: int, vertices: Iterable[str], edges: Iterable[tuple[str, str]],
              frontier: Iterable[str], generators: Iterable[str] | None = None) -> "Presentation":
        vertices = frozenset(vertices)
        edges = frozenset((a, b) for a, b in edges)
        if generators is None:
            targets = {b for _, b in edges}
            generators = [v for v in vertices if v not in targets]
        return cls(q, vertices, edges, frozenset(frontier), frozenset(generators))

    @cached_property
    def out_map(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {v: [] for v in self.vertices}
        for a, b in self.edges:
            out.setdefault(a, []).append(b)
        return {v: tuple(sorted(ws)) for v, ws in out.items()}

    @cached_property
    def in_map(self) -> dict[str, tuple[str, ...]]:
        inn: dict[str, list[str]] = {v: [] for v in self.vertices}
        for a, b in self.edges:
            inn.setdefault(b, []).append(a)
        return {v: tuple(sorted(ws)) for v, ws in inn.items()}

    @cached_property
    def _cones(self) -> dict:
        return {}

    def sources(self) -> list[Ref]:
        return [Ref(v) for v in sorted(self.vertices) if not self.in_map[v]]

    def core_size(self) -> int:
        return len(self.vertices)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "vertices": sorted(self.vertices),
            "edges": sorted([a, b] for a, b in self.edges),
            "frontier": sorted(self.frontier),
            "generators": sorted(self.generators),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Presentation":
        issues = []
        raw_edges = [tuple(e) for e in d.get("edges", [])]
        seen = set()
        for e in raw_edges:
            if len(e) != 2:
                raise PreconditionError(f"edge must be a pair, got {list(e)!r}")
            if e in seen:
                issues.append(Violation("MultiEdge", f"{e[0]}->{e[1]}", "edge listed twice"))
            seen.add(e)
        verts = [str(v) for v in d.get("vertices", [])]
        for v in verts:
            if "/" in v or not v:
                raise PreconditionError(f"vertex id {v!r} may not be empty or contain '/'")
        if len(set(verts)) != len(verts):
            issues.append(Violation("DuplicateVertex", "vertices", "vertex listed twice"))
        gens = d.get("generators")
        p = cls.build(int(d["q"]), verts, seen, d.get("frontier", []), gens)
        return cls(p.q, p.vertices, p.edges, p.frontier, p.generators, tuple(issues))

    @classmethod
    def from_json(cls, text: str) -> "Presentation":
        return cls.from_dict(json.loads(text))


class Builder:
    """Mutable working copy of a presentation."""

    def __init__(self, q: int):
        self.q = q
        self.out: dict[str, set[str]] = {}
        self.inn: dict[str, set[str]] = {}
        self.frontier: set[str] = set()

    @classmethod
    def of(cls, p: Presentation) -> "Builder":
        b = cls(p.q)
        b.out = {v: set(ws) for v, ws in p.out_map.items()}
        b.inn = {v: set(ws) for v, ws in p.in_map.items()}
        b.frontier = set(p.frontier)
        return b

    def add_vertex(self, v: str, frontier: bool = False) -> None:
        if v in self.out:
            raise PreconditionError(f"vertex {v!r} already exists")
        self.out[v] = set()
        self.inn[v] = set()
        if frontier:
            self.frontier.add(v)

    def add_edge(self, a: str, b: str) -> None:
        self.out[a].add(b)
        self.inn[b].add(a)

    def remove_edge(self, a: str, b: str) -> None:
        self.out[a].discard(b)
        self.inn[b].discard(a)

    def remove_vertex(self, v: str) -> None:
        for w in list(self.out[v]):
            self.inn[w].discard(v)
        for w in list(self.inn[v]):
            self.out[w].discard(v)
        del self.out[v], self.inn[v]
        self.frontier.discard(v)

    def children(self, v: str) -> list[str]:
        return sorted(self.out[v])

    def expand(self, f: str) -> list[str]:
        if f not in self.frontier:
            raise PreconditionError(f"{f!r} is not a frontier vertex")
        kids = [f + "." + str(i) for i in range(self.q)]
        for k in kids:
            if k in self.out:
                raise PreconditionError(f"cannot expand {f!r}: id {k!r} is taken")
        self.frontier.discard(f)
        for k in kids:
            self.add_vertex(k, frontier=True)
            self.add_edge(f, k)
        return kids

    def walk(self, ref: Ref, w: str) -> Ref:
        cur = ref
        for i, d in enumerate(w):
            if cur.addr or cur.vid in self.frontier:
                return Ref(cur.vid, cur.addr + w[i:])
            cur = Ref(self.children(cur.vid)[int(d)])
        return cur

    def resolve(self, ref: Ref) -> Ref:
        if ref.vid not in self.out:
            raise NotFound(f"unknown vertex {ref}")
        if not ref.addr or ref.vid in self.frontier:
            return ref
        return self.walk(Ref(ref.vid), ref.addr)

    def materialize(self, ref: Ref) -> str:
        """Make ``ref`` a core vertex, expanding along its path; return its id."""
        r = self.resolve(ref)
        while r.addr:
            self.expand(r.vid)
            r = self.walk(Ref(r.vid), r.addr)
        return r.vid

    def fresh_counter(self, prefix: str) -> int:
        best = -1
        for v in self.out:
            if v.startswith(prefix) and v[len(prefix):].isdigit():
                best = max(best, int(v[len(prefix):]))
        return best + 1

    def freeze(self) -> Presentation:
        edges = [(a, b) for a, ws in self.out.items() for b in ws]
        p = Presentation.build(self.q, self.out.keys(), edges, self.frontier,
                               [v for v, ws in self.inn.items() if not ws])
        # cached_property stores into the instance dict, so the maps can be seeded
        p.__dict__["out_map"] = {v: tuple(sorted(ws)) for v, ws in self.out.items()}
        p.__dict__["in_map"] = {v: tuple(sorted(ws)) for v, ws in self.inn.items()}
        return p


# ---------------------------------------------------------------- builders

def tree(q: int, root: str = "r") -> Presentation:
    """The q-ary rooted tree as a single frontier vertex."""
    check_q(q)
    return Presentation.build(q, [root], [], [root])


def tn(n: int, q: int) -> Presentation:
    """``n`` roots sharing one q-element out-neighbourhood, trees below."""
    check_q(q)
    if n < 1:
        raise PreconditionError("need at least one root")
    roots = [f"x{i}" for i in range(1, n + 1)]
    kids = [f"h{j}" for j in range(q)]
    return Presentation.build(q, roots + kids, [(x, h) for x in roots for h in kids], kids)


def relabel(p: Presentation, mapping: dict[str, str]) -> Presentation:
    m = lambda v: mapping.get(v, v)
    if len({m(v) for v in p.vertices}) != len(p.vertices):
        raise PreconditionError("relabelling is not injective")
    return Presentation.build(p.q, [m(v) for v in p.vertices], [(m(a), m(b)) for a, b in p.edges],
                              [m(v) for v in p.frontier], [m(v) for v in p.generators])


# ---------------------------------------------------------------- validation

def _topo_order(p: Presentation) -> list[str] | None:
    indeg = {v: len(p.in_map[v]) for v in p.vertices}
    queue = deque(sorted(v for v, k in indeg.items() if k == 0))
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in p.out_map[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    return order if len(order) == len(p.vertices) else None


def validate(p: Presentation) -> list[Violation]:
    """Every broken invariant of ``p``; an empty list means valid."""
    out = list(p.parse_issues)
    try:
        check_q(p.q)
    except ValueError as e:
        return out + [Violation("Q", "q", str(e))]
    structural = False
    for a, b in sorted(p.edges):
        if a not in p.vertices or b not in p.vertices:
            out.append(Violation("UnknownVertex", f"{a}->{b}", "edge endpoint is not a vertex"))
            structural = True
        elif a == b:
            out.append(Violation("SelfLoop", a))
            structural = True
    for v in sorted(p.frontier - p.vertices):
        out.append(Violation("UnknownVertex", v, "frontier vertex is not a vertex"))
    for v in sorted(p.generators - p.vertices):
        out.append(Violation("UnknownVertex", v, "generator is not a vertex"))
    if structural:
        return out
    for v in sorted(p.vertices):
        k = len(p.out_map[v])
        if v in p.frontier and k:
            out.append(Violation("OutDegree", v, f"frontier vertex has out-degree {k}, expected 0"))
        elif v not in p.frontier and k != p.q:
            out.append(Violation("OutDegree", v, f"out-degree {k}, expected {p.q}"))
    if _topo_order(p) is None:
        out.append(Violation("Cycle", "core", "core digraph has a directed cycle"))
        return out
    sources = {v for v in p.vertices if not p.in_map[v]}
    if set(p.generators) != sources:
        out.append(Violation("Generators", ",".join(sorted(p.generators)),
                             f"generators must be the in-degree-0 vertices {sorted(sources)}"))
    for v in sorted(p.vertices):
        cone = core_cone(p, v)
        for w in sorted(cone):
            if w == v:
                continue
            k = sum(1 for u in p.in_map[w] if u in cone)
            if k != 1:
                out.append(Violation("TreeCondition", w,
                                     f"{k} predecessors inside the descendant set of {v}"))
    return out


def is_valid(p: Presentation) -> bool:
    return not validate(p)


def require_valid(p: Presentation, what: str = "presentation") -> None:
    bad = validate(p)
    if bad:
        first = bad[0]
        raise PreconditionError(f"invalid {what}: {first.rule} at {first.where} {first.detail}".rstrip())


# ---------------------------------------------------------------- queries

def core_cone(p: Presentation, v: str) -> frozenset:
    cache = p._cones
    hit = cache.get(v)
    if hit is not None:
        return hit
    seen = {v}
    stack = [v]
    while stack:
        x = stack.pop()
        for w in p.out_map[x]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    res = frozenset(seen)
    cache[v] = res
    return res


def exists(p: Presentation, ref: Ref) -> bool:
    if ref.vid not in p.vertices:
        return False
    if not ref.addr:
        return True
    try:
        check_address(ref.addr, p.q)
    except MalformedAddress:
        return False
    return ref.vid in p.frontier


def require(p: Presentation, ref: Ref) -> Ref:
    if not exists(p, ref):
        raise NotFound(f"no vertex {ref} in presentation")
    return ref


def out_neighbors(p: Presentation, ref: Ref) -> list[Ref]:
    if ref.addr or ref.vid in p.frontier:
        return [Ref(ref.vid, ref.addr + str(i)) for i in range(p.q)]
    return [Ref(w) for w in p.out_map[ref.vid]]


def in_neighbors(p: Presentation, ref: Ref) -> list[Ref]:
    if ref.addr:
        return [Ref(ref.vid, ref.addr[:-1])]
    return [Ref(w) for w in p.in_map[ref.vid]]


def adjacency(p: Presentation, ref) -> tuple[list[Ref], list[Ref]]:
    ref = require(p, as_ref(ref))
    return out_neighbors(p, ref), in_neighbors(p, ref)


def walk(p: Presentation, ref: Ref, w: str) -> Ref:
    """The vertex reached from ``ref`` by following the digits of ``w``."""
    cur = ref
    for i, d in enumerate(w):
        if cur.addr or cur.vid in p.frontier:
            return Ref(cur.vid, cur.addr + w[i:])
        cur = Ref(p.out_map[cur.vid][int(d)])
    return cur


def resolve(p: Presentation, ref: Ref) -> Ref:
    """Current name of a possibly stale reference (one whose frontier was expanded)."""
    if ref.vid not in p.vertices:
        raise NotFound(f"unknown vertex {ref}")
    if not ref.addr or ref.vid in p.frontier:
        return ref
    return walk(p, Ref(ref.vid), ref.addr)


def _core_address(p: Presentation, a: str, x: str) -> str | None:
    if x not in core_cone(p, a):
        return None
    # the cone of a is a tree, so the path is unique
    path = []
    cur = x
    cone = core_cone(p, a)
    while cur != a:
        parent = next(u for u in p.in_map[cur] if u in cone)
        path.append(str(p.out_map[parent].index(cur)))
        cur = parent
    return "".join(reversed(path))


def address_in_cone(p: Presentation, a: Ref, x: Ref) -> str | None:
    """Address of ``x`` relative to ``a`` inside the tree desc(a), or None."""
    if a.addr:
        if x.vid == a.vid and x.addr.startswith(a.addr):
            return x.addr[len(a.addr):]
        return None
    if x.addr:
        s = _core_address(p, a.vid, x.vid)
        return None if s is None else s + x.addr
    return _core_address(p, a.vid, x.vid)


def is_desc(p: Presentation, a: Ref, b: Ref) -> bool:
    """True iff ``b`` is in desc(a)."""
    if a.addr:
        return b.vid == a.vid and b.addr.startswith(a.addr)
    return b.vid in core_cone(p, a.vid)


def desc_upto(p: Presentation, xs: Iterable, radius: int) -> set[Ref]:
    """The ball of the given radius around ``xs``: everything within that many steps."""
    frontier = {as_ref(x) for x in xs}
    seen = set(frontier)
    for _ in range(radius):
        nxt = set()
        for r in frontier:
            for w in out_neighbors(p, r):
                if w not in seen:
                    seen.add(w)
                    nxt.add(w)
        frontier = nxt
    return seen


def minimal_generators(p: Presentation, xs: Iterable) -> list[Ref]:
    refs: list[Ref] = []
    for x in xs:
        r = as_ref(x)
        if r not in refs:
            refs.append(r)
    return [x for x in refs if not any(y != x and is_desc(p, y, x) for y in refs)]


def intersect_desc(p: Presentation, a, b) -> list[Ref]:
    """Minimal generating set of desc(a) ∩ desc(b)."""
    a, b = as_ref(a), as_ref(b)
    if a == b:
        return [a]
    if a.addr and b.addr:
        if a.vid != b.vid:
            return []
        if b.addr.startswith(a.addr):
            return [b]
        if a.addr.startswith(b.addr):
            return [a]
        return []
    if a.addr:
        a, b = b, a
    if b.addr:
        return [b] if b.vid in core_cone(p, a.vid) else []
    ka, kb = core_cone(p, a.vid), core_cone(p, b.vid)
    common = ka & kb
    return [Ref(w) for w in sorted(common) if not any(u in common for u in p.in_map[w])]


def is_independent(p: Presentation, xs: Sequence) -> bool:
    refs = [as_ref(x) for x in xs]
    if len(set(refs)) != len(refs):
        return False
    return all(not intersect_desc(p, refs[i], refs[j])
               for i in range(len(refs)) for j in range(i + 1, len(refs)))


def multiplicity_groups(p: Presentation) -> dict[frozenset, list[str]]:
    """Non-frontier core vertices grouped by their out-neighbour set."""
    groups: dict[frozenset, list[str]] = {}
    for v in p.vertices:
        if v not in p.frontier:
            groups.setdefault(frozenset(p.out_map[v]), []).append(v)
    return groups


def max_multiplicity(p: Presentation) -> int:
    """Largest number of distinct vertices sharing one out-neighbour set."""
    if not p.vertices:
        return 0
    groups = multiplicity_groups(p)
    return max([1] + [len(vs) for vs in groups.values()])


def in_class(p: Presentation, n) -> bool:
    """Membership in C_n (``n`` may be ``math.inf``)."""
    return max_multiplicity(p) < n


def common_predecessors(p: Presentation, s: Sequence) -> list[Ref]:
    refs = [as_ref(x) for x in s]
    if not refs:
        raise PreconditionError("common predecessors of an empty set")
    want = set(refs)
    cands = in_neighbors(p, refs[0])
    return sorted(c for c in cands if want <= set(out_neighbors(p, c)))


# ---------------------------------------------------------------- normal forms

def reduce(p: Presentation) -> Presentation:
    """Collapse every core cone that hangs freely below its top vertex."""
    order = _topo_order(p)
    if order is None:
        raise PreconditionError("cannot reduce a cyclic presentation")
    free: dict[str, bool] = {}
    for v in reversed(order):
        free[v] = v in p.frontier or all(len(p.in_map[c]) == 1 and free[c] for c in p.out_map[v])
    b = Builder.of(p)
    for v in order:
        if v not in b.out or v in b.frontier or not free[v]:
            continue
        for w in core_cone(p, v) - {v}:
            if w in b.out:
                b.remove_vertex(w)
        b.frontier.add(v)
    if len(b.out) == len(p.vertices):
        return p
    return b.freeze()


def unfold(p: Presentation, f, depth: int) -> Presentation:
    """Make the implicit tree under frontier vertex ``f`` explicit to ``depth`` levels."""
    f = as_ref(f)
    if f.addr or f.vid not in p.frontier:
        raise PreconditionError(f"{f} is not a frontier vertex")
    if depth < 1:
        raise PreconditionError("unfold depth must be positive")
    b = Builder.of(p)
    layer = [f.vid]
    for _ in range(depth):
        layer = [k for v in layer for k in b.expand(v)]
    return b.freeze()


def materialize(p: Presentation, refs: Iterable) -> Presentation:
    b = Builder.of(p)
    for r in refs:
        b.materialize(as_ref(r))
    return b.freeze()


def restrict(p: Presentation, gens: Iterable) -> tuple[Presentation, dict[Ref, Ref]]:
    """The descendant-closed subdigraph generated by ``gens`` as its own presentation.

    Returns the presentation and the anchor map sending its core vertices to
    the corresponding vertices of ``p``.
    """
    gens = minimal_generators(p, gens)
    core: set[str] = set()
    anchors: dict[Ref, Ref] = {}
    frontier: set[str] = set()
    for g in gens:
        if g.addr:
            vid = implicit_id(g.vid, g.addr)
            if vid in p.vertices:
                raise PreconditionError(f"id {vid!r} needed for {g} is taken")
            core.add(vid)
            frontier.add(vid)
            anchors[Ref(vid)] = g
        else:
            core |= core_cone(p, g.vid)
    for v in core:
        if Ref(v) not in anchors:
            anchors[Ref(v)] = Ref(v)
            if v in p.frontier:
                frontier.add(v)
    edges = [(a, b) for a, b in p.edges if a in core and b in core]
    return Presentation.build(p.q, core, edges, frontier), anchors


# ---------------------------------------------------------------- canonical form

def canonical_labels(p: Presentation) -> tuple[tuple, dict[str, int]]:
    color = {v: (v in p.frontier, len(p.in_map[v]), len(p.out_map[v])) for v in p.vertices}
    return canon.canonical_labeling(sorted(p.vertices), p.out_map, color)


def canonical_form(p: Presentation) -> bytes:
    """Bytes that are equal exactly for presentations of isomorphic digraphs."""
    r = reduce(p)
    cert, _ = canonical_labels(r)
    n, colors, edges = cert
    return json.dumps({"q": r.q, "n": n, "colors": [list(c) for c in colors],
                       "edges": [list(e) for e in edges]}, separators=(",", ":")).encode()
