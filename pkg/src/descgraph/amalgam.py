"""Amalgamation of presented digraphs and the constructions built on it.

``free_amalgam`` glues two digraphs along a common descendant-closed part
with no new edges.  ``class_amalgam`` does the same and then, while ``n``
vertices share one out-neighbourhood, identifies a vertex that only the first
factor sees with one that only the second factor sees.  The remaining
functions enlarge independent sets, add common predecessors, and replay the
extension argument that forces an amalgam to be free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

from .embedding import EmbeddingMap, IdentityAnchors, complete, compose, domain_anchors, identity, is_leaf
from .errors import InvariantViolation, PreconditionError
from .presentation import (Builder, Presentation, Ref, address_in_cone, as_ref, canonical_form,
                           common_predecessors, desc_upto, in_class, in_neighbors, intersect_desc,
                           is_desc, is_independent, max_multiplicity, minimal_generators,
                           out_neighbors, require, require_valid, restrict, tn, tree)

INF = math.inf


def parse_n(value) -> float | int:
    if value in (None, "inf", "∞", INF):
        return INF
    n = int(value)
    if n < 2:
        raise PreconditionError(f"class parameter must be >= 2 or inf, got {n}")
    return n


def format_n(n) -> str | int:
    return "inf" if n == INF else int(n)


@dataclass
class AmalgamProblem:
    """Descendant-closed embeddings f1: desc(a_generators) -> b1 and f2 -> b2."""

    a: Presentation
    a_generators: tuple
    b1: Presentation
    b2: Presentation
    f1: EmbeddingMap
    f2: EmbeddingMap

    @classmethod
    def make(cls, a: Presentation, gens, b1: Presentation, b2: Presentation, f1: dict, f2: dict):
        gens = tuple(minimal_generators(a, gens))
        return cls(a, gens, b1, b2, complete(a, gens, b1, f1), complete(a, gens, b2, f2))


@dataclass(frozen=True)
class Identification:
    kept: str
    removed: str
    out_set: tuple

    def to_dict(self) -> dict:
        return {"kept": self.kept, "removed": self.removed, "out_set": list(self.out_set)}


@dataclass
class AmalgamSolution:
    c: Presentation
    g1: EmbeddingMap
    g2: EmbeddingMap
    identifications: list = field(default_factory=list)
    a_image: frozenset = frozenset()
    side1: frozenset = frozenset()
    side2: frozenset = frozenset()
    counts: dict = field(default_factory=dict)


def _origin(original: frozenset, vid: str) -> Ref:
    """Original reference of a vertex id created by expanding frontier vertices."""
    if vid in original:
        return Ref(vid)
    digits = []
    base = vid
    while base not in original:
        base, _, d = base.rpartition(".")
        if not base or not d.isdigit():
            raise InvariantViolation(f"cannot trace vertex {vid!r} back to the original presentation")
        digits.append(d)
    return Ref(base, "".join(reversed(digits)))


def _tree_addresses(b: Builder, root: Ref) -> dict[str, str]:
    """Core vertices of the tree below ``root`` with their addresses."""
    if root.addr:
        return {}
    found = {root.vid: ""}
    stack = [root.vid]
    while stack:
        v = stack.pop()
        if v in b.frontier:
            continue
        for i, w in enumerate(b.children(v)):
            found[w] = found[v] + str(i)
            stack.append(w)
    return found


def _glue(prob: AmalgamProblem, prefix: str = "v", start: int | None = None):
    a, gens = prob.a, prob.a_generators
    f1, f2 = prob.f1, prob.f2
    if not (a.q == prob.b1.q == prob.b2.q):
        raise PreconditionError("all presentations must share the out-valency q")
    domain = domain_anchors(a, gens)
    b1, b2 = Builder.of(prob.b1), Builder.of(prob.b2)

    for g in gens:
        b2.materialize(f2(g))
    # where the B2 image is still implicit, both maps must agree with child order
    for s in domain:
        if is_leaf(a, s):
            continue
        t2 = b2.resolve(f2(s))
        if not t2.addr and t2.vid not in b2.frontier:
            continue
        t1 = b1.resolve(f1(s))
        kids = [Ref(c) for c in a.out_map[s.vid]]
        ok = all(b2.resolve(f2(c)) == b2.walk(t2, str(i)) and b1.resolve(f1(c)) == b1.walk(t1, str(i))
                 for i, c in enumerate(kids))
        if not ok:
            for c in kids:
                b2.materialize(f2(c))

    # the image of A inside B2 and the A-vertex behind each of its core vertices
    back: dict[str, Ref] = {}
    for s in domain:
        r = b2.resolve(f2(s))
        if not r.addr:
            back[r.vid] = s
    for s in domain:
        if not is_leaf(a, s):
            continue
        for vid, w in _tree_addresses(b2, b2.resolve(f2(s))).items():
            back.setdefault(vid, Ref(s.vid, s.addr + w))
    image2 = set()
    stack = [b2.resolve(f2(g)).vid for g in gens]
    while stack:
        v = stack.pop()
        if v in image2:
            continue
        image2.add(v)
        stack.extend(b2.out[v])
    missing = image2 - back.keys()
    if missing:
        raise InvariantViolation(f"image vertices {sorted(missing)} have no preimage")

    for x in sorted(b2.out):
        if x in image2:
            continue
        for y in b2.out[x]:
            if y in image2:
                b1.materialize(f1(back[y]))

    c = b1
    side1 = set(c.out)
    counter = c.fresh_counter(prefix) if start is None else start
    rename: dict[str, str] = {}
    for x in sorted(b2.out):
        if x not in image2:
            rename[x] = f"{prefix}{counter}"
            counter += 1
            c.add_vertex(rename[x], frontier=x in b2.frontier)
    for x, nx in rename.items():
        for y in b2.out[x]:
            if y in rename:
                c.add_edge(nx, rename[y])
            else:
                t = c.resolve(f1(back[y]))
                if t.addr:
                    raise InvariantViolation(f"glued vertex {y} is not explicit in the first factor")
                c.add_edge(nx, t.vid)

    a_image = set()
    stack = [r.vid for r in (c.resolve(f1(g)) for g in gens) if not r.addr]
    while stack:
        v = stack.pop()
        if v in a_image:
            continue
        a_image.add(v)
        stack.extend(c.out[v])

    anchors2: dict[Ref, Ref] = {}
    for x in b2.out:
        key = _origin(prob.b2.vertices, x)
        anchors2[key] = Ref(rename[x]) if x in rename else c.resolve(f1(back[x]))
    anchors1 = IdentityAnchors(prob.b1.vertices)
    counts = {"b1_core": len(side1), "b2_core": len(b2.out), "glued": len(image2)}
    return c, anchors1, anchors2, a_image, side1, set(rename.values()) | a_image, counts


def _finish(prob, c: Builder, anchors1, anchors2, a_image, side1, side2, counts, idents):
    cp = c.freeze()
    g1 = EmbeddingMap(prob.b1, tuple(prob.b1.sources()), cp, anchors1)
    g2 = EmbeddingMap(prob.b2, tuple(prob.b2.sources()), cp, anchors2)
    return AmalgamSolution(cp, g1, g2, idents, frozenset(a_image), frozenset(side1), frozenset(side2),
                           counts)


def free_amalgam(prob: AmalgamProblem, prefix: str = "v", start: int | None = None) -> AmalgamSolution:
    """Disjoint union of the factors over the common part, edges from both factors only.

    New vertices of the second factor are named ``prefix`` plus a counter
    beginning at ``start`` (default: the first unused value).
    """
    c, an1, an2, a_image, side1, side2, counts = _glue(prob, prefix, start)
    return _finish(prob, c, an1, an2, a_image, side1, side2, counts, [])


def class_amalgam(prob: AmalgamProblem, n, prefix: str = "v", start: int | None = None,
                  check_factors: bool = True) -> AmalgamSolution:
    """An amalgam inside C_n: the free amalgam with forced identifications.

    ``check_factors=False`` skips the membership scan of the factors for
    callers that already maintain it.
    """
    n = parse_n(n)
    if n == INF:
        return free_amalgam(prob, prefix, start)
    if check_factors:
        for name, b in (("B1", prob.b1), ("B2", prob.b2)):
            if max_multiplicity(b) >= n:
                raise PreconditionError(f"{name} is not in C_{n}: multiplicity {max_multiplicity(b)}")
    c, an1, an2, a_image, side1, side2, counts = _glue(prob, prefix, start)
    index: dict[frozenset, set[str]] = {}
    for v, ws in c.out.items():
        if v not in c.frontier:
            index.setdefault(frozenset(ws), set()).add(v)
    idents: list[Identification] = []
    merged: dict[str, str] = {}
    while True:
        crowded = [s for s, vs in index.items() if len(vs) >= n]
        if not crowded:
            break
        shared = min(crowded, key=sorted)
        group = index[shared]
        only1 = sorted(v for v in group if v in side1 and v not in side2)
        only2 = sorted(v for v in group if v in side2 and v not in side1)
        if not only1 or not only2:
            raise InvariantViolation(f"{len(group)} vertices share {sorted(shared)} within one factor")
        if not shared <= (side1 & side2):
            raise InvariantViolation(f"shared out-set {sorted(shared)} is not common to both factors")
        if not idents and not shared <= a_image:
            raise InvariantViolation(f"shared out-set {sorted(shared)} lies outside the common part")
        u1, u2 = only1[0], only2[0]
        for p in sorted(c.inn[u2]):
            index[frozenset(c.out[p])].discard(p)
            c.remove_edge(p, u2)
            if u1 in c.out[p]:
                raise InvariantViolation(f"merging {u2} into {u1} would double an edge from {p}")
            c.add_edge(p, u1)
            index.setdefault(frozenset(c.out[p]), set()).add(p)
        group.discard(u2)
        c.remove_vertex(u2)
        side2.discard(u2)
        side2.add(u1)
        merged[u2] = u1
        idents.append(Identification(u1, u2, tuple(sorted(shared))))
    if merged:
        an2 = {k: Ref(merged.get(v.vid, v.vid), v.addr) for k, v in an2.items()}
    if any(len(vs) >= n for vs in index.values()):
        raise InvariantViolation("amalgam still contains the forbidden configuration")
    return _finish(prob, c, an1, an2, a_image, side1, side2, counts, idents)


# ---------------------------------------------------------------- independent sets

@dataclass
class ComplementResult:
    y: list
    complement: list
    leftovers: list
    radius_used: int

    def to_dict(self) -> dict:
        return {"Y": [str(r) for r in self.y], "complement": [str(r) for r in self.complement],
                "leftovers": [str(r) for r in self.leftovers], "radius_used": self.radius_used}


def _refs(p: Presentation, xs) -> list[Ref]:
    return [require(p, as_ref(x)) for x in xs]


def _reach(p: Presentation, a: Ref, x: Ref) -> int:
    """Least radius around ``a`` containing the generators of desc(a) ∩ desc(x)."""
    return max((len(address_in_cone(p, a, s)) for s in intersect_desc(p, a, x)), default=0)


def complement(p: Presentation, xs: Sequence) -> ComplementResult:
    """Enlarge an independent set so that only finitely many vertices escape its descendants."""
    x = _refs(p, xs)
    if not is_independent(p, x):
        raise PreconditionError("X is not independent")
    sources = p.sources()
    radius = 0
    for i, ai in enumerate(sources):
        for j, aj in enumerate(sources):
            if i != j:
                radius = max(radius, _reach(p, ai, aj))
        for v in x:
            radius = max(radius, _reach(p, ai, v))
    ball = desc_upto(p, sources, radius)

    def covered(v: Ref, by) -> bool:
        return any(is_desc(p, y, v) for y in by)

    cands = sorted({c for b in ball for c in out_neighbors(p, b) if c not in ball and not covered(c, x)})
    y = x + minimal_generators(p, cands)
    if not is_independent(p, y):
        raise InvariantViolation("complement construction produced a dependent set")
    # replace a full set of siblings in the complement by their parent
    while True:
        extra = set(y) - set(x)
        lift = next((v for v in sorted(ball) if not covered(v, y)
                     and set(out_neighbors(p, v)) <= extra), None)
        if lift is None:
            break
        kids = set(out_neighbors(p, lift))
        y = [r for r in y if r not in kids] + [lift]
    leftovers = sorted(b for b in ball if not covered(b, y))
    return ComplementResult(y, sorted(set(y) - set(x)), leftovers, radius)


@dataclass
class MergeResult:
    u: list
    v: list
    mapping: dict
    merged: list

    def to_dict(self) -> dict:
        return {"U": [str(r) for r in self.u], "V": [str(r) for r in self.v],
                "F": {str(k): str(w) for k, w in sorted(self.mapping.items())},
                "Q": [[str(r) for r in sorted(pq)] for pq in self.merged]}


def merge_predecessors(p: Presentation, u: Sequence, t: Presentation, v: Sequence,
                       eligible: Callable | None = None,
                       exclude: Callable | None = None) -> MergeResult:
    """Replace q-sets of ``u`` with a common predecessor (matched on the tree side) by it."""
    u = _refs(p, u)
    v = _refs(t, v)
    if len(u) != len(v):
        raise PreconditionError("U and V differ in size")
    if not is_independent(p, u) or not is_independent(t, v):
        raise PreconditionError("U and V must be independent")
    pos = {r: i for i, r in enumerate(u)}
    found: dict[frozenset, list[Ref]] = {}
    tree_pred: dict[frozenset, Ref] = {}
    for r in u:
        for w in in_neighbors(p, r):
            kids = out_neighbors(p, w)
            if not all(k in pos for k in kids):
                continue
            if exclude is not None and exclude(w):
                continue
            pq = frozenset(kids)
            preds = common_predecessors(t, [v[pos[k]] for k in kids])
            if not preds:
                continue
            if eligible is not None and not eligible(pq):
                continue
            found.setdefault(pq, [])
            if w not in found[pq]:
                found[pq].append(w)
            tree_pred[pq] = preds[0]
    q_sets = sorted(found, key=lambda pq: sorted(pos[r] for r in pq))
    used = set().union(*q_sets) if q_sets else set()
    new_u = [r for r in u if r not in used] + [min(found[pq]) for pq in q_sets]
    new_v = [v[pos[r]] for r in u if r not in used] + [tree_pred[pq] for pq in q_sets]
    mapping = {r: v[i] for i, r in enumerate(u)}
    mapping.update({min(found[pq]): tree_pred[pq] for pq in q_sets})
    return MergeResult(new_u, new_v, mapping, q_sets)


def max_common_predecessors(p: Presentation, u: Sequence) -> int:
    return max((len(common_predecessors(p, pq)) for pq in combinations(u, p.q)), default=0)


def augment_predecessors(p: Presentation, u: Sequence, big_n: int, n) -> tuple[Presentation, EmbeddingMap]:
    """Amalgamate copies of T_N until every q-subset of ``u`` has ``big_n`` common predecessors."""
    n = parse_n(n)
    u = _refs(p, u)
    if not is_independent(p, u):
        raise PreconditionError("U is not independent")
    if big_n >= n:
        raise PreconditionError(f"T_{big_n} is not in C_{format_n(n)}")
    m = max_common_predecessors(p, u)
    if big_n < m:
        raise PreconditionError(f"N={big_n} is below the existing maximum {m}")
    if max_multiplicity(p) >= n:
        raise PreconditionError(f"presentation is not in C_{format_n(n)}")
    emb = identity(p)
    cur = p
    if big_n == 0:
        return cur, emb
    q = p.q
    stub = Presentation.build(q, [f"s{j}" for j in range(q)], [], [f"s{j}" for j in range(q)])
    stub_gens = tuple(Ref(f"s{j}") for j in range(q))
    roots = tn(big_n, q)
    for pq in combinations(u, q):
        f1 = {stub_gens[j]: emb.apply(pq[j]) for j in range(q)}
        f2 = {stub_gens[j]: Ref(f"h{j}") for j in range(q)}
        sol = class_amalgam(AmalgamProblem.make(stub, stub_gens, cur, roots, f1, f2), n)
        emb = compose(emb, sol.g1)
        cur = sol.c
    return cur, emb


# ---------------------------------------------------------------- main replay

@dataclass
class ReplayReport:
    n: object
    equality_holds: bool
    isomorphic_to_free_amalgam: bool
    intersection: list
    expected: list
    merged_sets: int
    complement_size: int
    identifications: int
    core_size: int

    def to_dict(self) -> dict:
        return {"n": format_n(self.n), "equality_holds": self.equality_holds,
                "isomorphic_to_free_amalgam": self.isomorphic_to_free_amalgam,
                "intersection": [str(r) for r in self.intersection],
                "expected": [str(r) for r in self.expected], "merged_sets": self.merged_sets,
                "complement_size": self.complement_size, "identifications": self.identifications,
                "core_size": self.core_size}


def free_extension(a1: Presentation, u: Sequence, v: Sequence[str]):
    """The free amalgam of ``a1`` and a fresh tree (root ``b``) over desc(u) = desc(v)."""
    u = _refs(a1, u)
    t = tree(a1.q, "b")
    prob = AmalgamProblem.make(a1, u, a1, t, {r: r for r in u},
                               {r: Ref("b", w) for r, w in zip(u, v)})
    return free_amalgam(prob)


def replay_free_extension(a1: Presentation, u: Sequence, v: Sequence[str], n,
                          check_isomorphism: bool = True) -> tuple[Presentation, ReplayReport]:
    """Build D containing the free extension of ``a1`` by a tree, via a C_n amalgam."""
    n = parse_n(n)
    q = a1.q
    u = _refs(a1, u)
    v = list(v)
    if len(u) != len(v):
        raise PreconditionError("U and V differ in size")
    if not is_independent(a1, u):
        raise PreconditionError("U is not independent")
    if len(set(v)) != len(v) or any(x.startswith(y) for x in v for y in v if x != y):
        raise PreconditionError("V is not independent")
    if max_multiplicity(a1) >= n:
        raise PreconditionError(f"A1 is not in C_{format_n(n)}")
    free = free_extension(a1, u, v)
    if not in_class(free.c, n):
        raise PreconditionError(f"the free extension is not in C_{format_n(n)}")

    m = max_common_predecessors(a1, u)
    if n != INF and m > n - 1:
        raise InvariantViolation(f"{m} common predecessors in a member of C_{n}")
    big_n = n - 1 if n != INF else m + 1
    b, e1 = augment_predecessors(a1, u, big_n, n)

    t2 = tree(q, "z")
    ub = [e1.apply(r) for r in u]
    vt = [Ref("z", "0" + w) for w in v]
    back = dict(zip(ub, u))
    a1_gens = [e1.apply(s) for s in a1.sources()]

    def in_a1(w: Ref) -> bool:
        return any(is_desc(b, g, w) for g in a1_gens)

    def eligible(pq) -> bool:
        k = len(common_predecessors(a1, [back[r] for r in pq]))
        return k >= 1 if n == INF else 1 <= k <= n - 2

    if n == 2:
        merged = MergeResult(ub, vt, dict(zip(ub, vt)), [])
    else:
        merged = merge_predecessors(b, ub, t2, vt, eligible=eligible, exclude=in_a1)
        for pq in combinations(ub, q):
            fp = [vt[ub.index(r)] for r in pq]
            if eligible(frozenset(pq)) and common_predecessors(t2, fp) and frozenset(pq) not in merged.merged:
                raise InvariantViolation(f"{[str(r) for r in pq]} has no new common predecessor")

    extra = complement(a1, u).complement
    ib = [e1.apply(r) for r in extra]
    jt = [Ref("z", "1" + "0" * j + "1") for j in range(len(ib))]
    gens = merged.u + ib
    f2 = dict(merged.mapping)
    f2.update(zip(ib, jt))
    prob = AmalgamProblem.make(b, gens, b, t2, {g: g for g in gens}, f2)
    sol = class_amalgam(prob, n)
    d = sol.c

    a1_img = [sol.g1.apply(g) for g in a1_gens]
    b_img = sol.g2.apply(Ref("z", "0"))
    inter = minimal_generators(d, [w for g in a1_img for w in intersect_desc(d, g, b_img)])
    expected = [sol.g1.apply(r) for r in ub]
    holds = set(inter) == set(expected) and all(
        sol.g2.apply(t) == sol.g1.apply(r) for r, t in zip(ub, vt))
    iso = None
    if check_isomorphism:
        sub, _ = restrict(d, a1_img + [b_img])
        iso = canonical_form(sub) == canonical_form(free.c)
    report = ReplayReport(n, holds, iso, inter, expected, len(merged.merged), len(ib),
                          len(sol.identifications), len(d.vertices))
    if not holds or iso is False:
        raise InvariantViolation(f"free extension not recovered: {report.to_dict()}")
    return d, report
