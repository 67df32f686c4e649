"""Shared oracles: independent re-implementations used to cross-check the library."""
from __future__ import annotations

import itertools
import random
import sys
from pathlib import Path

import networkx as nx
import pytest

from descgraph.amalgam import AmalgamProblem, free_amalgam
from descgraph.embedding import domain_anchors, is_le_embedding
from descgraph.presentation import Presentation, Ref, in_class, in_neighbors, out_neighbors, resolve, validate

sys.path.insert(0, str(Path(__file__).parent))


# ---------------------------------------------------------------- isomorphism oracle

def invariant_core(p: Presentation) -> nx.DiGraph:
    """The isomorphism-invariant finite part of a presented digraph, built from scratch.

    A vertex is *free* when every vertex strictly below it has exactly one
    in-neighbour (implicit tree vertices always do).  Keep every non-free
    vertex and every free vertex none of whose in-neighbours is free; the
    kept free vertices are flagged, as they stand for whole trees.
    """
    indeg = {v: 0 for v in p.vertices}
    for _, b in p.edges:
        indeg[b] += 1
    below: dict[str, set] = {}

    def strict_desc(v):
        if v not in below:
            acc = set()
            for a, b in p.edges:
                if a == v:
                    acc.add(b)
                    acc |= strict_desc(b)
            below[v] = acc
        return below[v]

    free = {v: all(indeg[w] == 1 for w in strict_desc(v)) for v in p.vertices}
    preds = {v: [a for a, b in p.edges if b == v] for v in p.vertices}
    keep = [v for v in p.vertices if not free[v] or not any(free[u] for u in preds[v])]
    g = nx.DiGraph()
    for v in keep:
        g.add_node(v, tree=free[v])
    g.add_edges_from((a, b) for a, b in p.edges if a in g and b in g)
    return g


def oracle_isomorphic(p1: Presentation, p2: Presentation) -> bool:
    if p1.q != p2.q:
        return False
    g1, g2 = invariant_core(p1), invariant_core(p2)
    if g1.number_of_nodes() != g2.number_of_nodes() or g1.number_of_edges() != g2.number_of_edges():
        return False
    matcher = nx.algorithms.isomorphism.DiGraphMatcher(
        g1, g2, node_match=lambda a, b: a["tree"] == b["tree"])
    return matcher.is_isomorphic()


def permutation_isomorphic(g1: nx.DiGraph, g2: nx.DiGraph) -> bool:
    """Plain exhaustive search over all bijections (tiny graphs only)."""
    n1, n2 = sorted(g1.nodes), sorted(g2.nodes)
    if len(n1) != len(n2):
        return False
    e2 = set(g2.edges)
    for perm in itertools.permutations(n2):
        m = dict(zip(n1, perm))
        if all(g1.nodes[v]["tree"] == g2.nodes[m[v]]["tree"] for v in n1) and \
                {(m[a], m[b]) for a, b in g1.edges} == e2:
            return True
    return False


def brute_isomorphic(g1: nx.DiGraph, g2: nx.DiGraph) -> bool:
    """Exhaustive backtracking over bijections, pruning only on edges already decided."""
    n1, n2 = sorted(g1.nodes), sorted(g2.nodes)
    if len(n1) != len(n2) or g1.number_of_edges() != g2.number_of_edges():
        return False
    assign: dict = {}
    used: set = set()

    def extend(i: int) -> bool:
        if i == len(n1):
            return True
        v = n1[i]
        for w in n2:
            if w in used or g1.nodes[v]["tree"] != g2.nodes[w]["tree"]:
                continue
            if g1.has_edge(v, v) != g2.has_edge(w, w):
                continue
            if all(g1.has_edge(v, u) == g2.has_edge(w, assign[u]) and
                   g1.has_edge(u, v) == g2.has_edge(assign[u], w) for u in assign):
                assign[v] = w
                used.add(w)
                if extend(i + 1):
                    return True
                del assign[v]
                used.discard(w)
        return False

    return extend(0)


# ---------------------------------------------------------------- ball oracle

def ball(p: Presentation, xs, r: int) -> set[Ref]:
    seen = set(xs)
    layer = set(xs)
    for _ in range(r):
        layer = {w for x in layer for w in out_neighbors(p, x)} - seen
        seen |= layer
    return seen


def relabel_random(p: Presentation, rng: random.Random) -> Presentation:
    ids = sorted(p.vertices)
    shuffled = ids[:]
    rng.shuffle(shuffled)
    m = {v: f"n{shuffled.index(v)}" for v in ids}
    return Presentation.build(p.q, m.values(), [(m[a], m[b]) for a, b in p.edges],
                              [m[v] for v in p.frontier])


# ---------------------------------------------------------------- amalgam oracle

def preimages(src: Presentation, emb, tgt: Presentation) -> dict:
    """Map each target core vertex in the image back to a source reference.

    Walks down from the source generators; below an image that is implicit in
    the target every further image is implicit too, so the walk stops there.
    """
    inv = {}
    layer = list(src.sources())
    seen = set(layer)
    while layer:
        nxt = []
        for y in layer:
            x = resolve(tgt, emb.apply(y))
            if x.addr:
                continue
            inv.setdefault(x.vid, y)
            for w in out_neighbors(src, y):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        layer = nxt
    return inv


def check_solution(prob: AmalgamProblem, sol, n, free: bool):
    c = sol.c
    assert validate(c) == [] and in_class(c, n)
    assert is_le_embedding(sol.g1) and is_le_embedding(sol.g2)
    for s in domain_anchors(prob.a, prob.a_generators):
        assert resolve(c, sol.g1.apply(prob.f1.apply(s))) == resolve(c, sol.g2.apply(prob.f2.apply(s)))
    inv1 = preimages(prob.b1, sol.g1, c)
    inv2 = preimages(prob.b2, sol.g2, c)
    assert set(inv1) | set(inv2) == set(c.vertices)
    for x in c.vertices:
        expected = set()
        if x in inv1:
            expected |= {resolve(c, sol.g1.apply(w)).vid for w in in_neighbors(prob.b1, inv1[x])}
        if x in inv2:
            expected |= {resolve(c, sol.g2.apply(w)).vid for w in in_neighbors(prob.b2, inv2[x])}
        if free:
            assert set(c.in_map[x]) == expected, x
        else:
            assert set(c.in_map[x]) <= expected, x
    if sol.identifications:
        glued = free_amalgam(prob)
        only1, only2 = glued.side1 - glued.side2, glued.side2 - glued.side1
        for ident in sol.identifications:
            assert ident.kept in c.vertices and ident.removed not in c.vertices
            assert ident.kept in only1 and ident.removed in only2
            assert set(ident.out_set) <= glued.a_image


@pytest.fixture
def rng():
    return random.Random(12345)
