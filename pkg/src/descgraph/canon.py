"""Canonical labelling and automorphisms of small vertex-coloured digraphs.

Colour refinement followed by individualisation of the first non-singleton
cell; leaves are compared by their edge certificate and equal leaves yield
automorphisms, which prune sibling branches lying in a common orbit.
"""
from __future__ import annotations

from typing import Hashable, Iterable, Mapping, Sequence


class _Graph:
    def __init__(self, vertices: Sequence[Hashable], out: Mapping, color: Mapping):
        self.vertices = list(vertices)
        self.index = {v: i for i, v in enumerate(self.vertices)}
        n = len(self.vertices)
        self.outs = [[self.index[w] for w in out.get(v, ())] for v in self.vertices]
        self.ins: list[list[int]] = [[] for _ in range(n)]
        for i, ws in enumerate(self.outs):
            for j in ws:
                self.ins[j].append(i)
        try:
            keys = sorted({color[v] for v in self.vertices})
        except TypeError:
            keys = sorted({color[v] for v in self.vertices}, key=repr)
        self.keys = keys
        rank = {k: r for r, k in enumerate(keys)}
        self.base = [rank[color[v]] for v in self.vertices]
        self.edges = [(i, j) for i, ws in enumerate(self.outs) for j in ws]


def _rank(sigs: list) -> list[int]:
    order = {s: r for r, s in enumerate(sorted(set(sigs)))}
    return [order[s] for s in sigs]


def _refine(g: _Graph, c: list[int]) -> list[int]:
    cells = len(set(c))
    while True:
        sigs = [
            (c[i], tuple(sorted(c[j] for j in g.outs[i])), tuple(sorted(c[j] for j in g.ins[i])))
            for i in range(len(c))
        ]
        c = _rank(sigs)
        k = len(set(c))
        if k == cells:
            return c
        cells = k


def _individualize(c: list[int], v: int) -> list[int]:
    return _rank([(x, 0 if i == v else 1) for i, x in enumerate(c)])


def _target_cell(c: list[int]) -> list[int] | None:
    counts: dict[int, int] = {}
    for x in c:
        counts[x] = counts.get(x, 0) + 1
    multi = [x for x, k in counts.items() if k > 1]
    if not multi:
        return None
    t = min(multi)
    return [i for i, x in enumerate(c) if x == t]


class _Search:
    def __init__(self, g: _Graph):
        self.g = g
        self.best_cert = None
        self.best_lab: list[int] | None = None
        self.autos: list[list[int]] = []

    def cert(self, lab: list[int]) -> tuple:
        n = len(lab)
        colors = [0] * n
        for i, l in enumerate(lab):
            colors[l] = self.g.keys[self.g.base[i]]
        return (n, tuple(colors), tuple(sorted((lab[i], lab[j]) for i, j in self.g.edges)))

    def leaf(self, lab: list[int]) -> None:
        cert = self.cert(lab)
        if self.best_cert is None or cert < self.best_cert:
            self.best_cert, self.best_lab = cert, lab
        elif cert == self.best_cert:
            inv = [0] * len(lab)
            for i, l in enumerate(lab):
                inv[l] = i
            self.autos.append([inv[self.best_lab[i]] for i in range(len(lab))])

    def orbit_root(self, path: list[int]):
        parent = list(range(len(self.g.vertices)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a in self.autos:
            if all(a[p] == p for p in path):
                for i, j in enumerate(a):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[ri] = rj
        return find

    def run(self, c: list[int], path: list[int]) -> None:
        c = _refine(self.g, c)
        cell = _target_cell(c)
        if cell is None:
            self.leaf(c)
            return
        explored: list[int] = []
        for v in cell:
            if explored:
                find = self.orbit_root(path)
                if any(find(v) == find(u) for u in explored):
                    continue
            explored.append(v)
            self.run(_individualize(c, v), path + [v])


def canonical_labeling(vertices: Sequence[Hashable], out: Mapping, color: Mapping):
    """Return ``(certificate, labels)`` for a vertex-coloured digraph.

    Two coloured digraphs are isomorphic iff their certificates are equal.
    ``labels`` maps each vertex to its position in the canonical order.
    """
    g = _Graph(vertices, out, color)
    if not g.vertices:
        return (0, (), ()), {}
    s = _Search(g)
    s.run(list(g.base), [])
    labels = {g.vertices[i]: l for i, l in enumerate(s.best_lab)}
    return s.best_cert, labels


def automorphisms(vertices: Sequence[Hashable], out: Mapping, color: Mapping | None = None,
                  fixed: Iterable[Hashable] = ()):
    """Yield every colour-preserving automorphism fixing ``fixed`` pointwise, as dicts.

    Plain backtracking; meant for digraphs of a few dozen vertices.
    """
    vertices = list(vertices)
    color = color or {v: 0 for v in vertices}
    outs = {v: set(out.get(v, ())) for v in vertices}
    ins: dict = {v: set() for v in vertices}
    for v in vertices:
        for w in outs[v]:
            ins[w].add(v)
    fixed = set(fixed)
    sig = {v: (color[v], len(outs[v]), len(ins[v])) for v in vertices}

    # order so that every vertex after the first of its component has a placed neighbour
    order: list = []
    seen: set = set()
    for start in sorted(vertices, key=lambda v: (v not in fixed, len(ins[v]), repr(v))):
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        while queue:
            v = queue.pop(0)
            order.append(v)
            for w in sorted(outs[v] | ins[v], key=repr):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)

    phi: dict = {}
    used: set = set()

    def candidates(v):
        if v in fixed:
            return [v]
        for p in ins[v]:
            if p in phi:
                return list(outs[phi[p]])
        for s in outs[v]:
            if s in phi:
                return list(ins[phi[s]])
        return vertices

    def consistent(v, w) -> bool:
        if w in used or sig[v] != sig[w]:
            return False
        if w in fixed and v != w:
            return False
        for p in ins[v]:
            if p in phi and phi[p] not in ins[w]:
                return False
        for s in outs[v]:
            if s in phi and phi[s] not in outs[w]:
                return False
        for p in ins[w]:
            if p in used and not any(phi.get(x) == p for x in ins[v]):
                return False
        for s in outs[w]:
            if s in used and not any(phi.get(x) == s for x in outs[v]):
                return False
        return True

    def rec(k: int):
        if k == len(order):
            yield dict(phi)
            return
        v = order[k]
        for w in candidates(v):
            if consistent(v, w):
                phi[v] = w
                used.add(w)
                yield from rec(k + 1)
                del phi[v]
                used.discard(w)

    yield from rec(0)


def orbits(vertices: Sequence[Hashable], out: Mapping, color: Mapping) -> list[list]:
    """Partition ``vertices`` into orbits of the colour-preserving automorphism group."""
    classes: dict = {}
    for v in vertices:
        marked = {w: (color[w], w == v) for w in vertices}
        cert, _ = canonical_labeling(vertices, out, marked)
        classes.setdefault(cert, []).append(v)
    return sorted(classes.values(), key=lambda cls: repr(sorted(cls, key=repr)))
