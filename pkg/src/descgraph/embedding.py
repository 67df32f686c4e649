"""Descendant-closed embeddings between presented digraphs.

An :class:`EmbeddingMap` stores images for *anchors*: the core vertices of
the source's generated subdigraph plus any implicit generators.  Every other
source vertex sits in the implicit tree below some anchor and is mapped by
walking the same address down from that anchor's image.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from itertools import permutations
from collections.abc import Iterator, Mapping

from .errors import NotFound, PreconditionError
from .presentation import (Presentation, Ref, as_ref, core_cone, desc_upto, in_neighbors,
                           intersect_desc, is_desc, minimal_generators, out_neighbors, walk)
from .tree_core import level

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


class IdentityAnchors(Mapping):
    """Anchor table of an identity-like map: every core vertex goes to itself."""

    def __init__(self, vertices):
        self._vertices = vertices

    def __getitem__(self, key):
        if not key.addr and key.vid in self._vertices:
            return key
        raise KeyError(key)

    def __iter__(self):
        return (Ref(v) for v in sorted(self._vertices))

    def __len__(self):
        return len(self._vertices)


def domain_anchors(source: Presentation, gens) -> list[Ref]:
    """Anchors of desc(gens): implicit generators, then core vertices in topological order."""
    gens = minimal_generators(source, gens)
    implicit = [g for g in gens if g.addr]
    core: set[str] = set()
    for g in gens:
        if not g.addr:
            core |= core_cone(source, g.vid)
    indeg = {v: sum(1 for u in source.in_map[v] if u in core) for v in core}
    ready = sorted(v for v, k in indeg.items() if k == 0)
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for w in source.out_map[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
        ready.sort()
    return implicit + [Ref(v) for v in order]


def is_leaf(source: Presentation, s: Ref) -> bool:
    return bool(s.addr) or s.vid in source.frontier


@dataclass
class EmbeddingMap:
    source: Presentation
    generators: tuple
    target: Presentation
    anchors: dict = field(default_factory=dict)

    def apply(self, x) -> Ref:
        x = as_ref(x)
        hit = self.anchors.get(x)
        if hit is not None:
            return hit
        if x.addr:
            for k in range(len(x.addr) - 1, -1, -1):
                a = Ref(x.vid, x.addr[:k])
                img = self.anchors.get(a)
                if img is not None:
                    return walk(self.target, img, x.addr[k:])
        raise NotFound(f"{x} is outside the domain of this embedding")

    def __call__(self, x) -> Ref:
        return self.apply(x)

    def image_generators(self) -> list[Ref]:
        return [self.apply(g) for g in self.generators]

    def to_dict(self) -> dict:
        return {"generators": [str(g) for g in self.generators],
                "map": {str(k): str(v) for k, v in sorted(self.anchors.items())}}


def complete(source: Presentation, gens, target: Presentation, partial: Mapping) -> EmbeddingMap:
    """Extend partial anchor images over the core of desc(gens) by walking child order."""
    gens = tuple(minimal_generators(source, gens))
    anchors = {as_ref(k): as_ref(v) for k, v in partial.items()}
    for g in gens:
        if g not in anchors:
            raise PreconditionError(f"no image given for generator {g}")
    for s in domain_anchors(source, gens):
        if s not in anchors:
            raise PreconditionError(f"{s} is not below any anchored vertex")
        if is_leaf(source, s):
            continue
        kids = out_neighbors(target, anchors[s])
        for i, c in enumerate(source.out_map[s.vid]):
            anchors.setdefault(Ref(c), kids[i])
    return EmbeddingMap(source, gens, target, anchors)


def identity(p: Presentation, gens=None) -> EmbeddingMap:
    gens = p.sources() if gens is None else gens
    return complete(p, gens, p, {g: g for g in minimal_generators(p, gens)})


def compose(first: EmbeddingMap, second: EmbeddingMap) -> EmbeddingMap:
    anchors = {a: second.apply(img) for a, img in first.anchors.items()}
    return EmbeddingMap(first.source, first.generators, second.target, anchors)


def check_embedding(emb: EmbeddingMap, radius: int = 3) -> list[str]:
    """Problems preventing ``emb`` from being a descendant-closed induced embedding.

    Injectivity is decided exactly from the anchors; out-neighbourhoods are
    compared on every anchor and on the ball of ``radius`` around the
    generators.
    """
    src, tgt = emb.source, emb.target
    problems: list[str] = []
    try:
        domain = domain_anchors(src, emb.generators)
        img = {s: emb.apply(s) for s in domain}
    except NotFound as e:
        return [str(e)]
    leaves = [s for s in domain if is_leaf(src, s)]
    inner = [s for s in domain if not is_leaf(src, s)]
    seen: dict[Ref, Ref] = {}
    for s in inner:
        t = img[s]
        if t in seen:
            problems.append(f"{s} and {seen[t]} both map to {t}")
        seen[t] = s
        for l in leaves:
            if is_desc(tgt, img[l], t):
                problems.append(f"{s} maps into the tree below the image of {l}")
    for i, a in enumerate(leaves):
        for b in leaves[i + 1:]:
            if intersect_desc(tgt, img[a], img[b]):
                problems.append(f"trees below {a} and {b} overlap in the image")
    for s in inner:
        want = {img.get(Ref(c)) or emb.apply(Ref(c)) for c in src.out_map[s.vid]}
        if set(out_neighbors(tgt, img[s])) != want:
            problems.append(f"out-neighbours of {s} are not mapped onto those of {img[s]}")
    ball = desc_upto(src, emb.generators, radius)
    images: dict[Ref, Ref] = {}
    for x in sorted(ball):
        fx = emb.apply(x)
        if fx in images and images[fx] != x:
            problems.append(f"{x} and {images[fx]} both map to {fx}")
        images[fx] = x
        if set(out_neighbors(tgt, fx)) != {emb.apply(c) for c in out_neighbors(src, x)}:
            problems.append(f"out-neighbours of {x} are not mapped onto those of {fx}")
    return sorted(set(problems))


def is_le_embedding(emb: EmbeddingMap, radius: int = 3) -> bool:
    return not check_embedding(emb, radius)


def _injective(src: Presentation, tgt: Presentation, domain, assign) -> bool:
    leaves = [assign[s] for s in domain if is_leaf(src, s)]
    inner = [assign[s] for s in domain if not is_leaf(src, s)]
    if len(set(inner)) != len(inner):
        return False
    for t in inner:
        if any(is_desc(tgt, l, t) for l in leaves):
            return False
    return all(not intersect_desc(tgt, leaves[i], leaves[j])
               for i in range(len(leaves)) for j in range(i + 1, len(leaves)))


def enumerate_le_embeddings(source: Presentation, gens, target: Presentation, depth_bound: int = 0,
                            pinned: Mapping | None = None) -> Iterator[EmbeddingMap]:
    """All descendant-closed embeddings of desc(gens) into ``target``.

    Generator images range over core vertices and implicit vertices of
    address length at most ``depth_bound``.  ``pinned`` fixes the images of
    some anchors in advance.
    """
    if source.q != target.q:
        raise PreconditionError(f"out-valency mismatch: {source.q} vs {target.q}")
    gens = tuple(minimal_generators(source, gens))
    domain = domain_anchors(source, gens)
    kids = {s: [Ref(c) for c in source.out_map[s.vid]] for s in domain if not is_leaf(source, s)}
    everything = [Ref(v) for v in sorted(target.vertices)]
    everything += [Ref(f, a) for f in sorted(target.frontier)
                   for depth in range(1, depth_bound + 1) for a in level(target.q, depth)]

    assign: dict[Ref, Ref] = {}
    used: set[Ref] = set()
    pending: list[Ref] = []
    for k, v in (pinned or {}).items():
        k, v = as_ref(k), as_ref(v)
        assign[k] = v
        used.add(v)
        if k in kids:
            pending.append(k)

    def candidates(g: Ref) -> list[Ref]:
        for c in kids.get(g, ()):
            if c in assign:
                opts = in_neighbors(target, assign[c])
                break
        else:
            opts = everything
        return [r for r in opts if r not in used and len(r.addr) <= depth_bound]

    def rec() -> Iterator[EmbeddingMap]:
        if pending:
            s = pending.pop()
            targets = out_neighbors(target, assign[s])
            for perm in permutations(targets):
                newly: list[Ref] = []
                ok = True
                for c, t in zip(kids[s], perm):
                    if c in assign:
                        if assign[c] != t:
                            ok = False
                            break
                    elif t in used:
                        ok = False
                        break
                    else:
                        assign[c] = t
                        used.add(t)
                        newly.append(c)
                if ok and _injective(source, target, list(assign), assign):
                    added = [c for c in newly if c in kids]
                    pending.extend(added)
                    yield from rec()
                    if added:
                        del pending[-len(added):]
                for c in newly:
                    used.discard(assign.pop(c))
            pending.append(s)
            return
        g = next((g for g in gens if g not in assign), None)
        if g is None:
            if _injective(source, target, domain, assign):
                yield EmbeddingMap(source, gens, target, dict(assign))
            return
        for t in candidates(g):
            assign[g] = t
            used.add(t)
            if g in kids:
                pending.append(g)
            if _injective(source, target, list(assign), assign):
                yield from rec()
            if g in kids:
                pending.pop()
            used.discard(t)
            del assign[g]

    yield from rec()

