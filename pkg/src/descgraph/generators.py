"""Random valid presentations and amalgamation problems for property tests.

Presentations are grown by 1-extensions: a new source is added above an
independent q-set of existing (possibly implicit) vertices, or a new disjoint
tree is adjoined.  Every such step keeps the tree condition, so every output
is valid by construction.
"""
from __future__ import annotations

import math
import random

from .amalgam import AmalgamProblem
from .embedding import complete
from .presentation import (Builder, Presentation, Ref, intersect_desc, max_multiplicity, resolve,
                           restrict, tree)
from .tree_core import level


def _candidates(b: Builder, depth: int) -> list[Ref]:
    refs = [Ref(v) for v in sorted(b.out)]
    refs += [Ref(f, a) for f in sorted(b.frontier) for d in range(1, depth + 1) for a in level(b.q, d)]
    return refs


def _independent_sample(p: Presentation, refs: list[Ref], size: int, rng: random.Random) -> list[Ref] | None:
    pool = refs[:]
    rng.shuffle(pool)
    chosen: list[Ref] = []
    for r in pool:
        if all(not intersect_desc(p, r, c) for c in chosen):
            chosen.append(r)
            if len(chosen) == size:
                return chosen
    return None


def extend(p: Presentation, rng: random.Random, steps: int, max_core: int, prefix: str = "u",
           n=math.inf, depth: int = 2) -> Presentation:
    """Apply random 1-extensions while the core stays within ``max_core``."""
    for _ in range(steps):
        b = Builder.of(p)
        vid = f"{prefix}{b.fresh_counter(prefix)}"
        if rng.random() < 0.15:
            b.add_vertex(vid, frontier=True)
        else:
            kids = _independent_sample(p, _candidates(b, depth), p.q, rng)
            if kids is None:
                continue
            ids = [b.materialize(k) for k in kids]
            b.add_vertex(vid)
            for k in ids:
                b.add_edge(vid, k)
        if len(b.out) > max_core:
            continue
        nxt = b.freeze()
        if max_multiplicity(nxt) < n:
            p = nxt
    return p


def unfold_randomly(p: Presentation, rng: random.Random, max_core: int) -> Presentation:
    b = Builder.of(p)
    for f in sorted(p.frontier):
        if rng.random() < 0.3 and len(b.out) + p.q <= max_core:
            b.expand(f)
    return b.freeze()


def relabel_randomly(p: Presentation, rng: random.Random, prefix: str = "z") -> Presentation:
    ids = sorted(p.vertices)
    perm = ids[:]
    rng.shuffle(perm)
    m = {v: f"{prefix}{perm.index(v)}" for v in ids}
    return Presentation.build(p.q, [m[v] for v in ids], [(m[a], m[c]) for a, c in p.edges],
                              [m[v] for v in p.frontier])


def random_presentation(rng: random.Random, q: int, max_core: int = 12, n=math.inf) -> Presentation:
    p = tree(q, "r")
    p = extend(p, rng, rng.randint(0, 6), max_core, n=n)
    return unfold_randomly(p, rng, max_core)


def random_problem(rng: random.Random, q: int, max_core: int = 14, n=math.inf) -> AmalgamProblem:
    """A common part A ≤ B1 and a second, independently grown extension B2 of A."""
    b1 = random_presentation(rng, q, max_core, n)
    refs = _candidates(Builder.of(b1), 1)
    gens = _independent_sample(b1, refs, rng.randint(0, 3), rng) or []
    a, anchors = restrict(b1, gens)
    b2 = unfold_randomly(extend(a, rng, rng.randint(0, 5), max_core, prefix="w", n=n), rng, max_core)
    a_gens = a.sources()
    f1 = complete(a, a_gens, b1, {g: anchors[g] for g in a_gens})
    f2 = complete(a, a_gens, b2, {g: g for g in a_gens})
    # plant predecessors of one q-set of A on both sides so that merges can be forced
    for _ in range(rng.randint(0, 2)):
        kids = _independent_sample(a, _candidates(Builder.of(a), 1), q, rng)
        if kids is None:
            break
        b1 = _add_source(b1, [f1(k) for k in kids], "s", n) or b1
        b2 = _add_source(b2, kids, "t", n) or b2
        f1 = complete(a, a_gens, b1, {g: resolve(b1, f1(g)) for g in a_gens})
        f2 = complete(a, a_gens, b2, {g: g for g in a_gens})
    return AmalgamProblem(a, tuple(a_gens), b1, b2, f1, f2)


def _add_source(p: Presentation, kids: list[Ref], prefix: str, n) -> Presentation | None:
    b = Builder.of(p)
    ids = [b.materialize(k) for k in kids]
    vid = f"{prefix}{b.fresh_counter(prefix)}"
    b.add_vertex(vid)
    for k in ids:
        b.add_edge(vid, k)
    out = b.freeze()
    return out if max_multiplicity(out) < n else None
