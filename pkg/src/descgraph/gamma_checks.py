"""Checkers for descendant-set conditions on depth-truncated rooted digraphs.

A :class:`LevelPrefix` is a rooted digraph cut off at depth ``d`` with each
vertex tagged by its level.  Every checker only speaks about what is visible
inside the prefix; results are always relative to the stated depth.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from . import canon
from .errors import MalformedPrefix, PreconditionError

ORBIT_LEVEL_LIMIT = 20


@dataclass(frozen=True)
class LevelPrefix:
    depth: int
    levels: tuple
    edges: frozenset

    @classmethod
    def build(cls, depth: int, levels: Iterable[Iterable[str]], edges: Iterable) -> "LevelPrefix":
        levels = tuple(tuple(str(v) for v in lv) for lv in levels)
        if depth < 0:
            raise MalformedPrefix("depth must be non-negative")
        if len(levels) != depth + 1:
            raise MalformedPrefix(f"expected {depth + 1} levels, got {len(levels)}")
        if len(levels[0]) != 1:
            raise MalformedPrefix("level 0 must hold exactly one root vertex")
        seen: set[str] = set()
        for lv in levels:
            for v in lv:
                if v in seen:
                    raise MalformedPrefix(f"vertex {v!r} listed twice")
                seen.add(v)
        pairs = set()
        for e in edges:
            if len(e) != 2:
                raise MalformedPrefix(f"edge must be a pair, got {e!r}")
            a, b = str(e[0]), str(e[1])
            if a not in seen or b not in seen:
                raise MalformedPrefix(f"edge {a}->{b} mentions an unknown vertex")
            pairs.add((a, b))
        return cls(depth, levels, frozenset(pairs))

    @classmethod
    def from_dict(cls, d: Mapping) -> "LevelPrefix":
        try:
            return cls.build(int(d["depth"]), d["levels"], d["edges"])
        except (KeyError, TypeError) as e:
            raise MalformedPrefix(f"bad level file: {e}") from e

    @classmethod
    def load(cls, path) -> "LevelPrefix":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"depth": self.depth, "levels": [list(lv) for lv in self.levels],
                "edges": sorted([a, b] for a, b in self.edges)}

    @property
    def root(self) -> str:
        return self.levels[0][0]

    @cached_property
    def level_of(self) -> dict[str, int]:
        return {v: i for i, lv in enumerate(self.levels) for v in lv}

    @cached_property
    def vertices(self) -> list[str]:
        return [v for lv in self.levels for v in lv]

    @cached_property
    def out(self) -> dict[str, list[str]]:
        out = {v: [] for v in self.vertices}
        for a, b in sorted(self.edges):
            out[a].append(b)
        return out

    @cached_property
    def inn(self) -> dict[str, list[str]]:
        inn = {v: [] for v in self.vertices}
        for a, b in sorted(self.edges):
            inn[b].append(a)
        return inn

    @cached_property
    def reach(self) -> dict[str, frozenset]:
        """desc(v) within the prefix, for every vertex."""
        memo: dict[str, frozenset] = {}
        for v in self.vertices:
            seen = {v}
            stack = [v]
            while stack:
                for w in self.out[stack.pop()]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            memo[v] = frozenset(seen)
        return memo

    def distances(self, v: str) -> dict[str, set[int]]:
        """Lengths of walks from ``v`` to every vertex, up to the number of vertices."""
        lengths: dict[str, set[int]] = {w: set() for w in self.vertices}
        layer = {v}
        for k in range(len(self.vertices) + 1):
            for w in layer:
                lengths[w].add(k)
            layer = {w for x in layer for w in self.out[x]}
            if not layer:
                break
        return lengths

    def ball(self, xs: Iterable[str], radius: int) -> set[str]:
        seen = set(xs)
        layer = set(seen)
        for _ in range(radius):
            layer = {w for x in layer for w in self.out[x]} - seen
            seen |= layer
        return seen


def _require_t1(p: LevelPrefix) -> None:
    res = check_T1(p)
    if not res["pass"]:
        raise PreconditionError(f"levels are not root distances at {res['vertex']}")


def check_T1(p: LevelPrefix) -> dict:
    """Every vertex lies at a single root distance, equal to its level tag."""
    dist = p.distances(p.root)
    unreachable = [v for v in p.vertices if not dist[v]]
    if unreachable:
        raise MalformedPrefix(f"vertex {unreachable[0]!r} is not reachable from the root")
    for v in p.vertices:
        if dist[v] != {p.level_of[v]}:
            return {"pass": False, "vertex": v, "level": p.level_of[v], "distances": sorted(dist[v])}
    return {"pass": True, "depth": p.depth}


def _truncation(p: LevelPrefix, top: str, k: int) -> tuple:
    verts = sorted(p.ball([top], k))
    members = set(verts)
    out = {v: [w for w in p.out[v] if w in members] for v in verts}
    color = {v: v == top for v in verts}
    cert, _ = canon.canonical_labeling(verts, out, color)
    return cert


def check_T2_prefix(p: LevelPrefix, u: str) -> dict:
    """The cone of ``u`` agrees with the whole prefix up to the depth both can show."""
    if u not in p.level_of:
        raise PreconditionError(f"unknown vertex {u!r}")
    k = p.depth - p.level_of[u]
    for j in range(k + 1):
        if _truncation(p, u, j) != _truncation(p, p.root, j):
            return {"pass": False, "vertex": u, "mismatch_depth": j, "verified_depth": j - 1}
    return {"pass": True, "vertex": u, "verified_depth": k}


def t4_violations(p: LevelPrefix) -> list[tuple[int, str, str, str]]:
    """All (l, x, a, b) with b at distance l from x, a → b, and a outside desc(x)."""
    _require_t1(p)
    lv = p.level_of
    found = []
    for x in p.vertices:
        for b in sorted(p.reach[x]):
            l = lv[b] - lv[x]
            if not 1 <= l <= p.depth - 1:
                continue
            for a in p.inn[b]:
                if a not in p.reach[x]:
                    found.append((l, x, a, b))
    return found


def check_T4(p: LevelPrefix) -> dict:
    """Least N such that, for N < l ≤ d−1, a parent of an l-descendant of x lies below x."""
    bad = t4_violations(p)
    worst = max(bad, default=None)
    n = worst[0] if worst else 0
    # violations only occur for l ≤ d − 1, so some N < d (or N = 0) always works
    out = {"N": n, "depth": p.depth}
    if worst:
        out["witness"] = dict(zip(("l", "x", "a", "b"), worst))
    return out


def g3_violations(p: LevelPrefix) -> list[tuple[int, str, str]]:
    """All (level(x), x, β) with β a child of the root, desc(β) ∩ desc(x) ≠ ∅, x ∉ desc(β)."""
    _require_t1(p)
    found = []
    for beta in p.out[p.root]:
        for x in p.vertices:
            if x not in p.reach[beta] and p.reach[beta] & p.reach[x]:
                found.append((p.level_of[x], x, beta))
    return found


def check_G3(p: LevelPrefix) -> dict:
    """Least k such that, from level k on, meeting a child cone means lying inside it."""
    bad = g3_violations(p)
    worst = max(bad, default=None)
    k = worst[0] + 1 if worst else 0
    out = {"k": k if k <= p.depth else None, "depth": p.depth}
    if worst:
        out["witness"] = dict(zip(("level", "x", "beta"), worst))
    return out


def check_ball_fixing_extension(p: LevelPrefix, x_generators: Iterable[str], n: int,
                                gamma: Mapping[str, str]) -> dict:
    """Whether gamma on desc(X), extended by the identity, preserves edges and non-edges."""
    gens = list(x_generators)
    for g in gens:
        if g not in p.level_of:
            raise PreconditionError(f"unknown vertex {g!r}")
    xs = set().union(*(p.reach[g] for g in gens)) if gens else set()
    ys = p.ball(gens, n)
    gamma = dict(gamma)
    if set(gamma) != xs or set(gamma.values()) != xs:
        raise PreconditionError("gamma must be a bijection of the X-cone")
    # a bijection of a finite digraph that maps edges to edges also maps non-edges to non-edges
    for a, b in sorted(p.edges):
        if a in xs and b in xs and (gamma[a], gamma[b]) not in p.edges:
            raise PreconditionError(f"gamma is not an automorphism of X at ({a}, {b})")
    moved = sorted(y for y in ys if gamma[y] != y)
    if moved:
        raise PreconditionError(f"gamma moves {moved[0]} inside the fixed balls")
    theta = lambda v: gamma.get(v, v)
    for a, b in sorted(p.edges):
        if (theta(a), theta(b)) not in p.edges:
            return {"pass": False, "pair": [a, b], "image": [theta(a), theta(b)]}
    return {"pass": True, "moved": sum(1 for v in xs if gamma[v] != v), "fixed_ball": len(ys)}


def cone_automorphisms(p: LevelPrefix, x_generators: Iterable[str], n: int):
    """Every automorphism of the X-cone fixing the radius-n balls pointwise."""
    gens = list(x_generators)
    xs = sorted(set().union(*(p.reach[g] for g in gens)) if gens else set())
    members = set(xs)
    out = {v: [w for w in p.out[v] if w in members] for v in xs}
    yield from canon.automorphisms(xs, out, None, fixed=sorted(p.ball(gens, n)))


def level_orbits(p: LevelPrefix, limit: int = ORBIT_LEVEL_LIMIT) -> dict:
    """Orbits of the prefix's automorphism group on each level small enough to inspect."""
    report = {}
    for i, lv in enumerate(p.levels):
        if len(lv) > limit:
            report[str(i)] = None
            continue
        classes: dict = {}
        for v in lv:
            marked = {w: (w == p.root, w == v) for w in p.vertices}
            cert, _ = canon.canonical_labeling(p.vertices, p.out, marked)
            classes.setdefault(cert, []).append(v)
        report[str(i)] = sorted(sorted(c) for c in classes.values())
    return {"depth": p.depth, "orbits": report,
            "transitive": {k: (None if v is None else len(v) == 1) for k, v in report.items()}}


def tree_prefix(q: int, depth: int) -> LevelPrefix:
    """The q-ary tree cut off at ``depth``; vertices are named by their addresses."""
    levels = [[""]]
    for _ in range(depth):
        levels.append([a + str(i) for a in levels[-1] for i in range(q)])
    name = lambda a: "e" + a
    edges = [(name(a), name(a + str(i))) for lv in levels[:-1] for a in lv for i in range(q)]
    return LevelPrefix.build(depth, [[name(a) for a in lv] for lv in levels], edges)
