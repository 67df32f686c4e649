"""Finite approximations C_1 ≤ C_2 ≤ … of the limits D_n.

The engine starts from a single tree and repeatedly realizes 1-extensions:
a fresh tree T′ is amalgamated (inside C_n) with the current digraph along
desc(U) ↔ desc(V).  Extensions are taken from a dovetailed, fair queue:

* vertices enter an append-only *pool* lazily, alternating between newly
  born sources and a breadth-first walk, so every vertex gets an index;
* a descriptor ``(m, U, V)`` has base ``pool[0..m]``, ``U`` an independent
  subset of the base and ``V`` an independent address tuple; its class is
  ``m + |U| + Σ (q^|v| − 1)``, and every class is finite;
* classes are consumed in increasing order, each in an order shuffled by
  the seed.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations
from pathlib import Path

from .amalgam import AmalgamProblem, class_amalgam, format_n, parse_n
from .embedding import enumerate_le_embeddings
from .errors import InvariantViolation, PreconditionError
from .presentation import (Presentation, Ref, address_in_cone, as_ref, desc_upto, in_neighbors,
                           intersect_desc, is_independent, max_multiplicity, minimal_generators,
                           multiplicity_groups, out_neighbors, reduce, resolve, restrict, tree)
from .tree_core import check_q, common_prefix_len, independent_address_sets, level

SCHEMA_VERSION = 1
DEFAULT_STEP_BUDGET = 2000
DEFAULT_BALL_RADIUS = 4


def address_cost(q: int, a: str) -> int:
    return q ** len(a) - 1


@lru_cache(maxsize=None)
def address_tuples(q: int, k: int, cost: int) -> tuple[tuple[str, ...], ...]:
    """Ordered independent address tuples of size ``k`` and total cost exactly ``cost``."""
    price = lambda a: address_cost(q, a)
    sets = [s for s in independent_address_sets(q, k, cost, price) if sum(map(price, s)) == cost]
    return tuple(t for s in sets for t in permutations(s))


@dataclass(frozen=True)
class ExtensionDescriptor:
    """The 1-extension desc(base) ↦ desc(base) ∗ T glued along u[i] ↔ v[i]."""

    base: tuple
    u: tuple
    v: tuple

    @property
    def trivial(self) -> bool:
        return self.v == ("",)

    def to_dict(self) -> dict:
        return {"base": list(self.base), "U": list(self.u), "V": list(self.v)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExtensionDescriptor":
        return cls(tuple(d["base"]), tuple(d["U"]), tuple(d["V"]))

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class LimitState:
    n: float | int
    q: int
    seed: int
    current: Presentation
    pool: list = field(default_factory=list)
    bfs_pos: int = 0
    pending: list = field(default_factory=list)
    take_birth: bool = False
    cls: int = 0
    index: int = 0
    step_count: int = 0
    history: list = field(default_factory=list)
    next_id: int = 0
    _classes: dict = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------ persistence
    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "n": format_n(self.n), "q": self.q, "seed": self.seed,
                "current": self.current.to_dict(), "pool": list(self.pool), "bfs_pos": self.bfs_pos,
                "pending": list(self.pending), "take_birth": self.take_birth,
                "cursor": {"class": self.cls, "index": self.index}, "step_count": self.step_count,
                "history": list(self.history), "next_id": self.next_id}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "LimitState":
        if d.get("schema") != SCHEMA_VERSION:
            raise PreconditionError(f"unsupported state schema {d.get('schema')!r}")
        return cls(parse_n(d["n"]), int(d["q"]), int(d["seed"]), Presentation.from_dict(d["current"]),
                   list(d["pool"]), int(d["bfs_pos"]), list(d["pending"]), bool(d["take_birth"]),
                   int(d["cursor"]["class"]), int(d["cursor"]["index"]), int(d["step_count"]),
                   list(d["history"]), int(d["next_id"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "LimitState":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def copy(self) -> "LimitState":
        dup = copy.copy(self)
        dup.pool, dup.pending, dup.history = list(self.pool), list(self.pending), list(self.history)
        dup._classes = dict(self._classes)
        return dup

    # ------------------------------------------------------------ pool
    def ref(self, text: str) -> Ref:
        return resolve(self.current, Ref.parse(text))

    def ensure_pool(self, size: int) -> None:
        known = {self.ref(x) for x in self.pool}

        def add(r: Ref) -> None:
            r = resolve(self.current, r)
            if r not in known:
                known.add(r)
                self.pool.append(str(r))

        while len(self.pool) < size:
            if self.take_birth and self.pending:
                add(Ref.parse(self.pending.pop(0)))
            elif self.bfs_pos < len(self.pool):
                for c in out_neighbors(self.current, self.ref(self.pool[self.bfs_pos])):
                    add(c)
                self.bfs_pos += 1
            elif self.pending:
                add(Ref.parse(self.pending.pop(0)))
            self.take_birth = not self.take_birth

    # ------------------------------------------------------------ queue
    def class_list(self, d: int) -> list[ExtensionDescriptor]:
        if d in self._classes:
            return self._classes[d]
        self.ensure_pool(d + 1)
        refs = [self.ref(x) for x in self.pool[:d + 1]]
        out: list[ExtensionDescriptor] = []
        for m in range(d + 1):
            base = tuple(self.pool[:m + 1])
            for k in range(d - m + 1):
                tuples = address_tuples(self.q, k, d - m - k)
                if not tuples:
                    continue
                for combo in combinations(range(m + 1), k):
                    if not is_independent(self.current, [refs[i] for i in combo]):
                        continue
                    u = tuple(self.pool[i] for i in combo)
                    out.extend(ExtensionDescriptor(base, u, v) for v in tuples)
        random.Random(self.seed * 1000003 + d).shuffle(out)
        self._classes[d] = out
        return out

    def next_descriptor(self) -> ExtensionDescriptor:
        while self.index >= len(self.class_list(self.cls)):
            self._classes.pop(self.cls, None)
            self.cls += 1
            self.index = 0
        desc = self.class_list(self.cls)[self.index]
        self.index += 1
        return desc


def new_state(n, q: int, seed: int = 0) -> LimitState:
    check_q(q)
    if not 0 <= int(seed) < 2 ** 64:
        raise PreconditionError("seed must be a 64-bit unsigned integer")
    return LimitState(parse_n(n), q, int(seed), tree(q, "r"), pool=["r"])


def enumerate_descriptors(state: LimitState, budget: int) -> list[ExtensionDescriptor]:
    """The next ``budget`` descriptors, without advancing ``state``."""
    scratch = state.copy()
    return [scratch.next_descriptor() for _ in range(budget)]


def realize(state: LimitState, desc: ExtensionDescriptor) -> int:
    """Apply one descriptor to ``state.current``; returns the number of identifications."""
    if desc.trivial:
        return 0
    cur = state.current
    u = [state.ref(x) for x in desc.u]
    t = tree(state.q, "t")
    prob = AmalgamProblem.make(cur, u, cur, t, {r: r for r in u},
                               {r: Ref("t", a) for r, a in zip(u, desc.v)})
    sol = class_amalgam(prob, state.n, start=state.next_id, check_factors=False)
    state.next_id += sol.counts["b2_core"] - sol.counts["glued"]
    new = sol.c
    for v in cur.vertices:
        if v not in cur.frontier and new.out_map.get(v) != cur.out_map[v]:
            raise InvariantViolation(f"out-neighbourhood of {v} changed")
    if max_multiplicity(new) >= state.n:
        raise InvariantViolation(f"step left C_{format_n(state.n)}")
    if state.n == math.inf and sol.identifications:
        raise InvariantViolation("identifications in a free amalgamation run")
    old_sources = set(cur.generators)
    state.pending.extend(s for s in sorted(new.generators) if s not in old_sources and s not in cur.vertices)
    state.current = new
    return len(sol.identifications)


def grow(state: LimitState, steps: int, on_step=None) -> LimitState:
    """Apply the next ``steps`` descriptors in place (and return the state)."""
    for _ in range(steps):
        desc = state.next_descriptor()
        idents = realize(state, desc)
        state.step_count += 1
        state.history.append({"descriptor": desc.digest(), "identifications": idents})
        if on_step is not None:
            on_step(state, desc, idents)
    return state


def history_digest(state: LimitState) -> str:
    text = json.dumps(state.history, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------- balls

@dataclass
class FiniteDigraph:
    """A finite induced piece of a presented digraph."""

    q: int
    nodes: list
    edges: list
    kinds: dict

    def to_dict(self) -> dict:
        return {"q": self.q, "nodes": self.nodes, "edges": [list(e) for e in self.edges], "kinds": self.kinds}

    def to_dot(self, name: str = "ball") -> str:
        lines = [f"digraph {json.dumps(name)} {{"]
        for v in self.nodes:
            shape = "circle" if self.kinds[v] == "core" else "triangle"
            lines.append(f"  {json.dumps(v)} [shape={shape}];")
        lines += [f"  {json.dumps(a)} -> {json.dumps(b)};" for a, b in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"


def finite_piece(p: Presentation, refs) -> FiniteDigraph:
    refs = sorted({as_ref(r) for r in refs})
    members = set(refs)
    edges = sorted((str(a), str(b)) for a in refs for b in out_neighbors(p, a) if b in members)
    kinds = {str(r): "implicit" if r.addr else "frontier" if r.vid in p.frontier else "core" for r in refs}
    return FiniteDigraph(p.q, [str(r) for r in refs], edges, kinds)


def ball_at(state: LimitState, v, r: int) -> FiniteDigraph:
    if r < 0:
        raise PreconditionError("radius must be non-negative")
    ref = resolve(state.current, as_ref(v))
    return finite_piece(state.current, desc_upto(state.current, [ref], r))


# ---------------------------------------------------------------- extension property

def _ancestors(p: Presentation, x: Ref, dist: int) -> set[Ref]:
    layer = {x}
    for _ in range(dist):
        layer = {w for y in layer for w in in_neighbors(p, y)}
    return layer


def realized_by(p: Presentation, trial: ExtensionDescriptor) -> Ref | None:
    """A vertex c with desc(c) ∩ desc(base) = desc(U) matching V, if one exists."""
    base = [resolve(p, Ref.parse(x)) for x in trial.base]
    u = [resolve(p, Ref.parse(x)) for x in trial.u]
    v = list(trial.v)
    if u:
        cands = sorted(_ancestors(p, u[0], len(v[0])))
    else:
        cands = [Ref(x) for x in sorted(p.vertices)]
        cands += [Ref(f, str(i)) for f in sorted(p.frontier) for i in range(p.q)]
    want = set(u)
    for c in cands:
        addrs = [address_in_cone(p, c, x) for x in u]
        if any(a is None or len(a) != len(b) for a, b in zip(addrs, v)):
            continue
        if any(common_prefix_len(addrs[i], addrs[j]) != common_prefix_len(v[i], v[j])
               for i in range(len(v)) for j in range(i + 1, len(v))):
            continue
        meet = minimal_generators(p, [w for b in base for w in intersect_desc(p, c, b)])
        if set(meet) == want:
            return c
    return None


@dataclass
class ExtensionResult:
    trial: ExtensionDescriptor
    realized: bool
    step: int | None
    witness: str | None
    identifications: int

    def to_dict(self) -> dict:
        return {"trial": self.trial.to_dict(), "realized": self.realized, "step": self.step,
                "witness": self.witness, "identifications": self.identifications}


def trial_is_admissible(state: LimitState, trial: ExtensionDescriptor) -> bool:
    """Whether desc(base) ∗ T along the trial's matching lies in C_n."""
    from .amalgam import free_extension
    cur = state.current
    base = [state.ref(x) for x in trial.base]
    u = [state.ref(x) for x in trial.u]
    if not is_independent(cur, u):
        return False
    a, anchors = restrict(cur, base)
    back = {img: k for k, img in anchors.items()}
    ua = []
    for x in u:
        hit = back.get(x)
        if hit is None:
            hit = next((Ref(k.vid, x.addr[len(img.addr):]) for k, img in anchors.items()
                        if img.vid == x.vid and img.addr and x.addr.startswith(img.addr)), None)
        if hit is None:
            return False
        ua.append(hit)
    return max_multiplicity(free_extension(a, ua, trial.v).c) < state.n


def check_extension_battery(state: LimitState, trials, step_budget: int = DEFAULT_STEP_BUDGET
                            ) -> list[ExtensionResult]:
    """Grow one scratch copy until every trial has a witness or the budget runs out."""
    scratch = state.copy()
    results: dict[int, ExtensionResult] = {}
    idents = 0
    for step in range(step_budget + 1):
        for i, t in enumerate(trials):
            if i not in results:
                c = realized_by(scratch.current, t)
                if c is not None:
                    results[i] = ExtensionResult(t, True, step, str(c), idents)
        if len(results) == len(trials) or step == step_budget:
            break
        grow(scratch, 1)
        idents += scratch.history[-1]["identifications"]
    return [results.get(i, ExtensionResult(t, False, None, None, idents)) for i, t in enumerate(trials)]


def check_extension_property(state: LimitState, trial: ExtensionDescriptor,
                             step_budget: int = DEFAULT_STEP_BUDGET) -> ExtensionResult:
    for x in trial.base + trial.u:
        state.ref(x)
    return check_extension_battery(state, [trial], step_budget)[0]


def sample_trials(state: LimitState, count: int, rng: random.Random, max_base: int = 6,
                  max_cost: int = 4) -> list[ExtensionDescriptor]:
    """Random admissible 1-extension trials over small bases of ``state``."""
    scratch = state.copy()
    scratch.ensure_pool(max_base)
    refs = [scratch.ref(x) for x in scratch.pool]
    out: list[ExtensionDescriptor] = []
    tries = 0
    while len(out) < count and tries < 50 * count:
        tries += 1
        m = rng.randrange(len(refs))
        k = rng.randint(0, min(state.q, m + 1))
        combo = sorted(rng.sample(range(m + 1), k))
        if not is_independent(scratch.current, [refs[i] for i in combo]):
            continue
        options = [t for c in range(max_cost + 1) for t in address_tuples(state.q, k, c)]
        if not options:
            continue
        v = rng.choice(options)
        trial = ExtensionDescriptor(tuple(scratch.pool[:m + 1]), tuple(scratch.pool[i] for i in combo), v)
        if trial_is_admissible(scratch, trial):
            out.append(trial)
    return out


# ---------------------------------------------------------------- back and forth

@dataclass
class ProbeResult:
    passed: bool
    trials: int
    checked: list
    counterexample: dict | None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "trials": self.trials, "checked": self.checked,
                "counterexample": self.counterexample}


def _sample_subdigraph(p: Presentation, rng: random.Random, r: int, max_core: int = 16):
    """Generators of a small descendant-closed subdigraph whose core lies within radius r.

    Samples favour configurations where cones meet: vertices sharing an
    out-set, or two ancestors (within distance r) of a common vertex.
    """
    shared = [sorted(vs) for vs in multiplicity_groups(p).values() if len(vs) > 1]
    meeting = sorted(v for v in p.vertices if len(p.in_map[v]) > 1)
    for _ in range(200):
        roll = rng.random()
        if shared and roll < 0.3:
            group = rng.choice(shared)
            gens = [Ref(x) for x in rng.sample(group, min(len(group), rng.randint(2, 3)))]
        elif meeting and roll < 0.8:
            w = Ref(rng.choice(meeting))
            above = sorted(set().union(*(_ancestors(p, w, d) for d in range(1, r + 1))))
            gens = rng.sample(above, min(len(above), 2))
        else:
            gens = [Ref(rng.choice(sorted(p.vertices)))]
        gens = minimal_generators(p, gens)
        sub = reduce(restrict(p, gens)[0])
        if len(sub.vertices) > max_core:
            continue
        if desc_upto(sub, sub.sources(), r) >= {Ref(v) for v in sub.vertices}:
            return gens, sub
    return None


def _embeds(sub: Presentation, target: Presentation, depth: int) -> bool:
    return next(enumerate_le_embeddings(sub, sub.sources(), target, depth), None) is not None


def back_and_forth_probe(state_a: LimitState, state_b: LimitState, r: int = 2, trials: int = 20,
                         grow_budget: int = 200, grow_chunk: int = 25, seed: int = 0) -> ProbeResult:
    """Look for a small piece of one run that never appears in the other."""
    if state_a.q != state_b.q:
        raise PreconditionError("runs have different q")
    rng = random.Random(seed)
    checked = []
    directions = [("A->B", state_a, state_b), ("B->A", state_b, state_a)]
    grown = {"A->B": state_b.copy(), "B->A": state_a.copy()}
    for i in range(trials):
        label, src, _ = directions[i % 2]
        picked = _sample_subdigraph(src.current, rng, r)
        if picked is None:
            continue
        gens, sub = picked
        tgt = grown[label]
        entry = {"direction": label, "generators": [str(g) for g in gens], "core": len(sub.vertices)}
        if max_multiplicity(sub) >= tgt.n:
            entry["reason"] = f"multiplicity {max_multiplicity(sub)} is forbidden in C_{format_n(tgt.n)}"
            return ProbeResult(False, i + 1, checked, {**entry, "sample": sub.to_dict()})
        spent = 0
        while not _embeds(sub, tgt.current, r):
            if spent >= grow_budget:
                entry["reason"] = f"no embedding after {spent} extra steps"
                return ProbeResult(False, i + 1, checked, {**entry, "sample": sub.to_dict()})
            grow(tgt, grow_chunk)
            spent += grow_chunk
        entry["extra_steps"] = spent
        checked.append(entry)
    return ProbeResult(True, trials, checked, None)
