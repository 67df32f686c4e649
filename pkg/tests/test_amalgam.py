import random
from itertools import combinations

import pytest

from conftest import check_solution

from descgraph.amalgam import (INF, AmalgamProblem, augment_predecessors, class_amalgam, complement,
                               free_amalgam, max_common_predecessors, merge_predecessors, parse_n,
                               replay_free_extension)
from descgraph.embedding import is_le_embedding
from descgraph.errors import PreconditionError
from descgraph.generators import _candidates, _independent_sample, random_presentation, random_problem
from descgraph.presentation import (Builder, Presentation, Ref, canonical_form, common_predecessors,
                                    desc_upto, in_class, is_desc, is_independent, max_multiplicity,
                                    out_neighbors, tn, tree, validate)

R = Ref.parse


def stub_problem(q=2):
    stub = Presentation.build(q, [f"a{j}" for j in range(q)], [], [f"a{j}" for j in range(q)])
    t = tree(q)
    f = {f"a{j}": f"r/{j}" for j in range(q)}
    return AmalgamProblem.make(stub, list(f), t, t, f, f)


# ---------------------------------------------------------------- worked examples

def test_two_roots_over_their_children():
    prob = stub_problem()
    merged = class_amalgam(prob, 2)
    assert canonical_form(merged.c) == canonical_form(tree(2))
    assert [(i.kept, i.removed) for i in merged.identifications] == [("r", "v0")]
    for n in (3, INF):
        sol = class_amalgam(prob, n)
        assert canonical_form(sol.c) == canonical_form(tn(2, 2)) and not sol.identifications
    assert free_amalgam(prob).counts == {"b1_core": 3, "b2_core": 3, "glued": 2}


def test_free_amalgam_over_a_subtree():
    t = tree(2)
    sub = Presentation.build(2, ["a"], [], ["a"])
    sol = free_amalgam(AmalgamProblem.make(sub, ["a"], t, t, {"a": "r/0"}, {"a": "r/0"}))
    assert max_multiplicity(sol.c) == 1 and validate(sol.c) == []
    assert sol.counts == {"b1_core": 3, "b2_core": 3, "glued": 1}


def test_parse_n():
    assert parse_n("inf") == INF and parse_n(None) == INF and parse_n("3") == 3
    with pytest.raises(PreconditionError):
        parse_n(1)


def test_class_amalgam_rejects_factor_outside_class():
    p = tn(3, 2)
    stub = Presentation.build(2, ["a"], [], ["a"])
    prob = AmalgamProblem.make(stub, ["a"], p, p, {"a": "h0"}, {"a": "h0"})
    with pytest.raises(PreconditionError):
        class_amalgam(prob, 3)


def test_complement_examples():
    r = complement(tree(2), ["r/0"])
    assert r.to_dict() == {"Y": ["r/0", "r/1"], "complement": ["r/1"], "leftovers": ["r"], "radius_used": 1}
    assert complement(tree(2), ["r"]).complement == []
    r = complement(tn(2, 2), ["h0"])
    assert [str(v) for v in r.complement] == ["h1"] and [str(v) for v in r.leftovers] == ["x1", "x2"]
    with pytest.raises(PreconditionError):
        complement(tn(2, 2), ["x1", "x2"])


def test_merge_example():
    r = merge_predecessors(tn(2, 2), ["h0", "h1"], tree(2, "b"), ["b/0", "b/1"])
    assert r.to_dict() == {"U": ["x1"], "V": ["b"], "F": {"h0": "b/0", "h1": "b/1", "x1": "b"},
                           "Q": [["h0", "h1"]]}
    single = merge_predecessors(tn(2, 2), ["h0"], tree(2, "b"), ["b/0"])
    assert single.u == [R("h0")] and single.v == [R("b/0")] and single.merged == []
    none = merge_predecessors(tn(2, 2), ["h0", "h1"], tree(2, "b"), ["b/0", "b/10"])
    assert [str(v) for v in none.u] == ["h0", "h1"] and none.merged == []


def test_augment_examples():
    b, e = augment_predecessors(tree(2), ["r/0", "r/1"], 2, 3)
    assert max_common_predecessors(b, [e.apply(R("r/0")), e.apply(R("r/1"))]) == 2
    assert in_class(b, 3) and is_le_embedding(e)
    b, e = augment_predecessors(tree(2), ["r/0", "r/1"], 2, INF)
    assert max_common_predecessors(b, [e.apply(R("r/0")), e.apply(R("r/1"))]) == 3
    b, _ = augment_predecessors(tn(2, 2), ["h0", "h1"], 2, 3)
    assert canonical_form(b) == canonical_form(tn(2, 2))
    b, e = augment_predecessors(tree(2), ["r/0", "r/10"], 1, 2)
    assert len(common_predecessors(b, [e.apply(R("r/0")), e.apply(R("r/10"))])) == 1
    assert augment_predecessors(tree(2), ["r/0"], 0, 2)[0] == tree(2)
    with pytest.raises(PreconditionError):
        augment_predecessors(tree(2), ["r/0", "r/1"], 3, 3)
    with pytest.raises(PreconditionError):
        augment_predecessors(tn(2, 2), ["h0", "h1"], 1, 4)


@pytest.mark.parametrize("a,u,v,n", [
    (tree(2), ["r"], [""], 2),
    (tree(2), ["r/0"], ["0"], 2),
    (tn(2, 2), ["h0", "h1"], ["0", "1"], INF),
    (tn(2, 2), ["h0", "h1"], ["0", "1"], 4),
    (tree(2), ["r/0", "r/1"], ["0", "1"], 4),
])
def test_replay_examples(a, u, v, n):
    _, rep = replay_free_extension(a, u, v, n)
    assert rep.equality_holds and rep.isomorphic_to_free_amalgam


def test_replay_inadmissible_extension():
    with pytest.raises(PreconditionError):
        replay_free_extension(tn(2, 2), ["h0", "h1"], ["0", "1"], 3)
    with pytest.raises(PreconditionError):
        replay_free_extension(tn(2, 2), ["h0", "h1"], ["0", "1"], 2)
    with pytest.raises(PreconditionError):
        replay_free_extension(tree(2), ["r/0", "r/1"], ["0", "01"], INF)


# ---------------------------------------------------------------- random properties

def test_random_free_amalgams():
    rng = random.Random(7)
    for _ in range(60):
        prob = random_problem(rng, rng.choice([2, 3]), 12)
        sol = free_amalgam(prob)
        check_solution(prob, sol, INF, free=True)


def test_random_class_amalgams():
    rng = random.Random(11)
    merges = 0
    for _ in range(80):
        n = rng.choice([2, 3, 4])
        prob = random_problem(rng, 2, 12, n)
        sol = class_amalgam(prob, n)
        check_solution(prob, sol, n, free=False)
        merges += len(sol.identifications)
    assert merges > 0


def random_independent(p: Presentation, rng: random.Random, size: int):
    return _independent_sample(p, _candidates(Builder.of(p), 2), size, rng)


def test_random_complements():
    rng = random.Random(3)
    for _ in range(60):
        p = random_presentation(rng, rng.choice([2, 3]), 10)
        x = random_independent(p, rng, rng.randint(0, 3)) or []
        r = complement(p, x)
        assert is_independent(p, r.y) and set(x) <= set(r.y)
        big = desc_upto(p, p.sources(), r.radius_used + 3)
        uncovered = {b for b in big if not any(is_desc(p, y, b) for y in r.y)}
        assert uncovered == set(r.leftovers)


def test_random_merges_and_augments():
    rng = random.Random(5)
    for _ in range(40):
        p = random_presentation(rng, 2, 10, 4)
        u = random_independent(p, rng, rng.randint(2, 4))
        if u is None:
            continue
        t = tree(2, "z")
        v = random_independent(t, rng, len(u))
        if v is None:
            continue
        m = merge_predecessors(p, u, t, v)
        assert is_independent(p, m.u) and is_independent(t, m.v) and len(m.u) == len(m.v)
        for w, img in m.mapping.items():
            if w not in u:
                assert {m.mapping[k] for k in out_neighbors(p, w)} == set(out_neighbors(t, img))
        big_n = max(max_common_predecessors(p, u), 1)
        if big_n < 4:
            b, e = augment_predecessors(p, u, big_n, 4)
            assert in_class(b, 4) and is_le_embedding(e)
            for pq in combinations([e.apply(r) for r in u], 2):
                assert len(common_predecessors(b, pq)) >= big_n


def test_random_replays():
    rng = random.Random(9)
    done = 0
    for _ in range(60):
        n = rng.choice([2, 3, 4, INF])
        p = random_presentation(rng, 2, 8, n)
        u = random_independent(p, rng, rng.randint(1, 3))
        if u is None:
            continue
        v = [a for a in _independent_sample(tree(2, "t"), _candidates(Builder.of(tree(2, "t")), 2),
                                            len(u), rng) or []]
        if len(v) != len(u):
            continue
        try:
            _, rep = replay_free_extension(p, u, [x.addr for x in v], n)
        except PreconditionError:
            continue
        assert rep.equality_holds and rep.isomorphic_to_free_amalgam
        done += 1
    assert done >= 20
