import json
import random

import pytest

from conftest import ball, invariant_core, oracle_isomorphic, permutation_isomorphic, relabel_random
from descgraph.errors import NotFound, PreconditionError
from descgraph.generators import random_presentation
from descgraph.presentation import (Presentation, Ref, adjacency, canonical_form, common_predecessors,
                                    desc_upto, in_class, intersect_desc, is_independent, max_multiplicity,
                                    minimal_generators, reduce, relabel, tn, tree, unfold, validate)

R = Ref.parse


def rules(p):
    return {(v.rule, v.where) for v in validate(p)}


# ---------------------------------------------------------------- validate

def test_single_tree_is_valid():
    assert validate(tree(2)) == []


def test_out_degree_violation():
    p = Presentation.build(2, ["a", "b"], [("a", "b")], ["b"])
    assert ("OutDegree", "a") in rules(p)


def test_tree_condition_violation():
    p = Presentation.build(2, "abcde", [("a", "b"), ("a", "c"), ("b", "d"), ("b", "e"), ("c", "d"),
                                       ("c", "e")], ["d", "e"])
    assert ("TreeCondition", "d") in rules(p)


def test_structural_violations():
    assert {"SelfLoop"} <= {v.rule for v in validate(Presentation.build(2, ["a"], [("a", "a")], []))}
    cyc = Presentation.build(2, "abcd", [("a", "b"), ("a", "c"), ("b", "a"), ("b", "d")], ["c", "d"])
    assert "Cycle" in {v.rule for v in validate(cyc)}
    bad_gen = Presentation.build(2, ["r"], [], ["r"], ["x"])
    assert "UnknownVertex" in {v.rule for v in validate(bad_gen)}
    wrong_gens = Presentation.build(2, ["r", "s"], [], ["r", "s"], ["r"])
    assert "Generators" in {v.rule for v in validate(wrong_gens)}


def test_parse_issues_are_reported():
    d = {"q": 2, "vertices": ["r", "r"], "edges": [], "frontier": ["r"], "generators": ["r"]}
    assert "DuplicateVertex" in {v.rule for v in validate(Presentation.from_dict(d))}
    d = {"q": 2, "vertices": ["a", "b", "c"], "edges": [["a", "b"], ["a", "b"], ["a", "c"]],
         "frontier": ["b", "c"], "generators": ["a"]}
    assert "MultiEdge" in {v.rule for v in validate(Presentation.from_dict(d))}


def test_json_round_trip():
    p = tn(3, 2)
    assert Presentation.from_json(p.to_json()) == p
    assert json.loads(p.to_json())["generators"] == ["x1", "x2", "x3"]


# ---------------------------------------------------------------- queries

def test_adjacency_examples():
    t = tree(2)
    assert adjacency(t, R("r")) == ([R("r/0"), R("r/1")], [])
    assert adjacency(t, R("r/01")) == ([R("r/010"), R("r/011")], [R("r/0")])
    assert adjacency(tn(3, 2), R("h0"))[1] == [R("x1"), R("x2"), R("x3")]
    with pytest.raises(NotFound):
        adjacency(t, R("zz"))
    with pytest.raises(NotFound):
        adjacency(tn(2, 2), R("x1/0"))


def test_desc_upto_examples():
    assert len(desc_upto(tree(2), [R("r")], 2)) == 7
    assert len(desc_upto(tn(2, 2), [R("x1"), R("x2")], 1)) == 4
    assert desc_upto(tree(2), [R("r/1")], 0) == {R("r/1")}


def test_minimal_generators_examples():
    assert minimal_generators(tn(3, 2), ["x1", "x2", "x3", "h0"]) == [R("x1"), R("x2"), R("x3")]
    assert minimal_generators(tree(2), ["r/0", "r/01"]) == [R("r/0")]
    assert minimal_generators(tree(2), ["r/1"]) == [R("r/1")]


def test_independence_examples():
    assert is_independent(tree(2), ["r/0", "r/1"])
    assert not is_independent(tn(2, 2), ["x1", "x2"])
    assert is_independent(tn(2, 2), ["h0", "h1"])


def test_intersect_desc_examples():
    assert intersect_desc(tn(2, 2), R("x1"), R("x2")) == [R("h0"), R("h1")]
    assert intersect_desc(tree(2), R("r/0"), R("r/1")) == []
    assert intersect_desc(tn(2, 2), R("x1"), R("x1")) == [R("x1")]


def test_max_multiplicity_examples():
    assert max_multiplicity(tn(3, 2)) == 3
    assert max_multiplicity(tree(2)) == 1


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("q", [2, 3])
def test_tn_calculus(n, q):
    p = tn(n, q)
    assert validate(p) == []
    assert max_multiplicity(p) == n
    for m in range(2, 8):
        assert in_class(p, m) == (m > n)


def test_common_predecessors_examples():
    assert common_predecessors(tn(3, 2), ["h0", "h1"]) == [R("x1"), R("x2"), R("x3")]
    assert common_predecessors(tree(2), ["r/0", "r/1"]) == [R("r")]
    assert common_predecessors(tree(2), ["r/0", "r/10"]) == []


# ---------------------------------------------------------------- normal forms

def test_unfold_examples():
    p = unfold(tree(2), "r", 1)
    assert len(p.vertices) == 3 and len(p.frontier) == 2
    assert len(unfold(tree(2), "r", 2).vertices) == 7
    with pytest.raises(PreconditionError):
        unfold(tn(2, 2), "x1", 1)


def test_reduce_examples():
    explicit = unfold(tree(2), "r", 3)
    assert reduce(explicit) == tree(2)
    assert reduce(tn(2, 2)) == tn(2, 2)
    assert reduce(reduce(explicit)) == reduce(explicit)


def test_canonical_form_examples(rng):
    assert canonical_form(tree(2)) != canonical_form(tn(2, 2))
    assert canonical_form(unfold(tree(2), "r", 2)) == canonical_form(tree(2))
    p = tn(3, 2)
    assert canonical_form(relabel(p, {"x1": "zz", "h0": "aa"})) == canonical_form(p)
    assert canonical_form(tree(2)) != canonical_form(tree(3))


def test_random_presentations_round_trip(rng):
    for _ in range(150):
        q = rng.choice([2, 3])
        p = random_presentation(rng, q, 12)
        assert validate(p) == []
        r = reduce(p)
        assert validate(r) == []
        assert reduce(r) == r
        f = rng.choice(sorted(r.frontier))
        assert canonical_form(unfold(r, f, rng.randint(1, 2))) == canonical_form(p)
        assert canonical_form(relabel_random(p, rng)) == canonical_form(p)


def test_isomorphism_agrees_with_oracles(rng):
    pres = [random_presentation(rng, rng.choice([2, 3]), 8) for _ in range(60)]
    for i, a in enumerate(pres):
        for b in pres[i:]:
            same = canonical_form(a) == canonical_form(b)
            assert same == oracle_isomorphic(a, b)
            ga, gb = invariant_core(a), invariant_core(b)
            if a.q == b.q and ga.number_of_nodes() <= 6:
                assert same == permutation_isomorphic(ga, gb)


def test_tree_property_on_random_vertices(rng):
    for _ in range(40):
        q = rng.choice([2, 3])
        p = random_presentation(rng, q, 10)
        v = Ref(rng.choice(sorted(p.vertices)))
        for probe in (v, Ref(rng.choice(sorted(p.frontier)), "1")):
            seen = {probe}
            layer = {probe}
            for i in range(1, 5):
                layer = {w for x in layer for w in adjacency(p, x)[0]}
                assert len(layer) == q ** i and not layer & seen
                seen |= layer


def test_max_multiplicity_brute_force(rng):
    for _ in range(80):
        p = random_presentation(rng, 2, 10)
        inner = [v for v in p.vertices if v not in p.frontier]
        best = 1
        for v in inner:
            best = max(best, sum(1 for w in inner if set(p.out_map[w]) == set(p.out_map[v])))
        assert max_multiplicity(p) == best


def test_ball_matches_oracle(rng):
    for _ in range(30):
        p = random_presentation(rng, 2, 10)
        xs = [Ref(v) for v in sorted(p.generators)]
        assert desc_upto(p, xs, 3) == ball(p, xs, 3)
