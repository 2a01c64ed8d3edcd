import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vomc.ctw import enumerate_trees
from vomc.model import (
    Alphabet,
    ContextTree,
    CtwPrior,
    ModelInvariantError,
    SourceSequence,
    context_leaf_indices,
    generate_sequence,
    leaf_entropies,
    make_rng,
    prior_mass,
    sample_leaf_distributions,
    sample_nonctw_leaf_distributions,
    sample_tree,
    true_model_logloss,
)

EXAMPLE_LEAVES = {(1,): [0.6, 0.3, 0.1], (2,): [0.2, 0.2, 0.6], (0, 0): [0.1, 0.8, 0.1],
        (0, 1): [0.5, 0.25, 0.25], (0, 2): [0.05, 0.15, 0.8]}


def example_tree():
    return ContextTree(3, 2, {s: np.array(p) for s, p in EXAMPLE_LEAVES.items()})


def root_tree(p):
    return ContextTree(len(p), 0, {(): np.array(p, dtype=float)})


def test_alphabet_bounds():
    assert 2 in Alphabet(3) and 3 not in Alphabet(3)
    with pytest.raises(ValueError):
        Alphabet(1)
    with pytest.raises(ValueError):
        Alphabet(257)


def test_prior_validation():
    assert CtwPrior.symmetric(2).alpha == (0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        CtwPrior(2, 0.15, (0.5, 0.0))
    with pytest.raises(ValueError):
        CtwPrior(2, 1.5)


def test_sample_tree_extremes(rng):
    assert sample_tree(CtwPrior.symmetric(3, 1.0), rng).leaves.keys() == {()}
    full = sample_tree(CtwPrior.symmetric(2, 0.0), rng)
    assert full.n_leaves == 9 and all(len(s) == 2 for s in full.leaves)


def test_root_only_frequency_matches_prior():
    rng = make_rng(7)
    prior = CtwPrior.symmetric(2, 0.15, 0.5, 2)
    n = 20000
    hits = sum(sample_tree(prior, rng).n_leaves == 1 for _ in range(n))
    assert abs(hits / n - 0.15) < 0.01


def test_tree_frequencies_match_prior_mass():
    rng = make_rng(8)
    prior = CtwPrior.symmetric(2, 0.3, 0.5, 2)
    n = 20000
    freq = {}
    for _ in range(n):
        t = sample_tree(prior, rng).shape()
        freq[t] = freq.get(t, 0) + 1
    for tree, mass in enumerate_trees(2, 2, 0.3):
        se = math.sqrt(mass * (1 - mass) / n)
        assert abs(freq.get(tree, 0) / n - mass) <= 4 * se + 1e-12


def test_prior_mass_formula():
    # depth-1 binary tree: one internal node, two leaves at depth D
    tree = frozenset({(0,), (1,)})
    assert prior_mass(tree, 0.15, 2, 1) == pytest.approx(0.85)
    assert prior_mass(frozenset({()}), 0.15, 2, 1) == pytest.approx(0.15)


def test_dirichlet_moments():
    rng = make_rng(3)
    prior = CtwPrior.symmetric(0, 1.0)
    draws = np.array([sample_leaf_distributions(sample_tree(prior, rng), prior.alpha, rng).leaves[()][0]
                      for _ in range(20000)])
    assert abs(draws.mean() - 1 / 3) < 0.01
    assert abs(draws.var() - (1 / 3) * (2 / 3) / 2.5) < 0.005


def test_dirichlet_rejects_bad_alpha(rng):
    t = sample_tree(CtwPrior.symmetric(1), rng)
    with pytest.raises(ValueError):
        sample_leaf_distributions(t, (0.5, -1.0, 0.5), rng)


def test_nonctw_leaves_have_exactly_one_zero():
    rng = make_rng(5)
    t = sample_tree(CtwPrior.symmetric(2, 0.0), rng)
    zeros = np.zeros(3)
    for _ in range(1200):
        p = sample_nonctw_leaf_distributions(t, rng).prob_matrix()
        assert np.all((p == 0).sum(axis=1) == 1)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        zeros += (p == 0).sum(axis=0)
    assert np.allclose(zeros / zeros.sum(), 1 / 3, atol=0.02)


def test_nonctw_binary_is_point_mass(rng):
    t = sample_tree(CtwPrior.symmetric(1, 0.0, 0.5, 2), rng)
    p = sample_nonctw_leaf_distributions(t, rng).prob_matrix()
    assert np.all(np.sort(p, axis=1) == [0.0, 1.0])


def test_example_tree_classification():
    t = example_tree()
    a, b, c = 0, 1, 2
    assert t.classify([c, a]) == (a, c)  # leaf (c, a) oldest-first, stored most-recent-first
    assert t.classify([a, b, c]) == (c,)
    assert t.classify([b, a]) == (a, b)


def test_root_tree_classifies_everything():
    t = root_tree([0.2, 0.3, 0.5])
    assert t.classify([2, 1, 0]) == ()


def test_complete_tree_classification():
    t = sample_tree(CtwPrior.symmetric(2, 0.0), make_rng(0))
    assert t.classify([1, 0]) == (0, 1)


def test_malformed_trees_rejected():
    with pytest.raises(ModelInvariantError):
        ContextTree(3, 2, {(0,): None, (1,): None})  # missing child (2,)
    with pytest.raises(ModelInvariantError):
        ContextTree(3, 1, {(): None, (0,): None, (1,): None, (2,): None})  # not proper
    with pytest.raises(ModelInvariantError):
        ContextTree(2, 0, {(): np.array([0.5, 0.6])})


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(0, 4), st.floats(0.05, 0.95))
def test_sampled_trees_are_full_and_complete(seed, A, D, lam):
    rng = make_rng(seed)
    tree = sample_tree(CtwPrior.symmetric(D, lam, 0.5, A), rng)
    for s in tree.leaves:
        assert len(s) <= D
    # every context matches exactly one leaf
    for ctx in rng.integers(0, A, size=(50, D)):
        leaf = tree.classify(list(ctx))
        rf = tuple(int(x) for x in ctx[::-1])
        matches = [s for s in tree.leaves if rf[: len(s)] == s]
        assert matches == [leaf]


def test_generation_deterministic_and_frequencies():
    t = root_tree([0.2, 0.3, 0.5])
    s1 = generate_sequence(t, 100000, [], make_rng(9))
    s2 = generate_sequence(t, 100000, [], make_rng(9))
    assert np.array_equal(s1.body, s2.body)
    assert np.allclose(np.bincount(s1.body, minlength=3) / 1e5, [0.2, 0.3, 0.5], atol=0.01)


def test_point_mass_source_emits_zeros():
    t = ContextTree(2, 1, {(0,): np.array([1.0, 0.0]), (1,): np.array([1.0, 0.0])})
    s = generate_sequence(t, 50, [1], make_rng(0))
    assert not s.body.any()
    assert true_model_logloss(t, s) == 0.0


def test_conditional_frequencies_per_leaf():
    rng = make_rng(11)
    prior = CtwPrior.symmetric(2, 0.15)
    tree = sample_leaf_distributions(sample_tree(prior, rng), prior.alpha, rng)
    seq = generate_sequence(tree, 60000, [0, 0], rng)
    leaves = context_leaf_indices(tree, seq)
    P = tree.prob_matrix()
    for k in range(tree.n_leaves):
        xs = seq.body[leaves == k]
        if len(xs) < 1000:
            continue
        emp = np.bincount(xs, minlength=3) / len(xs)
        sd = np.sqrt(P[k] * (1 - P[k]) / len(xs))
        assert np.all(np.abs(emp - P[k]) <= 5 * sd + 1e-12)


def test_genie_logloss_values():
    assert true_model_logloss(root_tree([1 / 3] * 3), SourceSequence([], [0, 1, 2, 1], 3)) == pytest.approx(math.log(3))
    half = root_tree([0.5, 0.5, 0.0])
    assert true_model_logloss(half, SourceSequence([], [0, 1] * 10, 3)) == pytest.approx(math.log(2))
    assert true_model_logloss(half, SourceSequence([], [0, 2], 3)) == math.inf
    assert leaf_entropies(half)[0] == pytest.approx(math.log(2))


def test_json_round_trip_bit_exact():
    rng = make_rng(4)
    prior = CtwPrior.symmetric(3, 0.3)
    t = sample_leaf_distributions(sample_tree(prior, rng), prior.alpha, rng)
    text = t.to_json(prior.lam)
    back = ContextTree.from_json(text)
    assert back.leaves.keys() == t.leaves.keys()
    for s in t.leaves:
        assert np.array_equal(back.leaves[s], t.leaves[s])
    assert json.loads(back.to_json(prior.lam)) == json.loads(text)


def test_sequence_validation():
    with pytest.raises(ValueError):
        SourceSequence([0], [3], 3)
    with pytest.raises(ValueError):
        generate_sequence(example_tree(), 10, [0], make_rng(0))
