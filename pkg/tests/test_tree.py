import itertools
from functools import reduce

import numpy as np
import pytest
from conftest import make_matrix
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyfusion.scores import Label
from fuzzyfusion.serialize import dumps_tree
from fuzzyfusion.tree import (
    Branch,
    FuzzyTree,
    Hyperparams,
    Internal,
    Leaf,
    NodeConfig,
    Operator,
    SplitLabeling,
    StructureError,
    apply_operator,
    best_split,
    candidate_subsets,
    count_candidates,
    evaluate_split,
    grow,
    leaf_label,
    local_prediction,
    majority_accuracy,
    predict,
    predict_batch,
    search_splits,
    threshold_grid,
)


@pytest.mark.parametrize(
    "op, values, expected",
    [
        (Operator.MAX, [0.2, 0.9, 0.4], 0.9),
        (Operator.MEAN, [0.0, 1.0], 0.5),
        (Operator.MEDIAN, [0.1, 0.7, 0.3, 0.9], 0.5),
        (Operator.MIN, [0.3], 0.3),
        (Operator.MEDIAN, [0.1, 0.7, 0.3], 0.3),
    ],
)
def test_apply_operator(op, values, expected):
    assert apply_operator(op, values) == pytest.approx(expected, abs=1e-15)


def test_apply_operator_empty():
    with pytest.raises(ValueError):
        apply_operator(Operator.MEAN, [])


unit = st.floats(0.0, 1.0, allow_nan=False)


@given(st.lists(unit, min_size=1, max_size=8))
def test_max_min_are_goedel_connectives(values):
    # Goedel t-conorm / t-norm folded over the list
    assert apply_operator(Operator.MAX, values) == reduce(lambda a, b: a if a >= b else b, values)
    assert apply_operator(Operator.MIN, values) == reduce(lambda a, b: a if a <= b else b, values)


@given(st.lists(unit, min_size=1, max_size=5))
def test_median_matches_numpy(values):
    assert apply_operator(Operator.MEDIAN, values) == pytest.approx(float(np.median(values)), abs=1e-15)


@pytest.mark.parametrize(
    "config, features, expected",
    [
        (NodeConfig((0, 1, 2), Operator.MAX, 0.5), [0.2, 0.8, 0.1], 0.8),
        (NodeConfig((1,), Operator.MEDIAN, 0.5), [0.2, 0.8], 0.8),
        (NodeConfig((1,), Operator.MEAN, 0.5), [0.2, 0.8], 0.8),
        (NodeConfig((0, 1), Operator.MIN, 0.5), [0.4, 0.6], 0.4),
    ],
)
def test_local_prediction(config, features, expected):
    assert local_prediction(config, features) == expected


def test_local_prediction_index_out_of_range():
    with pytest.raises(StructureError):
        local_prediction(NodeConfig((0, 3), Operator.MAX, 0.5), [0.1, 0.2])


def test_node_config_invariants():
    with pytest.raises(ValueError):
        NodeConfig((), Operator.MAX, 0.5)
    with pytest.raises(ValueError):
        NodeConfig((1, 0), Operator.MAX, 0.5)
    with pytest.raises(ValueError):
        NodeConfig((0,), Operator.MAX, 1.0)
    with pytest.raises(ValueError):
        NodeConfig((0,), "sum", 0.5)


def test_hyperparams_defaults_and_bounds():
    hp = Hyperparams()
    assert (hp.max_split_models, hp.min_samples, hp.max_depth, hp.thr_grid_size) == (3, 0, 4, 10)
    for bad in (dict(max_split_models=0), dict(max_depth=0), dict(thr_grid_size=1), dict(min_samples=-1)):
        with pytest.raises(ValueError):
            Hyperparams(**bad)


def test_threshold_grid():
    grid = threshold_grid(10)
    assert len(grid) == 10
    assert grid[0] == 1 / 11 and grid[-1] == 10 / 11
    assert all(0 < t < 1 for t in grid)


@pytest.mark.parametrize("labels, expected", [([1, 1, 1], 1.0), ([0, 1], 0.5), ([0, 0, 1], 2 / 3)])
def test_majority_accuracy(labels, expected):
    assert majority_accuracy(labels) == expected


def test_leaf_tie_is_fake():
    assert leaf_label(3, 3) is Label.FAKE
    assert leaf_label(4, 3) is Label.REAL


def _routing_gain(labels, right_mask):
    """Independent gain for a given routing: best child labelling vs best constant."""
    labels = list(labels)
    n = len(labels)
    best_split = 0
    for left_lab, right_lab in itertools.product((0, 1), repeat=2):
        hits = sum((right_lab if r else left_lab) == y for y, r in zip(labels, right_mask))
        best_split = max(best_split, hits)
    best_const = max(sum(y == c for y in labels) for c in (0, 1))
    return best_split / n - best_const / n


def test_evaluate_split_separable(separable):
    cfg = NodeConfig((0,), Operator.MEAN, 0.5)
    ev = evaluate_split(cfg, separable.scores, separable.labels)
    # every one of the 2^4 routings scored by hand-style enumeration; the
    # threshold routing is {0.1, 0.2 | 0.8, 0.9}
    assert _routing_gain([0, 0, 1, 1], [False, False, True, True]) == 0.5
    assert ev.gain == 0.5
    assert ev.left.tolist() == [0, 1] and ev.right.tolist() == [2, 3]
    assert max(_routing_gain([0, 0, 1, 1], r) for r in itertools.product((False, True), repeat=4)) == 0.5


def test_evaluate_split_one_sided(separable):
    ev = evaluate_split(NodeConfig((0,), Operator.MAX, 0.95), separable.scores, separable.labels)
    assert ev.gain <= 0 and len(ev.right) == 0


def test_evaluate_split_pure_node():
    m = make_matrix([[0.1, 0.9], [0.7, 0.2], [0.5, 0.5]], [1, 1, 1])
    for subset in candidate_subsets(2, 2):
        for op in Operator:
            for tau in threshold_grid(10):
                assert evaluate_split(NodeConfig(subset, op, tau), m.scores, m.labels).gain <= 0


def test_evaluate_split_fixed_labeling():
    # left holds mostly fake, right mostly real: majority labelling profits, fixed labelling does not
    m = make_matrix([0.1, 0.2, 0.3, 0.8, 0.9], [1, 1, 1, 0, 0])
    cfg = NodeConfig((0,), Operator.MAX, 0.5)
    assert evaluate_split(cfg, m.scores, m.labels, SplitLabeling.MAJORITY).gain == pytest.approx(0.4)
    assert evaluate_split(cfg, m.scores, m.labels, SplitLabeling.FIXED).gain == pytest.approx(-0.6)


def test_best_split_separable(separable):
    split = best_split(separable.scores, separable.labels, Hyperparams())
    assert split is not None
    assert split.gain == 0.5
    assert 0.2 <= split.config.threshold < 0.8
    # canonical tie-break: singleton subset, mean operator, smallest threshold
    assert split.config == NodeConfig((0,), Operator.MEAN, 3 / 11)


def test_best_split_pure_and_min_samples(separable):
    pure = make_matrix([0.1, 0.5, 0.9], [0, 0, 0])
    assert best_split(pure.scores, pure.labels, Hyperparams()) is None
    n = len(separable)
    assert best_split(separable.scores, separable.labels, Hyperparams(min_samples=n - 1)) is None
    # m = 1 still allows the 2|2 partition
    assert best_split(separable.scores, separable.labels, Hyperparams(min_samples=1)) is not None


def test_candidate_count():
    assert count_candidates(6, Hyperparams()) == 1640
    assert count_candidates(1, Hyperparams(max_split_models=1, thr_grid_size=2)) == 8
    m = make_matrix(np.random.default_rng(0).random((20, 6)), [0, 1] * 10)
    assert search_splits(m.scores, m.labels, Hyperparams()).n_candidates == 1640


def test_grow_separable(separable):
    tree = grow(separable, Hyperparams(3, 0, 4, 10))
    assert tree.depth() == 1
    assert isinstance(tree.root, Internal)
    assert tree.root.left == Leaf(Label.REAL, 2, 0)
    assert tree.root.right == Leaf(Label.FAKE, 0, 2)
    preds = predict_batch(tree, separable.scores)
    assert preds.tolist() == separable.labels.tolist()


def test_grow_pure_gives_single_leaf():
    m = make_matrix([0.1, 0.9, 0.4], [1, 1, 1])
    tree = grow(m)
    assert tree.root == Leaf(Label.FAKE, 0, 3)
    assert tree.depth() == 0


def test_grow_depth_one_has_single_internal():
    rng = np.random.default_rng(3)
    m = make_matrix(rng.random((60, 3)), rng.integers(0, 2, 60))
    tree = grow(m, Hyperparams(max_depth=1))
    assert tree.depth() <= 1
    assert sum(isinstance(n, Internal) for _, n in tree.nodes()) <= 1


def test_grow_empty():
    with pytest.raises(ValueError):
        grow(make_matrix(np.zeros((0, 1)), []))


def test_grow_trace_counts(separable):
    trace = []
    grow(separable, Hyperparams(), trace=trace)
    # root plus its two (pure) children were searched
    assert [t.path for t in trace] == [(), (Branch.LEFT,), (Branch.RIGHT,)]
    assert all(t.n_candidates == 40 for t in trace)


def test_predict(separable):
    tree = grow(separable)
    label, path = predict(tree, [0.9])
    assert label is Label.FAKE and len(path) == 1 and path[0][1] is Branch.RIGHT
    leaf_tree = FuzzyTree(Leaf(Label.REAL, 5, 2), ("det0",))
    assert predict(leaf_tree, [0.99]) == (Label.REAL, [])
    with pytest.raises(StructureError):
        predict(tree, [0.1, 0.2])


def test_boundary_routes_left():
    cfg = NodeConfig((0,), Operator.MAX, 0.5)
    tree = FuzzyTree(Internal(cfg, 0.1, Leaf(Label.REAL, 1, 0), Leaf(Label.FAKE, 0, 1)), ("a",))
    label, path = predict(tree, [0.5])
    assert label is Label.REAL and path[0][1] is Branch.LEFT
    assert predict_batch(tree, np.array([[0.5]])).tolist() == [0]


@st.composite
def instances(draw, max_n=40, max_m=4):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    # coarse grid of values makes boundary hits and gain ties common
    values = draw(st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 0.9, 1.0, 3 / 11]), min_size=n * m, max_size=n * m))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    hp = Hyperparams(
        max_split_models=draw(st.integers(1, 3)),
        min_samples=draw(st.integers(0, 3)),
        max_depth=draw(st.integers(1, 4)),
        thr_grid_size=draw(st.integers(2, 10)),
        split_labeling=draw(st.sampled_from(list(SplitLabeling))),
    )
    return make_matrix(np.array(values).reshape(n, m), labels), hp


def _check_node(node, matrix, idx, hp, depth):
    labels = matrix.labels[idx]
    n_fake = int(labels.sum())
    if isinstance(node, Leaf):
        assert node.train_counts == (len(idx) - n_fake, n_fake)
        assert node.label is leaf_label(len(idx) - n_fake, n_fake)
        return 0
    ev = evaluate_split(node.config, matrix.scores[idx], labels, hp.split_labeling)
    assert ev.gain == node.gain and node.gain > 0
    assert len(ev.left) > hp.min_samples and len(ev.right) > hp.min_samples
    return 1 + max(
        _check_node(node.left, matrix, idx[ev.left], hp, depth + 1),
        _check_node(node.right, matrix, idx[ev.right], hp, depth + 1),
    )


@settings(max_examples=60, deadline=None)
@given(instances())
def test_grown_tree_invariants(inst):
    matrix, hp = inst
    tree = grow(matrix, hp)
    depth = _check_node(tree.root, matrix, np.arange(len(matrix)), hp, 0)
    assert depth == tree.depth() <= hp.max_depth


@settings(max_examples=40, deadline=None)
@given(instances(), st.randoms(use_true_random=False))
def test_permutation_invariance(inst, rnd):
    matrix, hp = inst
    order = list(range(len(matrix)))
    rnd.shuffle(order)
    assert grow(matrix.take(order), hp) == grow(matrix, hp)


@settings(max_examples=40, deadline=None)
@given(instances())
def test_predict_matches_batch(inst):
    matrix, hp = inst
    tree = grow(matrix, hp)
    singles = [int(predict(tree, list(row))[0]) for row in matrix.scores]
    assert singles == predict_batch(tree, matrix.scores).tolist()


def test_determinism_bytes():
    rng = np.random.default_rng(11)
    m = make_matrix(rng.random((200, 4)), rng.integers(0, 2, 200))
    assert dumps_tree(grow(m)) == dumps_tree(grow(m))
