"""Fuzzy decision tree over detector scores.

Every internal node holds a fuzzy predicate: a detector subset, an ensemble
operator fusing their scores, and a threshold. Samples whose fused score
exceeds the threshold go right (fake-ward), all others go left (real-ward).
Nodes are grown greedily by exhaustive search over every predicate, scored by
the accuracy gained over predicting the node's majority class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from operator import add
from typing import NamedTuple, Sequence, Union

import numpy as np

from .scores import Label, ScoreMatrix


class StructureError(ValueError):
    """Feature vector or matrix does not fit the tree's detector registry."""


class Operator(str, Enum):
    MEAN = "mean"
    MIN = "min"
    MAX = "max"
    MEDIAN = "median"


# canonical order used for tie-breaking
OPERATORS = (Operator.MEAN, Operator.MIN, Operator.MAX, Operator.MEDIAN)
_OP_RANK = {op: i for i, op in enumerate(OPERATORS)}


class SplitLabeling(str, Enum):
    MAJORITY = "majority"  # each child predicts its own majority class
    FIXED = "fixed"  # left child predicts real, right child predicts fake


class Branch(str, Enum):
    LEFT = "left"
    RIGHT = "right"


def apply_operator(op: Operator, values: Sequence[float]) -> float:
    """Fuse a non-empty list of scores.

    The mean is accumulated left to right so that it matches the column-wise
    accumulation used during training bit for bit.
    """
    op = Operator(op)
    values = [float(v) for v in values]
    if not values:
        raise ValueError("apply_operator needs at least one value")
    if op is Operator.MEAN:
        return reduce(add, values) / len(values)
    if op is Operator.MIN:
        return min(values)
    if op is Operator.MAX:
        return max(values)
    ordered = sorted(values)
    half = len(ordered) // 2
    if len(ordered) % 2:
        return ordered[half]
    return (ordered[half - 1] + ordered[half]) / 2


def _combine(op: Operator, cols: np.ndarray) -> np.ndarray:
    """Column-wise ``apply_operator`` for an (N, k) block of scores."""
    k = cols.shape[1]
    if op is Operator.MEAN:
        acc = cols[:, 0].copy()
        for c in range(1, k):
            acc = acc + cols[:, c]
        return acc / k
    if op is Operator.MIN:
        return cols.min(axis=1)
    if op is Operator.MAX:
        return cols.max(axis=1)
    ordered = np.sort(cols, axis=1)
    half = k // 2
    if k % 2:
        return ordered[:, half]
    return (ordered[:, half - 1] + ordered[:, half]) / 2


def threshold_grid(grid_size: int) -> tuple[float, ...]:
    """``grid_size`` thresholds evenly spaced strictly inside (0, 1)."""
    return tuple(k / (grid_size + 1) for k in range(1, grid_size + 1))


@dataclass(frozen=True)
class NodeConfig:
    detectors: tuple[int, ...]
    operator: Operator
    threshold: float

    def __post_init__(self):
        dets = tuple(int(d) for d in self.detectors)
        object.__setattr__(self, "detectors", dets)
        object.__setattr__(self, "operator", Operator(self.operator))
        object.__setattr__(self, "threshold", float(self.threshold))
        if not dets:
            raise ValueError("a node needs at least one detector")
        if any(b <= a for a, b in zip(dets, dets[1:])) or dets[0] < 0:
            raise ValueError(f"detector indices must be strictly increasing: {dets}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie strictly inside (0, 1), got {self.threshold}")

    def canonical_key(self):
        return (len(self.detectors), self.detectors, _OP_RANK[self.operator], self.threshold)


@dataclass(frozen=True)
class Hyperparams:
    max_split_models: int = 3
    min_samples: int = 0
    max_depth: int = 4
    thr_grid_size: int = 10
    split_labeling: SplitLabeling = SplitLabeling.MAJORITY

    def __post_init__(self):
        object.__setattr__(self, "split_labeling", SplitLabeling(self.split_labeling))
        if self.max_split_models < 1:
            raise ValueError("max_split_models must be >= 1")
        if self.min_samples < 0:
            raise ValueError("min_samples must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.thr_grid_size < 2:
            raise ValueError("thr_grid_size must be >= 2")


@dataclass(frozen=True)
class Leaf:
    label: Label
    n_real: int
    n_fake: int

    @property
    def train_counts(self) -> tuple[int, int]:
        return (self.n_real, self.n_fake)


@dataclass(frozen=True)
class Internal:
    config: NodeConfig
    gain: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class FuzzyTree:
    root: TreeNode
    detectors: tuple[str, ...]
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def nodes(self):
        """Yield ``(path, node)`` pairs in pre-order; path is a tuple of branches."""
        stack = [((), self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            if isinstance(node, Internal):
                stack.append((path + (Branch.RIGHT,), node.right))
                stack.append((path + (Branch.LEFT,), node.left))

    def n_nodes(self) -> int:
        return sum(1 for _ in self.nodes())

    def n_leaves(self) -> int:
        return sum(1 for _, n in self.nodes() if isinstance(n, Leaf))


def leaf_label(n_real: int, n_fake: int) -> Label:
    """Majority class; ties go to fake."""
    return Label.FAKE if n_fake >= n_real else Label.REAL


def local_prediction(config: NodeConfig, features: Sequence[float]) -> float:
    if config.detectors[-1] >= len(features):
        raise StructureError(
            f"node uses detector index {config.detectors[-1]} but the vector has {len(features)} scores"
        )
    return apply_operator(config.operator, [features[i] for i in config.detectors])


def majority_accuracy(labels: Sequence[int]) -> float:
    labels = list(labels)
    if not labels:
        raise ValueError("majority_accuracy of an empty node")
    n_fake = sum(1 for y in labels if int(y) == Label.FAKE)
    return max(n_fake, len(labels) - n_fake) / len(labels)


def split_gain(
    n_real_left: int,
    n_fake_left: int,
    n_real_right: int,
    n_fake_right: int,
    labeling: SplitLabeling = SplitLabeling.MAJORITY,
) -> float:
    n = n_real_left + n_fake_left + n_real_right + n_fake_right
    if SplitLabeling(labeling) is SplitLabeling.MAJORITY:
        correct = max(n_real_left, n_fake_left) + max(n_real_right, n_fake_right)
    else:
        correct = n_real_left + n_fake_right
    baseline = max(n_real_left + n_real_right, n_fake_left + n_fake_right)
    return correct / n - baseline / n


class SplitEvaluation(NamedTuple):
    gain: float
    left: np.ndarray
    right: np.ndarray


def evaluate_split(
    config: NodeConfig,
    scores: np.ndarray,
    labels: np.ndarray,
    labeling: SplitLabeling = SplitLabeling.MAJORITY,
) -> SplitEvaluation:
    """Gain of one predicate on a node; children are returned as row indices."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("cannot evaluate a split on an empty node")
    if config.detectors[-1] >= scores.shape[1]:
        raise StructureError("node config references a detector outside the matrix")
    fused = _combine(config.operator, scores[:, list(config.detectors)])
    goes_right = fused > config.threshold
    fake = labels == Label.FAKE
    n_fake_right = int(np.count_nonzero(goes_right & fake))
    n_right = int(np.count_nonzero(goes_right))
    n_fake_left = int(np.count_nonzero(fake)) - n_fake_right
    n_left = len(labels) - n_right
    gain = split_gain(n_left - n_fake_left, n_fake_left, n_right - n_fake_right, n_fake_right, labeling)
    return SplitEvaluation(gain, np.flatnonzero(~goes_right), np.flatnonzero(goes_right))


def candidate_subsets(n_detectors: int, max_split_models: int) -> list[tuple[int, ...]]:
    """All non-empty subsets up to the size limit, smallest first, then lexicographic."""
    return [
        combo
        for k in range(1, min(max_split_models, n_detectors) + 1)
        for combo in itertools.combinations(range(n_detectors), k)
    ]


def count_candidates(n_detectors: int, hp: Hyperparams) -> int:
    return len(candidate_subsets(n_detectors, hp.max_split_models)) * len(OPERATORS) * hp.thr_grid_size


@dataclass(frozen=True)
class Split:
    config: NodeConfig
    gain: float
    left_count: int
    right_count: int


class SearchResult(NamedTuple):
    split: Split | None
    n_candidates: int


def search_splits(scores: np.ndarray, labels: np.ndarray, hp: Hyperparams) -> SearchResult:
    """Exhaustive search over (subset, operator, threshold) for one node.

    Candidates are laid out in canonical order, so the first maximum among
    qualifying candidates is the canonical winner.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        raise ValueError("cannot search splits on an empty node")
    taus = np.array(threshold_grid(hp.thr_grid_size))
    fake = (labels == Label.FAKE)[:, None]
    n_fake = int(np.count_nonzero(fake))
    baseline = max(n_fake, n - n_fake) / n

    combos = [(subset, op) for subset in candidate_subsets(scores.shape[1], hp.max_split_models) for op in OPERATORS]
    n_right = np.empty((len(combos), len(taus)), dtype=np.int64)
    n_fake_right = np.empty_like(n_right)
    for row, (subset, op) in enumerate(combos):
        goes_right = _combine(op, scores[:, list(subset)])[:, None] > taus[None, :]
        n_right[row] = np.count_nonzero(goes_right, axis=0)
        n_fake_right[row] = np.count_nonzero(goes_right & fake, axis=0)

    n_left = n - n_right
    n_fake_left = n_fake - n_fake_right
    n_real_left = n_left - n_fake_left
    n_real_right = n_right - n_fake_right
    if hp.split_labeling is SplitLabeling.MAJORITY:
        correct = np.maximum(n_real_left, n_fake_left) + np.maximum(n_real_right, n_fake_right)
    else:
        correct = n_real_left + n_fake_right
    gains = correct / n - baseline

    qualifies = (gains > 0) & (n_left > hp.min_samples) & (n_right > hp.min_samples)
    n_candidates = gains.size
    if not qualifies.any():
        return SearchResult(None, n_candidates)
    flat = np.where(qualifies, gains, -np.inf).ravel()
    best = int(np.argmax(flat))
    row, col = divmod(best, len(taus))
    subset, op = combos[row]
    config = NodeConfig(subset, op, float(taus[col]))
    split = Split(config, float(flat[best]), int(n_left[row, col]), int(n_right[row, col]))
    return SearchResult(split, n_candidates)


def best_split(scores: np.ndarray, labels: np.ndarray, hp: Hyperparams) -> Split | None:
    return search_splits(scores, labels, hp).split


@dataclass(frozen=True)
class NodeSearch:
    """One best-split search performed while growing a tree."""

    path: tuple[Branch, ...]
    n_samples: int
    n_candidates: int
    split: Split | None


def grow(matrix: ScoreMatrix, hp: Hyperparams = Hyperparams(), trace: list | None = None) -> FuzzyTree:
    """Greedy top-down induction.

    If ``trace`` is a list, a ``NodeSearch`` is appended for every node at
    which a split search ran.
    """
    if len(matrix) == 0:
        raise ValueError("cannot grow a tree on an empty matrix")
    scores = matrix.scores
    labels = matrix.labels

    def build(idx: np.ndarray, depth: int, path: tuple) -> TreeNode:
        node_labels = labels[idx]
        n_fake = int(np.count_nonzero(node_labels == Label.FAKE))
        n_real = len(idx) - n_fake
        if depth < hp.max_depth:
            node_scores = scores[idx]
            result = search_splits(node_scores, node_labels, hp)
            if trace is not None:
                trace.append(NodeSearch(path, len(idx), result.n_candidates, result.split))
            split = result.split
            if split is not None:
                cfg = split.config
                goes_right = _combine(cfg.operator, node_scores[:, list(cfg.detectors)]) > cfg.threshold
                return Internal(
                    cfg,
                    split.gain,
                    build(idx[~goes_right], depth + 1, path + (Branch.LEFT,)),
                    build(idx[goes_right], depth + 1, path + (Branch.RIGHT,)),
                )
        return Leaf(leaf_label(n_real, n_fake), n_real, n_fake)

    root = build(np.arange(len(matrix)), 0, ())
    return FuzzyTree(root, matrix.detector_names, hp)


PathStep = tuple[NodeConfig, Branch]


def predict(tree: FuzzyTree, features: Sequence[float]) -> tuple[Label, list[PathStep]]:
    """Route one score vector to its leaf; returns the label and the branches taken."""
    if len(features) != len(tree.detectors):
        raise StructureError(f"tree expects {len(tree.detectors)} scores, got {len(features)}")
    path: list[PathStep] = []
    node = tree.root
    while isinstance(node, Internal):
        if local_prediction(node.config, features) > node.config.threshold:
            path.append((node.config, Branch.RIGHT))
            node = node.right
        else:
            path.append((node.config, Branch.LEFT))
            node = node.left
    return node.label, path


def check_registry(tree: FuzzyTree, matrix: ScoreMatrix) -> None:
    if tuple(matrix.detector_names) != tuple(tree.detectors):
        raise StructureError(
            f"matrix detectors {list(matrix.detector_names)} do not match tree detectors {list(tree.detectors)}"
        )


def predict_batch(tree: FuzzyTree, scores: np.ndarray) -> np.ndarray:
    """Vectorised ``predict`` over an (N, M) score block; returns int8 labels."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != len(tree.detectors):
        raise StructureError(f"tree expects {len(tree.detectors)} score columns, got shape {scores.shape}")
    out = np.empty(len(scores), dtype=np.int8)
    stack = [(tree.root, np.arange(len(scores)))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = int(node.label)
            continue
        cfg = node.config
        goes_right = _combine(cfg.operator, scores[idx][:, list(cfg.detectors)]) > cfg.threshold
        stack.append((node.left, idx[~goes_right]))
        stack.append((node.right, idx[goes_right]))
    return out


def predict_matrix(tree: FuzzyTree, matrix: ScoreMatrix) -> np.ndarray:
    check_registry(tree, matrix)
    return predict_batch(tree, matrix.scores)
