"""Versioned JSON documents for fuzzy trees."""

from __future__ import annotations

import json
import math
from pathlib import Path

from ._io import write_text_atomic
from .scores import Label
from .tree import FuzzyTree, Hyperparams, Internal, Leaf, NodeConfig, Operator, SplitLabeling, leaf_label

FORMAT_VERSION = 1


class TreeFormatError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _node_document(node, names) -> dict:
    if isinstance(node, Leaf):
        return {"kind": "leaf", "label": node.label.token, "train_counts": {"real": node.n_real, "fake": node.n_fake}}
    cfg = node.config
    return {
        "kind": "internal",
        "detectors": [names[i] for i in cfg.detectors],
        "operator": cfg.operator.value,
        "threshold": cfg.threshold,
        "gain": node.gain,
        "left": _node_document(node.left, names),
        "right": _node_document(node.right, names),
    }


def tree_to_document(tree: FuzzyTree) -> dict:
    hp = tree.hyperparams
    return {
        "version": FORMAT_VERSION,
        "detectors": list(tree.detectors),
        "hyperparams": {
            "max_split_models": hp.max_split_models,
            "min_samples": hp.min_samples,
            "max_depth": hp.max_depth,
            "thr_grid_size": hp.thr_grid_size,
            "split_labeling": hp.split_labeling.value,
        },
        "root": _node_document(tree.root, tree.detectors),
    }


def dumps_tree(tree: FuzzyTree) -> str:
    return json.dumps(tree_to_document(tree), indent=2) + "\n"


def save_tree(tree: FuzzyTree, path) -> None:
    write_text_atomic(path, dumps_tree(tree))


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise TreeFormatError(where, f"expected a finite number, got {value!r}")
    return float(value)


def _count(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise TreeFormatError(where, f"expected a non-negative integer, got {value!r}")
    return value


def _parse_node(doc, where: str, index_of: dict, depth: int, max_depth: int):
    if not isinstance(doc, dict):
        raise TreeFormatError(where, "node must be an object")
    kind = doc.get("kind")
    if kind == "leaf":
        counts = doc.get("train_counts")
        if not isinstance(counts, dict):
            raise TreeFormatError(f"{where}.train_counts", "missing or not an object")
        n_real = _count(counts.get("real"), f"{where}.train_counts.real")
        n_fake = _count(counts.get("fake"), f"{where}.train_counts.fake")
        try:
            label = Label.parse(doc.get("label"))
        except ValueError:
            raise TreeFormatError(f"{where}.label", f"unknown label {doc.get('label')!r}") from None
        if label is not leaf_label(n_real, n_fake):
            raise TreeFormatError(f"{where}.label", "label disagrees with the majority of train_counts (ties are fake)")
        return Leaf(label, n_real, n_fake)
    if kind != "internal":
        raise TreeFormatError(f"{where}.kind", f"expected 'internal' or 'leaf', got {kind!r}")
    if depth >= max_depth:
        raise TreeFormatError(where, f"tree deeper than max_depth={max_depth}")
    names = doc.get("detectors")
    if not isinstance(names, list) or not names:
        raise TreeFormatError(f"{where}.detectors", "expected a non-empty list of detector names")
    unknown = [n for n in names if n not in index_of]
    if unknown:
        raise TreeFormatError(f"{where}.detectors", f"unknown detectors {unknown}")
    if len(set(names)) != len(names):
        raise TreeFormatError(f"{where}.detectors", "duplicate detector names")
    try:
        op = Operator(doc.get("operator"))
    except ValueError:
        raise TreeFormatError(f"{where}.operator", f"unknown operator {doc.get('operator')!r}") from None
    threshold = _number(doc.get("threshold"), f"{where}.threshold")
    if not 0.0 < threshold < 1.0:
        raise TreeFormatError(f"{where}.threshold", "must lie strictly inside (0, 1)")
    gain = _number(doc.get("gain"), f"{where}.gain")
    if gain <= 0:
        raise TreeFormatError(f"{where}.gain", "must be positive")
    config = NodeConfig(tuple(sorted(index_of[n] for n in names)), op, threshold)
    return Internal(
        config,
        gain,
        _parse_node(doc.get("left"), f"{where}.left", index_of, depth + 1, max_depth),
        _parse_node(doc.get("right"), f"{where}.right", index_of, depth + 1, max_depth),
    )


def tree_from_document(doc) -> FuzzyTree:
    if not isinstance(doc, dict):
        raise TreeFormatError("$", "document must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise TreeFormatError("version", f"unsupported version {doc.get('version')!r}, expected {FORMAT_VERSION}")
    names = doc.get("detectors")
    if not isinstance(names, list) or not all(isinstance(n, str) and n for n in names):
        raise TreeFormatError("detectors", "expected a list of detector names")
    if len(set(names)) != len(names):
        raise TreeFormatError("detectors", "duplicate detector names")
    raw_hp = doc.get("hyperparams", {})
    if not isinstance(raw_hp, dict):
        raise TreeFormatError("hyperparams", "expected an object")
    try:
        hp = Hyperparams(
            max_split_models=_count(raw_hp.get("max_split_models", 3), "hyperparams.max_split_models"),
            min_samples=_count(raw_hp.get("min_samples", 0), "hyperparams.min_samples"),
            max_depth=_count(raw_hp.get("max_depth", 4), "hyperparams.max_depth"),
            thr_grid_size=_count(raw_hp.get("thr_grid_size", 10), "hyperparams.thr_grid_size"),
            split_labeling=SplitLabeling(raw_hp.get("split_labeling", "majority")),
        )
    except ValueError as exc:
        if isinstance(exc, TreeFormatError):
            raise
        raise TreeFormatError("hyperparams", str(exc)) from None
    index_of = {n: i for i, n in enumerate(names)}
    root = _parse_node(doc.get("root"), "root", index_of, 0, hp.max_depth)
    return FuzzyTree(root, tuple(names), hp)


def loads_tree(text: str) -> FuzzyTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeFormatError("$", f"invalid JSON: {exc}") from None
    return tree_from_document(doc)


def load_tree(path) -> FuzzyTree:
    return loads_tree(Path(path).read_text(encoding="utf-8"))
