"""Brute-force reference for the split search.

Deliberately naive and self-contained: predicates are re-evaluated sample by
sample with plain Python loops, so agreement with the vectorised trainer is
evidence that both are right.
"""

from __future__ import annotations

import csv
import io
from bisect import bisect_left
from dataclasses import dataclass, field

from .tree import FuzzyTree, Hyperparams, Internal

OP_NAMES = ("mean", "min", "max", "median")


def _fuse(op: str, vals: list) -> float:
    if op == "mean":
        total = 0.0
        for v in vals:
            total += v
        return total / len(vals)
    if op == "min":
        lo = vals[0]
        for v in vals[1:]:
            if v < lo:
                lo = v
        return lo
    if op == "max":
        hi = vals[0]
        for v in vals[1:]:
            if v > hi:
                hi = v
        return hi
    s = sorted(vals)
    h = len(s) // 2
    return s[h] if len(s) % 2 == 1 else (s[h - 1] + s[h]) / 2


def _subsets(m: int, s: int) -> list:
    out = []
    for mask in range(1, 1 << m):
        members = tuple(i for i in range(m) if mask >> i & 1)
        if len(members) <= s:
            out.append(members)
    out.sort(key=lambda t: (len(t), t))
    return out


@dataclass(frozen=True)
class Candidate:
    detectors: tuple
    operator: str
    threshold: float
    gain: float
    left_count: int
    right_count: int

    def order_key(self):
        return (-self.gain, len(self.detectors), self.detectors, OP_NAMES.index(self.operator), self.threshold)


@dataclass
class CandidateReport:
    candidates: list = field(default_factory=list)

    def __len__(self):
        return len(self.candidates)

    def top_qualifying(self, min_samples: int):
        for c in self.candidates:
            if c.gain > 0 and c.left_count > min_samples and c.right_count > min_samples:
                return c
        return None

    def to_csv(self, names=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subset", "operator", "threshold", "gain", "left_count", "right_count"])
        for c in self.candidates:
            dets = [names[i] for i in c.detectors] if names else [str(i) for i in c.detectors]
            w.writerow(["+".join(dets), c.operator, repr(c.threshold), repr(c.gain), c.left_count, c.right_count])
        return buf.getvalue()


def enumerate_all(rows, labels, hp: Hyperparams, n_detectors: int | None = None) -> CandidateReport:
    """Score every (subset, operator, threshold) candidate on a node.

    ``rows`` is a sequence of score vectors, ``labels`` the matching 0/1 labels.
    """
    rows = [[float(v) for v in r] for r in rows]
    labels = [int(y) for y in labels]
    n = len(rows)
    if n == 0:
        raise ValueError("empty node")
    m = n_detectors if n_detectors is not None else len(rows[0])
    g = hp.thr_grid_size
    taus = [k / (g + 1) for k in range(1, g + 1)]
    fixed = hp.split_labeling.value == "fixed"

    total_fake = 0
    for y in labels:
        total_fake += y
    total_real = n - total_fake
    majority_acc = max(total_real, total_fake) / n

    report = CandidateReport()
    for subset in _subsets(m, hp.max_split_models):
        picked = [[r[i] for i in subset] for r in rows]
        for op in OP_NAMES:
            # bucket b = number of thresholds strictly below the fused score;
            # a sample goes right at threshold k (0-based) iff k < b
            real_hist = [0] * (g + 1)
            fake_hist = [0] * (g + 1)
            for vals, y in zip(picked, labels):
                b = bisect_left(taus, _fuse(op, vals))
                if y == 1:
                    fake_hist[b] += 1
                else:
                    real_hist[b] += 1
            right_real = right_fake = 0
            per_tau = []
            for k in range(g - 1, -1, -1):
                right_real += real_hist[k + 1]
                right_fake += fake_hist[k + 1]
                per_tau.append((k, right_real, right_fake))
            for k, rr, rf in reversed(per_tau):
                lr = total_real - rr
                lf = total_fake - rf
                if fixed:
                    correct = lr + rf
                else:
                    correct = max(lr, lf) + max(rr, rf)
                gain = correct / n - majority_acc
                report.candidates.append(Candidate(subset, op, taus[k], gain, lr + lf, rr + rf))
    report.candidates.sort(key=Candidate.order_key)
    return report


@dataclass
class Certification:
    passed: bool
    checked_nodes: int
    mismatches: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def _path_name(path) -> str:
    return "root" + "".join("." + p for p in path)


def certify_tree(tree: FuzzyTree, matrix, hp: Hyperparams | None = None) -> Certification:
    """Replay training top-down and check every node against the oracle.

    Internal nodes must carry the oracle's top qualifying candidate and its
    exact gain; leaves above the depth limit must have no qualifying candidate,
    and every node's training counts must match.
    """
    if tuple(matrix.detector_names) != tuple(tree.detectors):
        raise ValueError(
            f"matrix detectors {list(matrix.detector_names)} do not match tree detectors {list(tree.detectors)}"
        )
    hp = hp or tree.hyperparams
    m = len(tree.detectors)
    all_rows = [[float(v) for v in row] for row in matrix.scores]
    all_labels = [int(y) for y in matrix.labels]
    mismatches = []
    checked = 0

    def visit(node, members, depth, path):
        nonlocal checked
        checked += 1
        where = _path_name(path)
        rows = [all_rows[i] for i in members]
        labels = [all_labels[i] for i in members]
        n_fake = sum(labels)
        n_real = len(labels) - n_fake
        if not members:
            mismatches.append(f"{where}: node received no training samples")
            return
        top = None
        if depth < hp.max_depth:
            top = enumerate_all(rows, labels, hp, m).top_qualifying(hp.min_samples)
        if not isinstance(node, Internal):
            if (node.n_real, node.n_fake) != (n_real, n_fake):
                mismatches.append(
                    f"{where}: leaf train_counts {(node.n_real, node.n_fake)} != replayed {(n_real, n_fake)}"
                )
            if top is not None:
                mismatches.append(f"{where}: leaf could still split with gain {top.gain!r}")
            return
        cfg = node.config
        stored = (cfg.detectors, cfg.operator.value, cfg.threshold)
        if top is None:
            mismatches.append(f"{where}: internal node but oracle finds no qualifying split")
        elif (top.detectors, top.operator, top.threshold) != stored:
            mismatches.append(
                f"{where}: stored split {stored} != oracle best {(top.detectors, top.operator, top.threshold)}"
            )
        elif top.gain != node.gain:
            mismatches.append(f"{where}: stored gain {node.gain!r} != oracle gain {top.gain!r}")
        if not node.gain > 0:
            mismatches.append(f"{where}: non-positive gain {node.gain!r}")
        left, right = [], []
        for i in members:
            fused = _fuse(cfg.operator.value, [all_rows[i][j] for j in cfg.detectors])
            (right if fused > cfg.threshold else left).append(i)
        for side, part in (("left", left), ("right", right)):
            if len(part) <= hp.min_samples:
                mismatches.append(f"{where}: {side} child holds {len(part)} samples, needs > {hp.min_samples}")
        visit(node.left, left, depth + 1, path + ("left",))
        visit(node.right, right, depth + 1, path + ("right",))

    visit(tree.root, list(range(len(all_rows))), 0, ())
    return Certification(not mismatches, checked, mismatches)
