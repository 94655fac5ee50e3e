"""IF/THEN rule extraction from a grown fuzzy tree."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .scores import Label
from .tree import Branch, FuzzyTree, Internal, NodeConfig, Operator, local_prediction


def describe_predicate(config: NodeConfig, names: Sequence[str]) -> str:
    """Render a node's fake-ward predicate as fuzzy logic."""
    dets = [names[i] for i in config.detectors]
    tau = f"{config.threshold:.4g}"
    if len(dets) == 1:
        return f"{dets[0]} suggests that x is fake (score > {tau})"
    if config.operator in (Operator.MAX, Operator.MIN):
        joiner = " OR " if config.operator is Operator.MAX else " AND "
        body = joiner.join(f"{d} suggests that x is fake" for d in dets)
        return f"({body}) at threshold {tau}"
    return f"the {config.operator.value} opinion of {{{', '.join(dets)}}} exceeds {tau}"


def describe_step(config: NodeConfig, branch: Branch, names: Sequence[str]) -> str:
    text = describe_predicate(config, names)
    return text if branch is Branch.RIGHT else f"NOT [{text}]"


@dataclass(frozen=True)
class FuzzyRule:
    conditions: tuple[str, ...]
    conclusion: Label
    path: tuple[tuple[NodeConfig, Branch], ...]

    def matches(self, features: Sequence[float]) -> bool:
        for config, branch in self.path:
            fires = local_prediction(config, features) > config.threshold
            if fires != (branch is Branch.RIGHT):
                return False
        return True

    @property
    def text(self) -> str:
        if not self.conditions:
            return f"x is {self.conclusion.token}"
        return "IF " + " AND ".join(self.conditions) + f" THEN x is {self.conclusion.token}"

    def __str__(self) -> str:
        return self.text


def extract_rules(tree: FuzzyTree) -> list[FuzzyRule]:
    """One rule per leaf, left-most leaf first."""
    rules = []

    def walk(node, path):
        if isinstance(node, Internal):
            walk(node.left, path + ((node.config, Branch.LEFT),))
            walk(node.right, path + ((node.config, Branch.RIGHT),))
            return
        conditions = tuple(describe_step(c, b, tree.detectors) for c, b in path)
        rules.append(FuzzyRule(conditions, node.label, path))

    walk(tree.root, ())
    return rules


def apply_rules(rules: Sequence[FuzzyRule], features: Sequence[float]) -> Label:
    """Label from the single rule whose conditions hold for ``features``."""
    hits = [r for r in rules if r.matches(features)]
    if len(hits) != 1:
        raise ValueError(f"expected exactly one matching rule, found {len(hits)}")
    return hits[0].conclusion


def format_path(path, names: Sequence[str]) -> str:
    """Compact one-line path, e.g. ``max(a,b)>0.4545:R|mean(c)>0.1818:L``."""
    parts = []
    for config, branch in path:
        dets = ",".join(names[i] for i in config.detectors)
        parts.append(f"{config.operator.value}({dets})>{config.threshold!r}:{'R' if branch is Branch.RIGHT else 'L'}")
    return "|".join(parts)
