"""Reference ensembles: majority voting and logistic regression."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import write_text_atomic
from .scores import Label, ScoreMatrix


def majority_vote(features: Sequence[float]) -> Label:
    """Binarise each score at 0.5 and take the majority; ties are fake."""
    if len(features) == 0:
        raise ValueError("majority_vote needs at least one score")
    fake_votes = sum(1 for v in features if v > 0.5)
    return Label.FAKE if fake_votes >= len(features) - fake_votes else Label.REAL


def majority_vote_batch(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    fake_votes = np.count_nonzero(scores > 0.5, axis=1)
    return (2 * fake_votes >= scores.shape[1]).astype(np.int8)


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple[float, ...]
    bias: float
    iterations: int = 0
    final_loss: float = float("nan")
    loss_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def to_document(self) -> dict:
        return {"weights": list(self.weights), "bias": self.bias}

    @classmethod
    def from_document(cls, doc: dict) -> "LogisticModel":
        try:
            weights = tuple(float(w) for w in doc["weights"])
            bias = float(doc["bias"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed logistic model document: {exc}") from None
        return cls(weights, bias)

    def save(self, path) -> None:
        write_text_atomic(path, json.dumps(self.to_document(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "LogisticModel":
        return cls.from_document(json.loads(Path(path).read_text(encoding="utf-8")))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def logistic_loss_and_grad(weights, bias, X, y):
    """Mean log-loss of sigmoid(X @ w + b) and its gradient w.r.t. (w, b)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = X @ np.asarray(weights, dtype=np.float64) + bias
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / len(y)
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def train_logistic(
    matrix: ScoreMatrix,
    learning_rate: float = 0.1,
    iterations: int = 2000,
    seed: int = 0,
) -> LogisticModel:
    """Full-batch gradient descent from all-zero parameters.

    ``seed`` is accepted so every trainer shares one call signature; the
    procedure itself has no randomness.
    """
    del seed
    labels = matrix.labels
    if len(matrix) == 0 or np.all(labels == labels[0]):
        raise ValueError("logistic regression needs both classes in the training matrix")
    X = matrix.scores
    w = np.zeros(matrix.n_detectors)
    b = 0.0
    trace = []
    for _ in range(iterations):
        loss, gw, gb = logistic_loss_and_grad(w, b, X, labels)
        trace.append(loss)
        w = w - learning_rate * gw
        b = b - learning_rate * gb
    final_loss = logistic_loss_and_grad(w, b, X, labels)[0]
    trace.append(final_loss)
    return LogisticModel(tuple(float(v) for v in w), float(b), iterations, final_loss, tuple(trace))


def predict_logistic(model: LogisticModel, features: Sequence[float]) -> tuple[float, Label]:
    if len(features) != len(model.weights):
        raise ValueError(f"model expects {len(model.weights)} scores, got {len(features)}")
    z = float(np.dot(model.weights, features)) + model.bias
    prob = float(_sigmoid(z))
    return prob, (Label.FAKE if prob > 0.5 else Label.REAL)


def predict_logistic_batch(model: LogisticModel, scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[1] != len(model.weights):
        raise ValueError(f"model expects {len(model.weights)} score columns, got {scores.shape[1]}")
    prob = _sigmoid(scores @ np.asarray(model.weights) + model.bias)
    return (prob > 0.5).astype(np.int8)
