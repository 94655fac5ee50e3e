"""Accuracy reports across benchmarks and prompt-grid selection."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baselines import LogisticModel, majority_vote_batch, predict_logistic_batch
from .scores import ScoreMatrix
from .tree import FuzzyTree, StructureError, predict_batch


@dataclass
class Predictor:
    """Named batch predictor: ``fn`` maps an (N, M) score block to 0/1 labels.

    ``detectors`` pins the registry the predictor expects; ``None`` accepts any.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    detectors: tuple | None = None

    def __call__(self, matrix: ScoreMatrix) -> np.ndarray:
        if self.detectors is not None and tuple(matrix.detector_names) != tuple(self.detectors):
            raise StructureError(
                f"{self.name}: matrix detectors {list(matrix.detector_names)} != expected {list(self.detectors)}"
            )
        return np.asarray(self.fn(matrix.scores))


def tree_predictor(tree: FuzzyTree, name: str = "fuzzy-tree") -> Predictor:
    return Predictor(name, lambda s: predict_batch(tree, s), tuple(tree.detectors))


def majority_vote_predictor(name: str = "majority-vote") -> Predictor:
    return Predictor(name, majority_vote_batch)


def logistic_predictor(model: LogisticModel, detectors=None, name: str = "logistic") -> Predictor:
    return Predictor(name, lambda s: predict_logistic_batch(model, s), detectors)


def single_detector_predictor(index: int, name: str) -> Predictor:
    """A lone detector thresholded at 0.5."""
    return Predictor(name, lambda s: (s[:, index] > 0.5).astype(np.int8))


@dataclass
class EvalReport:
    per_benchmark: dict  # tag -> (accuracy, sample count)
    overall: float
    avg: float
    std: float
    robustness: float | None = None
    predictor: str = ""

    def to_document(self) -> dict:
        return {
            "predictor": self.predictor,
            "per_benchmark": {k: {"accuracy": a, "n": n} for k, (a, n) in self.per_benchmark.items()},
            "overall": self.overall,
            "avg": self.avg,
            "std": self.std,
            "robustness": self.robustness,
        }


def accuracy(predictor: Predictor, matrix: ScoreMatrix) -> float:
    if len(matrix) == 0:
        raise ValueError("accuracy of an empty matrix")
    return float(np.count_nonzero(predictor(matrix) == matrix.labels)) / len(matrix)


def evaluate(
    predictor: Predictor,
    matrices: Sequence[ScoreMatrix],
    perturbed: Sequence[ScoreMatrix] | None = None,
) -> EvalReport:
    """Per-benchmark accuracy plus the sample-weighted, mean and spread summaries.

    Records are grouped by benchmark tag across all matrices. Std is the
    population standard deviation over benchmarks.
    """
    if not matrices:
        raise ValueError("evaluate needs at least one matrix")
    correct: dict[str, int] = {}
    counts: dict[str, int] = {}
    for matrix in matrices:
        hits = predictor(matrix) == matrix.labels
        for tag, hit in zip(matrix.benchmarks, hits):
            correct[tag] = correct.get(tag, 0) + int(hit)
            counts[tag] = counts.get(tag, 0) + 1
    if not counts:
        raise ValueError("evaluate needs at least one sample")
    per_benchmark = {tag: (correct[tag] / counts[tag], counts[tag]) for tag in counts}
    accs = [a for a, _ in per_benchmark.values()]
    overall = sum(correct.values()) / sum(counts.values())
    # exact rational arithmetic: equal accuracies give std == 0.0 exactly
    avg = statistics.mean(accs)
    std = statistics.pstdev(accs)
    robustness = None
    if perturbed:
        robustness = math.fsum(accuracy(predictor, m) for m in perturbed) / len(perturbed)
    return EvalReport(per_benchmark, overall, avg, std, robustness, predictor.name)


def _pct(value) -> str:
    return "-" if value is None else f"{100 * value:.2f}"


def format_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per predictor, benchmark columns then summaries."""
    tags = list(dict.fromkeys(tag for r in reports for tag in r.per_benchmark))
    header = ["Method"] + tags + ["Overall", "Avg.", "Std.", "Robustness"]
    rows = [header]
    for r in reports:
        cells = [r.predictor or "-"]
        cells += [_pct(r.per_benchmark[t][0]) if t in r.per_benchmark else "-" for t in tags]
        cells += [_pct(r.overall), _pct(r.avg), _pct(r.std), _pct(r.robustness)]
        rows.append(cells)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for k, row in enumerate(rows):
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join([first] + rest))
        if k == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def dumps_reports(reports: Sequence[EvalReport]) -> str:
    return json.dumps({"reports": [r.to_document() for r in reports]}, indent=2) + "\n"


# --- prompt grid -------------------------------------------------------------

N_SYSTEM, N_QUESTION, N_OUTPUT = 6, 7, 4
HEATMAP_COLUMNS = ("system_idx", "question_idx", "output_idx", "accuracy")


@dataclass(frozen=True)
class PromptGridRecord:
    system_idx: int
    question_idx: int
    output_idx: int
    accuracy: float

    def __post_init__(self):
        for name, hi in (("system_idx", N_SYSTEM), ("question_idx", N_QUESTION), ("output_idx", N_OUTPUT)):
            value = getattr(self, name)
            if not 1 <= value <= hi:
                raise ValueError(f"{name} must lie in 1..{hi}, got {value}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {self.accuracy}")

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.system_idx, self.question_idx, self.output_idx)


def _check_unique(grid: Sequence[PromptGridRecord]) -> None:
    seen = set()
    for rec in grid:
        if rec.key in seen:
            raise ValueError(f"duplicate prompt configuration {rec.key}")
        seen.add(rec.key)


def select_prompt(grid: Sequence[PromptGridRecord]) -> PromptGridRecord:
    """Highest accuracy; ties go to the smallest (system, question, output) triple."""
    if not grid:
        raise ValueError("empty prompt grid")
    _check_unique(grid)
    return min(grid, key=lambda r: (-r.accuracy, r.key))


def export_heatmap(grid: Sequence[PromptGridRecord]) -> str:
    _check_unique(grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEATMAP_COLUMNS)
    for rec in sorted(grid, key=lambda r: r.key):
        w.writerow([rec.system_idx, rec.question_idx, rec.output_idx, repr(float(rec.accuracy))])
    return buf.getvalue()


def parse_prompt_grid(text: str) -> list[PromptGridRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEATMAP_COLUMNS:
        raise ValueError(f"prompt grid header must be {','.join(HEATMAP_COLUMNS)}")
    grid = []
    for row_no, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != 4:
            raise ValueError(f"expected 4 fields at row {row_no}, got {len(row)}")
        try:
            grid.append(PromptGridRecord(int(row[0]), int(row[1]), int(row[2]), float(row[3])))
        except ValueError as exc:
            raise ValueError(f"bad prompt grid record at row {row_no}: {exc}") from None
    _check_unique(grid)
    return grid


def load_prompt_grid(path) -> list[PromptGridRecord]:
    return parse_prompt_grid(Path(path).read_text(encoding="utf-8"))

