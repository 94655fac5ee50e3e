"""Labeled detector score matrices: ingestion, validation, balanced sampling."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._io import write_text_atomic

CSV_FIXED_COLUMNS = ("sample_id", "benchmark", "subset", "label")
DEFAULT_TAG = "default"


class Label(IntEnum):
    REAL = 0
    FAKE = 1

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, raw) -> "Label":
        """Accept ``0``/``real`` and ``1``/``fake`` (case-insensitive)."""
        if isinstance(raw, bool):
            raise ValueError(f"unknown label token {raw!r}")
        if isinstance(raw, int) and raw in (0, 1):
            return cls(raw)
        text = str(raw).strip().lower()
        if text in ("0", "real"):
            return cls.REAL
        if text in ("1", "fake"):
            return cls.FAKE
        raise ValueError(f"unknown label token {raw!r}")


class DetectorKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class ScoreFormatError(ValueError):
    """A score file or registry document failed validation."""

    def __init__(self, message: str, row: int | None = None, field: str | None = None, value=None):
        self.row = row
        self.field = field
        text = message
        if row is not None:
            text += f" at row {row}"
        extra = []
        if field is not None:
            extra.append(f"field {field!r}")
        if value is not None:
            extra.append(f"value {value!r}")
        if extra:
            text += f" ({', '.join(extra)})"
        super().__init__(text)


@dataclass(frozen=True)
class DetectorMeta:
    name: str
    kind: DetectorKind = DetectorKind.CONTINUOUS

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("detector name must be a non-empty string")
        object.__setattr__(self, "kind", DetectorKind(self.kind))


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    label: Label
    benchmark: str
    subset: str
    scores: tuple[float, ...]


def unify_binary(raw) -> float:
    """Map a hard real/fake decision onto the unit-interval score axis."""
    return 1.0 if Label.parse(raw) is Label.FAKE else 0.0


def _check_registry(registry: Sequence[DetectorMeta]) -> tuple[DetectorMeta, ...]:
    registry = tuple(registry)
    names = [d.name for d in registry]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate detector names in registry: {names}")
    return registry


class ScoreMatrix:
    """N samples by M detector scores, plus per-sample id/label/benchmark/subset.

    Columns are stored as read-only numpy arrays; every derived matrix is a
    fresh object, so instances can be shared freely.
    """

    __slots__ = ("registry", "sample_ids", "benchmarks", "subsets", "labels", "scores")

    def __init__(
        self,
        registry: Sequence[DetectorMeta],
        sample_ids: Sequence[str],
        labels: Sequence[int],
        benchmarks: Sequence[str],
        subsets: Sequence[str],
        scores,
    ):
        registry = _check_registry(registry)
        n = len(sample_ids)
        scores = np.array(scores, dtype=np.float64).reshape(n, len(registry))
        labels = np.array(labels, dtype=np.int8).reshape(n)
        if len(benchmarks) != n or len(subsets) != n:
            raise ValueError("column lengths disagree")
        if n and not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 (real) or 1 (fake)")
        if n and not np.all((scores >= 0.0) & (scores <= 1.0)):
            raise ValueError("scores must lie in [0, 1]")
        for j, det in enumerate(registry):
            if det.kind is DetectorKind.BINARY and n:
                col = scores[:, j]
                if not np.all((col == 0.0) | (col == 1.0)):
                    raise ValueError(f"binary detector {det.name!r} holds non-{{0,1}} scores")
        scores.setflags(write=False)
        labels.setflags(write=False)
        setter = object.__setattr__
        setter(self, "registry", registry)
        setter(self, "sample_ids", tuple(sample_ids))
        setter(self, "benchmarks", tuple(benchmarks))
        setter(self, "subsets", tuple(subsets))
        setter(self, "labels", labels)
        setter(self, "scores", scores)

    def __setattr__(self, name, value):
        raise AttributeError("ScoreMatrix is immutable")

    @classmethod
    def from_records(cls, registry: Sequence[DetectorMeta], records: Iterable[SampleRecord]) -> "ScoreMatrix":
        records = list(records)
        m = len(registry)
        for i, r in enumerate(records, start=1):
            if len(r.scores) != m:
                raise ScoreFormatError(f"expected {m} scores, got {len(r.scores)}", row=i, field="scores")
        return cls(
            registry,
            [r.sample_id for r in records],
            [int(r.label) for r in records],
            [r.benchmark for r in records],
            [r.subset for r in records],
            np.array([r.scores for r in records], dtype=np.float64).reshape(len(records), m),
        )

    def __len__(self) -> int:
        return len(self.sample_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.registry == other.registry
            and self.sample_ids == other.sample_ids
            and self.benchmarks == other.benchmarks
            and self.subsets == other.subsets
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.scores, other.scores)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"ScoreMatrix(N={len(self)}, detectors={list(self.detector_names)})"

    @property
    def detector_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.registry)

    @property
    def n_detectors(self) -> int:
        return len(self.registry)

    @property
    def records(self) -> list[SampleRecord]:
        return [
            SampleRecord(
                self.sample_ids[i],
                Label(int(self.labels[i])),
                self.benchmarks[i],
                self.subsets[i],
                tuple(float(v) for v in self.scores[i]),
            )
            for i in range(len(self))
        ]

    def take(self, indices) -> "ScoreMatrix":
        idx = np.asarray(indices, dtype=np.intp).reshape(-1)
        return ScoreMatrix(
            self.registry,
            [self.sample_ids[i] for i in idx],
            self.labels[idx],
            [self.benchmarks[i] for i in idx],
            [self.subsets[i] for i in idx],
            self.scores[idx],
        )

    def with_scores(self, scores) -> "ScoreMatrix":
        """Same samples and registry, new score values."""
        return ScoreMatrix(self.registry, self.sample_ids, self.labels, self.benchmarks, self.subsets, scores)

    def benchmark_tags(self) -> list[str]:
        return list(dict.fromkeys(self.benchmarks))

    def select_benchmark(self, tag: str) -> "ScoreMatrix":
        return self.take([i for i, b in enumerate(self.benchmarks) if b == tag])


def concat(matrices: Sequence[ScoreMatrix]) -> ScoreMatrix:
    if not matrices:
        raise ValueError("nothing to concatenate")
    registry = matrices[0].registry
    for m in matrices[1:]:
        if m.registry != registry:
            raise ValueError("cannot concatenate matrices with different registries")
    return ScoreMatrix(
        registry,
        [s for m in matrices for s in m.sample_ids],
        np.concatenate([m.labels for m in matrices]),
        [b for m in matrices for b in m.benchmarks],
        [s for m in matrices for s in m.subsets],
        np.concatenate([m.scores for m in matrices]),
    )


# --- registry sidecar -------------------------------------------------------


def load_registry(path) -> list[DetectorMeta]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScoreFormatError(f"registry is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("detectors"), list):
        raise ScoreFormatError("registry must be an object with a 'detectors' list", field="detectors")
    out = []
    for i, entry in enumerate(doc["detectors"]):
        try:
            out.append(DetectorMeta(entry["name"], entry.get("kind", "continuous")))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ScoreFormatError(f"bad registry entry: {exc}", field=f"detectors[{i}]") from None
    return list(_check_registry(out))


def registry_document(registry: Sequence[DetectorMeta]) -> dict:
    return {"detectors": [{"name": d.name, "kind": d.kind.value} for d in registry]}


def _resolve_registry(names: Sequence[str], registry: Sequence[DetectorMeta] | None) -> list[DetectorMeta]:
    if len(set(names)) != len(names) or any(not n for n in names):
        raise ScoreFormatError(f"detector names must be unique and non-empty: {list(names)}", row=0)
    if registry is None:
        return [DetectorMeta(n) for n in names]
    by_name = {d.name: d for d in registry}
    missing = [n for n in names if n not in by_name]
    extra = [d.name for d in registry if d.name not in set(names)]
    if missing or extra:
        raise ScoreFormatError(f"registry does not match file detectors (missing {missing}, unused {extra})")
    # file order wins
    return [by_name[n] for n in names]


def _parse_score(raw, det: DetectorMeta, row: int) -> float:
    if det.kind is DetectorKind.BINARY and isinstance(raw, str) and raw.strip().lower() in ("real", "fake"):
        return unify_binary(raw)
    if isinstance(raw, bool):
        raise ScoreFormatError("non-numeric score", row=row, field=det.name, value=raw)
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ScoreFormatError("non-numeric score", row=row, field=det.name, value=raw) from None
    if not 0.0 <= value <= 1.0:
        raise ScoreFormatError("score out of range", row=row, field=det.name, value=raw)
    if det.kind is DetectorKind.BINARY and value not in (0.0, 1.0):
        raise ScoreFormatError(f"binary detector {det.name!r} has a non-binary score", row=row, field=det.name, value=raw)
    return value


def _parse_label(raw, row: int) -> Label:
    try:
        return Label.parse(raw)
    except ValueError:
        raise ScoreFormatError("unknown label token", row=row, field="label", value=raw) from None


def _read_csv(text: str, registry) -> ScoreMatrix:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ScoreFormatError("empty file", row=0) from None
    header = [h.strip() for h in header]
    if tuple(header[:4]) != CSV_FIXED_COLUMNS:
        raise ScoreFormatError(f"header must start with {','.join(CSV_FIXED_COLUMNS)}", row=0)
    dets = _resolve_registry(header[4:], registry)
    records = []
    for row_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ScoreFormatError(f"expected {len(header)} fields, got {len(row)}", row=row_no)
        sid, bench, subset, label = (c.strip() for c in row[:4])
        if not sid:
            raise ScoreFormatError("empty sample_id", row=row_no, field="sample_id")
        scores = tuple(_parse_score(raw.strip(), d, row_no) for raw, d in zip(row[4:], dets))
        records.append(SampleRecord(sid, _parse_label(label, row_no), bench or DEFAULT_TAG, subset or DEFAULT_TAG, scores))
    return ScoreMatrix.from_records(dets, records)


def _read_jsonl(text: str, registry) -> ScoreMatrix:
    dets = None
    records = []
    row_no = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        row_no += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScoreFormatError(f"invalid JSON ({exc.msg})", row=row_no) from None
        if not isinstance(obj, dict):
            raise ScoreFormatError("expected a JSON object", row=row_no)
        for key in ("sample_id", "label", "scores"):
            if key not in obj:
                raise ScoreFormatError("missing key", row=row_no, field=key)
        scores = obj["scores"]
        if not isinstance(scores, dict):
            raise ScoreFormatError("scores must map detector name to value", row=row_no, field="scores")
        if dets is None:
            dets = _resolve_registry(list(scores), registry)
        if set(scores) != {d.name for d in dets}:
            raise ScoreFormatError(
                f"expected detectors {[d.name for d in dets]}, got {list(scores)}", row=row_no, field="scores"
            )
        values = tuple(_parse_score(scores[d.name], d, row_no) for d in dets)
        records.append(
            SampleRecord(
                str(obj["sample_id"]),
                _parse_label(obj["label"], row_no),
                str(obj.get("benchmark", DEFAULT_TAG)),
                str(obj.get("subset", DEFAULT_TAG)),
                values,
            )
        )
    if dets is None:
        dets = list(registry) if registry is not None else []
    return ScoreMatrix.from_records(dets, records)


def infer_format(path) -> str:
    return "jsonl" if str(path).lower().endswith((".jsonl", ".ndjson")) else "csv"


def load_scores(path, format: str | None = None, registry: Sequence[DetectorMeta] | str | Path | None = None) -> ScoreMatrix:
    """Read and validate a score file.

    ``registry`` may be a list of ``DetectorMeta`` or a path to the JSON
    sidecar; without one every detector is continuous.
    """
    fmt = format or infer_format(path)
    if isinstance(registry, (str, Path)):
        registry = load_registry(registry)
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "csv":
        return _read_csv(text, registry)
    if fmt == "jsonl":
        return _read_jsonl(text, registry)
    raise ValueError(f"unknown score format {fmt!r}")


def _fmt(value: float) -> str:
    return repr(float(value))


def dumps_scores(matrix: ScoreMatrix, format: str = "csv") -> str:
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(CSV_FIXED_COLUMNS) + list(matrix.detector_names))
        for i in range(len(matrix)):
            writer.writerow(
                [matrix.sample_ids[i], matrix.benchmarks[i], matrix.subsets[i], str(int(matrix.labels[i]))]
                + [_fmt(v) for v in matrix.scores[i]]
            )
        return buf.getvalue()
    if format == "jsonl":
        lines = []
        for r in matrix.records:
            lines.append(
                json.dumps(
                    {
                        "sample_id": r.sample_id,
                        "benchmark": r.benchmark,
                        "subset": r.subset,
                        "label": r.label.token,
                        "scores": dict(zip(matrix.detector_names, r.scores)),
                    }
                )
            )
        return "".join(line + "\n" for line in lines)
    raise ValueError(f"unknown score format {format!r}")


def save_scores(matrix: ScoreMatrix, path, format: str | None = None, registry_path=None) -> None:
    write_text_atomic(path, dumps_scores(matrix, format or infer_format(path)))
    if registry_path is not None:
        write_text_atomic(registry_path, json.dumps(registry_document(matrix.registry), indent=2) + "\n")


def sample_balanced(matrix: ScoreMatrix, per_class_per_subset: int, seed: int) -> ScoreMatrix:
    """Draw ``per_class_per_subset`` real and fake records from every subset.

    Draws are uniform without replacement; the selected records keep their
    original relative order.
    """
    if per_class_per_subset < 0:
        raise ValueError("per_class_per_subset must be non-negative")
    rng = np.random.default_rng(seed)
    strata: dict[tuple[str, int], list[int]] = {}
    for i, (subset, label) in enumerate(zip(matrix.subsets, matrix.labels)):
        strata.setdefault((subset, int(label)), []).append(i)
    chosen: list[int] = []
    for subset in sorted(set(matrix.subsets)):
        for label in (Label.REAL, Label.FAKE):
            pool = strata.get((subset, int(label)), [])
            if len(pool) < per_class_per_subset:
                raise ValueError(
                    f"subset {subset!r} has {len(pool)} {label.token} records, "
                    f"need {per_class_per_subset}"
                )
            picks = rng.choice(len(pool), size=per_class_per_subset, replace=False)
            chosen.extend(pool[k] for k in picks)
    return matrix.take(sorted(chosen))
