"""Synthetic detector score benchmarks.

A detector profile gives, per source family, the probability that the
detector lands on the correct side of 0.5. Continuous detectors then draw a
magnitude from Beta(sharpness, 1) pushed toward the chosen pole; binary
detectors emit the hard 0.0/1.0 decision. Each detector draws from its own
stream seeded by ``(seed, detector index)``, so matrices are reproducible
across platforms and independent of how many detectors are simulated.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._io import write_text_atomic
from .report import N_OUTPUT, N_QUESTION, N_SYSTEM, PromptGridRecord
from .scores import DetectorKind, DetectorMeta, Label, ScoreMatrix

log = logging.getLogger(__name__)

CHANNELS = ("blur", "jpeg", "resize")
DEFAULT_DECAY = {DetectorKind.CONTINUOUS: 0.85, DetectorKind.BINARY: 0.97}
DEFAULT_SEVERITIES = 3


def _skill_pair(value) -> tuple[float, float]:
    """(real-image skill, fake-image skill) from a number or a real/fake mapping."""
    if isinstance(value, Mapping):
        return float(value["real"]), float(value["fake"])
    return float(value), float(value)


@dataclass(frozen=True)
class DetectorProfile:
    name: str
    kind: DetectorKind
    per_family_skill: Mapping[str, object]
    sharpness: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectorKind(self.kind))
        if not self.sharpness > 0:
            raise ValueError(f"{self.name}: sharpness must be positive")
        for fam, value in self.per_family_skill.items():
            for p in _skill_pair(value):
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"{self.name}: skill for family {fam!r} outside [0, 1]")

    def skill(self, family: str, label: int) -> float:
        try:
            value = self.per_family_skill[family]
        except KeyError:
            raise ValueError(f"detector {self.name!r} has no skill for family {family!r}") from None
        return _skill_pair(value)[int(label)]

    @property
    def meta(self) -> DetectorMeta:
        return DetectorMeta(self.name, self.kind)

    def to_document(self) -> dict:
        skills = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in self.per_family_skill.items()}
        return {"name": self.name, "kind": self.kind.value, "per_family_skill": skills, "sharpness": self.sharpness}

    @classmethod
    def from_document(cls, doc: dict) -> "DetectorProfile":
        return cls(doc["name"], doc["kind"], dict(doc["per_family_skill"]), float(doc.get("sharpness", 3.0)))


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    families: tuple  # of (family tag, Label, count)
    seed: int = 0

    def __post_init__(self):
        fams = tuple((str(f), Label.parse(c), int(n)) for f, c, n in self.families)
        if any(n <= 0 for _, _, n in fams):
            raise ValueError(f"{self.name}: family counts must be positive")
        object.__setattr__(self, "families", fams)

    def to_document(self) -> dict:
        return {"name": self.name, "seed": self.seed, "families": [[f, c.token, n] for f, c, n in self.families]}

    @classmethod
    def from_document(cls, doc: dict) -> "BenchmarkSpec":
        return cls(doc["name"], tuple(tuple(x) for x in doc["families"]), int(doc.get("seed", 0)))


@dataclass(frozen=True)
class PerturbationSpec:
    channel: str
    severity: int
    skill_decay: Mapping = field(default_factory=lambda: dict(DEFAULT_DECAY))

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown perturbation channel {self.channel!r}")
        if self.severity < 0:
            raise ValueError("severity must be >= 0")
        object.__setattr__(self, "skill_decay", {DetectorKind(k): float(v) for k, v in self.skill_decay.items()})

    def factor(self, kind: DetectorKind) -> float:
        return self.skill_decay.get(DetectorKind(kind), 1.0) ** self.severity


def _draw(
    profiles: Sequence[DetectorProfile],
    families: Sequence[str],
    labels: np.ndarray,
    seed: int,
    skill_factor: Sequence[float] | None = None,
) -> np.ndarray:
    n = len(labels)
    out = np.empty((n, len(profiles)))
    for j, prof in enumerate(profiles):
        rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
        u = rng.random(n)
        magnitude = rng.beta(prof.sharpness, 1.0, n)
        skill = np.array([prof.skill(f, y) for f, y in zip(families, labels)], dtype=np.float64)
        if skill_factor is not None:
            skill = skill * skill_factor[j]
            if np.any(skill < 0.0) or np.any(skill > 1.0):
                warnings.warn(f"decayed skill of {prof.name!r} left [0, 1]; clamping", RuntimeWarning, stacklevel=3)
                skill = np.clip(skill, 0.0, 1.0)
        correct = u < skill
        side = np.where(correct, labels, 1 - labels).astype(np.float64)
        if prof.kind is DetectorKind.BINARY:
            out[:, j] = side
        else:
            out[:, j] = 0.5 + (2.0 * side - 1.0) * 0.5 * magnitude
    return out


def generate(spec: BenchmarkSpec, profiles: Sequence[DetectorProfile]) -> ScoreMatrix:
    if not profiles:
        raise ValueError("need at least one detector profile")
    families, labels = [], []
    for fam, label, count in spec.families:
        for prof in profiles:
            prof.skill(fam, label)  # raises on an uncovered family
        families.extend([fam] * count)
        labels.extend([int(label)] * count)
    labels = np.array(labels, dtype=np.int8)
    scores = _draw(profiles, families, labels, spec.seed)
    ids = [f"{spec.name}-{i:05d}" for i in range(len(labels))]
    return ScoreMatrix([p.meta for p in profiles], ids, labels, [spec.name] * len(labels), families, scores)


def perturb(matrix: ScoreMatrix, profiles: Sequence[DetectorProfile], spec: PerturbationSpec, seed: int) -> ScoreMatrix:
    """Redraw every score with skills scaled by ``decay ** severity``.

    Sample ids, labels, tags and the registry are carried over unchanged; the
    family of each sample is read from its subset tag.
    """
    if [p.meta for p in profiles] != list(matrix.registry):
        raise ValueError("profiles do not match the matrix registry")
    factors = [spec.factor(p.kind) for p in profiles]
    scores = _draw(profiles, matrix.subsets, matrix.labels.astype(np.int8), seed, factors)
    return matrix.with_scores(scores)


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, dtype=np.uint32)[0])


@dataclass
class PerturbedMatrix:
    channel: str
    severity: int
    matrix: ScoreMatrix


def robustness_suite(
    matrix: ScoreMatrix,
    profiles: Sequence[DetectorProfile],
    seed: int,
    severities: int = DEFAULT_SEVERITIES,
    decay: Mapping | None = None,
) -> list[PerturbedMatrix]:
    """Every channel at severities 1..``severities``.

    Each channel redraws from its own seed; severities within a channel share
    it, so higher severity only flips more scores to the wrong side.
    """
    out = []
    for c, channel in enumerate(CHANNELS):
        channel_seed = derive_seed(seed, c + 1)
        for level in range(1, severities + 1):
            spec = PerturbationSpec(channel, level, decay or DEFAULT_DECAY)
            out.append(PerturbedMatrix(channel, level, perturb(matrix, profiles, spec, channel_seed)))
    return out


# --- canned complementary suite ---------------------------------------------

GAN_SUBSETS = tuple(f"gan-{i:02d}" for i in range(1, 7))
DM_SUBSETS = tuple(f"dm-{i:02d}" for i in range(1, 13))
WILD_SUBSETS = tuple(f"wild-{i:02d}" for i in range(1, 8))
DEV_SUBSETS = GAN_SUBSETS + DM_SUBSETS + WILD_SUBSETS  # 25 subsets


def complementary_profiles() -> list[DetectorProfile]:
    """Three artifact detectors and three semantic judges with opposite blind spots.

    Artifact detectors (continuous) are sharp on GAN/diffusion subsets, each
    strongest on its own third of the diffusion subsets, and pass almost every
    in-the-wild fake as real; the third is an older model that barely
    generalises to diffusion. Semantic judges (binary) are moderate on
    GAN/diffusion fakes and strong in the wild; the third is a weak judge
    biased toward answering "real".
    """
    # (gan real, gan fake, dm real, dm fake on own third, dm fake elsewhere, wild real, wild fake)
    artifact = (
        (0.98, 0.97, 0.98, 0.96, 0.85, 0.95, 0.15),
        (0.98, 0.97, 0.98, 0.96, 0.85, 0.95, 0.15),
        (0.90, 0.95, 0.90, 0.60, 0.50, 0.90, 0.10),
    )
    # (gan/dm real, gan/dm fake, wild real, wild fake)
    semantic = (
        (0.90, 0.70, 0.90, 0.92),
        (0.85, 0.60, 0.85, 0.88),
        (0.92, 0.35, 0.92, 0.60),
    )
    profiles = []
    for k, (gan_r, gan_f, dm_r, dm_own, dm_other, wild_r, wild_f) in enumerate(artifact):
        skills = {}
        for fam in GAN_SUBSETS:
            skills[fam] = {"real": gan_r, "fake": gan_f}
        for i, fam in enumerate(DM_SUBSETS):
            skills[fam] = {"real": dm_r, "fake": dm_own if i % 3 == k else dm_other}
        for fam in WILD_SUBSETS:
            skills[fam] = {"real": wild_r, "fake": wild_f}
        profiles.append(DetectorProfile(f"artifact_{k + 1}", DetectorKind.CONTINUOUS, skills, sharpness=3.0))
    for k, (base_r, base_f, wild_r, wild_f) in enumerate(semantic):
        skills = {}
        for fam in GAN_SUBSETS + DM_SUBSETS:
            skills[fam] = {"real": base_r, "fake": base_f}
        for fam in WILD_SUBSETS:
            skills[fam] = {"real": wild_r, "fake": wild_f}
        profiles.append(DetectorProfile(f"semantic_{k + 1}", DetectorKind.BINARY, skills))
    return profiles


def _mix(subsets, real, fake):
    fams = []
    for fam in subsets:
        fams.append((fam, Label.REAL, real))
        fams.append((fam, Label.FAKE, fake))
    return fams


# (name, subsets, real per subset, fake per subset)
BENCHMARK_MIXES = (
    ("genimage-sim", GAN_SUBSETS[:2] + DM_SUBSETS[:6], 100, 100),
    ("wildrf-sim", WILD_SUBSETS[:4], 150, 150),
    ("chameleon-sim", WILD_SUBSETS[3:] + DM_SUBSETS[9:], 120, 80),
    ("aigibench-sim", DEV_SUBSETS, 30, 30),
    ("synthbuster-sim", DM_SUBSETS, 40, 60),
    ("fakebench-sim", GAN_SUBSETS + WILD_SUBSETS[:3] + DM_SUBSETS[::3], 50, 70),
)


@dataclass
class Suite:
    profiles: list
    dev: ScoreMatrix
    benches: list
    dev_spec: BenchmarkSpec
    bench_specs: list


def complementary_suite(seed: int = 0, per_class_per_subset: int = 50) -> Suite:
    """Balanced 25-subset dev matrix plus six benchmarks with different family mixes."""
    profiles = complementary_profiles()
    dev_spec = BenchmarkSpec(
        "aigibench-dev", tuple(_mix(DEV_SUBSETS, per_class_per_subset, per_class_per_subset)), derive_seed(seed, 0)
    )
    bench_specs = [
        BenchmarkSpec(name, tuple(_mix(subsets, real, fake)), derive_seed(seed, b + 1))
        for b, (name, subsets, real, fake) in enumerate(BENCHMARK_MIXES)
    ]
    log.debug("simulating suite seed=%d", seed)
    return Suite(
        profiles,
        generate(dev_spec, profiles),
        [generate(s, profiles) for s in bench_specs],
        dev_spec,
        bench_specs,
    )


def save_profiles(profiles: Sequence[DetectorProfile], path) -> None:
    write_text_atomic(path, json.dumps({"profiles": [p.to_document() for p in profiles]}, indent=2) + "\n")


def load_profiles(path) -> list[DetectorProfile]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [DetectorProfile.from_document(d) for d in doc["profiles"]]


def synthetic_prompt_grid(seed: int, planted: tuple[int, int, int] | None = None, planted_accuracy: float = 0.9):
    """Full 6x7x4 grid of accuracies in [0.55, 0.85]; ``planted`` gets a strict maximum."""
    rng = np.random.default_rng(seed)
    grid = []
    for s in range(1, N_SYSTEM + 1):
        for q in range(1, N_QUESTION + 1):
            for o in range(1, N_OUTPUT + 1):
                acc = planted_accuracy if (s, q, o) == planted else float(rng.uniform(0.55, 0.85))
                grid.append(PromptGridRecord(s, q, o, acc))
    return grid
