"""Gradebook datasets: ingestion, normalization, splitting, statistics, fixtures.

A dataset is a collection of per-student learning paths, each path an ordered
sequence of graded exercise interactions with grades normalized to [0, 100].
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .seeding import derive_rng

log = logging.getLogger(__name__)

PROVENANCE_TAGS = ("real", "gen1", "gen2", "gen3", "fixture", "mixed")

# Exercise pool width per skill used when synthesizing fixture data.
_FIXTURE_EXERCISES_PER_SKILL = 25


class SchemaError(ValueError):
    """A required column is missing from the input schema."""


class EmptyDatasetError(ValueError):
    """The input stream produced no valid interactions."""


@dataclass(frozen=True)
class RowIssue:
    """A rejected input row: 1-based data row number plus the reason."""

    row_number: int
    reason: str


@dataclass(frozen=True)
class Interaction:
    """One student-exercise event with raw and normalized grade."""

    student_id: str
    exercise_id: str
    skill_id: str | None
    step_index: int
    raw_grade: float
    max_grade: float
    grade: float


class PathStep(NamedTuple):
    exercise_id: str
    skill_id: str | None
    grade: float


@dataclass(frozen=True)
class LearningPath:
    """The chronologically ordered grade sequence of one student."""

    student_id: str
    steps: tuple[PathStep, ...]

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ValueError(f"learning path for {self.student_id!r} is empty")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def grades(self) -> np.ndarray:
        return np.array([s.grade for s in self.steps], dtype=np.float64)


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of learning paths plus dense id indexes."""

    paths: tuple[LearningPath, ...]
    exercise_index: dict
    skill_index: dict
    provenance: str

    @classmethod
    def from_paths(cls, paths: Sequence[LearningPath], provenance: str) -> "Dataset":
        if provenance not in PROVENANCE_TAGS:
            raise ValueError(f"unknown provenance tag {provenance!r}")
        seen = set()
        for p in paths:
            if p.student_id in seen:
                raise ValueError(f"duplicate student id {p.student_id!r}")
            seen.add(p.student_id)
        exercises = sorted({s.exercise_id for p in paths for s in p.steps})
        skills = sorted(
            {s.skill_id for p in paths for s in p.steps if s.skill_id is not None}
        )
        return cls(
            paths=tuple(paths),
            exercise_index={e: i for i, e in enumerate(exercises)},
            skill_index={s: i for i, s in enumerate(skills)},
            provenance=provenance,
        )

    @property
    def n_students(self) -> int:
        return len(self.paths)

    @property
    def n_interactions(self) -> int:
        return sum(len(p) for p in self.paths)

    def student_ids(self) -> set:
        return {p.student_id for p in self.paths}

    def all_grades(self) -> np.ndarray:
        if not self.paths:
            return np.empty(0, dtype=np.float64)
        return np.concatenate([p.grades for p in self.paths])

    def fingerprint(self) -> str:
        """Content hash over student ids, steps and grades (order-insensitive)."""
        h = hashlib.sha256()
        for p in sorted(self.paths, key=lambda q: str(q.student_id)):
            h.update(str(p.student_id).encode())
            for s in p.steps:
                h.update(f"|{s.exercise_id}|{s.skill_id}|{s.grade!r}".encode())
            h.update(b";")
        return h.hexdigest()


@dataclass(frozen=True)
class StatsSummary:
    count: int
    mean: float
    median: float
    std: float
    q1: float
    q3: float
    min: float
    max: float

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "median": self.median,
            "std": self.std,
            "q1": self.q1,
            "q3": self.q3,
            "min": self.min,
            "max": self.max,
        }


@dataclass(frozen=True)
class SchemaMap:
    """Column-name mapping from a tabular source to interaction fields.

    ``max_grade`` names a column holding the per-row maximum grade;
    ``max_grade_const`` supplies a constant maximum instead. ``order`` is a
    timestamp or step-index column used to sort each student's rows; ties are
    broken by input row order.
    """

    student: str
    exercise: str
    grade: str
    order: str
    max_grade: str | None = None
    max_grade_const: float | None = None
    skill: str | None = None

    def __post_init__(self):
        if self.max_grade is None and self.max_grade_const is None:
            raise SchemaError("schema needs a max_grade column or constant")
        if self.max_grade_const is not None and self.max_grade_const <= 0:
            raise SchemaError("max_grade_const must be positive")

    def required_columns(self) -> list[str]:
        cols = [self.student, self.exercise, self.grade, self.order]
        if self.max_grade is not None:
            cols.append(self.max_grade)
        if self.skill is not None:
            cols.append(self.skill)
        return cols


# Ready-made mappings for the public gradebook layouts this toolkit targets,
# plus the generic layout produced by write_dataset_csv.
SCHEMA_PRESETS: dict[str, SchemaMap] = {
    "oulad": SchemaMap(
        student="id_student",
        exercise="id_assessment",
        grade="score",
        order="date_submitted",
        max_grade_const=100.0,
    ),
    "slp": SchemaMap(
        student="student_id",
        exercise="question_id",
        grade="score",
        order="submit_time",
        max_grade="full_score",
        skill="concept",
    ),
    "generic": SchemaMap(
        student="student_id",
        exercise="exercise_id",
        grade="raw_grade",
        order="step_index",
        max_grade="max_grade",
        skill="skill_id",
    ),
}


def normalize_grade(raw_grade: float, max_grade: float) -> float:
    """Percentage in [0, 100]; raw values outside [0, max_grade] are clamped."""
    if max_grade <= 0:
        raise ValueError(f"max_grade must be positive, got {max_grade}")
    # Skip the scaling arithmetic when it is the identity, so that already
    # normalized grades survive a write/read round trip bit-for-bit.
    scaled = float(raw_grade) if max_grade == 100.0 else 100.0 * raw_grade / max_grade
    return float(min(max(scaled, 0.0), 100.0))


def ingest_interactions(
    rows: Iterable[Mapping[str, object]],
    schema: SchemaMap,
    row_issues: list[RowIssue] | None = None,
) -> Dataset:
    """Group interaction rows by student and order them into learning paths.

    Rows with a non-numeric grade or a non-positive maximum grade are dropped;
    each drop is appended to ``row_issues`` (when given) with its 1-based data
    row number. Raises SchemaError if a mapped column is absent and
    EmptyDatasetError if no valid row remains.
    """
    per_student: dict[str, list] = {}
    checked_columns = False
    n_rows = 0
    for n_rows, row in enumerate(rows, start=1):
        if not checked_columns:
            for col in schema.required_columns():
                if col not in row:
                    raise SchemaError(f"missing column {col!r} in input")
            checked_columns = True
        issue = _parse_row(row, schema, n_rows)
        if isinstance(issue, RowIssue):
            if row_issues is not None:
                row_issues.append(issue)
            log.debug("dropped row %d: %s", issue.row_number, issue.reason)
            continue
        per_student.setdefault(issue[0], []).append(issue[1:])
    if n_rows == 0:
        raise EmptyDatasetError("input stream is empty")
    if not per_student:
        raise EmptyDatasetError("no valid interaction rows in input")

    paths = []
    for student in sorted(per_student):
        records = per_student[student]
        # Stable sort keeps input order for tied order keys.
        records.sort(key=lambda r: r[0])
        steps = tuple(PathStep(ex, skill, grade) for _, _, ex, skill, grade in records)
        paths.append(LearningPath(student_id=student, steps=steps))
    return Dataset.from_paths(paths, provenance="real")


def _parse_row(row, schema, row_number):
    """Return (student, order_key, input_index, exercise, skill, grade) or RowIssue."""
    try:
        raw = float(str(row[schema.grade]))
    except (TypeError, ValueError):
        return RowIssue(row_number, f"non-numeric grade {row[schema.grade]!r}")
    if schema.max_grade is not None:
        try:
            max_grade = float(str(row[schema.max_grade]))
        except (TypeError, ValueError):
            return RowIssue(
                row_number, f"non-numeric max grade {row[schema.max_grade]!r}"
            )
    else:
        max_grade = float(schema.max_grade_const)
    if max_grade <= 0:
        return RowIssue(row_number, f"non-positive max grade {max_grade}")
    order_raw = row[schema.order]
    try:
        order_key = (0, float(str(order_raw)), "")
    except (TypeError, ValueError):
        order_key = (1, 0.0, str(order_raw))
    student = str(row[schema.student])
    exercise = str(row[schema.exercise])
    skill = None
    if schema.skill is not None:
        val = row.get(schema.skill)
        skill = str(val) if val not in (None, "") else None
    grade = normalize_grade(raw, max_grade)
    return (student, order_key, row_number, exercise, skill, grade)


def read_dataset_csv(
    path: str | Path,
    schema: SchemaMap,
    delimiter: str = ",",
    row_issues: list[RowIssue] | None = None,
) -> Dataset:
    """Ingest a delimited UTF-8 text file with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: no header row")
        missing = [c for c in schema.required_columns() if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r} in header")
        return ingest_interactions(reader, schema, row_issues=row_issues)


def write_dataset_csv(ds: Dataset, path: str | Path, delimiter: str = ",") -> None:
    """Write a dataset in the generic layout (round-trips through read)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(
            [
                "student_id",
                "exercise_id",
                "skill_id",
                "step_index",
                "raw_grade",
                "max_grade",
                "provenance",
            ]
        )
        for p in ds.paths:
            for t, s in enumerate(p.steps):
                writer.writerow(
                    [
                        p.student_id,
                        s.exercise_id,
                        "" if s.skill_id is None else s.skill_id,
                        t,
                        repr(s.grade),
                        "100.0",
                        ds.provenance,
                    ]
                )


def split_dataset(
    ds: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Partition at student granularity: whole paths are held out.

    The test set holds round(test_fraction * n_paths) paths. The partition
    depends only on the student id set, the fraction and the seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0,1), got {test_fraction}")
    if ds.n_students < 2:
        raise ValueError("need at least 2 paths to split")
    ordered = sorted(ds.paths, key=lambda p: str(p.student_id))
    n_test = int(np.floor(test_fraction * len(ordered) + 0.5))
    rng = derive_rng(seed, "split")
    perm = rng.permutation(len(ordered))
    test_idx = set(perm[:n_test].tolist())
    test = [p for i, p in enumerate(ordered) if i in test_idx]
    train = [p for i, p in enumerate(ordered) if i not in test_idx]
    return (
        Dataset.from_paths(train, ds.provenance),
        Dataset.from_paths(test, ds.provenance),
    )


def descriptive_stats(grades: Sequence[float] | np.ndarray) -> StatsSummary:
    """Mean, midpoint median, population std and linearly interpolated quartiles."""
    x = np.asarray(grades, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot summarize an empty grade list")
    q1, q3 = np.percentile(x, [25.0, 75.0], method="linear")
    return StatsSummary(
        count=int(x.size),
        mean=float(np.mean(x)),
        median=float(np.median(x)),
        std=float(np.std(x)),
        q1=float(q1),
        q3=float(q3),
        min=float(np.min(x)),
        max=float(np.max(x)),
    )


@dataclass(frozen=True)
class FixtureConfig:
    """Planted two-state learner process used to build offline test data.

    Each student attempts a random sequence of exercises; per skill the
    student starts in the "unknown" state and flips to "known" with
    probability ``mastery_gain`` after each attempt on that skill. Grades are
    normal around the state's base mean, clamped to [0, 100].
    """

    n_students: int = 500
    path_length_range: tuple[int, int] = (10, 50)
    n_skills: int = 5
    mastery_gain: float = 0.15
    base_known_mean: float = 82.0
    base_unknown_mean: float = 38.0
    observation_noise_std: float = 8.0
    seed: int = 20240

    def __post_init__(self):
        lo, hi = self.path_length_range
        if self.n_students < 1 or self.n_skills < 1:
            raise ValueError("n_students and n_skills must be positive")
        if lo < 1 or hi < lo:
            raise ValueError(f"bad path_length_range {self.path_length_range}")
        if not 0.0 <= self.mastery_gain <= 1.0:
            raise ValueError("mastery_gain must be a probability")
        if self.observation_noise_std < 0:
            raise ValueError("observation_noise_std must be non-negative")


def make_fixture(config: FixtureConfig) -> Dataset:
    """Deterministic synthetic gradebook with learnable mastery structure."""
    rng = derive_rng(config.seed, "fixture")
    lo, hi = config.path_length_range
    paths = []
    for i in range(config.n_students):
        length = int(rng.integers(lo, hi + 1))
        known = np.zeros(config.n_skills, dtype=bool)
        steps = []
        for _ in range(length):
            skill = int(rng.integers(0, config.n_skills))
            exercise = int(rng.integers(0, _FIXTURE_EXERCISES_PER_SKILL))
            mean = config.base_known_mean if known[skill] else config.base_unknown_mean
            grade = rng.normal(mean, config.observation_noise_std)
            grade = float(min(max(grade, 0.0), 100.0))
            steps.append(PathStep(f"ex{skill:02d}_{exercise:02d}", f"sk{skill:02d}", grade))
            if not known[skill] and rng.random() < config.mastery_gain:
                known[skill] = True
        paths.append(LearningPath(student_id=f"stu{i:05d}", steps=tuple(steps)))
    return Dataset.from_paths(paths, provenance="fixture")
