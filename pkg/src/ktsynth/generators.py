"""Three synthetic-gradebook generators over a real template dataset.

All three copy structural skeletons (length, exercise and skill ids) of
randomly chosen real paths and differ in where grades come from:

* gen1: i.i.d. draws from a fitted whole-sample grade distribution
* gen2: per-step bootstrap from the pool of real grades at the same step
  index, plus Gaussian noise
* gen3: wholesale replication of one real path's grades, plus Gaussian noise

Every synthetic path is generated from its own rng stream derived from
(seed, method, path index), so output is independent of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, LearningPath, PathStep
from .distributions import FittedDistribution, sample
from .seeding import derive_rng

GENERATOR_METHODS = ("gen1", "gen2", "gen3")


@dataclass(frozen=True)
class GeneratorConfig:
    method: str
    n_paths: int
    noise_mu: float = 0.0
    noise_sigma: float = 3.0
    clamp: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in GENERATOR_METHODS:
            raise ValueError(f"unknown generator method {self.method!r}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be positive, got {self.n_paths}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")


@dataclass(frozen=True)
class StepPool:
    """Per step index, the grades observed at that step across all students."""

    pools: tuple[np.ndarray, ...]

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "StepPool":
        if ds.n_students == 0:
            raise ValueError("cannot build step pools from an empty dataset")
        max_len = max(len(p) for p in ds.paths)
        buckets: list[list[float]] = [[] for _ in range(max_len)]
        for p in ds.paths:
            for t, step in enumerate(p.steps):
                buckets[t].append(step.grade)
        pools = tuple(np.asarray(b, dtype=np.float64) for b in buckets)
        if any(p.size == 0 for p in pools):
            raise AssertionError("internal invariant: empty step pool")
        return cls(pools=pools)

    def __len__(self) -> int:
        return len(self.pools)

    def at(self, t: int) -> np.ndarray:
        return self.pools[t]


def _clamp(grades: np.ndarray, config: GeneratorConfig) -> np.ndarray:
    if config.clamp:
        return np.clip(grades, 0.0, 100.0)
    return grades


def _fresh_student_id(method: str, index: int, taken: set) -> str:
    candidate = f"{method}-{index:06d}"
    while candidate in taken:
        candidate += "x"
    return candidate


def _skeleton_paths(template: Dataset, config: GeneratorConfig):
    """Yield (rng stream, source path, fresh student id) per synthetic path."""
    if template.n_students == 0:
        raise ValueError("template dataset is empty")
    real_paths = template.paths
    taken = template.student_ids()
    for i in range(config.n_paths):
        stream = derive_rng(config.seed, config.method, i)
        source = real_paths[int(stream.integers(0, len(real_paths)))]
        sid = _fresh_student_id(config.method, i, taken)
        taken.add(sid)
        yield stream, source, sid


def generate_gen1(
    fit: FittedDistribution, template: Dataset, config: GeneratorConfig
) -> Dataset:
    """Whole-distribution generator: real skeletons, i.i.d. fitted-draw grades."""
    if config.method != "gen1":
        raise ValueError(f"config.method must be gen1, got {config.method!r}")
    paths = []
    for stream, source, sid in _skeleton_paths(template, config):
        grades = _clamp(sample(fit, len(source), stream), config)
        steps = tuple(
            PathStep(s.exercise_id, s.skill_id, float(g))
            for s, g in zip(source.steps, grades)
        )
        paths.append(LearningPath(student_id=sid, steps=steps))
    return Dataset.from_paths(paths, provenance="gen1")


def generate_gen2(real: Dataset, config: GeneratorConfig) -> Dataset:
    """Step-bootstrap generator: per-step pool resampling plus Gaussian noise."""
    if config.method != "gen2":
        raise ValueError(f"config.method must be gen2, got {config.method!r}")
    pool = StepPool.from_dataset(real)
    sizes = np.array([p.size for p in pool.pools], dtype=np.int64)
    paths = []
    for stream, source, sid in _skeleton_paths(real, config):
        length = len(source)
        picks = stream.integers(0, sizes[:length])
        drawn = np.array(
            [pool.at(t)[picks[t]] for t in range(length)], dtype=np.float64
        )
        noise = stream.normal(config.noise_mu, config.noise_sigma, size=length)
        grades = _clamp(drawn + noise, config)
        steps = tuple(
            PathStep(s.exercise_id, s.skill_id, float(g))
            for s, g in zip(source.steps, grades)
        )
        paths.append(LearningPath(student_id=sid, steps=steps))
    return Dataset.from_paths(paths, provenance="gen2")


def generate_gen3(real: Dataset, config: GeneratorConfig) -> Dataset:
    """Path-replication generator: copy whole real paths plus Gaussian noise."""
    if config.method != "gen3":
        raise ValueError(f"config.method must be gen3, got {config.method!r}")
    paths = []
    for stream, source, sid in _skeleton_paths(real, config):
        noise = stream.normal(config.noise_mu, config.noise_sigma, size=len(source))
        grades = _clamp(source.grades + noise, config)
        steps = tuple(
            PathStep(s.exercise_id, s.skill_id, float(g))
            for s, g in zip(source.steps, grades)
        )
        paths.append(LearningPath(student_id=sid, steps=steps))
    return Dataset.from_paths(paths, provenance="gen3")


def generate_synthetic(
    template: Dataset,
    config: GeneratorConfig,
    fit: FittedDistribution | None = None,
) -> Dataset:
    """Dispatch to the configured generator; gen1 requires a fitted distribution."""
    if config.method == "gen1":
        if fit is None:
            raise ValueError("gen1 requires a fitted grade distribution")
        return generate_gen1(fit, template, config)
    if config.method == "gen2":
        return generate_gen2(template, config)
    return generate_gen3(template, config)


def plan_n_paths(template: Dataset, method: str, seed: int, target_interactions: int) -> int:
    """Smallest n_paths whose skeleton draws cover target_interactions.

    Replays the same per-path skeleton choices the generator will make, so a
    subsequent generate_* call with the returned n_paths yields at least the
    requested number of interactions.
    """
    if template.n_students == 0:
        raise ValueError("template dataset is empty")
    if target_interactions < 1:
        raise ValueError("target_interactions must be positive")
    lengths = np.array([len(p) for p in template.paths], dtype=np.int64)
    total = 0
    n = 0
    while total < target_interactions:
        stream = derive_rng(seed, method, n)
        total += int(lengths[int(stream.integers(0, len(lengths)))])
        n += 1
    return n
