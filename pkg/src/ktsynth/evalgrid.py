"""Metrics, real/synthetic training-set mixing, and the experiment grid runner.

A grid run performs one student-level test split, pre-generates one synthetic
pool per generator at the largest requested ratio, then trains a knowledge
tracing model per (generator, real ratio, synthetic ratio) cell and evaluates
it on the shared held-out set. Cells with synthetic ratio 0 do not depend on
any generator and are computed once per model under the generator tag "none".
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bkt as bkt_mod
from . import dkt as dkt_mod
from .dataset import Dataset, split_dataset
from .distributions import select_best_fit
from .generators import GeneratorConfig, generate_synthetic, plan_n_paths
from .seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

MODELS = ("dkt", "bkt")
BASELINE_TAG = "none"


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _as_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty pair list")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (prediction, actual) pairs, got shape {arr.shape}")
    return arr


def mae(pairs) -> float:
    """Mean absolute error between predictions and actuals."""
    arr = _as_pairs(pairs)
    return float(np.mean(np.abs(arr[:, 0] - arr[:, 1])))


def accuracy(pairs, threshold: float = 0.5) -> float:
    """Agreement rate after binarizing both sides (strictly above threshold)."""
    arr = _as_pairs(pairs)
    pred = arr[:, 0] > threshold
    act = arr[:, 1] > threshold
    return float(np.mean(pred == act))


def mcc(pairs, threshold: float = 0.5) -> float:
    """Matthews correlation of the binarized pairs; 0 when degenerate."""
    arr = _as_pairs(pairs)
    pred = arr[:, 0] > threshold
    act = arr[:, 1] > threshold
    tp = float(np.sum(pred & act))
    tn = float(np.sum(~pred & ~act))
    fp = float(np.sum(pred & ~act))
    fn = float(np.sum(~pred & act))
    denom_factors = (tp + fp, tp + fn, tn + fp, tn + fn)
    if any(f == 0.0 for f in denom_factors):
        return 0.0
    denom = float(np.sqrt(denom_factors[0] * denom_factors[1] * denom_factors[2] * denom_factors[3]))
    return float((tp * tn - fp * fn) / denom)


# ---------------------------------------------------------------------------
# Mixing
# ---------------------------------------------------------------------------

def _take_paths(paths, target: float, rng) -> list:
    """Greedy whole-path subset: closest interaction total to target."""
    if target <= 0:
        return []
    order = rng.permutation(len(paths))
    taken = []
    acc = 0
    for i in order:
        length = len(paths[int(i)])
        if acc >= target:
            break
        if abs(acc + length - target) <= abs(target - acc):
            taken.append(paths[int(i)])
            acc += length
        else:
            break
    return taken


def mix_training_data(
    real_train: Dataset,
    synth: Dataset | None,
    real_ratio: float,
    synth_ratio: float,
    seed: int,
) -> Dataset:
    """Blend whole real and synthetic paths by interaction budget.

    Both budgets are fractions of real_train's interaction count; paths are
    sampled uniformly without replacement and kept whole, so realized sizes
    land within one path length of the targets. real_ratio 1 with no
    synthetic data returns real_train itself.
    """
    if real_ratio < 0 or synth_ratio < 0:
        raise ValueError("ratios must be non-negative")
    if real_ratio == 0 and synth_ratio == 0:
        raise ValueError("empty training mix: both ratios are zero")
    total_real = real_train.n_interactions
    if synth_ratio > 0:
        if synth is None:
            raise ValueError("synth_ratio > 0 requires a synthetic dataset")
        if synth.n_interactions < synth_ratio * total_real:
            raise ValueError(
                f"synthetic pool too small: {synth.n_interactions} interactions "
                f"< {synth_ratio} x {total_real}"
            )
    if real_ratio == 1.0 and synth_ratio == 0:
        return real_train

    real_sorted = sorted(real_train.paths, key=lambda p: str(p.student_id))
    if real_ratio == 1.0:
        real_part = list(real_sorted)
    else:
        real_part = _take_paths(
            real_sorted, real_ratio * total_real, derive_rng(seed, "mix-real")
        )
    synth_part = []
    if synth_ratio > 0:
        synth_sorted = sorted(synth.paths, key=lambda p: str(p.student_id))
        synth_part = _take_paths(
            synth_sorted, synth_ratio * total_real, derive_rng(seed, "mix-synth")
        )
    if not real_part and not synth_part:
        raise ValueError("empty training mix: ratios round to zero paths")
    if not synth_part:
        provenance = real_train.provenance
    elif not real_part:
        provenance = synth.provenance
    else:
        provenance = "mixed"
    return Dataset.from_paths(real_part + synth_part, provenance)


# ---------------------------------------------------------------------------
# Grid runner
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    real_ratios: tuple[float, ...] = (0.0, 0.5, 1.0)
    synth_ratios: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0)
    generators: tuple[str, ...] = ("gen1", "gen2", "gen3")
    models: tuple[str, ...] = ("dkt",)
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if any(r < 0 for r in self.real_ratios + self.synth_ratios):
            raise ValueError("ratios must be non-negative")
        unknown = set(self.generators) - {"gen1", "gen2", "gen3"}
        if unknown:
            raise ValueError(f"unknown generators {sorted(unknown)}")
        unknown = set(self.models) - set(MODELS)
        if unknown:
            raise ValueError(f"unknown models {sorted(unknown)}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0,1)")


@dataclass(frozen=True)
class GridCellResult:
    generator: str
    model: str
    real_ratio: float
    synth_ratio: float
    mae: float
    acc: float
    mcc: float
    train_interactions: int
    wall_time_s: float
    n_test_pairs: int
    test_hash: str
    error: str | None = None


def expected_cells(spec: GridSpec) -> int:
    """Closed-form result count for a grid configuration."""
    n_baseline = len([r for r in spec.real_ratios if r > 0]) if 0.0 in spec.synth_ratios else 0
    n_synth_ratios = len([s for s in spec.synth_ratios if s > 0])
    per_generator = len(spec.real_ratios) * n_synth_ratios
    return len(spec.models) * (n_baseline + len(spec.generators) * per_generator)


def _cell_list(spec: GridSpec) -> list[tuple[str, str, float, float]]:
    cells = []
    for model in spec.models:
        if 0.0 in spec.synth_ratios:
            for rr in spec.real_ratios:
                if rr > 0:
                    cells.append((BASELINE_TAG, model, float(rr), 0.0))
        for gen in spec.generators:
            for rr in spec.real_ratios:
                for sr in spec.synth_ratios:
                    if sr > 0:
                        cells.append((gen, model, float(rr), float(sr)))
    return cells


def _pairs_hash(pairs: np.ndarray) -> str:
    actuals = np.ascontiguousarray(pairs[:, 1], dtype="<f8")
    return hashlib.sha256(actuals.tobytes()).hexdigest()


def _run_cell(ctx: dict, cell: tuple[str, str, float, float]) -> GridCellResult:
    generator, model, real_ratio, synth_ratio = cell
    t0 = time.perf_counter()
    seed = derive_seed(
        ctx["seed"], "cell", generator, model, f"{real_ratio:g}", f"{synth_ratio:g}"
    )
    try:
        pool = None
        if synth_ratio > 0:
            pool = ctx["pools"][generator]
            if isinstance(pool, str):
                raise RuntimeError(f"synthetic pool unavailable: {pool}")
        mixed = mix_training_data(
            ctx["train"], pool, real_ratio, synth_ratio, seed
        )
        if model == "dkt":
            cfg = replace(ctx["dkt_config"], seed=seed)
            net = dkt_mod.init_model(cfg)
            net, _ = dkt_mod.train(net, mixed, cfg)
            pairs = dkt_mod.predict_dataset(net, ctx["test"])
        else:
            fit = bkt_mod.fit_dataset(
                mixed,
                seed=seed,
                max_iters=ctx["bkt_max_iters"],
                tol=ctx["bkt_tol"],
                restarts=ctx["bkt_restarts"],
            )
            pairs = bkt_mod.predict_dataset(fit, ctx["test"])
        return GridCellResult(
            generator=generator,
            model=model,
            real_ratio=real_ratio,
            synth_ratio=synth_ratio,
            mae=mae(pairs),
            acc=accuracy(pairs),
            mcc=mcc(pairs),
            train_interactions=mixed.n_interactions,
            wall_time_s=time.perf_counter() - t0,
            n_test_pairs=int(pairs.shape[0]),
            test_hash=_pairs_hash(pairs),
        )
    except Exception as exc:  # per-cell failures are recorded, not fatal
        log.warning("grid cell %s failed: %s", cell, exc)
        return GridCellResult(
            generator=generator,
            model=model,
            real_ratio=real_ratio,
            synth_ratio=synth_ratio,
            mae=float("nan"),
            acc=float("nan"),
            mcc=float("nan"),
            train_interactions=0,
            wall_time_s=time.perf_counter() - t0,
            n_test_pairs=0,
            test_hash="",
            error=f"{type(exc).__name__}: {exc}",
        )


def run_grid(
    real: Dataset,
    spec: GridSpec,
    dkt_config: dkt_mod.DktConfig | None = None,
    bkt_max_iters: int = 50,
    bkt_tol: float = 1e-4,
    bkt_restarts: int = 3,
    jobs: int = 1,
) -> list[GridCellResult]:
    """Train and evaluate every grid cell against one shared test split.

    Per-cell randomness derives from (spec.seed, cell coordinates), so results
    are independent of execution order and of the jobs count. Failures inside
    a cell are recorded on the cell and do not stop the run.
    """
    if real.n_students < 2:
        raise ValueError("need at least 2 paths to run a grid")
    if dkt_config is None:
        dkt_config = dkt_mod.DktConfig(
            hidden_size=32, input_buckets=64, learning_rate=5e-3,
            epochs=5, batch_size=64,
        )
    train, test = split_dataset(real, spec.test_fraction, spec.seed)

    max_synth = max(spec.synth_ratios) if spec.synth_ratios else 0.0
    pools: dict[str, Dataset | str] = {}
    if max_synth > 0:
        target = int(np.ceil(max_synth * train.n_interactions))
        gen1_fit = None
        if "gen1" in spec.generators:
            try:
                gen1_fit = select_best_fit(train.all_grades())[0]
            except ValueError as exc:
                gen1_fit = None
                pools["gen1"] = f"distribution fitting failed: {exc}"
        for gen in spec.generators:
            if gen in pools:
                continue
            try:
                gen_seed = derive_seed(spec.seed, "pool", gen)
                n_paths = plan_n_paths(train, gen, gen_seed, target)
                config = GeneratorConfig(method=gen, n_paths=n_paths, seed=gen_seed)
                pools[gen] = generate_synthetic(train, config, fit=gen1_fit)
            except Exception as exc:
                log.warning("pool generation for %s failed: %s", gen, exc)
                pools[gen] = f"{type(exc).__name__}: {exc}"

    ctx = {
        "seed": spec.seed,
        "train": train,
        "test": test,
        "pools": pools,
        "dkt_config": dkt_config,
        "bkt_max_iters": bkt_max_iters,
        "bkt_tol": bkt_tol,
        "bkt_restarts": bkt_restarts,
    }
    cells = _cell_list(spec)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool_exec:
            results = list(pool_exec.map(partial(_run_cell, ctx), cells))
    else:
        results = [_run_cell(ctx, cell) for cell in cells]
    results.sort(key=lambda r: (r.generator, r.model, r.real_ratio, r.synth_ratio))
    return results


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

_RESULT_COLUMNS = (
    "generator", "model", "real_ratio", "synth_ratio", "mae", "acc", "mcc",
    "train_interactions", "n_test_pairs", "test_hash", "error",
)

_METRICS = ("mae", "acc", "mcc")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if np.isnan(value):
            return ""
        return f"{value:.12g}"
    return str(value)


def emit_report(results: Sequence[GridCellResult], out_dir: str | Path) -> list[Path]:
    """Write the flat results table, per-metric pivots, plots and timings.

    results.csv contains only deterministic columns; per-cell wall time goes
    to timings.csv so identical reruns produce byte-identical results files.
    """
    if not results:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted(
        results, key=lambda r: (r.generator, r.model, r.real_ratio, r.synth_ratio)
    )
    written = []

    results_path = out / "results.csv"
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RESULT_COLUMNS)
        for r in ordered:
            writer.writerow([_fmt(getattr(r, c)) for c in _RESULT_COLUMNS])
    written.append(results_path)

    timings_path = out / "timings.csv"
    with open(timings_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generator", "model", "real_ratio", "synth_ratio", "wall_time_s"])
        for r in ordered:
            writer.writerow(
                [r.generator, r.model, _fmt(r.real_ratio), _fmt(r.synth_ratio),
                 f"{r.wall_time_s:.6f}"]
            )
    written.append(timings_path)

    tables_path = out / "tables.md"
    tables_path.write_text(_pivot_tables(ordered), encoding="utf-8")
    written.append(tables_path)

    written.extend(_emit_plots(ordered, out))
    return written


def _cell_lookup(ordered: Sequence[GridCellResult]):
    table = {}
    for r in ordered:
        table[(r.generator, r.model, r.real_ratio, r.synth_ratio)] = r
    return table


def _pivot_tables(ordered: Sequence[GridCellResult]) -> str:
    lookup = _cell_lookup(ordered)
    models = sorted({r.model for r in ordered})
    generators = sorted({r.generator for r in ordered if r.generator != BASELINE_TAG})
    real_ratios = sorted({r.real_ratio for r in ordered})
    synth_ratios = sorted({r.synth_ratio for r in ordered})
    buf = io.StringIO()
    buf.write("# Grid results\n")
    buf.write("\nRows are real-data ratios, columns synthetic-data ratios; the\n")
    buf.write("best value per row is bold. Synthetic ratio 0 is the shared\n")
    buf.write("no-synthetic baseline.\n")
    for model in models:
        for metric in _METRICS:
            for gen in generators or [BASELINE_TAG]:
                buf.write(f"\n## {metric} - {model} - {gen}\n\n")
                buf.write("| real \\ synth | " + " | ".join(f"{s:g}" for s in synth_ratios) + " |\n")
                buf.write("|" + "---|" * (len(synth_ratios) + 1) + "\n")
                for rr in real_ratios:
                    cells = []
                    values = []
                    for sr in synth_ratios:
                        tag = BASELINE_TAG if sr == 0 else gen
                        r = lookup.get((tag, model, rr, sr))
                        v = None if r is None or r.error else getattr(r, metric)
                        if v is not None and np.isnan(v):
                            v = None
                        values.append(v)
                        cells.append(v)
                    present = [v for v in values if v is not None]
                    if present:
                        best = min(present) if metric == "mae" else max(present)
                    else:
                        best = None
                    rendered = []
                    for v in cells:
                        if v is None:
                            rendered.append("")
                        elif v == best:
                            rendered.append(f"**{v:.4f}**")
                        else:
                            rendered.append(f"{v:.4f}")
                    buf.write(f"| {rr:g} | " + " | ".join(rendered) + " |\n")
    return buf.getvalue()


def _emit_plots(ordered: Sequence[GridCellResult], out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "ktsynth"

    lookup = _cell_lookup(ordered)
    models = sorted({r.model for r in ordered})
    generators = sorted({r.generator for r in ordered if r.generator != BASELINE_TAG})
    if not generators:
        generators = [BASELINE_TAG]
    real_ratios = sorted({r.real_ratio for r in ordered})
    synth_ratios = sorted({r.synth_ratio for r in ordered})
    written = []
    for metric in _METRICS:
        n_rows, n_cols = len(models), len(generators)
        fig, axes = plt.subplots(
            n_rows, n_cols, figsize=(4.2 * n_cols, 3.2 * n_rows),
            squeeze=False, sharey="row",
        )
        for i, model in enumerate(models):
            for j, gen in enumerate(generators):
                ax = axes[i][j]
                plotted = False
                for rr in real_ratios:
                    xs, ys = [], []
                    for sr in synth_ratios:
                        tag = BASELINE_TAG if sr == 0 else gen
                        r = lookup.get((tag, model, rr, sr))
                        if r is None or r.error or np.isnan(getattr(r, metric)):
                            continue
                        xs.append(sr)
                        ys.append(getattr(r, metric))
                    if xs:
                        ax.plot(xs, ys, marker="o", label=f"real {rr:g}")
                        plotted = True
                ax.set_title(f"{model} / {gen}")
                ax.set_xlabel("synthetic ratio")
                ax.set_ylabel(metric)
                if plotted:
                    ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"plot_{metric}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
