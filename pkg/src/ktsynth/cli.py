"""Command-line front end for the synthetic-gradebook experiment pipeline.

Subcommands mirror the pipeline order: stats, fit, generate, train, grid.
Every run derives all randomness from one --seed and records a metadata file
in its output directory sufficient to repeat the command. Exit codes: 0
success, 2 usage or input error, 3 distribution-fit failure, 4 every grid
cell failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import bkt as bkt_mod
from . import dkt as dkt_mod
from .dataset import (
    SCHEMA_PRESETS,
    Dataset,
    EmptyDatasetError,
    RowIssue,
    SchemaError,
    descriptive_stats,
    read_dataset_csv,
    write_dataset_csv,
)
from .distributions import (
    FAMILIES,
    AllFitsFailedError,
    exclude_boundary_grades,
    fits_from_json,
    fits_to_json,
    select_best_fit,
)
from .evalgrid import GridSpec, emit_report, run_grid
from .generators import (
    GENERATOR_METHODS,
    GeneratorConfig,
    generate_synthetic,
    plan_n_paths,
)

OUTPUT_ROOT_ENV = "KTSYNTH_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FIT_FAILURE = 3
EXIT_GRID_FAILURE = 4


def _output_dir(args, default_name: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    root = os.environ.get(OUTPUT_ROOT_ENV, "ktsynth-out")
    return Path(root) / default_name


def _write_metadata(out_dir: Path, command: str, args, extra: dict | None = None) -> None:
    echo = {
        k: v for k, v in sorted(vars(args).items())
        if k != "func" and not k.startswith("_")
    }
    doc = {
        "tool": "ktsynth",
        "version": __version__,
        "command": command,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in echo.items()},
    }
    if extra:
        doc.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metadata.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_dataset(args) -> Dataset:
    issues: list[RowIssue] = []
    ds = read_dataset_csv(args.input, SCHEMA_PRESETS[args.schema], row_issues=issues)
    if issues:
        print(f"note: dropped {len(issues)} invalid rows", file=sys.stderr)
    return ds


def _print_stats(label: str, grades) -> dict:
    summary = descriptive_stats(grades).as_dict()
    print(
        f"{label}: mean={summary['mean']:.2f} median={summary['median']:.2f} "
        f"std={summary['std']:.2f} q1={summary['q1']:.2f} q3={summary['q3']:.2f} "
        f"n={summary['count']}"
    )
    return summary


def cmd_stats(args) -> int:
    ds = _load_dataset(args)
    summary = descriptive_stats(ds.all_grades())
    counts = {
        "students": ds.n_students,
        "interactions": ds.n_interactions,
        "exercises": len(ds.exercise_index),
        "skills": len(ds.skill_index),
    }
    for key, value in counts.items():
        print(f"{key}: {value}")
    _print_stats("grades", ds.all_grades())
    out = _output_dir(args, "stats")
    out.mkdir(parents=True, exist_ok=True)
    doc = {"counts": counts, "grade_stats": summary.as_dict()}
    (out / "stats.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _write_metadata(out, "stats", args)
    return EXIT_OK


def cmd_fit(args) -> int:
    ds = _load_dataset(args)
    families = args.families.split(",") if args.families else list(FAMILIES)
    unknown = set(families) - set(FAMILIES)
    if unknown:
        print(f"error: unknown families {sorted(unknown)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        ranked = select_best_fit(ds.all_grades(), families=families, n_bins=args.bins)
    except AllFitsFailedError as exc:
        print("error: every family failed to fit:", file=sys.stderr)
        for failure in exc.failures:
            print(f"  {failure.family}: {failure.message}", file=sys.stderr)
        return EXIT_FIT_FAILURE
    for fit in ranked:
        params = " ".join(f"{k}={v:.4f}" for k, v in fit.param_dict().items())
        print(f"{fit.family:11s} rss={fit.rss_score:.4e} ll={fit.log_likelihood:.2f} {params}")
    out = _output_dir(args, "fit")
    out.mkdir(parents=True, exist_ok=True)
    (out / "fits.json").write_text(fits_to_json(ranked), encoding="utf-8")
    _write_metadata(out, "fit", args)
    return EXIT_OK


def cmd_generate(args) -> int:
    ds = _load_dataset(args)
    if args.n_paths is None and args.ratio is None:
        print("error: provide --n-paths or --ratio", file=sys.stderr)
        return EXIT_USAGE
    if args.n_paths is not None:
        n_paths = args.n_paths
    else:
        target = max(1, int(np.ceil(args.ratio * ds.n_interactions)))
        n_paths = plan_n_paths(ds, args.method, args.seed, target)
    fit = None
    if args.method == "gen1":
        if args.fit_doc is not None:
            fit = fits_from_json(Path(args.fit_doc).read_text(encoding="utf-8"))[0]
        else:
            try:
                fit = select_best_fit(ds.all_grades())[0]
            except AllFitsFailedError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_FIT_FAILURE
        params = " ".join(f"{k}={v:.4f}" for k, v in fit.param_dict().items())
        print(f"gen1 grade distribution: {fit.family} {params}")
    config = GeneratorConfig(
        method=args.method,
        n_paths=n_paths,
        noise_sigma=args.sigma,
        clamp=not args.no_clamp,
        seed=args.seed,
    )
    synth = generate_synthetic(ds, config, fit=fit)
    print(f"generated {synth.n_students} paths / {synth.n_interactions} interactions")
    real_stats = _print_stats("real     ", ds.all_grades())
    synth_stats = _print_stats("synthetic", synth.all_grades())
    for key in ("mean", "median", "std"):
        delta = abs(real_stats[key] - synth_stats[key])
        print(f"|delta {key}| = {delta:.3f}")
    out = _output_dir(args, "generate")
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(synth, out / "synthetic.csv")
    _write_metadata(out, "generate", args, extra={"n_paths": n_paths})
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    out = _output_dir(args, "train")
    out.mkdir(parents=True, exist_ok=True)
    if args.model == "dkt":
        config = dkt_mod.DktConfig(
            hidden_size=args.hidden_size,
            input_buckets=args.buckets,
            learning_rate=args.lr,
            epochs=args.epochs,
            batch_size=args.batch_size,
            bptt_limit=args.bptt_limit,
            seed=args.seed,
        )
        model = dkt_mod.init_model(config)
        model, report = dkt_mod.train(model, ds, config)
        dkt_mod.save_model(model, out / "dkt_model.bin")
        doc = {
            "epoch_losses": list(report.epoch_losses),
            "wall_time_s": report.wall_time_s,
        }
        (out / "train_report.json").write_text(
            json.dumps(doc, indent=2) + "\n", encoding="utf-8"
        )
        print(
            f"dkt: first epoch loss {report.epoch_losses[0]:.5f}, "
            f"final {report.epoch_losses[-1]:.5f}"
        )
    else:
        fit = bkt_mod.fit_dataset(ds, seed=args.seed, max_iters=args.bkt_max_iters)
        (out / "bkt_model.json").write_text(bkt_mod.fit_to_json(fit), encoding="utf-8")
        for skill_id, model in sorted(fit.skills.items()):
            params = " ".join(f"{k}={v:.3f}" for k, v in model.params.as_dict().items())
            print(f"{skill_id}: {params} ll={model.log_likelihood:.2f}")
    _write_metadata(out, "train", args)
    return EXIT_OK


def _grid_spec_from_args(args) -> GridSpec:
    fields: dict = {}
    if args.config is not None:
        fields.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if args.real_ratios is not None:
        fields["real_ratios"] = [float(v) for v in args.real_ratios.split(",")]
    if args.synth_ratios is not None:
        fields["synth_ratios"] = [float(v) for v in args.synth_ratios.split(",")]
    if args.generators is not None:
        fields["generators"] = args.generators.split(",")
    if args.models is not None:
        fields["models"] = args.models.split(",")
    if args.test_fraction is not None:
        fields["test_fraction"] = args.test_fraction
    fields["seed"] = args.seed
    for key in ("real_ratios", "synth_ratios", "generators", "models"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return GridSpec(**fields)


def cmd_grid(args) -> int:
    ds = _load_dataset(args)
    spec = _grid_spec_from_args(args)
    dkt_config = dkt_mod.DktConfig(
        hidden_size=args.dkt_hidden,
        input_buckets=args.buckets,
        learning_rate=args.lr,
        epochs=args.dkt_epochs,
        batch_size=args.batch_size,
    )
    results = run_grid(
        ds, spec,
        dkt_config=dkt_config,
        bkt_max_iters=args.bkt_max_iters,
        jobs=args.jobs,
    )
    out = _output_dir(args, "grid")
    emit_report(results, out)
    _write_metadata(
        out, "grid", args,
        extra={"grid_spec": {
            "real_ratios": list(spec.real_ratios),
            "synth_ratios": list(spec.synth_ratios),
            "generators": list(spec.generators),
            "models": list(spec.models),
            "test_fraction": spec.test_fraction,
            "seed": spec.seed,
        }},
    )
    n_failed = sum(1 for r in results if r.error)
    for r in results:
        status = f"ERROR {r.error}" if r.error else (
            f"mae={r.mae:.4f} acc={r.acc:.4f} mcc={r.mcc:.4f}"
        )
        print(
            f"{r.generator:5s} {r.model} real={r.real_ratio:g} "
            f"synth={r.synth_ratio:g} {status}"
        )
    print(f"{len(results) - n_failed}/{len(results)} cells succeeded; report in {out}")
    if n_failed == len(results):
        return EXIT_GRID_FAILURE
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ktsynth",
        description="Synthetic gradebook generation and knowledge tracing benchmarks",
    )
    parser.add_argument("--version", action="version", version=f"ktsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out: str):
        p.add_argument("--input", required=True, help="input interactions CSV")
        p.add_argument(
            "--schema", choices=sorted(SCHEMA_PRESETS), default="generic",
            help="column-name preset for the input file",
        )
        p.add_argument("--seed", type=int, default=0, help="global random seed")
        p.add_argument(
            "--out", default=None,
            help=f"output directory (default {OUTPUT_ROOT_ENV} or ./ktsynth-out/{default_out})",
        )

    p_stats = sub.add_parser("stats", help="dataset size counts and grade statistics")
    common(p_stats, "stats")
    p_stats.set_defaults(func=cmd_stats)

    p_fit = sub.add_parser("fit", help="fit and rank grade distributions")
    common(p_fit, "fit")
    p_fit.add_argument("--families", default=None, help="comma list (default: all)")
    p_fit.add_argument("--bins", type=int, default=50, help="histogram bins for ranking")
    p_fit.set_defaults(func=cmd_fit)

    p_gen = sub.add_parser("generate", help="produce a synthetic dataset")
    common(p_gen, "generate")
    p_gen.add_argument("--method", choices=GENERATOR_METHODS, required=True)
    p_gen.add_argument("--n-paths", type=int, default=None, help="synthetic path count")
    p_gen.add_argument(
        "--ratio", type=float, default=None,
        help="target synthetic size as a fraction of input interactions",
    )
    p_gen.add_argument("--sigma", type=float, default=3.0, help="grade noise std dev")
    p_gen.add_argument("--no-clamp", action="store_true", help="do not clamp to [0,100]")
    p_gen.add_argument("--fit-doc", default=None, help="fits.json for gen1 (else fit inline)")
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train one knowledge tracing model")
    common(p_train, "train")
    p_train.add_argument("--model", choices=("dkt", "bkt"), required=True)
    _model_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_grid = sub.add_parser("grid", help="run the real/synthetic ratio grid")
    common(p_grid, "grid")
    p_grid.add_argument("--config", default=None, help="JSON file with grid fields")
    p_grid.add_argument("--real-ratios", default=None, help="comma list override")
    p_grid.add_argument("--synth-ratios", default=None, help="comma list override")
    p_grid.add_argument("--generators", default=None, help="comma list override")
    p_grid.add_argument("--models", default=None, help="comma list override")
    p_grid.add_argument("--test-fraction", type=float, default=None)
    p_grid.add_argument("--jobs", type=int, default=1, help="concurrent grid cells")
    p_grid.add_argument("--dkt-epochs", type=int, default=5)
    p_grid.add_argument("--dkt-hidden", type=int, default=32)
    _model_flags(p_grid)
    p_grid.set_defaults(func=cmd_grid)
    return parser


def _model_flags(p) -> None:
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--hidden-size", type=int, default=64)
    p.add_argument("--buckets", type=int, default=64, help="hashed exercise buckets")
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--bptt-limit", type=int, default=100)
    p.add_argument("--bkt-max-iters", type=int, default=50)


def entrypoint(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except AllFitsFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT_FAILURE
    except (SchemaError, EmptyDatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
