#!/usr/bin/env python3
"""Build a synthetic-student fixture dataset and write it as a generic CSV.

The fixture simulates two-state learners: each student starts every skill
unknown and masters it with a fixed probability per attempt, with grades
drawn around the state mean. The output ingests cleanly with
--schema generic and is the standard input for the demo grid.
"""

import argparse

from ktsynth.dataset import FixtureConfig, descriptive_stats, make_fixture, write_dataset_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--students", type=int, default=500)
    parser.add_argument("--min-length", type=int, default=10)
    parser.add_argument("--max-length", type=int, default=50)
    parser.add_argument("--skills", type=int, default=5)
    parser.add_argument("--mastery-gain", type=float, default=0.15)
    parser.add_argument("--known-mean", type=float, default=82.0)
    parser.add_argument("--unknown-mean", type=float, default=38.0)
    parser.add_argument("--noise-std", type=float, default=8.0)
    parser.add_argument("--seed", type=int, default=20240)
    parser.add_argument("--out", default="fixture.csv")
    args = parser.parse_args()

    config = FixtureConfig(
        n_students=args.students,
        path_length_range=(args.min_length, args.max_length),
        n_skills=args.skills,
        mastery_gain=args.mastery_gain,
        base_known_mean=args.known_mean,
        base_unknown_mean=args.unknown_mean,
        observation_noise_std=args.noise_std,
        seed=args.seed,
    )
    ds = make_fixture(config)
    write_dataset_csv(ds, args.out)
    stats = descriptive_stats(ds.all_grades())
    print(
        f"wrote {args.out}: {ds.n_students} students, "
        f"{ds.n_interactions} interactions, "
        f"grade mean {stats.mean:.2f} / std {stats.std:.2f}"
    )


if __name__ == "__main__":
    main()
