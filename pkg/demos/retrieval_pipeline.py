"""Demonstrations, retrieval policy and benchmark in one process.

Collects expert demos, fits the nearest-neighbour policy and scores it with
the tactile controller on and off. Small defaults keep it under a minute.
"""
import argparse

from pseudotactile.bench import compute_metrics, format_table, run_benchmark
from pseudotactile.datagen import collect, dataset_stats
from pseudotactile.policy import fit
from pseudotactile.tactile import ControllerConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--task", default="drawer")
    p.add_argument("--demos", type=int, default=60)
    p.add_argument("--n-per-arm", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    data = collect(args.task, args.demos, args.seed)
    s = dataset_stats(data)
    print(f"{s.n_demos} demos, mean length {s.mean_length:.1f} steps")
    model = fit(data)
    print(f"{len(model)} index entries")
    rows = []
    for enabled in (True, False):
        results = run_benchmark(args.task, model, ControllerConfig(enabled), args.n_per_arm, args.seed)
        rows.append((f"feedback {'on' if enabled else 'off'}", compute_metrics(results)))
    print(format_table(rows), end="")


if __name__ == "__main__":
    main()
