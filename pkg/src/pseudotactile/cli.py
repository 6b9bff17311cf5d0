"""Command line entry point.

Subcommands: ``gen-demos``, ``train``, ``bench``, ``ablate``, ``report`` and
``replay``. Settings come from built-in defaults, then a ``key = value``
config file (``--config`` or ``$PSEUDOTACTILE_CONFIG``), then flags.

Exit status: 0 on success, 1 on configuration or runtime errors, 2 on usage
errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .datagen import (
    CollectionAborted,
    collect,
    dataset_stats,
    load_dataset,
    replay_demo,
    save_dataset,
    steps_identical,
)
from .policy import fit, load_model, save_model
from .tactile import ControllerConfig

PROG = "pseudotactile"


class CommandError(RuntimeError):
    """Failure that is reported as a one-line message with exit status 1."""


def _fmt_fraction(x: float) -> str:
    return f"{x:g}".replace(".", "p")


def default_dataset_path(cfg: ExperimentConfig, n: int, seed: int, disturb: float,
                         feedback: bool) -> Path:
    tag = f"{cfg.task_enum.value}-n{n}-s{seed}-d{_fmt_fraction(disturb)}"
    if not feedback:
        tag += "-nofb"
    return Path(cfg.out_dir) / f"{tag}.jsonl"


def gen_demos_command(cfg: ExperimentConfig, n: int, seed: int, disturb: float, feedback: bool,
                      out: Path) -> str:
    return (
        f"{PROG} gen-demos --task {cfg.task_enum.value} --n {n} --seed {seed} "
        f"--disturb-fraction {disturb:g}{'' if feedback else ' --no-feedback'} --out {out}"
    )


def _generate(cfg: ExperimentConfig, n: int, seed: int, disturb: float, feedback: bool,
              out: Path) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        ds = collect(cfg.task_enum, n, seed, disturb, cfg.world_config(), feedback, cfg.n_jobs)
    except CollectionAborted as exc:
        raise CommandError(str(exc)) from None
    save_dataset(ds, out)
    s = dataset_stats(ds)
    print(
        f"wrote {out}: {s.n_demos} demos from {ds.attempts} attempts, "
        f"mean length {s.mean_length:.1f} steps, disturbed share {s.disturbance_share:.2f}"
    )


def cmd_gen_demos(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out) if args.out else default_dataset_path(
        cfg, cfg.n_demos, cfg.seed, cfg.disturb_fraction, cfg.feedback
    )
    _generate(cfg, cfg.n_demos, cfg.seed, cfg.disturb_fraction, cfg.feedback, out)
    return 0


def cmd_train(args, cfg: ExperimentConfig) -> int:
    ds = load_dataset(args.dataset)
    model = fit(ds, cfg.policy_config())
    out = Path(args.out) if args.out else Path(args.dataset).with_suffix(".policy.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"wrote {out}: {len(model)} index entries from {len(ds)} demos")
    return 0


def _write_report(prefix: Path, rows) -> None:
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.csv").write_text(bench.format_csv(rows), encoding="utf-8")
    Path(f"{prefix}.txt").write_text(bench.format_table(rows), encoding="utf-8")


def cmd_bench(args, cfg: ExperimentConfig) -> int:
    model = load_model(args.model)
    task = cfg.task_enum if args.task else model.task
    world = cfg.world_config()
    controller = cfg.controller_config()
    rollouts = bench.run_rollouts(task, model, controller, cfg.n_per_arm, cfg.seed, world,
                                  cfg.recovery_window, cfg.n_jobs)
    results = [r.result for r in rollouts]
    label = f"{task.value} {'feedback' if controller.enabled else 'no feedback'}"
    rows = [(label, bench.compute_metrics(results))]
    prefix = Path(args.out) if args.out else Path(cfg.out_dir) / f"bench-{task.value}-s{cfg.seed}"
    _write_report(prefix, rows)
    bench.save_results(results, f"{prefix}.results.jsonl",
                       {"label": label, "task": task.value, "seed": cfg.seed})
    if args.traces:
        tdir = Path(args.traces)
        tdir.mkdir(parents=True, exist_ok=True)
        for i, r in enumerate(rollouts):
            bench.save_trace(r, tdir / f"rollout-{i:03d}.jsonl", task, r.schedule,
                             controller, world, os.path.abspath(args.model), cfg.recovery_window)
    print(bench.format_table(rows), end="")
    return 0


def _ablation_paths(args, cfg: ExperimentConfig):
    n, seed, frac = cfg.n_demos, cfg.seed, cfg.ablation_disturb_fraction
    clean = Path(args.clean) if args.clean else default_dataset_path(cfg, n, seed, 0.0, True)
    disturbed = Path(args.disturbed) if args.disturbed else default_dataset_path(
        cfg, n, seed, frac, False
    )
    return [(clean, 0.0, True), (disturbed, frac, False)]


def cmd_ablate(args, cfg: ExperimentConfig) -> int:
    needed = _ablation_paths(args, cfg)
    for path, frac, feedback in needed:
        if path.exists():
            continue
        if not args.prepare:
            raise CommandError(
                f"missing dataset {path}; create it with `"
                f"{gen_demos_command(cfg, cfg.n_demos, cfg.seed, frac, feedback, path)}`"
                " or rerun with --prepare"
            )
        _generate(cfg, cfg.n_demos, cfg.seed, frac, feedback, path)
    clean, disturbed = (load_dataset(p) for p, _, _ in needed)
    rows = bench.run_ablation(cfg.task_enum, cfg.seed, clean, disturbed, cfg.n_per_arm,
                              cfg.policy_config(), cfg.world_config(), cfg.recovery_window,
                              cfg.n_jobs)
    table = [(r.label, r.report) for r in rows]
    prefix = Path(args.out) if args.out else Path(cfg.out_dir) / f"ablate-{cfg.task_enum.value}-s{cfg.seed}"
    _write_report(prefix, table)
    print(bench.format_table(table), end="")
    return 0


def cmd_report(args, cfg: ExperimentConfig) -> int:
    rows = []
    for path in args.results:
        meta, results = bench.load_results(path)
        rows.append((meta.get("label", Path(path).stem), bench.compute_metrics(results)))
    text = bench.format_csv(rows) if args.format == "csv" else bench.format_table(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _first_line(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.readline()


def cmd_replay(args, cfg: ExperimentConfig) -> int:
    head = _first_line(args.path)
    if f'"{bench.TRACE_FORMAT}"' in head:
        model_path = args.model or json.loads(head).get("model")
        if not model_path:
            raise CommandError("trace has no model reference; pass --model")
        stored, replayed = bench.replay_trace(args.path, load_model(model_path))
        ok = stored == replayed
        print(f"{args.path}: {'identical' if ok else 'MISMATCH'} ({len(stored)} steps)")
        return 0 if ok else 1
    ds = load_dataset(args.path)
    demos = ds.demonstrations if args.demo is None else [ds.demonstrations[args.demo]]
    bad = []
    for d in demos:
        if not steps_identical(replay_demo(d, ds.world, ds.feedback), d.steps):
            bad.append(d.demo_id)
    if bad:
        print(f"{args.path}: MISMATCH in demos {bad}")
        return 1
    print(f"{args.path}: identical ({len(demos)} demos)")
    return 0


def cmd_show_config(args, cfg: ExperimentConfig) -> int:
    print(dump_config(cfg), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (default: $PSEUDOTACTILE_CONFIG)")
    common.add_argument("--jobs", type=int, help="worker processes (0 = one per core)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; repeatable")

    p = argparse.ArgumentParser(prog=PROG, description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-demos", parents=[common], help="collect expert demonstrations")
    g.add_argument("--task")
    g.add_argument("--n", type=int, dest="n_demos")
    g.add_argument("--seed", type=int)
    g.add_argument("--disturb-fraction", type=float, dest="disturb_fraction")
    g.add_argument("--no-feedback", action="store_false", dest="feedback", default=None,
                   help="collect with the tactile controller disabled")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_demos)

    t = sub.add_parser("train", parents=[common], help="fit the retrieval policy")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out")
    t.add_argument("--horizon", type=int)
    t.add_argument("--execute", type=int)
    t.add_argument("--gripper-weight", type=float, dest="gripper_weight")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench", parents=[common], help="evaluate a policy")
    b.add_argument("--model", required=True)
    b.add_argument("--task", help="default: the task of the model's dataset")
    b.add_argument("--seed", type=int)
    b.add_argument("--n-per-arm", type=int, dest="n_per_arm")
    b.add_argument("--no-feedback", action="store_false", dest="feedback", default=None)
    b.add_argument("--out", help="report prefix; writes PREFIX.csv, PREFIX.txt, PREFIX.results.jsonl")
    b.add_argument("--traces", help="directory for per-rollout traces")
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("ablate", parents=[common], help="data/feedback ablation")
    a.add_argument("--task")
    a.add_argument("--seed", type=int)
    a.add_argument("--n", type=int, dest="n_demos")
    a.add_argument("--n-per-arm", type=int, dest="n_per_arm")
    a.add_argument("--clean", help="dataset collected without disturbance (feedback on)")
    a.add_argument("--disturbed", help="dataset collected with disturbance (feedback off)")
    a.add_argument("--prepare", action="store_true", help="generate missing datasets")
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("report", parents=[common], help="render saved results")
    r.add_argument("results", nargs="+")
    r.add_argument("--format", choices=("table", "csv"), default="table")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    rp = sub.add_parser("replay", parents=[common], help="re-simulate and check bit identity")
    rp.add_argument("path", help="dataset or trace file")
    rp.add_argument("--demo", type=int, help="only this demo index")
    rp.add_argument("--model", help="policy file for traces (default: the one named in the trace)")
    rp.set_defaults(func=cmd_replay)

    sc = sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    sc.set_defaults(func=cmd_show_config)
    return p


_CONFIG_FLAGS = ("task", "n_demos", "seed", "disturb_fraction", "feedback", "horizon", "execute",
                 "gripper_weight", "n_per_arm", "jobs")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip().replace("-", "_")] = v
    overrides.update({k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None})
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"{PROG}: config error in field {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, cfg)
    except (CommandError, ConfigError, ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
