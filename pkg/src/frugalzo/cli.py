"""Command-line entry point.

Subcommands: ``run`` (single experiment), ``toytable`` (the 9-cell toy
reproduction), ``compare`` (multi-optimizer sweeps with pairwise
forward-pass savings). Config files are flat INI-style key/value sections;
command-line flags override file values. Every run writes a trajectory CSV
plus a .meta.json that contains the fully resolved configuration, so a run
is reproducible from its metadata alone.

Exit codes: 0 success, 1 divergence, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import rng
from .harness import RunConfig, Trajectory, compare, export_trajectory_csv, run
from .objective import Objective, make_synthetic_classification, make_toy
from .optimizers import OptimizerConfig
from .toytable import TOY_TABLE, TOY_OPTIMIZERS, run_toy_cell, toy_run_config

OPT_KEYS = {
    "eta": float,
    "mu": float,
    "h": int,
    "beta1": float,
    "beta2": float,
    "epsilon": float,
    "warmup": int,
    "blocks": int,
    "beta_v_mode": str,
}

RUN_KEYS = {
    "task": str,
    "optimizer": str,
    "steps": int,
    "eval_every": int,
    "patience": str,  # integer or "none"
    "seed": int,
    "batch_size": int,
    "toy_two_seed": bool,
    "out": str,
    # synthetic-task shape (config-file keys)
    "d": int,
    "n": int,
    "dataset_seed": int,
    **OPT_KEYS,
}

TASK_KEYS = {
    "task": str,
    "d": int,
    "n": int,
    "dataset_seed": int,
    "batch_size": int,
    "steps": int,
    "eval_every": int,
    "patience": str,
    "seeds": str,
}


class ConfigError(ValueError):
    pass


def _parse_section(section, allowed: dict) -> dict:
    values = {}
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown configuration key {key!r}")
        raw = section[key]
        kind = allowed[key]
        try:
            if kind is bool:
                values[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                values[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return values


def _load_ini(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    return parser


def _optimizer_config(values: dict) -> OptimizerConfig:
    kwargs = {}
    mapping = {
        "eta": "eta",
        "mu": "mu",
        "h": "h",
        "beta1": "beta1",
        "beta2": "beta2",
        "epsilon": "epsilon",
        "warmup": "warmup_steps",
        "blocks": "num_blocks",
        "beta_v_mode": "beta_v_mode",
    }
    for key, attr in mapping.items():
        if key in values and values[key] is not None:
            kwargs[attr] = values[key]
    try:
        return OptimizerConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _patience(value) -> int | None:
    if value is None:
        return 5
    if isinstance(value, str) and value.strip().lower() in ("none", "off", ""):
        return None
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"bad patience value {value!r}") from exc


def _make_objective(task: str, values: dict) -> Objective:
    if task in ("f1", "f2", "f3"):
        return make_toy(task)
    if task == "synthetic":
        return make_synthetic_classification(
            d=values.get("d", 200),
            n=values.get("n", 512),
            seed=values.get("dataset_seed", 11),
        )
    raise ConfigError(f"unknown task {task!r}; choose f1, f2, f3, or synthetic")


def _out_dir(explicit: str | None) -> str:
    out = explicit or os.environ.get("FRUGALZO_OUT") or "runs"
    os.makedirs(out, exist_ok=True)
    return out


def _write_outputs(traj: Trajectory, out_dir: str, resolved: dict, wall_clock: float) -> str:
    base = os.path.join(out_dir, traj.label)
    export_trajectory_csv(traj, base + ".csv")
    meta = {
        "config": resolved,
        "terminal_reason": traj.terminal_reason,
        "final_train_loss": traj.final_train_loss if traj.train_losses else None,
        "terminal_eval_loss": traj.terminal_eval_loss,
        "path_length": traj.path_length,
        "steps_run": traj.steps[-1] if traj.steps else 0,
        "train_forward_passes": traj.train_forward_passes,
        "eval_forward_passes": traj.eval_forward_passes,
        "ledger": {
            "peak_aux_floats": traj.ledger.peak_floats,
            "peak_rng_states": traj.ledger.peak_rng_states,
        },
        "rng_backend": rng.BACKEND,
        "wall_clock_seconds": wall_clock,
    }
    with open(base + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, default=str)
    return base


def _resolved_config(task: str, cfg: RunConfig, extra: dict | None = None) -> dict:
    data = {
        "task": task,
        "optimizer": cfg.optimizer,
        "max_steps": cfg.max_steps,
        "eval_interval": cfg.eval_interval,
        "patience": cfg.patience,
        "seed": cfg.seed,
        "batch_size": cfg.batch_size,
        "toy_two_seed": cfg.toy_two_seed,
        "init": None if cfg.init is None else list(map(float, np.asarray(cfg.init))),
        "optimizer_config": asdict(cfg.opt),
    }
    if data["optimizer_config"]["partition"] is not None:
        data["optimizer_config"]["partition"] = list(
            data["optimizer_config"]["partition"]["blocks"]
        )
    if extra:
        data.update(extra)
    return data


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    values: dict = {}
    if args.spec:
        parser = _load_ini(args.spec)
        if "run" not in parser:
            raise ConfigError(f"{args.spec}: missing [run] section")
        for name in parser.sections():
            if name != "run":
                raise ConfigError(f"unexpected section [{name}] in run config")
        values = _parse_section(parser["run"], RUN_KEYS)
    for key in RUN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "task" not in values:
        raise ConfigError("a task is required (--task or config file)")
    if "optimizer" not in values:
        raise ConfigError("an optimizer is required (--opt or config file)")

    task = values["task"]
    obj = _make_objective(task, values)
    task_params = (
        {
            "d": values.get("d", 200),
            "n": values.get("n", 512),
            "dataset_seed": values.get("dataset_seed", 11),
        }
        if task == "synthetic"
        else {}
    )
    cfg = RunConfig(
        optimizer=values["optimizer"],
        opt=_optimizer_config(values),
        max_steps=values.get("steps", 1000),
        eval_interval=values.get("eval_every", 100),
        patience=_patience(values.get("patience")),
        seed=values.get("seed", 0),
        batch_size=values.get("batch_size") if task == "synthetic" else None,
        toy_two_seed=values.get("toy_two_seed", False),
        label=f"{task}_{values['optimizer']}_seed{values.get('seed', 0)}",
    )
    start = time.perf_counter()
    traj = run(cfg, obj)
    wall = time.perf_counter() - start
    out_dir = _out_dir(values.get("out") or args.out)
    base = _write_outputs(traj, out_dir, _resolved_config(task, cfg, task_params), wall)
    print(f"{traj.label}: {traj.terminal_reason} after {traj.steps[-1] if traj.steps else 0} steps, "
          f"terminal eval loss {traj.terminal_eval_loss:.6g}, wrote {base}.csv")
    return 1 if traj.terminal_reason == "divergence" else 0


# ---------------------------------------------------------------------------
# toytable


def cmd_toytable(args) -> int:
    out_dir = _out_dir(args.out)
    print(f"{'task':<5} {'optimizer':<18} {'final_loss':>12} {'path_len':>9} {'ref_len':>8}")
    status = 0
    for row in TOY_TABLE:
        for kind in TOY_OPTIMIZERS:
            cfg = toy_run_config(row.task, kind, seed=args.seed)
            start = time.perf_counter()
            traj = run_toy_cell(row.task, kind, seed=args.seed)
            wall = time.perf_counter() - start
            _write_outputs(traj, out_dir, _resolved_config(row.task, cfg), wall)
            ref = row.ref_lengths[kind]
            print(
                f"{row.task:<5} {kind:<18} {traj.final_train_loss:>12.4e} "
                f"{traj.path_length:>9.4f} {ref:>8.4f}"
            )
            if traj.terminal_reason == "divergence":
                status = 1
    print(f"trajectory files written to {out_dir}/")
    return status


# ---------------------------------------------------------------------------
# compare


def _compare_worker(task: str, task_values: dict, cfg: RunConfig) -> Trajectory:
    obj = _make_objective(task, task_values)
    return run(cfg, obj)


def cmd_compare(args) -> int:
    parser = _load_ini(args.spec)
    if "compare" not in parser:
        raise ConfigError(f"{args.spec}: missing [compare] section")
    shared = _parse_section(parser["compare"], TASK_KEYS)
    opt_sections = [s for s in parser.sections() if s.startswith("optimizer.")]
    extra = [
        s for s in parser.sections() if s != "compare" and not s.startswith("optimizer.")
    ]
    if extra:
        raise ConfigError(f"unexpected section [{extra[0]}] in compare config")
    if len(opt_sections) < 2:
        raise ConfigError("compare needs at least two [optimizer.<name>] sections")
    if "task" not in shared:
        raise ConfigError("compare needs a task")
    seeds = [int(s) for s in shared.get("seeds", "0").split()]
    task = shared["task"]

    jobs = []
    for section in opt_sections:
        name = section.split(".", 1)[1]
        values = _parse_section(parser[section], {"kind": str, **OPT_KEYS})
        kind = values.pop("kind", name)
        for seed in seeds:
            cfg = RunConfig(
                optimizer=kind,
                opt=_optimizer_config(values),
                max_steps=shared.get("steps", 1000),
                eval_interval=shared.get("eval_every", 100),
                patience=_patience(shared.get("patience")),
                seed=seed,
                batch_size=shared.get("batch_size") if task == "synthetic" else None,
                label=f"{name}_seed{seed}",
            )
            jobs.append((name, seed, cfg))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [
                pool.submit(_compare_worker, task, shared, cfg) for _, _, cfg in jobs
            ]
            trajectories = [f.result() for f in futures]
    else:
        trajectories = [_compare_worker(task, shared, cfg) for _, _, cfg in jobs]

    by_seed: dict[int, list[Trajectory]] = {}
    names = []
    for (name, seed, _), traj in zip(jobs, trajectories):
        by_seed.setdefault(seed, []).append(traj)
        if name not in names:
            names.append(name)

    all_pairs = []
    for seed, trajs in sorted(by_seed.items()):
        report = compare(trajs)
        all_pairs.extend(report["pairs"])

    medians = {}
    for a in names:
        for b in names:
            if a == b:
                continue
            ratios = [
                p["savings_ratio"]
                for p in all_pairs
                if p["a"].startswith(f"{a}_seed") and p["b"].startswith(f"{b}_seed")
                and p["savings_ratio"] is not None
                and p["a"].split("_seed")[1] == p["b"].split("_seed")[1]
            ]
            medians[f"{a}_vs_{b}"] = statistics.median(ratios) if ratios else None

    report = {
        "pairs": all_pairs,
        "terminal_losses": {t.label: t.terminal_eval_loss for t in trajectories},
        "path_lengths": {t.label: t.path_length for t in trajectories},
        "median_savings": medians,
    }
    out_dir = _out_dir(args.out)
    out_path = os.path.join(out_dir, "comparison.json")
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2)

    print(f"{'pair':<30} {'median savings':>14}")
    for key, value in medians.items():
        shown = f"{value:.3f}" if value is not None else "not reached"
        print(f"{key:<30} {shown:>14}")
    print(f"report written to {out_path}")
    divergent = any(t.terminal_reason == "divergence" for t in trajectories)
    return 1 if divergent else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frugalzo",
        description="Forward-pass-only optimizers with PRNG-reconstructed moments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment")
    p_run.add_argument("spec", nargs="?", help="INI config file with a [run] section")
    p_run.add_argument("--task", choices=("f1", "f2", "f3", "synthetic"))
    p_run.add_argument("--opt", dest="optimizer",
                       choices=("mezo", "hmezo", "adamezo", "reference_zo_adam",
                                "stored_momentum", "first_order_adam"))
    p_run.add_argument("--eta", type=float)
    p_run.add_argument("--mu", type=float)
    p_run.add_argument("--h", type=int)
    p_run.add_argument("--beta1", type=float)
    p_run.add_argument("--beta2", type=float)
    p_run.add_argument("--epsilon", type=float)
    p_run.add_argument("--warmup", type=int)
    p_run.add_argument("--blocks", type=int)
    p_run.add_argument("--steps", type=int)
    p_run.add_argument("--eval-every", dest="eval_every", type=int)
    p_run.add_argument("--patience")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--batch-size", dest="batch_size", type=int)
    p_run.add_argument("--toy-two-seed", dest="toy_two_seed", action="store_const", const=True)
    p_run.add_argument("--out")
    p_run.set_defaults(func=cmd_run)

    p_toy = sub.add_parser("toytable", help="reproduce the toy-function table")
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out")
    p_toy.set_defaults(func=cmd_toytable)

    p_cmp = sub.add_parser("compare", help="run a comparison sweep from a config file")
    p_cmp.add_argument("spec", help="INI config with [compare] and [optimizer.*] sections")
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
