"""Training loop: plateau/budget termination, trajectory recording, path
length, and forward-pass accounting.

A run is fully determined by (RunConfig, objective): per-step seeds come from
a dedicated meta stream (run seed, subsequence 1) and batches from another
(subsequence 2), so repeating a run reproduces it bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .objective import (
    DivergenceError,
    ForwardCounter,
    Objective,
    eval_loss,
    sample_batch,
)
from .optimizers import MemoryLedger, OptimizerConfig, make_optimizer
from .rng import raw64_block, rng_init

# parameter snapshots: every step at toy scale, else only at eval marks
SNAPSHOT_EVERY_STEP_MAX_DIM = 16


@dataclass
class RunConfig:
    optimizer: str = "mezo"
    opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    max_steps: int = 1000
    eval_interval: int = 100
    patience: int | None = 5  # consecutive non-improving evals; None disables
    seed: int = 0
    batch_size: int | None = None  # None = full train split
    record_params: bool | None = None  # None = auto by dimension
    toy_two_seed: bool = False
    init: np.ndarray | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.eval_interval < 1:
            raise ValueError(f"eval_interval must be >= 1, got {self.eval_interval}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass
class Trajectory:
    label: str
    objective_name: str
    steps: list[int]
    train_losses: list[float]
    forward_passes: list[int]  # cumulative training forward passes per step
    eval_steps: list[int]
    eval_losses: list[float]
    train_split_losses: list[float]  # full train-split loss at the eval marks
    snapshot_steps: list[int]
    snapshots: list[np.ndarray]
    terminal_reason: str
    path_length: float
    final_w: np.ndarray
    train_forward_passes: int
    eval_forward_passes: int
    ledger: MemoryLedger

    @property
    def terminal_eval_loss(self) -> float:
        return self.eval_losses[-1]

    @property
    def terminal_train_split_loss(self) -> float:
        return self.train_split_losses[-1]

    @property
    def final_train_loss(self) -> float:
        return self.train_losses[-1]


class MissingSnapshotsError(RuntimeError):
    pass


class IncompatibleObjectiveError(ValueError):
    pass


def seed_schedule(run_seed: int, two_seed: bool) -> Iterator[int]:
    """Per-step seeds from the meta stream (subsequence 1 of the run seed).

    Two-seed mode fixes a pool of two seeds up front and samples one per step
    (a coin from the same meta stream), modeling runs whose explored gradient
    directions are far fewer than the problem dimensions.
    """
    state = rng_init(run_seed, subsequence=1)
    if two_seed:
        pair, state = raw64_block(state, 2)
        a, b = int(pair[0]), int(pair[1])
        while True:
            coin, state = raw64_block(state, 1)
            yield a if (int(coin[0]) & 1) == 0 else b
    else:
        while True:
            block, state = raw64_block(state, 1)
            yield int(block[0])


def run(cfg: RunConfig, obj: Objective) -> Trajectory:
    """Execute steps until plateau, budget, or divergence."""
    w = np.array(cfg.init if cfg.init is not None else obj.default_init, dtype=np.float64)
    if w.shape != (obj.dimension,):
        raise ValueError(f"init has shape {w.shape}, objective wants ({obj.dimension},)")

    ledger = MemoryLedger()
    counter = ForwardCounter()
    opt = make_optimizer(cfg.optimizer, cfg.opt, obj.dimension, ledger)
    seeds = seed_schedule(cfg.seed, cfg.toy_two_seed)
    batch_state = rng_init(cfg.seed, subsequence=2)
    eval_split = obj.eval_indices()

    record_every_step = (
        cfg.record_params
        if cfg.record_params is not None
        else obj.dimension <= SNAPSHOT_EVERY_STEP_MAX_DIM
    )

    steps: list[int] = []
    train_losses: list[float] = []
    forward_passes: list[int] = []
    eval_steps: list[int] = [0]
    snapshot_steps: list[int] = [0]
    snapshots: list[np.ndarray] = [w.copy()]
    path_length = 0.0

    # with no held-out split the eval measurement already is the full loss
    has_split = eval_split is not None

    best = eval_loss(obj, w, eval_split, counter, kind="eval")
    eval_losses: list[float] = [best]
    train_split_losses: list[float] = [
        eval_loss(obj, w, None, counter, kind="eval") if has_split else best
    ]
    bad_measures = 0
    terminal = "budget"

    w_prev = w.copy()
    for t in range(1, cfg.max_steps + 1):
        step_seed = next(seeds)
        batch, batch_state = (
            sample_batch(obj, batch_state, cfg.batch_size)
            if cfg.batch_size is not None
            else (None, batch_state)
        )
        np.copyto(w_prev, w)
        try:
            result = opt.step(w, obj, batch, t, step_seed, counter)
        except DivergenceError:
            terminal = "divergence"
            break
        path_length += float(np.linalg.norm(w - w_prev))
        steps.append(t)
        train_losses.append(result.mean_loss)
        forward_passes.append(counter.train)
        if record_every_step:
            snapshot_steps.append(t)
            snapshots.append(w.copy())

        if t % cfg.eval_interval == 0:
            measured = eval_loss(obj, w, eval_split, counter, kind="eval")
            eval_steps.append(t)
            eval_losses.append(measured)
            train_split_losses.append(
                eval_loss(obj, w, None, counter, kind="eval") if has_split else measured
            )
            if not record_every_step:
                snapshot_steps.append(t)
                snapshots.append(w.copy())
            if measured < best:
                best = measured
                bad_measures = 0
            else:
                bad_measures += 1
                if cfg.patience is not None and bad_measures >= cfg.patience:
                    terminal = "plateau"
                    break

    return Trajectory(
        label=cfg.label or f"{cfg.optimizer}_seed{cfg.seed}",
        objective_name=obj.name,
        steps=steps,
        train_losses=train_losses,
        forward_passes=forward_passes,
        eval_steps=eval_steps,
        eval_losses=eval_losses,
        train_split_losses=train_split_losses,
        snapshot_steps=snapshot_steps,
        snapshots=snapshots,
        terminal_reason=terminal,
        path_length=path_length,
        final_w=w.copy(),
        train_forward_passes=counter.train,
        eval_forward_passes=counter.eval_measures,
        ledger=ledger,
    )


def trajectory_length(traj: Trajectory) -> float:
    """Sum of Euclidean step lengths, recomputed from parameter snapshots.

    Requires a snapshot for every executed step (toy-scale runs record them
    densely); the run loop's accumulator is the metric of record otherwise.
    """
    expected = [0] + traj.steps
    if traj.snapshot_steps != expected:
        raise MissingSnapshotsError(
            "per-step snapshots required: have "
            f"{len(traj.snapshot_steps)} snapshots for {len(traj.steps)} steps"
        )
    total = 0.0
    for a, b in zip(traj.snapshots, traj.snapshots[1:]):
        total += float(np.linalg.norm(b - a))
    return total


def compare(trajectories: list[Trajectory], series: str = "train") -> dict:
    """Pairwise forward-pass savings: for (A, B), the training forward passes
    A needed for its loss curve to first reach B's terminal value, against
    B's total.

    ``series`` picks the curve the comparison runs on: "train" uses the full
    train-split loss at the measurement marks (the descent curve; immune to
    late-run eval overfitting), "eval" uses the held-out measurements. On
    objectives without a split the two coincide.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least two trajectories to compare")
    if series not in ("train", "eval"):
        raise ValueError(f"series must be 'train' or 'eval', got {series!r}")
    names = {t.objective_name for t in trajectories}
    if len(names) > 1:
        raise IncompatibleObjectiveError(f"trajectories span objectives {sorted(names)}")

    def curve(traj: Trajectory) -> list[float]:
        return traj.train_split_losses if series == "train" else traj.eval_losses

    def fp_at_eval_step(traj: Trajectory, eval_idx: int) -> int:
        step = traj.eval_steps[eval_idx]
        if step == 0:
            return 0
        return traj.forward_passes[traj.steps.index(step)]

    pairs = []
    for a in trajectories:
        for b in trajectories:
            if a is b:
                continue
            target = curve(b)[-1]
            reached = None
            for i, loss in enumerate(curve(a)):
                if loss <= target:
                    reached = fp_at_eval_step(a, i)
                    break
            fp_b_total = b.train_forward_passes
            pairs.append(
                {
                    "a": a.label,
                    "b": b.label,
                    "fp_to_reach_b_terminal": reached if reached is not None else "not reached",
                    "savings_ratio": (
                        1.0 - reached / fp_b_total if reached is not None else None
                    ),
                }
            )
    return {
        "series": series,
        "pairs": pairs,
        "terminal_losses": {t.label: curve(t)[-1] for t in trajectories},
        "path_lengths": {t.label: t.path_length for t in trajectories},
    }


def export_trajectory_csv(traj: Trajectory, path: str) -> None:
    """step, train_loss, eval_loss, forward_passes, then w_0.. for snapshot rows."""
    with_params = bool(traj.snapshots)
    dim = traj.final_w.shape[0]
    eval_at = dict(zip(traj.eval_steps, traj.eval_losses))
    snap_at = dict(zip(traj.snapshot_steps, traj.snapshots))
    header = ["step", "train_loss", "eval_loss", "forward_passes"]
    if with_params:
        header += [f"w_{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        rows = [(0, "", eval_at.get(0, ""), 0)] + [
            (s, traj.train_losses[i], eval_at.get(s, ""), traj.forward_passes[i])
            for i, s in enumerate(traj.steps)
        ]
        for step, train, ev, fp in rows:
            row = [
                step,
                repr(float(train)) if train != "" else "",
                repr(float(ev)) if ev != "" else "",
                fp,
            ]
            if with_params:
                snap = snap_at.get(step)
                row += [repr(float(v)) for v in snap] if snap is not None else [""] * dim
            writer.writerow(row)
