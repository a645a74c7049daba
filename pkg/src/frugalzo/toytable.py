"""Reproduction protocol for the 2-D toy landscape study.

Each row fixes the learning rates, step budget, and initialization for one
toy function, with reference trajectory lengths for the deterministic Adam
cells. ZO cells run in 2-seed mode (two fixed gradient directions per run)
and, at toy scale, use a denominator guard equal to the perturbation scale
mu: toy gradients are O(1)-O(100), and with a vanishing guard the
preconditioned step stays sign-like all the way down, flooring every run in
a limit cycle of radius ~eta instead of showing the curvature adaptation
this study exists to compare.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harness import RunConfig, Trajectory, run
from .objective import make_toy
from .optimizers import OptimizerConfig

ADAM_BETAS = (0.9, 0.999)
ZO_TOY_EPSILON = 1e-3  # equals the default perturbation scale mu
TOY_OPTIMIZERS = ("first_order_adam", "mezo", "adamezo")


@dataclass(frozen=True)
class ToyRow:
    task: str
    adam_lr: float
    zo_lr: float
    steps: int
    init: tuple[float, float]
    ref_lengths: dict  # optimizer kind -> published trajectory length


TOY_TABLE = (
    ToyRow(
        task="f1",
        adam_lr=0.01,
        zo_lr=0.01,
        steps=600,
        init=(0.2, 6.75),
        ref_lengths={"first_order_adam": 3.0227, "mezo": 4.6659, "adamezo": 4.5078},
    ),
    ToyRow(
        task="f2",
        adam_lr=0.01,
        zo_lr=0.002,
        steps=2500,
        init=(-1.0, -1.0),
        ref_lengths={"first_order_adam": 4.3597, "mezo": 5.5405, "adamezo": 5.3207},
    ),
    ToyRow(
        task="f3",
        adam_lr=0.01,
        zo_lr=0.01,
        steps=500,
        init=(-1.0, 1.0),
        ref_lengths={"first_order_adam": 1.4142, "mezo": 1.4243, "adamezo": 1.8577},
    ),
)


def toy_row(task: str) -> ToyRow:
    for row in TOY_TABLE:
        if row.task == task:
            return row
    raise ValueError(f"no toy-table row for {task!r}")


def toy_run_config(task: str, optimizer: str, seed: int = 0) -> RunConfig:
    """Cell configuration: table settings, full step budget (no plateau)."""
    row = toy_row(task)
    if optimizer == "first_order_adam":
        opt = OptimizerConfig(
            eta=row.adam_lr, beta1=ADAM_BETAS[0], beta2=ADAM_BETAS[1], epsilon=1e-8
        )
        two_seed = False
    elif optimizer in ("mezo", "adamezo", "hmezo", "reference_zo_adam"):
        opt = OptimizerConfig(eta=row.zo_lr, epsilon=ZO_TOY_EPSILON)
        two_seed = True
    else:
        raise ValueError(f"unknown toy optimizer {optimizer!r}")
    return RunConfig(
        optimizer=optimizer,
        opt=opt,
        max_steps=row.steps,
        eval_interval=100,
        patience=None,
        seed=seed,
        toy_two_seed=two_seed,
        init=np.array(row.init),
        label=f"{task}_{optimizer}_seed{seed}",
    )


def run_toy_cell(task: str, optimizer: str, seed: int = 0) -> Trajectory:
    return run(toy_run_config(task, optimizer, seed), make_toy(task))
