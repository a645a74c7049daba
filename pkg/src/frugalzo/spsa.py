"""Two-forward-pass gradient projection with in-place perturbation.

The perturb/eval/restore sequence is the classic three-move dance: +mu*z,
-2*mu*z, +mu*z, with z regenerated from its seed for every move. Restoration
by re-subtraction is exact up to IEEE rounding of the individual adds; the
residue is deterministic (a pure function of the weights, seed, and mu), a
couple of ulps in size, and identical for every optimizer that replays the
same seeds. See the drift tests for the quantified bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import ForwardCounter, Objective, eval_loss
from .partition import BlockPartition
from .rng import gaussian_block, rng_init


@dataclass(frozen=True)
class ProjectionRecord:
    """(step, seed, scalar projection): everything one step persists."""

    step: int
    seed: int
    projection: float


# streaming chunk size for perturbation draws; by stream continuity the
# values are identical to any per-block chunking, so the partition governs
# moment reconstruction only
_PERTURB_CHUNK = 8192


def perturb_inplace(
    w: np.ndarray, seed: int, scale: float, partition: BlockPartition
) -> None:
    """w += scale * z(seed), z drawn in partition order from the seed's stream.

    A zero scale is a guaranteed no-op (the add is skipped entirely, so even
    signed zeros in w survive).
    """
    if partition.dimension != w.shape[0]:
        raise ValueError(
            f"partition covers {partition.dimension} coordinates, weights have {w.shape[0]}"
        )
    if scale == 0.0:
        return
    state = rng_init(seed)
    d = w.shape[0]
    for start in range(0, d, _PERTURB_CHUNK):
        length = min(_PERTURB_CHUNK, d - start)
        z, state = gaussian_block(state, length)
        w[start : start + length] += scale * z


def spsa_projection(
    obj: Objective,
    w: np.ndarray,
    batch: np.ndarray | None,
    mu: float,
    seed: int,
    partition: BlockPartition,
    counter: ForwardCounter | None = None,
    step: int = 0,
) -> tuple[ProjectionRecord, float, float]:
    """Estimate the directional projection (L(w+mu*z) - L(w-mu*z)) / (2*mu).

    Exactly two forward passes. Returns the record plus both perturbed losses
    (their mean is a free estimate of L(w) for trajectory logging). If an eval
    diverges the error propagates and w is left perturbed; callers abandon the
    run at that point.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    perturb_inplace(w, seed, mu, partition)
    loss_plus = eval_loss(obj, w, batch, counter)
    perturb_inplace(w, seed, -2.0 * mu, partition)
    loss_minus = eval_loss(obj, w, batch, counter)
    perturb_inplace(w, seed, mu, partition)
    projection = (loss_plus - loss_minus) / (2.0 * mu)
    return ProjectionRecord(step=step, seed=seed, projection=projection), loss_plus, loss_minus
