"""Zeroth-order optimizers that rebuild Adam-style moments from cached PRNG
states, plus in-memory reference oracles.

The memory-frugal steps never hold a full-dimension auxiliary vector: past
direction vectors are regenerated block by block from the seeds kept in the
horizon buffer, resuming each seed's stream from a cached mid-stream state
instead of replaying it from the start. The reference oracles do the opposite
(full-dimension stored vectors, whole-vector draws) and must produce
bit-identical parameters; every arithmetic reduction here is therefore
written in one fixed per-element order that both routes share.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .objective import ForwardCounter, Objective, eval_loss, grad_exact
from .partition import BlockPartition
from .rng import RngState, gaussian_block, rng_init, rng_jump
from .spsa import ProjectionRecord, perturb_inplace, spsa_projection


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters shared by all optimizer kinds.

    warmup_steps=None means "equal to the horizon h": full-horizon moments
    need h records, and plain steps are taken while the buffer fills.
    """

    eta: float = 0.01
    mu: float = 1e-3
    h: int = 10
    beta1: float = 0.7
    beta2: float = 0.9
    epsilon: float = 1e-8
    warmup_steps: int | None = None
    beta_v_mode: str = "normalized"
    num_blocks: int = 1
    partition: BlockPartition | None = None

    def __post_init__(self) -> None:
        # eta = 0 is a permitted degenerate (a frozen run); negative is not
        if self.eta < 0.0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.h < 1:
            raise ValueError(f"horizon h must be >= 1, got {self.h}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not (0.0 <= value < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.warmup_steps is not None and self.warmup_steps < 0:
            raise ValueError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.beta_v_mode not in ("normalized", "unit"):
            raise ValueError(f"beta_v_mode must be 'normalized' or 'unit', got {self.beta_v_mode}")
        if self.num_blocks < 1:
            raise ValueError(f"num_blocks must be >= 1, got {self.num_blocks}")

    @property
    def warmup(self) -> int:
        return self.h if self.warmup_steps is None else self.warmup_steps

    def resolve_partition(self, dimension: int) -> BlockPartition:
        if self.partition is not None:
            if self.partition.dimension != dimension:
                raise ValueError(
                    f"partition covers {self.partition.dimension} coords, problem has {dimension}"
                )
            return self.partition
        return BlockPartition.uniform(dimension, min(self.num_blocks, dimension))


class HorizonBuffer:
    """Ring of the last h projection records, newest last."""

    def __init__(self, h: int):
        if h < 1:
            raise ValueError(f"horizon must be >= 1, got {h}")
        self.h = h
        self._records: list[ProjectionRecord] = []

    def append(self, record: ProjectionRecord) -> None:
        if self._records and record.step <= self._records[-1].step:
            raise ValueError(
                f"record steps must increase: {record.step} after {self._records[-1].step}"
            )
        self._records.append(record)
        if len(self._records) > self.h:
            del self._records[0]

    def newest_first(self) -> list[ProjectionRecord]:
        return self._records[::-1]

    def records(self) -> list[ProjectionRecord]:
        return list(self._records)

    def __len__(self) -> int:
        return len(self._records)


class StateCache:
    """h-by-b grid of optional RngStates.

    Entry (i, j) is the stream position of the i-th newest record's seed
    right after its blocks 0..j were drawn; loading it resumes the stream at
    block j+1 without replaying anything. Reset at the start of every
    post-warm-up step, matching the per-step cache lifetime of the update rule.
    """

    def __init__(self, h: int, block_count: int):
        self.h = h
        self.block_count = block_count
        self._grid: list[list[RngState | None]] = [
            [None] * block_count for _ in range(h)
        ]
        self._live = 0

    def reset(self) -> None:
        for row in self._grid:
            for j in range(self.block_count):
                row[j] = None
        self._live = 0

    def get(self, row: int, col: int) -> RngState | None:
        return self._grid[row][col]

    def set(self, row: int, col: int, state: RngState) -> None:
        if self._grid[row][col] is None:
            self._live += 1
        self._grid[row][col] = state

    @property
    def live_states(self) -> int:
        return self._live

    def to_jsonable(self) -> list:
        return [
            [
                None
                if state is None
                else {"seed": state.seed, "subsequence": state.subsequence, "offset": state.offset}
                for state in row
            ]
            for row in self._grid
        ]

    @staticmethod
    def from_jsonable(data: list) -> "StateCache":
        cache = StateCache(len(data), len(data[0]) if data else 0)
        for i, row in enumerate(data):
            for j, entry in enumerate(row):
                if entry is not None:
                    cache.set(i, j, RngState(**entry))
        return cache


class MemoryLedger:
    """Peak accounting of auxiliary optimizer state.

    Counts float arrays that must stay alive across an eval call or across
    block iterations: moment buffers, momentum deltas, stored full-dimension
    moments. Two documented exclusions mirror the cost model this library is
    built to verify: (a) streaming draw scratch, which a fused kernel
    generates and consumes one value at a time (the compiled backend does
    exactly that), and (b) O(h) per-record scalars such as projections and
    decay coefficients, which travel with the horizon buffer. The parameter
    vector itself is never counted.
    """

    def __init__(self) -> None:
        self.live_floats = 0
        self.peak_floats = 0
        self.live_rng_states = 0
        self.peak_rng_states = 0

    def claim_floats(self, n: int) -> None:
        self.live_floats += n
        self.peak_floats = max(self.peak_floats, self.live_floats)

    def release_floats(self, n: int) -> None:
        if n > self.live_floats:
            raise ValueError(f"releasing {n} floats but only {self.live_floats} live")
        self.live_floats -= n

    @contextmanager
    def floats(self, n: int):
        self.claim_floats(n)
        try:
            yield
        finally:
            self.release_floats(n)

    def note_rng_states(self, live: int) -> None:
        self.live_rng_states = live
        self.peak_rng_states = max(self.peak_rng_states, live)


@dataclass(frozen=True)
class StepResult:
    record: ProjectionRecord | None
    loss_plus: float
    loss_minus: float

    @property
    def mean_loss(self) -> float:
        return 0.5 * (self.loss_plus + self.loss_minus)


def _decay_powers(beta: float, n: int) -> np.ndarray:
    """[beta^0, ..., beta^(n-1)] by iterated multiplication; shared by the
    frugal steps and the oracles so the scalars agree bit for bit."""
    out = np.empty(n)
    acc = 1.0
    for i in range(n):
        out[i] = acc
        acc *= beta
    return out


def beta_v(cfg: OptimizerConfig, effective_horizon: int | None = None) -> float:
    """Cancel factor for the truncated-moment ratio.

    'normalized' returns sqrt(S2)/S1 with S1 = sum(beta1^i), S2 = sum(beta2^i)
    over the effective horizon, which turns the raw truncated sums into the
    bias-corrected ratio m_hat / sqrt(v_hat + eps/S2) and reduces to 1 at
    h = 1. 'unit' returns 1 (kept for ablation).
    """
    if cfg.beta_v_mode == "unit":
        return 1.0
    n = cfg.h if effective_horizon is None else effective_horizon
    s1 = float(np.sum(_decay_powers(cfg.beta1, n)))
    s2 = float(np.sum(_decay_powers(cfg.beta2, n)))
    return math.sqrt(s2) / s1


def _displacement_coeffs(cfg: OptimizerConfig, recs: list[ProjectionRecord]) -> list[float]:
    # c_i = (-eta) * (beta1^i * p_i); one fixed evaluation order everywhere
    powers = _decay_powers(cfg.beta1, len(recs))
    return [(-cfg.eta) * (powers[i] * recs[i].projection) for i in range(len(recs))]


def _moment_coeffs(
    cfg: OptimizerConfig, recs: list[ProjectionRecord]
) -> tuple[list[float], list[float]]:
    # a_i = beta1^i * p_i for m, b_i = beta2^i * p_i^2 for v
    p1 = _decay_powers(cfg.beta1, len(recs))
    p2 = _decay_powers(cfg.beta2, len(recs))
    a = [p1[i] * recs[i].projection for i in range(len(recs))]
    b = [p2[i] * (recs[i].projection * recs[i].projection) for i in range(len(recs))]
    return a, b


# ---------------------------------------------------------------------------
# step functions


def mezo_step(
    w: np.ndarray,
    obj: Objective,
    batch: np.ndarray | None,
    cfg: OptimizerConfig,
    step: int,
    seed: int,
    partition: BlockPartition,
    counter: ForwardCounter | None = None,
) -> StepResult:
    """Plain SPSA step: w -= eta * p * z, applied in place block by block."""
    rec, lp, lm = spsa_projection(obj, w, batch, cfg.mu, seed, partition, counter, step)
    perturb_inplace(w, seed, -cfg.eta * rec.projection, partition)
    return StepResult(rec, lp, lm)


def hmezo_step(
    w: np.ndarray,
    obj: Objective,
    batch: np.ndarray | None,
    cfg: OptimizerConfig,
    step: int,
    buffer: HorizonBuffer,
    seed: int,
    partition: BlockPartition,
    counter: ForwardCounter | None = None,
    ledger: MemoryLedger | None = None,
) -> StepResult:
    """Truncated-momentum step over the last h records.

    The decayed sum sum_i beta1^i * p_i * z_i is accumulated into one
    block-sized delta (newest record first) and applied once per block, so
    the result matches a stored-momentum oracle bit for bit; each past z is
    regenerated block-wise from its seed.
    """
    rec, lp, lm = spsa_projection(obj, w, batch, cfg.mu, seed, partition, counter, step)
    buffer.append(rec)
    recs = buffer.newest_first()
    coeffs = _displacement_coeffs(cfg, recs)
    for start, length in partition.blocks:
        with _maybe_floats(ledger, length):
            delta = np.zeros(length)
            for c, r in zip(coeffs, recs):
                # one Gaussian per slot, so a block's stream offset is its start index
                z, _ = gaussian_block(rng_jump(rng_init(r.seed), start), length)
                delta += c * z
            w[start : start + length] += delta
    return StepResult(rec, lp, lm)


def adamezo_step(
    w: np.ndarray,
    obj: Objective,
    batch: np.ndarray | None,
    cfg: OptimizerConfig,
    step: int,
    buffer: HorizonBuffer,
    cache: StateCache,
    seed: int,
    partition: BlockPartition,
    counter: ForwardCounter | None = None,
    ledger: MemoryLedger | None = None,
) -> StepResult:
    """Adam-style step with moments rebuilt block-wise from cached states.

    Steps up to the warm-up budget are exactly plain steps (bit-identical to
    mezo_step under the same seeds). Afterwards, for each block: zero m and v
    of that block's size, loop records newest first, resume each seed's
    stream from the cached state (or its start for the first block), draw the
    block, save the advanced state, accumulate, then apply the preconditioned
    update to that block alone. Exactly two forward passes regardless of the
    number of blocks or the horizon.
    """
    if step <= cfg.warmup:
        result = mezo_step(w, obj, batch, cfg, step, seed, partition, counter)
        buffer.append(result.record)
        return result

    rec, lp, lm = spsa_projection(obj, w, batch, cfg.mu, seed, partition, counter, step)
    buffer.append(rec)
    recs = buffer.newest_first()
    n = len(recs)
    a, b = _moment_coeffs(cfg, recs)
    step_scale = cfg.eta * beta_v(cfg, effective_horizon=n)
    cache.reset()
    for b_idx, (start, length) in enumerate(partition.blocks):
        with _maybe_floats(ledger, 2 * length):
            m = np.zeros(length)
            v = np.zeros(length)
            for i in range(n):
                if b_idx == 0:
                    state: RngState | None = rng_init(recs[i].seed)
                else:
                    state = cache.get(i, b_idx - 1)
                    if state is None:
                        raise RuntimeError(f"state cache missing entry ({i}, {b_idx - 1})")
                z, advanced = gaussian_block(state, length)
                cache.set(i, b_idx, advanced)
                m += a[i] * z
                v += b[i] * (z * z)
            w[start : start + length] -= step_scale * (m / np.sqrt(v + cfg.epsilon))
        if ledger is not None:
            ledger.note_rng_states(cache.live_states)
    return StepResult(rec, lp, lm)


def reference_zo_adam_step(
    w: np.ndarray,
    obj: Objective,
    batch: np.ndarray | None,
    cfg: OptimizerConfig,
    step: int,
    buffer: HorizonBuffer,
    stored_m: np.ndarray,
    stored_v: np.ndarray,
    seed: int,
    partition: BlockPartition,
    counter: ForwardCounter | None = None,
) -> StepResult:
    """Stored-moment oracle for adamezo_step.

    Keeps full-dimension m and v in memory (2d floats) and rebuilds the
    truncated sums each step with whole-vector draws and no state caching.
    Same per-element arithmetic order as the frugal path, so parameters must
    agree bit for bit for the same seeds and config.
    """
    if step <= cfg.warmup:
        result = mezo_step(w, obj, batch, cfg, step, seed, partition, counter)
        buffer.append(result.record)
        return result

    rec, lp, lm = spsa_projection(obj, w, batch, cfg.mu, seed, partition, counter, step)
    buffer.append(rec)
    recs = buffer.newest_first()
    a, b = _moment_coeffs(cfg, recs)
    step_scale = cfg.eta * beta_v(cfg, effective_horizon=len(recs))
    stored_m[:] = 0.0
    stored_v[:] = 0.0
    for i, r in enumerate(recs):
        z, _ = gaussian_block(rng_init(r.seed), w.shape[0])
        stored_m += a[i] * z
        stored_v += b[i] * (z * z)
    w -= step_scale * (stored_m / np.sqrt(stored_v + cfg.epsilon))
    return StepResult(rec, lp, lm)


def stored_momentum_step(
    w: np.ndarray,
    obj: Objective,
    batch: np.ndarray | None,
    cfg: OptimizerConfig,
    step: int,
    buffer: HorizonBuffer,
    stored_delta: np.ndarray,
    seed: int,
    partition: BlockPartition,
    counter: ForwardCounter | None = None,
) -> StepResult:
    """Stored-momentum oracle for hmezo_step: the decayed displacement
    -eta * sum_i beta1^i * p_i * z_i is held as one full-dimension vector,
    rebuilt each step from whole-vector draws, and applied in one shot."""
    rec, lp, lm = spsa_projection(obj, w, batch, cfg.mu, seed, partition, counter, step)
    buffer.append(rec)
    recs = buffer.newest_first()
    coeffs = _displacement_coeffs(cfg, recs)
    stored_delta[:] = 0.0
    for c, r in zip(coeffs, recs):
        z, _ = gaussian_block(rng_init(r.seed), w.shape[0])
        stored_delta += c * z
    w += stored_delta
    return StepResult(rec, lp, lm)


def first_order_adam_step(
    w: np.ndarray,
    obj: Objective,
    cfg: OptimizerConfig,
    step: int,
    stored_m: np.ndarray,
    stored_v: np.ndarray,
) -> None:
    """Textbook Adam on the analytic gradient (EMA moments, bias correction,
    epsilon outside the square root)."""
    g = grad_exact(obj, w)
    stored_m *= cfg.beta1
    stored_m += (1.0 - cfg.beta1) * g
    stored_v *= cfg.beta2
    stored_v += (1.0 - cfg.beta2) * (g * g)
    m_hat = stored_m / (1.0 - cfg.beta1**step)
    v_hat = stored_v / (1.0 - cfg.beta2**step)
    w -= cfg.eta * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


@contextmanager
def _maybe_floats(ledger: MemoryLedger | None, n: int):
    if ledger is None:
        yield
    else:
        with ledger.floats(n):
            yield


# ---------------------------------------------------------------------------
# harness-facing wrappers


class _OptimizerBase:
    kind = "base"

    def __init__(self, cfg: OptimizerConfig, dimension: int, ledger: MemoryLedger | None = None):
        self.cfg = cfg
        self.dimension = dimension
        self.partition = cfg.resolve_partition(dimension)
        self.ledger = ledger if ledger is not None else MemoryLedger()

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        raise NotImplementedError


class Mezo(_OptimizerBase):
    kind = "mezo"

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        return mezo_step(w, obj, batch, self.cfg, step_idx, seed, self.partition, counter)


class HMezo(_OptimizerBase):
    kind = "hmezo"

    def __init__(self, cfg, dimension, ledger=None):
        super().__init__(cfg, dimension, ledger)
        self.buffer = HorizonBuffer(cfg.h)

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        return hmezo_step(
            w, obj, batch, self.cfg, step_idx, self.buffer, seed, self.partition,
            counter, self.ledger,
        )

    def save_state(self) -> str:
        return serialize_optimizer_state(self.buffer, cache=None)

    def load_state(self, payload: str) -> None:
        self.buffer, _ = deserialize_optimizer_state(payload, h=self.cfg.h)


class AdaMezo(_OptimizerBase):
    kind = "adamezo"

    def __init__(self, cfg, dimension, ledger=None):
        super().__init__(cfg, dimension, ledger)
        self.buffer = HorizonBuffer(cfg.h)
        self.cache = StateCache(cfg.h, self.partition.block_count)

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        return adamezo_step(
            w, obj, batch, self.cfg, step_idx, self.buffer, self.cache, seed,
            self.partition, counter, self.ledger,
        )

    def save_state(self) -> str:
        return serialize_optimizer_state(self.buffer, cache=self.cache)

    def load_state(self, payload: str) -> None:
        self.buffer, cache = deserialize_optimizer_state(payload, h=self.cfg.h)
        if cache is not None:
            self.cache = cache


class ReferenceZoAdam(_OptimizerBase):
    kind = "reference_zo_adam"

    def __init__(self, cfg, dimension, ledger=None):
        super().__init__(cfg, dimension, ledger)
        self.buffer = HorizonBuffer(cfg.h)
        # full-dimension moments held for the whole run: the 2d-float cost
        # the frugal path exists to avoid
        self.ledger.claim_floats(2 * dimension)
        self.stored_m = np.zeros(dimension)
        self.stored_v = np.zeros(dimension)

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        return reference_zo_adam_step(
            w, obj, batch, self.cfg, step_idx, self.buffer, self.stored_m,
            self.stored_v, seed, self.partition, counter,
        )


class StoredMomentum(_OptimizerBase):
    kind = "stored_momentum"

    def __init__(self, cfg, dimension, ledger=None):
        super().__init__(cfg, dimension, ledger)
        self.buffer = HorizonBuffer(cfg.h)
        self.ledger.claim_floats(dimension)
        self.stored_delta = np.zeros(dimension)

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        return stored_momentum_step(
            w, obj, batch, self.cfg, step_idx, self.buffer, self.stored_delta,
            seed, self.partition, counter,
        )


class FirstOrderAdam(_OptimizerBase):
    kind = "first_order_adam"

    def __init__(self, cfg, dimension, ledger=None):
        super().__init__(cfg, dimension, ledger)
        self.ledger.claim_floats(2 * dimension)
        self.stored_m = np.zeros(dimension)
        self.stored_v = np.zeros(dimension)
        self._t = 0

    def step(self, w, obj, batch, step_idx, seed, counter=None) -> StepResult:
        loss = eval_loss(obj, w, batch, counter)
        self._t += 1
        first_order_adam_step(w, obj, self.cfg, self._t, self.stored_m, self.stored_v)
        return StepResult(record=None, loss_plus=loss, loss_minus=loss)


OPTIMIZERS = {
    cls.kind: cls
    for cls in (Mezo, HMezo, AdaMezo, ReferenceZoAdam, StoredMomentum, FirstOrderAdam)
}


def make_optimizer(
    kind: str, cfg: OptimizerConfig, dimension: int, ledger: MemoryLedger | None = None
) -> _OptimizerBase:
    if kind not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {kind!r}; choose from {sorted(OPTIMIZERS)}")
    return OPTIMIZERS[kind](cfg, dimension, ledger)


# ---------------------------------------------------------------------------
# checkpointing


def serialize_optimizer_state(buffer: HorizonBuffer, cache: StateCache | None) -> str:
    records = buffer.records()
    payload = {
        "step": records[-1].step if records else 0,
        "records": [
            {"step": r.step, "seed": r.seed, "projection": r.projection} for r in records
        ],
        "cache": cache.to_jsonable() if cache is not None else None,
    }
    return json.dumps(payload)


def deserialize_optimizer_state(
    payload: str, h: int
) -> tuple[HorizonBuffer, StateCache | None]:
    data = json.loads(payload)
    buffer = HorizonBuffer(h)
    for entry in data["records"]:
        buffer.append(
            ProjectionRecord(
                step=entry["step"], seed=entry["seed"], projection=entry["projection"]
            )
        )
    cache = StateCache.from_jsonable(data["cache"]) if data["cache"] is not None else None
    return buffer, cache
