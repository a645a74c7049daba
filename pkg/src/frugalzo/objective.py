"""Loss objectives: 2-D toy landscapes, diagonal quadratics, and a synthetic
logistic-regression task that stands in for batched training.

Evaluation is a pure function of (weights, batch) and everything is float64;
toy objectives ignore the batch so every optimizer shares one code path.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rng import RngState, gaussian_block, uniform_block

# a batch is an index array into the dataset; None means the full train split


class DivergenceError(RuntimeError):
    """Loss came back non-finite."""


class UnsupportedObjectiveError(RuntimeError):
    """Operation needs a capability this objective does not provide."""


class ForwardCounter:
    """Tallies forward passes; incremented once per loss evaluation and
    nowhere else. Training and eval-measurement passes are kept apart."""

    def __init__(self) -> None:
        self.train = 0
        self.eval_measures = 0

    def count(self, kind: str) -> None:
        if kind == "train":
            self.train += 1
        elif kind == "eval":
            self.eval_measures += 1
        else:
            raise ValueError(f"unknown forward-pass kind {kind!r}")

    @property
    def total(self) -> int:
        return self.train + self.eval_measures


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_train: int

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def train_indices(self) -> np.ndarray:
        return np.arange(self.n_train)

    def eval_indices(self) -> np.ndarray:
        return np.arange(self.n_train, self.n)


@dataclass(frozen=True)
class Objective:
    """Evaluator plus optional analytic gradient and dataset handle."""

    name: str
    dimension: int
    loss_fn: Callable[[np.ndarray, np.ndarray | None], float]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    dataset: Dataset | None = None
    default_init: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def eval_indices(self) -> np.ndarray | None:
        return self.dataset.eval_indices() if self.dataset is not None else None


def eval_loss(
    obj: Objective,
    w: np.ndarray,
    batch: np.ndarray | None = None,
    counter: ForwardCounter | None = None,
    kind: str = "train",
) -> float:
    """One forward pass. Raises DivergenceError on a non-finite loss."""
    if w.shape != (obj.dimension,):
        raise ValueError(f"expected weights of shape ({obj.dimension},), got {w.shape}")
    value = float(obj.loss_fn(w, batch))
    if counter is not None:
        counter.count(kind)
    if not np.isfinite(value):
        raise DivergenceError(f"{obj.name}: non-finite loss {value}")
    return value


def grad_exact(obj: Objective, w: np.ndarray) -> np.ndarray:
    if obj.grad_fn is None:
        raise UnsupportedObjectiveError(f"{obj.name} has no analytic gradient")
    return obj.grad_fn(w)


# ---------------------------------------------------------------------------
# toy landscapes


def _f1(w, _batch):
    x, y = w
    return 8.0 * (x - 1.0) ** 2 * (1.3 * x * x + 2.0 * x + 1.0) + 0.5 * (y - 4.0) ** 2


def _f1_grad(w):
    x, y = w
    gx = 16.0 * (x - 1.0) * (1.3 * x * x + 2.0 * x + 1.0) + 8.0 * (x - 1.0) ** 2 * (
        2.6 * x + 2.0
    )
    return np.array([gx, y - 4.0])


_BEALE_A = (1.5, 2.25, 2.625)


def _f2(w, _batch):
    x, y = w
    return sum((a - x + x * y**k) ** 2 for k, a in enumerate(_BEALE_A, start=1))


def _f2_grad(w):
    x, y = w
    gx = 0.0
    gy = 0.0
    for k, a in enumerate(_BEALE_A, start=1):
        t = a - x + x * y**k
        gx += 2.0 * t * (y**k - 1.0)
        gy += 2.0 * t * (x * k * y ** (k - 1))
    return np.array([gx, gy])


def _f3(w, _batch):
    x, y = w
    return 100.0 * x * x + y * y


def _f3_grad(w):
    return np.array([200.0 * w[0], 2.0 * w[1]])


_TOYS = {
    "f1": (_f1, _f1_grad, (0.2, 6.75)),
    "f2": (_f2, _f2_grad, (-1.0, -1.0)),
    "f3": (_f3, _f3_grad, (-1.0, 1.0)),
}


def make_toy(which: str) -> Objective:
    """f1 (quartic valley), f2 (Beale), or f3 (100x^2 + y^2), each with its
    analytic gradient and the initialization the landscapes are studied from."""
    if which not in _TOYS:
        raise ValueError(f"unknown toy objective {which!r}; choose from {sorted(_TOYS)}")
    loss, grad, init = _TOYS[which]
    return Objective(
        name=which,
        dimension=2,
        loss_fn=loss,
        grad_fn=grad,
        default_init=np.array(init),
    )


def make_quadratic(diag: np.ndarray, name: str = "quadratic") -> Objective:
    """0.5 * sum(c_i * w_i^2) with gradient c * w."""
    c = np.asarray(diag, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("diag must be a nonempty 1-D array")
    return Objective(
        name=name,
        dimension=c.size,
        loss_fn=lambda w, _b: 0.5 * float(np.dot(c, w * w)),
        grad_fn=lambda w: c * w,
        default_init=np.ones(c.size),
    )


# ---------------------------------------------------------------------------
# synthetic classification


def _logistic_loss(features, labels, w, rows):
    x = features if rows is None else features[rows]
    y = labels if rows is None else labels[rows]
    logits = x @ w
    # mean BCE; log(1 + e^s) - y*s, stable via logaddexp
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def make_synthetic_classification(
    d: int,
    n: int,
    seed: int,
    noise_scale: float = 0.3,
    train_fraction: float = 0.8,
    scale_spread: float = 20.0,
) -> Objective:
    """Binary logistic regression on a linearly-separable-with-noise dataset.

    Labels are the sign of a unit-variance margin plus Gaussian label noise.
    Feature columns carry log-spaced scales from 1 down to 1/scale_spread, so
    per-coordinate curvatures span a ~scale_spread^2 range: the heterogeneous
    landscape this task exists to stand in for (spread 1.0 recovers isotropic
    features). Deterministic given ``seed``. The first ``train_fraction`` of
    rows form the training pool, the rest the held-out eval split. Loss is
    the mean (not sum) over the batch so learning rates are batch-size
    invariant, and the analytic gradient is taken over the full training
    split.
    """
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    if scale_spread < 1.0:
        raise ValueError("scale_spread must be >= 1")
    flat, _ = gaussian_block(rng_init_for_dataset(seed, 0), n * d)
    raw = flat.reshape(n, d)
    scales = scale_spread ** (-np.linspace(0.0, 1.0, d))
    features = raw * scales
    direction, _ = gaussian_block(rng_init_for_dataset(seed, 3), d)
    direction = direction / np.linalg.norm(direction)
    noise, _ = gaussian_block(rng_init_for_dataset(seed, 4), n)
    # margins live in scaled feature space (normalized to unit variance), so
    # the optimum has bounded norm and the signal concentrates where the
    # curvature is: heterogeneous difficulty without data starvation
    margins = features @ direction
    margins = margins / np.sqrt(np.mean((scales * direction) ** 2) * d)
    labels = (margins + noise_scale * noise > 0.0).astype(np.float64)
    n_train = max(1, int(round(n * train_fraction)))
    dataset = Dataset(features=features, labels=labels, n_train=n_train)

    def loss_fn(w, rows):
        if rows is None:
            rows = dataset.train_indices()
        return _logistic_loss(features, labels, w, rows)

    def grad_fn(w):
        rows = dataset.train_indices()
        x = features[rows]
        y = labels[rows]
        logits = x @ w
        sigma = 1.0 / (1.0 + np.exp(-logits))
        return x.T @ (sigma - y) / rows.size

    return Objective(
        name=f"synthetic(d={d},n={n},seed={seed})",
        dimension=d,
        loss_fn=loss_fn,
        grad_fn=grad_fn,
        dataset=dataset,
        default_init=np.zeros(d),
    )


def rng_init_for_dataset(seed: int, subsequence: int) -> RngState:
    # dataset material lives on its own subsequences of the dataset seed
    return RngState(seed=seed, subsequence=subsequence, offset=0)


def sample_batch(
    obj: Objective, state: RngState, size: int
) -> tuple[np.ndarray | None, RngState]:
    """Uniform without-replacement sample of training rows.

    Toys have no dataset and return the degenerate full batch. Asking for the
    whole training split returns it in canonical order without consuming
    draws; otherwise a partial Fisher-Yates pass consumes exactly ``size``
    uniforms, so batch-stream offsets stay a pure function of the step count.
    """
    if obj.dataset is None:
        return None, state
    n = obj.dataset.n_train
    if n == 0:
        raise ValueError("dataset has no training rows")
    if size > n:
        raise ValueError(f"batch size {size} exceeds training rows {n}")
    if size == n:
        return obj.dataset.train_indices(), state
    u, state = uniform_block(state, size)
    pool = np.arange(n)
    for i in range(size):
        j = i + int(u[i] * (n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:size].copy(), state


# ---------------------------------------------------------------------------
# CSV round trip for cross-implementation regression tests


def export_dataset_csv(obj: Objective, path: str) -> None:
    if obj.dataset is None:
        raise UnsupportedObjectiveError(f"{obj.name} has no dataset to export")
    ds = obj.dataset
    header = [f"feature_{i}" for i in range(obj.dimension)] + ["label"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


def import_dataset_csv(path: str, train_fraction: float = 0.8) -> Objective:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "label" or not header[0].startswith("feature_"):
            raise ValueError(f"{path}: not a dataset CSV (header {header[:2]}...)")
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=np.float64)
    features, labels = data[:, :-1], data[:, -1]
    n = features.shape[0]
    n_train = max(1, int(round(n * train_fraction)))
    dataset = Dataset(features=features, labels=labels, n_train=n_train)

    def loss_fn(w, rows_):
        if rows_ is None:
            rows_ = dataset.train_indices()
        return _logistic_loss(features, labels, w, rows_)

    def grad_fn(w):
        idx = dataset.train_indices()
        x = features[idx]
        y = labels[idx]
        sigma = 1.0 / (1.0 + np.exp(-(x @ w)))
        return x.T @ (sigma - y) / idx.size

    return Objective(
        name=f"csv:{path}",
        dimension=features.shape[1],
        loss_fn=loss_fn,
        grad_fn=grad_fn,
        dataset=dataset,
        default_init=np.zeros(features.shape[1]),
    )
