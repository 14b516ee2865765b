"""Feed-forward binary classifier over the 5-dimensional collider state.

Architecture 5 -> 32 -> 32 -> 1 (ReLU hidden, sigmoid output), trained by
minibatch SGD on binary cross-entropy with validation-based snapshot
selection.  Inputs are standardized with a fixed affine map derived from
the declared input-space ranges, so the training and operating pipelines
cannot drift apart.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

#: Per-dimension input-space ranges: relative position (x1, x2), heading,
#: speed, angular velocity.
INPUT_RANGES = (
    (-10.0, 10.0),
    (0.0, 10.0),
    (0.0, 2.0 * math.pi),
    (0.0, 2.0),
    (-math.pi / 2.0, math.pi / 2.0),
)

LAYER_SIZES = (5, 32, 32, 1)


class PerceptionError(Exception):
    pass


@dataclass(frozen=True)
class Sample:
    x: tuple                 # 5 floats
    y: int                   # class in {0, 1}


@dataclass
class Dataset:
    """Ordered multiset of samples with a role tag."""

    samples: list
    role: str = "train"      # train | val | confusion | test | window

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def matrix(self):
        X = np.array([s.x for s in self.samples], dtype=float)
        y = np.array([s.y for s in self.samples], dtype=float)
        return X, y

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "x3", "x4", "x5", "y"])
            for s in self.samples:
                writer.writerow(list(s.x) + [s.y])

    @classmethod
    def read_csv(cls, path, role="train"):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            samples = [Sample(tuple(float(v) for v in row[:5]), int(row[5]))
                       for row in reader if row]
        return cls(samples, role)


def standardize(X):
    """Affine map of raw inputs to [-1, 1] per dimension (fixed ranges)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lo = np.array([r[0] for r in INPUT_RANGES])
    hi = np.array([r[1] for r in INPUT_RANGES])
    return 2.0 * (X - lo) / (hi - lo) - 1.0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise PerceptionError("learning rate must be positive")
        if self.epochs < 1:
            raise PerceptionError("need at least one epoch")


class MLPParams:
    """Immutable snapshot of layer weights/biases."""

    def __init__(self, weights, biases):
        self.weights = tuple(np.array(w, dtype=float) for w in weights)
        self.biases = tuple(np.array(b, dtype=float) for b in biases)
        for w, b in zip(self.weights, self.biases):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise PerceptionError("non-finite parameters")

    @classmethod
    def init_random(cls, seed, sizes=LAYER_SIZES):
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            scale = math.sqrt(2.0 / n_in)
            weights.append(rng.normal(0.0, scale, size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes=LAYER_SIZES):
        weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(b) for b in sizes[1:]]
        return cls(weights, biases)

    def save(self, path):
        arrays = {"sizes": np.array(LAYER_SIZES)}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path):
        data = np.load(path)
        n = len([k for k in data.files if k.startswith("w")])
        return cls([data[f"w{i}"] for i in range(n)], [data[f"b{i}"] for i in range(n)])


def _forward_pass(params, X):
    """Returns (activations per layer, output probabilities)."""
    acts = [X]
    h = X
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if i < n_layers - 1:
            h = np.maximum(z, 0.0)
        else:
            # clipped for numerical safety; output stays in (0, 1)
            h = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        acts.append(h)
    return acts, h


def forward(params, x):
    """Probability of class 1 for a single raw input."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise PerceptionError("non-finite input")
    _, out = _forward_pass(params, standardize(x))
    return float(out[0, 0])


def _bce_loss(p, y, eps=1e-12):
    p = np.clip(p, eps, 1.0 - eps)
    return float(np.mean(-y * np.log(p) - (1.0 - y) * np.log(1.0 - p)))


def loss_and_gradients(params, X_std, y):
    """Mean BCE loss and its gradients w.r.t. every weight and bias.

    X_std must already be standardized.
    """
    acts, p = _forward_pass(params, X_std)
    n = len(y)
    loss = _bce_loss(p[:, 0], y)
    eps = 1e-12
    p_clip = np.clip(p[:, 0], eps, 1.0 - eps)
    # d loss / d z_out for sigmoid + BCE, with the clip's dead zone respected
    dz = ((p_clip - y) / n)[:, None]
    grads_w, grads_b = [], []
    for i in reversed(range(len(params.weights))):
        grads_w.append(acts[i].T @ dz)
        grads_b.append(dz.sum(axis=0))
        if i > 0:
            dh = dz @ params.weights[i].T
            dz = dh * (acts[i] > 0.0)
    return loss, list(reversed(grads_w)), list(reversed(grads_b))


def dataset_loss(params, dataset):
    X, y = dataset.matrix()
    _, p = _forward_pass(params, standardize(X))
    return _bce_loss(p[:, 0], y)


def best_epoch(losses):
    """Index of the minimal validation loss; ties go to the earliest epoch."""
    if not losses:
        raise PerceptionError("no epochs recorded")
    best = 0
    for i, loss in enumerate(losses):
        if loss < losses[best]:
            best = i
    return best


def train(init, train_set, val_set, cfg):
    """SGD with per-epoch validation; returns the snapshot with the lowest
    validation loss (ties resolved toward the earliest epoch)."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise PerceptionError("training and validation sets must be nonempty")
    params = init if isinstance(init, MLPParams) else MLPParams.init_random(init)
    rng = np.random.default_rng(cfg.seed)
    X, y = train_set.matrix()
    X = standardize(X)
    n = len(y)
    losses, snapshots = [], []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_gradients(params, X[batch], y[batch])
            if not math.isfinite(loss):
                raise PerceptionError("training diverged (non-finite loss)")
            params = MLPParams(
                [w - cfg.learning_rate * g for w, g in zip(params.weights, gw)],
                [b - cfg.learning_rate * g for b, g in zip(params.biases, gb)])
        val_loss = dataset_loss(params, val_set)
        if not math.isfinite(val_loss):
            raise PerceptionError("training diverged (non-finite validation loss)")
        losses.append(val_loss)
        snapshots.append(params)
    return snapshots[best_epoch(losses)]


class MLPPredictor:
    """Hard-label wrapper around an MLP snapshot (threshold 0.5)."""

    def __init__(self, params):
        self.params = params

    def predict(self, x):
        return 1 if forward(self.params, x) >= 0.5 else 0

    def predict_batch(self, X):
        _, p = _forward_pass(self.params, standardize(X))
        return (p[:, 0] >= 0.5).astype(int)


class RandomGuessPredictor:
    """Seeded coin-flip baseline; ignores its input."""

    def __init__(self, seed):
        self._rng = np.random.default_rng(seed)

    def predict(self, x):
        return int(self._rng.integers(0, 2))


def random_guess_predictor(seed):
    return RandomGuessPredictor(seed)


# ---------------------------------------------------------------------------
# Dataset bookkeeping for the repair round
# ---------------------------------------------------------------------------

CE_ROLES = ("train", "val", "confusion", "test")


def split_counterexamples(ce, ratios, seed=0):
    """Shuffle and split a counterexample set into the four dataset roles.

    Sizes are floor(ratio * n); the remainder goes to the earliest roles.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise PerceptionError(f"split ratios sum to {sum(ratios)}, expected 1")
    if len(ratios) != 4:
        raise PerceptionError("expected four split ratios")
    rng = np.random.default_rng(seed)
    samples = list(ce.samples)
    order = rng.permutation(len(samples))
    samples = [samples[i] for i in order]
    n = len(samples)
    sizes = [int(math.floor(r * n)) for r in ratios]
    remainder = n - sum(sizes)
    for i in range(remainder):
        sizes[i % 4] += 1
    parts = []
    offset = 0
    for size, role in zip(sizes, CE_ROLES):
        parts.append(Dataset(samples[offset:offset + size], role))
        offset += size
    return tuple(parts)


def merge_datasets(base, ce_part):
    """Multiset append (base first); role tags must match."""
    if base.role != ce_part.role:
        raise PerceptionError(f"role mismatch: {base.role} vs {ce_part.role}")
    return Dataset(list(base.samples) + list(ce_part.samples), base.role)


def sample_dataset(src, n, seed):
    """Uniform resample to exactly n samples.

    Without replacement when n <= |src|; otherwise all of src plus a
    uniform-with-replacement remainder.
    """
    if len(src) == 0:
        raise PerceptionError("cannot sample from an empty dataset")
    rng = np.random.default_rng(seed)
    if n <= len(src):
        idx = rng.choice(len(src), size=n, replace=False)
    else:
        extra = rng.choice(len(src), size=n - len(src), replace=True)
        idx = np.concatenate([np.arange(len(src)), extra])
    return Dataset([src.samples[i] for i in idx], src.role)
