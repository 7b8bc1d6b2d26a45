"""Minibatch Adam training of the schedule surrogate, plus its metrics.

The optimization loss is mean squared error over the batch outputs; epoch
rows restate it over the full train/validation splits (the dataset-level
normalization, count x n_points).  The relative-error metric averages
|pred - target| / target over admissible indices only (target > 1e-6), which
always excludes the s = 0 sample.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import ising
from ..schedule import Schedule, schedule_from_prediction
from .dataset import Dataset
from .lstm import LstmModel, backward, forward, forward_batch, init_model

MRE_TARGET_FLOOR = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    architecture: tuple = (64, 64)
    dropout_rate: float = 0.2
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 100
    validation_fraction: float = 0.2
    seed: int = 0
    monotonize_predictions: bool = False

    def __post_init__(self):
        # learning_rate 0 is legal: it freezes the weights, which gives a
        # cheap no-op training run for plumbing checks.
        if not (self.learning_rate >= 0 and self.batch_size > 0
                and self.epochs > 0 and self.adam_eps > 0):
            raise ValueError("batch size, epochs, eps must be positive; "
                             "learning rate nonnegative")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie strictly in (0, 1)")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float
    train_mre: float
    val_mre: float


def loss_mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared errors over every output of every record."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError("prediction/target shape mismatch")
    return float(np.mean((pred - target) ** 2))


def metric_mre(pred: np.ndarray, target: np.ndarray,
               target_floor: float = MRE_TARGET_FLOOR) -> float:
    """Mean relative error over indices whose target exceeds the floor."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.ndim != 1:
        raise ValueError("metric_mre expects matching 1-d arrays")
    admissible = target > target_floor
    if not np.any(admissible):
        raise ValueError("no admissible target indices above the floor")
    return float(np.mean(np.abs(pred[admissible] - target[admissible])
                         / target[admissible]))


def mean_mre(pred_matrix: np.ndarray, target_matrix: np.ndarray) -> float:
    """Dataset-level MRE: mean of the per-record metric."""
    return float(np.mean([metric_mre(p, t)
                          for p, t in zip(pred_matrix, target_matrix)]))


def split_indices(n_records: int, validation_fraction: float,
                  seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffle split; the two index sets are disjoint."""
    if n_records < 2:
        raise ValueError("need at least two records to split")
    n_val = int(round(validation_fraction * n_records))
    n_val = min(max(n_val, 1), n_records - 1)
    order = np.random.default_rng(seed).permutation(n_records)
    val_idx, train_idx = order[:n_val], order[n_val:]
    assert not set(val_idx) & set(train_idx)
    return np.sort(train_idx), np.sort(val_idx)


class _Adam:
    """Standard Adam over a fixed-order list of parameter arrays."""

    def __init__(self, params: list, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list, grads: list) -> None:
        cfg = self.cfg
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def _batched_outputs(model: LstmModel, tokens: np.ndarray,
                     batch: int = 256) -> np.ndarray:
    outs = [forward_batch(model, tokens[k:k + batch])
            for k in range(0, len(tokens), batch)]
    return np.concatenate(outs, axis=0)


def train(dataset: Dataset, config: TrainConfig) -> tuple[LstmModel, list]:
    """Train a surrogate on the dataset; returns (model, history rows).

    Deterministic for a fixed config seed: the split, the epoch shuffles, the
    dropout masks, and the weight init all derive from it.  A non-finite loss
    aborts training and returns the last epoch-end checkpoint.
    """
    dataset.validate()
    tokens = dataset.feature_matrix()
    targets = dataset.target_matrix()
    n_out = targets.shape[1]

    train_idx, val_idx = split_indices(len(dataset), config.validation_fraction,
                                       config.seed)
    x_train, y_train = tokens[train_idx], targets[train_idx]
    x_val, y_val = tokens[val_idx], targets[val_idx]

    model = init_model(config.architecture, n_outputs=n_out,
                       dropout_rate=config.dropout_rate, seed=config.seed)
    adam = _Adam(model.parameters(), config)
    shuffle_rng = np.random.default_rng(config.seed + 1)
    mask_seed_rng = np.random.default_rng(config.seed + 2)

    history: list = []
    checkpoint = model.copy()
    n_train = len(x_train)
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n_train)
        diverged = False
        for start in range(0, n_train, config.batch_size):
            sel = order[start:start + config.batch_size]
            xb, yb = x_train[sel], y_train[sel]
            out, cache = forward_batch(
                model, xb, training_mode=True,
                dropout_seed=int(mask_seed_rng.integers(2 ** 63)),
                want_cache=True)
            if not np.all(np.isfinite(out)):
                diverged = True
                break
            d_out = 2.0 * (out - yb) / out.size
            grads = backward(model, cache, d_out)
            adam.step(model.parameters(), grads.parameters())
        if not diverged:
            train_pred = _batched_outputs(model, x_train)
            val_pred = _batched_outputs(model, x_val)
            stats = EpochStats(
                epoch,
                loss_mse(train_pred, y_train), loss_mse(val_pred, y_val),
                mean_mre(train_pred, y_train), mean_mre(val_pred, y_val))
            diverged = not all(np.isfinite([stats.train_mse, stats.val_mse,
                                            stats.train_mre, stats.val_mre]))
        if diverged:
            model = checkpoint  # roll back to the last finite epoch
            break
        history.append(stats)
        checkpoint = model.copy()
    return model, history


def predict(model: LstmModel, instance: "ising.IsingInstance",
            layout: "ising.Topology", t_f: float,
            monotonize: bool = False) -> Schedule:
    """Predict the schedule for an instance embedded into a layout.

    t_f must come from the instance's own locally adiabatic computation; the
    network only predicts the 500-sample shape.
    """
    features = ising.feature_vector(instance, layout)
    outputs = forward(model, features)
    return schedule_from_prediction(outputs, t_f, monotonize=monotonize)


def history_to_csv(history: list, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse", "train_mre", "val_mre"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_mse), repr(row.val_mse),
                             repr(row.train_mre), repr(row.val_mre)])
