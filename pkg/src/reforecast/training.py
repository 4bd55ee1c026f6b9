"""Shared mini-batch training loop for the gradient-based models.

Chronological train/validation split, seeded per-epoch shuffling without
replacement, Adam updates, early stopping on validation loss, and best-epoch
parameter restore. All sources of randomness derive from one seed so that
two runs with the same config produce identical loss histories.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Adam, Tape
from .errors import DivergedLoss, InvalidConfig


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    patience: int = 20
    val_fraction: float = 0.1
    seed: int = 0
    dropout: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidConfig("val_fraction must be in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidConfig("epochs and batch_size must be positive")

    def scaled_down(self):
        """Fallback config used when validation loss never improves."""
        return replace(self, lr=self.lr * 0.5)


@dataclass
class FitHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("inf")

    def to_dict(self):
        return {
            "train_loss": [float(v) for v in self.train_loss],
            "val_loss": [float(v) for v in self.val_loss],
            "best_epoch": int(self.best_epoch),
            "best_val": float(self.best_val),
        }


def chronological_split(n_rows, val_fraction):
    """First block trains, last block validates; at least one row each."""
    n_val = max(1, int(round(n_rows * val_fraction)))
    n_train = n_rows - n_val
    if n_train < 1:
        raise InvalidConfig(f"{n_rows} rows cannot support a validation split")
    return np.arange(n_train), np.arange(n_train, n_rows)


def fit_loop(params, batch_loss, n_rows, config, eval_loss=None):
    """Run the training loop.

    batch_loss(rows, rng) must return a scalar mean-per-row loss tensor for
    the given row indices; ``rng`` seeds dropout and is None at evaluation
    time. eval_loss(rows) defaults to batch_loss(rows, None) under no tape.
    Returns a FitHistory; params end at the best-validation epoch.
    """
    train_idx, val_idx = chronological_split(n_rows, config.val_fraction)
    if eval_loss is None:
        def eval_loss(rows):
            return float(batch_loss(rows, None).data)

    opt = Adam(params, lr=config.lr)
    history = FitHistory()
    best_snapshot = [p.data.copy() for p in params]
    since_best = 0
    root = np.random.SeedSequence(config.seed)

    for epoch in range(config.epochs):
        ss_epoch = np.random.SeedSequence(
            entropy=root.entropy, spawn_key=(epoch,)
        )
        shuffle_rng = np.random.default_rng(ss_epoch)
        order = train_idx[shuffle_rng.permutation(train_idx.size)]
        epoch_losses = []
        for start in range(0, order.size, config.batch_size):
            rows = order[start:start + config.batch_size]
            drop_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=root.entropy, spawn_key=(epoch, start))
            )
            opt.zero_grad()
            with Tape() as tape:
                loss = batch_loss(rows, drop_rng)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise DivergedLoss(f"training loss became {value} at epoch {epoch}")
                tape.backward(loss)
            opt.step()
            epoch_losses.append(value)
        history.train_loss.append(float(np.mean(epoch_losses)))

        val = eval_loss(val_idx)
        if not np.isfinite(val):
            raise DivergedLoss(f"validation loss became {val} at epoch {epoch}")
        history.val_loss.append(val)
        if val < history.best_val:
            history.best_val = val
            history.best_epoch = epoch
            best_snapshot = [p.data.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break

    for p, snap in zip(params, best_snapshot):
        p.data = snap
    return history
