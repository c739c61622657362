"""
Training loop for the residual network

Mini-batch Adam with a step learning-rate schedule, class-weighted
cross-entropy and circular-shift augmentation. Every random draw comes from
generators derived from the run seed, so equal seeds give equal models.
"""

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import Config
from .epochs import Epoch
from .errors import BatchTooSmall, EmptyClass, NonFiniteLogit, NonFiniteLoss, UsageError
from .nn import AdamState, adam_step, weighted_softmax_ce
from .resnet import DropoutLayer, Model
from .seeds import make_rng

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "lr", "loss", "train_acc", "val_acc", "seconds"]


@dataclass
class TrainConfig:
    max_lr: float = 0.001
    lr_decay_every: int = 10
    lr_decay_factor: float = 10.0
    batch_size: int = 64
    num_epochs: int = 30
    seed: int = 0
    augmentation: bool = True
    keep_prob: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_batch_size: int = 128

    def __post_init__(self):
        if not self.max_lr > 0:
            raise UsageError(f"max_lr must be positive, got {self.max_lr}")
        if self.batch_size < 2:
            raise UsageError(f"batch_size must be at least 2, got {self.batch_size}")
        if not self.lr_decay_factor > 1:
            raise UsageError(f"lr_decay_factor must exceed 1, got {self.lr_decay_factor}")
        if self.lr_decay_every < 1:
            raise UsageError(f"lr_decay_every must be at least 1, got {self.lr_decay_every}")
        if self.num_epochs < 0:
            raise UsageError(f"num_epochs must be >= 0, got {self.num_epochs}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise UsageError(f"keep_prob must be in (0, 1], got {self.keep_prob}")

    @classmethod
    def from_config(cls, config: Config) -> "TrainConfig":
        return cls(**{name: config[name] for name in cls.__dataclass_fields__})

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"Unknown training keys: {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss: float
    train_acc: float
    val_acc: Optional[float]
    seconds: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)

    @property
    def lrs(self) -> List[float]:
        return [r.lr for r in self.records]

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(HISTORY_COLUMNS)
            for r in self.records:
                writer.writerow(
                    [
                        r.epoch,
                        repr(r.lr),
                        repr(r.loss),
                        repr(r.train_acc),
                        "" if r.val_acc is None else repr(r.val_acc),
                        f"{r.seconds:.3f}",
                    ]
                )


def compute_class_weights(labels: Sequence[int], num_classes: int) -> np.ndarray:
    """w_c = N / (K * n_c); all ones when classes are balanced"""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=num_classes)
    if counts.size > num_classes:
        raise UsageError(f"Labels exceed the {num_classes}-class range")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyClass(f"No training examples for class index {', '.join(map(str, empty))}")
    return counts.sum() / (num_classes * counts.astype(np.float64))


def rolling_shift(samples: np.ndarray, shift: int) -> np.ndarray:
    """Circular rotation; shift 1 moves the last sample to the front"""
    return np.roll(samples, shift)


def lr_at(epoch_index: int, cfg: TrainConfig) -> float:
    return cfg.max_lr / cfg.lr_decay_factor ** (epoch_index // cfg.lr_decay_every)


def _batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Split an ordering into batches; a trailing batch of one joins its neighbour"""
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def stack_epochs(epochs: Sequence[Epoch]) -> Tuple[np.ndarray, np.ndarray]:
    """(samples as float32 (n, width), labels (n,))"""
    if not epochs:
        return np.zeros((0, 0), dtype=np.float32), np.zeros(0, dtype=np.int64)
    x = np.stack([np.asarray(e.samples, dtype=np.float32) for e in epochs])
    y = np.array([e.label for e in epochs], dtype=np.int64)
    return x, y


def accuracy(model: Model, x: np.ndarray, y: np.ndarray, batch_size: int = 128) -> float:
    if len(y) == 0:
        return 0.0
    return float(np.mean(model.predict(x, batch_size) == y))


def train_arrays(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    validation: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[Model, TrainHistory]:
    """
    Train on in-memory arrays

    Args:
        model: Freshly built or partially trained model, updated in place
        x: Epoch samples, shape (n, width)
        y: Class indices, shape (n,)
        cfg: Training hyperparameters
        validation: Optional (x, y) scored after each epoch, never used to steer training

    Returns:
        The trained model and its per-epoch history
    """
    n = len(y)
    if n < 2:
        raise BatchTooSmall(f"Training needs at least 2 examples, got {n}")
    width = x.shape[1]
    weights = compute_class_weights(y, model.num_classes)
    logger.debug(f"Class weights: {np.round(weights, 4).tolist()}")

    for layer in model.layers.values():
        if isinstance(layer, DropoutLayer):
            layer.keep_prob = cfg.keep_prob

    shuffle_rng = make_rng(cfg.seed, "shuffle")
    shift_rng = make_rng(cfg.seed, "shift")
    dropout_rng = make_rng(cfg.seed, "dropout")
    adam = AdamState(lr=cfg.max_lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    params = model.parameters()
    history = TrainHistory()

    for e in range(cfg.num_epochs):
        start = time.perf_counter()
        adam.lr = lr_at(e, cfg)
        order = shuffle_rng.permutation(n)
        total_loss = 0.0
        correct = 0

        for batch in _batches(order, cfg.batch_size):
            xb = x[batch].astype(np.float64)
            yb = y[batch]
            if cfg.augmentation:
                shifts = shift_rng.integers(0, width, size=len(batch))
                xb = np.stack([rolling_shift(row, int(s)) for row, s in zip(xb, shifts)])

            logits = model.forward_logits(xb, train=True, rng=dropout_rng)
            try:
                loss, grad = weighted_softmax_ce(logits, yb, weights)
            except NonFiniteLogit:
                loss, grad = float("nan"), None
            if grad is None or not np.isfinite(loss):
                logger.error(f"Non-finite loss in training epoch {e}, batch indices {batch.tolist()}")
                raise NonFiniteLoss(f"Loss became non-finite in training epoch {e}")

            model.backward(grad)
            adam_step(params, model.gradients(), adam)
            total_loss += loss * len(batch)
            correct += int(np.sum(np.argmax(logits, axis=1) == yb))

        val_acc = None
        if validation is not None:
            val_acc = accuracy(model, validation[0], validation[1], cfg.eval_batch_size)
        record = EpochRecord(
            epoch=e,
            lr=adam.lr,
            loss=total_loss / n,
            train_acc=correct / n,
            val_acc=val_acc,
            seconds=time.perf_counter() - start,
        )
        history.records.append(record)
        val_text = "" if val_acc is None else f" val_acc={val_acc:.4f}"
        logger.info(
            f"Epoch {e + 1}/{cfg.num_epochs} lr={record.lr:g} loss={record.loss:.4f} "
            f"train_acc={record.train_acc:.4f}{val_text} ({record.seconds:.1f}s)"
        )

    model.training_metadata.update(
        {
            "seed": cfg.seed,
            "epoch": cfg.num_epochs,
            "lr": history.lrs[-1] if history.records else cfg.max_lr,
            "keep_prob": cfg.keep_prob,
        }
    )
    return model, history


def train(
    model: Model,
    train_epochs: Sequence[Epoch],
    cfg: TrainConfig,
    validation: Optional[Sequence[Epoch]] = None,
) -> Tuple[Model, TrainHistory]:
    """Train on labelled epochs; see train_arrays"""
    x, y = stack_epochs(train_epochs)
    val = stack_epochs(validation) if validation else None
    logger.info(f"Training on {len(y)} epochs for {cfg.num_epochs} training epochs")
    return train_arrays(model, x, y, cfg, val)
