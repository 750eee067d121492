"""Training loop: sampling, batching, clipping, scheduling, early stopping.

Everything is driven by the config seed through named child streams, so a
given TrainConfig reproduces the same history and weights bit for bit on
the same machine and BLAS thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from emocert.nn.architectures import build_model
from emocert.nn.losses import LossSpec, loss_eval, one_hot, wce_softmax_grad
from emocert.nn.network import ModelSpec, Network, Parameters
from emocert.nn.optim import AdamW, RMSprop, clip_gradients
from emocert.nn.schedules import CosineWarmRestarts, ReduceOnPlateau
from emocert.rng import Rng, derive_seed


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class OptimizerConfig:
    variant: str  # "rmsprop" | "adamw"
    lr: float
    alpha: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass(frozen=True)
class SchedulerConfig:
    variant: str  # "reduce_on_plateau" | "cosine_warm_restarts"
    factor: float = 0.5
    patience: int = 2
    min_lr: float = 1e-6
    eta_min: float = 0.0
    t_0: int = 10
    t_mult: int = 2


@dataclass(frozen=True)
class TrainConfig:
    arch_id: str
    loss: LossSpec
    optimizer: OptimizerConfig
    scheduler: SchedulerConfig | None
    max_epochs: int = 100
    batch_size: int = 64
    clip_max_norm: float = 1.0
    sampler: str = "uniform"  # "uniform" | "weighted"
    patience: int = 10  # early stopping, on validation loss
    seed: int = 0
    epoch_size: int | None = None  # samples drawn per epoch; None = dataset size

    def __post_init__(self):
        if self.clip_max_norm <= 0:
            raise ValueError("clip_max_norm must be > 0")
        if self.sampler not in ("uniform", "weighted"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.epoch_size is not None and self.epoch_size < 1:
            raise ValueError("epoch_size must be >= 1")


def default_train_config(arch_id: str, seed: int = 0, class_weights=None, **overrides) -> TrainConfig:
    """Stock configuration for each architecture.

    baseline: cosine proximity, RMSprop lr 5e-4, reduce-on-plateau, uniform
    sampling, early-stop patience 3.  enhanced: weighted cross-entropy,
    AdamW lr 1e-3 / decay 0.01, cosine warm restarts, weighted sampling,
    early-stop patience 10.  Gradient clipping at norm 1.0 for both.
    """
    if arch_id == "baseline":
        cfg = TrainConfig(
            arch_id="baseline",
            loss=LossSpec("cosine_proximity"),
            optimizer=OptimizerConfig("rmsprop", lr=5e-4),
            scheduler=SchedulerConfig("reduce_on_plateau"),
            sampler="uniform",
            patience=3,
            seed=seed,
        )
    elif arch_id == "enhanced":
        weights = tuple(class_weights) if class_weights is not None else (1.0, 1.0, 1.0, 1.0)
        cfg = TrainConfig(
            arch_id="enhanced",
            loss=LossSpec("weighted_cross_entropy", class_weights=weights),
            optimizer=OptimizerConfig("adamw", lr=1e-3),
            scheduler=SchedulerConfig("cosine_warm_restarts"),
            sampler="weighted",
            patience=10,
            seed=seed,
        )
    else:
        raise ValueError(f"unknown arch_id {arch_id!r}")
    return replace(cfg, **overrides) if overrides else cfg


def class_weights_from_labels(labels: np.ndarray, num_classes: int = 4) -> tuple[float, ...]:
    """w_c = total / (num_classes * count_c); requires every class present."""
    counts = np.bincount(np.asarray(labels), minlength=num_classes)
    if (counts == 0).any():
        missing = [int(c) for c in np.flatnonzero(counts == 0)]
        raise ValueError(f"classes {missing} have no samples; cannot compute class weights")
    total = counts.sum()
    return tuple(float(total / (num_classes * c)) for c in counts)


def weighted_sample_indices(labels, n: int, rng: Rng) -> np.ndarray:
    """n indices drawn with replacement, P(i) proportional to 1/count(class_i)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("labels must be nonempty")
    counts = np.bincount(labels)
    present = counts[labels]
    if (present == 0).any():  # cannot happen for bincount of labels, kept for clarity
        raise ValueError("every class must be present at least once")
    weights = 1.0 / present
    cum = np.cumsum(weights)
    u = rng.uniform_array(n, 0.0, float(cum[-1]))
    return np.searchsorted(cum, u, side="right").clip(0, labels.size - 1)


@dataclass
class EarlyStopping:
    """Tracks the best validation metric (lower is better) and snapshots weights.

    ``update`` returns True (stop) once the metric has failed to improve for
    ``patience`` consecutive epochs.
    """

    patience: int
    best_metric: float = np.inf
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    best_params: Parameters | None = None

    def update(self, epoch: int, metric: float, params: Parameters | None = None) -> bool:
        if metric < self.best_metric:
            self.best_metric = metric
            self.best_epoch = epoch
            self.epochs_since_improvement = 0
            if params is not None:
                self.best_params = params.copy()
            return False
        self.epochs_since_improvement += 1
        return self.epochs_since_improvement >= self.patience


@dataclass
class ArrayDataset:
    """In-memory dataset: uint8 images (n, 1, 48, 48) and int labels (n,)."""

    images: np.ndarray
    labels: np.ndarray
    ids: list[str] | None = None

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("images must be (n, c, h, w) aligned with labels")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def batch(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = self.images[idx]
        if x.dtype == np.uint8:
            x = x.astype(np.float32) / 255.0
        return x, self.labels[idx]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainResult:
    spec: ModelSpec
    params: Parameters
    history: list[EpochStats]


HISTORY_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc,lr"


def history_to_csv(history: list[EpochStats]) -> str:
    lines = [HISTORY_HEADER]
    for row in history:
        lines.append(
            f"{row.epoch},{row.train_loss!r},{row.train_acc!r},"
            f"{row.val_loss!r},{row.val_acc!r},{row.lr!r}"
        )
    return "\n".join(lines) + "\n"


def _make_optimizer(cfg: OptimizerConfig):
    if cfg.variant == "rmsprop":
        return RMSprop(lr=cfg.lr, alpha=cfg.alpha, eps=cfg.eps)
    if cfg.variant == "adamw":
        return AdamW(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
                     weight_decay=cfg.weight_decay)
    raise ValueError(f"unknown optimizer {cfg.variant!r}")


def _make_scheduler(cfg: SchedulerConfig | None, base_lr: float):
    if cfg is None:
        return None
    if cfg.variant == "reduce_on_plateau":
        return ReduceOnPlateau(base_lr, factor=cfg.factor, patience=cfg.patience, min_lr=cfg.min_lr)
    if cfg.variant == "cosine_warm_restarts":
        return CosineWarmRestarts(base_lr, eta_min=cfg.eta_min, t_0=cfg.t_0, t_mult=cfg.t_mult)
    raise ValueError(f"unknown scheduler {cfg.variant!r}")


def evaluate_dataset(net: Network, params: Parameters, data: ArrayDataset,
                     loss: LossSpec, batch_size: int = 256) -> tuple[float, float]:
    """Eval-mode loss and accuracy over a dataset."""
    n = len(data)
    total_loss = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        x, y = data.batch(idx)
        probs, cache = net.forward(params, x, mode="eval")
        batch_loss, _, _ = loss_eval(loss, cache["logits"], probs, one_hot(y))
        total_loss += batch_loss * idx.size
        correct += int((probs.argmax(axis=1) == y).sum())
    return total_loss / n, correct / n


def train(config: TrainConfig, train_set: ArrayDataset, val_set: ArrayDataset,
          progress=None) -> TrainResult:
    """Full training run; returns the best-validation-epoch weights.

    Per epoch: sample order -> forward -> loss -> backward -> clip ->
    optimizer -> scheduler -> early stopping on validation loss.  Raises
    TrainingDiverged with the epoch/batch if the loss goes non-finite.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be nonempty")
    spec, params = build_model(config.arch_id, seed=config.seed)
    net = Network(spec)
    opt = _make_optimizer(config.optimizer)
    sched = _make_scheduler(config.scheduler, config.optimizer.lr)
    stopper = EarlyStopping(patience=config.patience)
    sampler_rng = Rng(derive_seed(config.seed, "sampler"))
    labels = np.asarray(train_set.labels)
    n = len(train_set)
    fused_wce = config.loss.variant == "weighted_cross_entropy"

    epoch_n = config.epoch_size if config.epoch_size is not None else n

    history: list[EpochStats] = []
    for epoch in range(1, config.max_epochs + 1):
        lr = sched.lr() if sched is not None else config.optimizer.lr
        opt.lr = lr

        if config.sampler == "weighted":
            order = weighted_sample_indices(labels, epoch_n, sampler_rng)
        else:
            # uniform sampling never repeats within an epoch
            epoch_n = min(epoch_n, n)
            order = sampler_rng.permutation(n)[:epoch_n]

        epoch_loss = 0.0
        correct = 0
        for b, start in enumerate(range(0, epoch_n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            x, y = train_set.batch(idx)
            targets = one_hot(y)
            drop_rng = Rng(derive_seed(config.seed, "dropout", epoch, b))
            try:
                probs, cache = net.forward(params, x, mode="train", rng=drop_rng)
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, b, float("nan")) from exc
            batch_loss, grad, wrt = loss_eval(config.loss, cache["logits"], probs, targets)
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(epoch, b, batch_loss)
            if fused_wce:
                # numerically safer than chaining through the softmax jacobian
                grad, wrt = wce_softmax_grad(probs, targets, config.loss.class_weights), "logits"
            grads, _ = net.backward(params, cache, grad, wrt=wrt)
            clip_gradients(grads, config.clip_max_norm)
            opt.step(params.tensors, grads)
            epoch_loss += batch_loss * idx.size
            correct += int((probs.argmax(axis=1) == y).sum())

        val_loss, val_acc = evaluate_dataset(net, params, val_set, config.loss)
        stats = EpochStats(
            epoch=epoch,
            train_loss=epoch_loss / epoch_n,
            train_acc=correct / epoch_n,
            val_loss=val_loss,
            val_acc=val_acc,
            lr=lr,
        )
        history.append(stats)
        if progress is not None:
            progress(stats)
        if sched is not None:
            sched.epoch_end(val_loss)
        if stopper.update(epoch, val_loss, params):
            break

    final = stopper.best_params if stopper.best_params is not None else params
    return TrainResult(spec=spec, params=final, history=history)
