"""Pretext and downstream training loops.

Pretext: reconstruct clean segments from corrupted views, MSE loss, Adam
at a constant rate. Downstream: encoder (optionally transferred from the
pretext model) plus the multi-task head, total loss cross-entropy +
regression, Adam under a one-cycle rate schedule, best checkpoint chosen
by validation loss. A non-finite loss aborts immediately with the epoch,
batch and learning rate in the error, rather than skipping the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .augment import AugmentedPair, augment_labeled
from .data import GAIT_CLASSES, StrideSegment
from .engine import EngineNumericsError, Tensor, adam_step, softmax, softmax_xent, mse
from .losses import REGRESSION_LOSSES
from .model import REG_SCALE_CM, ModelConfig, ModelParams, forward_autoencoder, forward_downstream
from .util import derived_rng, derived_seed

CLASS_INDEX = {name: i for i, name in enumerate(GAIT_CLASSES)}


class TrainSetupError(ValueError):
    """The training set cannot support the requested run."""


class TrainAbortError(RuntimeError):
    """Training hit a non-finite loss; message carries epoch, batch, lr."""


@dataclass(frozen=True)
class TrainConfig:
    pretext_epochs: int = 100
    pretext_batch: int = 30
    pretext_lr: float = 1e-3
    downstream_epochs: int = 150
    downstream_batch: int = 30
    peak_lr: float = 3e-3
    val_fraction: float = 0.10
    folds: int = 3
    seed: int = 0
    label_copies: int = 2
    regression_loss: str = "pew_rmse"
    pretrain: bool = True

    def __post_init__(self):
        if self.pretext_batch < 1 or self.downstream_batch < 1:
            raise ValueError("batch sizes must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.regression_loss not in REGRESSION_LOSSES:
            raise ValueError(f"unknown regression loss {self.regression_loss!r}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)


def one_cycle_lr(step: int, total_steps: int, peak_lr: float) -> float:
    """Single rise-and-fall schedule: peak/25 -> peak -> peak/25 -> peak/250.

    Warm-up covers the first 45% of steps, the descent the next 45%, and
    the final 10% decays below the starting rate. The peak is hit on
    exactly one step.
    """
    if total_steps <= 1:
        return peak_lr
    last = total_steps - 1
    rise_end = max(1, round(0.45 * last))
    fall_end = max(rise_end + 1, round(0.90 * last))
    lo, floor = peak_lr / 25.0, peak_lr / 250.0
    if step <= rise_end:
        return lo + (peak_lr - lo) * step / rise_end
    if step <= fall_end:
        return peak_lr + (lo - peak_lr) * (step - rise_end) / (fall_end - rise_end)
    return lo + (floor - lo) * (step - fall_end) / max(last - fall_end, 1)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    lr: float


@dataclass
class PretextResult:
    params: ModelParams
    curve: list[EpochRecord] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.curve[-1].train_loss


def _stack_pairs(pairs: list[AugmentedPair], idx) -> tuple[np.ndarray, np.ndarray]:
    inputs = np.stack([pairs[i].input for i in idx]).astype(np.float32)
    targets = np.stack([pairs[i].target for i in idx]).astype(np.float32)
    return inputs, targets


def train_pretext(
    pairs: list[AugmentedPair],
    config: TrainConfig,
    model_config: ModelConfig = ModelConfig(),
    init: ModelParams | None = None,
) -> PretextResult:
    """Train the reconstruction task for ``pretext_epochs`` over ``pairs``."""
    if not pairs:
        raise TrainSetupError("pretext training needs at least one pair")
    params = init if init is not None else ModelParams.init(
        model_config, seed=derived_seed(config.seed, "pretext-init")
    )
    order_rng = derived_rng(config.seed, "pretext-order")
    curve: list[EpochRecord] = []
    lr = config.pretext_lr
    for epoch in range(config.pretext_epochs):
        perm = order_rng.permutation(len(pairs))
        losses = []
        for b0 in range(0, len(perm), config.pretext_batch):
            idx = perm[b0 : b0 + config.pretext_batch]
            inputs, targets = _stack_pairs(pairs, idx)
            params.store.zero_grad()
            try:
                loss = mse(forward_autoencoder(params, Tensor(inputs)), targets)
                loss.backward()
                adam_step(params.store, params.store.collect_grads(), lr)
            except EngineNumericsError as exc:
                raise TrainAbortError(
                    f"pretext aborted: {exc} (epoch {epoch}, batch {b0 // config.pretext_batch}, lr {lr:g})"
                ) from exc
            losses.append(loss.item())
        curve.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_loss=None, lr=lr))
    return PretextResult(params=params, curve=curve)


def split_validation(
    segments: list[StrideSegment], val_fraction: float, seed: int
) -> tuple[list[StrideSegment], list[StrideSegment]]:
    """Seeded shuffle, last ``val_fraction`` held out, stratified by class."""
    by_class: dict[str, list[int]] = {}
    for i, seg in enumerate(segments):
        if seg.label is None:
            raise TrainSetupError("downstream training needs labeled segments")
        by_class.setdefault(seg.label.gait_class, []).append(i)
    rng = derived_rng(seed, "val-split")
    train_idx: list[int] = []
    val_idx: list[int] = []
    for cls in sorted(by_class):
        idx = np.array(by_class[cls])
        rng.shuffle(idx)
        n_val = max(1, int(np.ceil(val_fraction * len(idx))))
        if n_val >= len(idx):
            raise TrainSetupError(f"empty class {cls!r} in training split")
        val_idx.extend(idx[len(idx) - n_val :].tolist())
        train_idx.extend(idx[: len(idx) - n_val].tolist())
    train_idx.sort()
    val_idx.sort()
    return [segments[i] for i in train_idx], [segments[i] for i in val_idx]


def _batch_arrays(segments: list[StrideSegment], idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.stack([segments[i].tensor for i in idx]).astype(np.float32)
    classes = np.array([CLASS_INDEX[segments[i].label.gait_class] for i in idx], dtype=np.int64)
    lengths = np.array([segments[i].label.length_cm for i in idx], dtype=np.float32) / REG_SCALE_CM
    return x, classes, lengths


def _dataset_loss(params, segments, batch, reg_loss) -> float:
    total, count = 0.0, 0
    for b0 in range(0, len(segments), batch):
        idx = range(b0, min(b0 + batch, len(segments)))
        x, classes, lengths = _batch_arrays(segments, idx)
        logits, length = forward_downstream(params, Tensor(x))
        loss = softmax_xent(logits, classes) + reg_loss(length, lengths)
        total += loss.item() * len(x)
        count += len(x)
    return total / count


@dataclass
class DownstreamResult:
    params: ModelParams
    best_epoch: int
    best_val_loss: float
    curve: list[EpochRecord]
    init_mode: str


def train_downstream(
    segments: list[StrideSegment],
    config: TrainConfig,
    model_config: ModelConfig = ModelConfig(),
    pretrained: ModelParams | None = None,
) -> DownstreamResult:
    """Supervised multi-task training; returns the min-validation-loss model.

    The validation split is carved out first; noise replicas are added to
    the training portion only. With ``pretrained`` given, the encoder path
    starts from those weights bit-exactly.
    """
    train_set, val_set = split_validation(segments, config.val_fraction, config.seed)
    if len({s.label.gait_class for s in train_set}) < len(GAIT_CLASSES):
        raise TrainSetupError("empty class in training split")
    train_set = augment_labeled(train_set, config.label_copies, derived_seed(config.seed, "label-aug"))

    params = ModelParams.init(model_config, seed=derived_seed(config.seed, "downstream-init"))
    init_mode = "fresh"
    if pretrained is not None:
        params.copy_group_from(pretrained, "encoder")
        init_mode = "pretrained"

    reg_loss = REGRESSION_LOSSES[config.regression_loss]
    order_rng = derived_rng(config.seed, "downstream-order")
    n_batches = int(np.ceil(len(train_set) / config.downstream_batch))
    total_steps = config.downstream_epochs * n_batches

    curve: list[EpochRecord] = []
    best_val = np.inf
    best_epoch = -1
    best_state = None
    step = 0
    lr = config.peak_lr / 25.0
    for epoch in range(config.downstream_epochs):
        perm = order_rng.permutation(len(train_set))
        losses = []
        for b0 in range(0, len(perm), config.downstream_batch):
            idx = perm[b0 : b0 + config.downstream_batch]
            x, classes, lengths = _batch_arrays(train_set, idx)
            lr = one_cycle_lr(step, total_steps, config.peak_lr)
            params.store.zero_grad()
            try:
                logits, length = forward_downstream(params, Tensor(x))
                loss = softmax_xent(logits, classes) + reg_loss(length, lengths)
                loss.backward()
                adam_step(params.store, params.store.collect_grads(), lr)
            except EngineNumericsError as exc:
                raise TrainAbortError(
                    f"downstream aborted: {exc} (epoch {epoch}, batch {b0 // config.downstream_batch}, lr {lr:g})"
                ) from exc
            losses.append(loss.item())
            step += 1
        val_loss = _dataset_loss(params, val_set, config.downstream_batch, reg_loss)
        curve.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_loss=val_loss, lr=lr))
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = params.store.state_arrays()

    best = ModelParams.init(model_config, seed=0)
    best.store.load_state_arrays(best_state)
    return DownstreamResult(
        params=best,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
        curve=curve,
        init_mode=init_mode,
    )


def predict(params: ModelParams, segments: list[StrideSegment], batch: int = 60):
    """Per-stride (length_cm, class_index) predictions, batched inference."""
    lengths = np.empty(len(segments), dtype=np.float64)
    classes = np.empty(len(segments), dtype=np.int64)
    for b0 in range(0, len(segments), batch):
        idx = range(b0, min(b0 + batch, len(segments)))
        x = np.stack([segments[i].tensor for i in idx]).astype(np.float32)
        logits, length = forward_downstream(params, Tensor(x))
        probs = softmax(logits.data)
        classes[b0 : b0 + len(x)] = probs.argmax(axis=1)
        lengths[b0 : b0 + len(x)] = length.data.astype(np.float64) * REG_SCALE_CM
    return lengths, classes
