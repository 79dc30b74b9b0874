"""The training and evaluation loops.

One call to `train_model` fits one model on one seed: seeded mini-batch
shuffling, the composite loss, AdamW over exactly the trainable tensors,
plateau scheduling on validation loss, early stopping on validation Dice,
and restoration of the best-validation-Dice state at the end. Everything
draws from a single RngStream per run, so identical seeds replay
bit-for-bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import RngStream
from ..errors import TrainingDiverged, UsageError
from ..model.backbone import SegmentationModel
from .config import TrainConfig
from .history import EpochRecord
from .loss import composite_loss
from .metrics import dice_score, iou_score
from .optim import AdamW, EarlyStopper, PlateauScheduler


def _collate(samples, indices):
    images = np.stack([samples[i].image for i in indices])
    masks = np.stack([samples[i].mask for i in indices])
    tokens = np.stack([samples[i].token_ids for i in indices])
    return images, masks, tokens


def _batches(n: int, batch_size: int, order=None):
    order = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _param_norm_snapshot(model: SegmentationModel, top: int = 8) -> str:
    norms = sorted(
        ((float(np.linalg.norm(t.data)), n) for n, t in model.trainable_parameters()),
        reverse=True,
    )
    return ", ".join(f"{name}={norm:.3e}" for norm, name in norms[:top])


@dataclass
class EvalResult:
    mean_dice: float
    mean_iou: float
    rows: list  # (sample_index, dice, iou)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["sample_index", "dice", "iou"])
        for idx, d, i in self.rows:
            writer.writerow([idx, repr(d), repr(i)])
        return buf.getvalue()


def evaluate_model(model: SegmentationModel, samples, batch_size: int = 32) -> EvalResult:
    """Per-sample Dice/IoU at threshold 0.5, averaged; eval mode, no graphs."""
    if len(samples) == 0:
        raise UsageError("cannot evaluate on an empty dataset")
    was_training = model.training
    model.eval()
    rows = []
    try:
        with ad.no_grad():
            for batch in _batches(len(samples), batch_size):
                images, masks, tokens = _collate(samples, batch)
                logits = model.forward(images, tokens).data
                preds = logits > 0.0  # sigmoid(x) > 0.5
                for j, sample_idx in enumerate(batch):
                    rows.append(
                        (
                            int(samples[sample_idx].index),
                            dice_score(preds[j, 0], masks[j, 0]),
                            iou_score(preds[j, 0], masks[j, 0]),
                        )
                    )
    finally:
        model.train(was_training)
    dices = [r[1] for r in rows]
    ious = [r[2] for r in rows]
    return EvalResult(float(np.mean(dices)), float(np.mean(ious)), rows)


def _validation_loss(model: SegmentationModel, samples, cfg: TrainConfig) -> float:
    total, weight = 0.0, 0
    with ad.no_grad():
        for batch in _batches(len(samples), cfg.batch_size):
            images, masks, tokens = _collate(samples, batch)
            logits = model.forward(images, tokens)
            loss = composite_loss(logits, masks, cfg.lambda_dice, cfg.lambda_bce, cfg.dice_eps)
            total += loss.item() * len(batch)
            weight += len(batch)
    return total / weight


def train_model(
    model: SegmentationModel,
    train_samples,
    val_samples,
    cfg: TrainConfig,
    seed: int,
    log=None,
) -> list[EpochRecord]:
    """Fit `model` in place; returns the per-epoch history. The model ends
    at the state with the best validation Dice."""
    if not train_samples or not val_samples:
        raise UsageError("training requires non-empty train and validation splits")
    rng = RngStream(seed).child("train-loop")
    optimizer = AdamW(model.trainable_parameters(), cfg.lr, cfg.weight_decay)
    scheduler = PlateauScheduler(cfg.lr, cfg.scheduler_factor, cfg.scheduler_patience)
    stopper = EarlyStopper(cfg.early_stop_patience)
    history: list[EpochRecord] = []
    best_dice = -np.inf
    best_state = model.state_arrays()

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        order = rng.permutation(len(train_samples))
        epoch_loss, seen = 0.0, 0
        for batch_idx, batch in enumerate(_batches(len(train_samples), cfg.batch_size, order)):
            images, masks, tokens = _collate(train_samples, batch)
            logits = model.forward(images, tokens)
            loss = composite_loss(logits, masks, cfg.lambda_dice, cfg.lambda_bce, cfg.dice_eps)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at epoch {epoch}, batch {batch_idx} "
                    f"(samples {batch[:4].tolist()}...); largest parameter norms: "
                    f"{_param_norm_snapshot(model)}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += value * len(batch)
            seen += len(batch)

        model.eval()
        val_loss = _validation_loss(model, val_samples, cfg)
        val = evaluate_model(model, val_samples, cfg.batch_size)
        optimizer.lr = scheduler.step(val_loss)
        record = EpochRecord(
            epoch, epoch_loss / seen, val_loss, val.mean_dice, val.mean_iou, optimizer.lr
        )
        history.append(record)
        if log:
            log(record)
        if val.mean_dice > best_dice:
            best_dice = val.mean_dice
            best_state = model.state_arrays()
        if stopper.step(val.mean_dice, epoch):
            break

    model.load_state_arrays(best_state)
    model.eval()
    return history
