from .config import TrainConfig
from .history import (
    CSV_HEADER,
    EpochRecord,
    history_from_csv,
    history_to_csv,
    validate_history,
)
from .loop import EvalResult, evaluate_model, train_model
from .loss import composite_loss, dice_loss
from .metrics import dice_score, iou_score
from .optim import AdamW, EarlyStopper, PlateauScheduler

__all__ = [
    "AdamW",
    "CSV_HEADER",
    "EarlyStopper",
    "EpochRecord",
    "EvalResult",
    "PlateauScheduler",
    "TrainConfig",
    "composite_loss",
    "dice_loss",
    "dice_score",
    "evaluate_model",
    "history_from_csv",
    "history_to_csv",
    "iou_score",
    "train_model",
    "validate_history",
]
