"""Per-epoch training records and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..errors import ConfigError

CSV_HEADER = ["epoch", "train_loss", "val_loss", "val_dice", "val_iou", "lr"]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_dice: float
    val_iou: float
    lr: float


def validate_history(rows: list[EpochRecord]) -> None:
    for prev, cur in zip(rows, rows[1:]):
        if cur.epoch <= prev.epoch:
            raise ConfigError("history epochs must be strictly increasing")
        if cur.lr > prev.lr:
            raise ConfigError("learning rate may never increase")


def history_to_csv(rows: list[EpochRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow(
            [r.epoch, repr(r.train_loss), repr(r.val_loss), repr(r.val_dice), repr(r.val_iou), repr(r.lr)]
        )
    return buf.getvalue()


def history_from_csv(text: str) -> list[EpochRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ConfigError(f"unexpected history header: {header}")
    rows = [
        EpochRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]))
        for r in reader
        if r
    ]
    validate_history(rows)
    return rows
