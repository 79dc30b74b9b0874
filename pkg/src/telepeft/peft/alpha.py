"""Learned residual-scale reporting.

Each adapter carries a scalar alpha initialised to 0.1; after fine-tuning,
per-site values show which layers did the heavy lifting. The report mirrors
that structure: one row per site, a per-layer MLP/attention ratio for the
encoder branches, and counts of sites above/below the 0.1 initialisation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .adapter import ALPHA_INIT
from .runtime import PeftRuntime

CSV_HEADER = ["branch", "layer", "position", "adapter_dim", "alpha"]


@dataclass(frozen=True)
class AlphaReport:
    rows: tuple  # (branch, layer, position, adapter_dim, alpha)
    ratios: tuple  # (branch, layer, alpha_mlp / alpha_attention)
    above_init: int
    below_init: int
    mean_abs_deviation: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([row[0], row[1], row[2], row[3], repr(row[4])])
        return buf.getvalue()

    @staticmethod
    def rows_from_csv(text: str):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected alpha CSV header: {header}")
        return [
            (rec[0], int(rec[1]), rec[2], int(rec[3]), float(rec[4]))
            for rec in reader
            if rec
        ]


def alpha_report(runtime: PeftRuntime) -> AlphaReport:
    rows = tuple(runtime.alpha_values())
    by_layer: dict = {}
    for branch, layer, position, _, alpha in rows:
        if position in ("post_attention", "post_mlp"):
            by_layer.setdefault((branch, layer), {})[position] = alpha
    ratios = tuple(
        (branch, layer, pair["post_mlp"] / pair["post_attention"])
        for (branch, layer), pair in sorted(by_layer.items())
        if len(pair) == 2 and pair["post_attention"] != 0.0
    )
    alphas = [row[4] for row in rows]
    return AlphaReport(
        rows=rows,
        ratios=ratios,
        above_init=sum(1 for a in alphas if a > ALPHA_INIT),
        below_init=sum(1 for a in alphas if a < ALPHA_INIT),
        mean_abs_deviation=(
            sum(abs(a - ALPHA_INIT) for a in alphas) / len(alphas) if alphas else 0.0
        ),
    )
