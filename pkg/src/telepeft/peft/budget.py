"""Exact trainable-parameter accounting.

Pure arithmetic over a plan and the hosting widths; no model needs to be
instantiated. The runtime cross-check (budget total == number of scalars
the optimizer updates) lives in the tests and the training loop.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from ..errors import ConfigError
from ..model.spec import ModelSpec
from .adapter import adapter_param_count
from .blocks import ENHANCE_CHANNELS
from .lora import LORA_POSITIONS, lora_param_count
from .plan import PlacementPlan
from .schedules import shared_cross_modal_dim

# Conv3x3 1->4 with bias, then conv1x1 4->1 with bias: 36+4+4+1.
REFINE_HEAD_PARAMS = 45


@dataclass(frozen=True)
class BudgetRow:
    branch: str
    layer: int
    position: str
    d_adapter: int
    count: int


@dataclass(frozen=True)
class ParamBudget:
    rows: tuple
    per_branch: dict
    grand_total: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["branch", "layer", "position", "d_adapter", "count"])
        for row in self.rows:
            writer.writerow([row.branch, row.layer, row.position, row.d_adapter, row.count])
        writer.writerow(["TOTAL", "", "", "", self.grand_total])
        return buf.getvalue()

    @classmethod
    def from_rows(cls, rows) -> "ParamBudget":
        rows = tuple(rows)
        per_branch: dict = {}
        for row in rows:
            per_branch[row.branch] = per_branch.get(row.branch, 0) + row.count
        return cls(rows, per_branch, sum(r.count for r in rows))

    @classmethod
    def from_csv(cls, text: str) -> "ParamBudget":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != ["branch", "layer", "position", "d_adapter", "count"]:
            raise ConfigError(f"unexpected budget CSV header: {header}")
        rows = []
        total = None
        for rec in reader:
            if not rec:
                continue
            if rec[0] == "TOTAL":
                total = int(rec[4])
                continue
            rows.append(BudgetRow(rec[0], int(rec[1]), rec[2], int(rec[3]), int(rec[4])))
        budget = cls.from_rows(rows)
        if total is not None and total != budget.grand_total:
            raise ConfigError(
                f"budget CSV TOTAL {total} disagrees with row sum {budget.grand_total}"
            )
        return budget


def cross_modal_param_count(d_vision: int, d_text: int, cond_dim: int, d_base: int) -> int:
    ds = shared_cross_modal_dim(d_base)
    projections = (d_vision * ds + ds) + (d_text * ds + ds)  # v_proj, t_proj with bias
    norms = 2 * (2 * ds)
    attention = 4 * (ds * ds + ds)  # q, k, v, out with biases
    back = ds * cond_dim + cond_dim
    return projections + norms + attention + back


def decoder_enhancement_param_count(channels: int = ENHANCE_CHANNELS) -> int:
    conv3 = channels * 1 * 9 + channels
    bn_affine = 2 * channels
    conv1 = 1 * channels + 1
    return conv3 + bn_affine + conv1


def count_trainable(
    plan: PlacementPlan, spec: ModelSpec, include_refine_head: bool = True
) -> ParamBudget:
    """Enumerate every trainable scalar the plan introduces.

    Covers projection matrices, biases, norm affines, the per-adapter alpha,
    low-rank pairs, the auxiliary blocks, and (when attached) the refinement
    head. Batch-norm running statistics are excluded: they are updated by
    the forward pass, not the optimizer.
    """
    rows = []
    for site in plan.sites:
        width = plan.branch_width(spec, site.branch)
        if site.position in LORA_POSITIONS:
            count = lora_param_count(width, site.d_adapter)
            dim = site.d_adapter
        else:
            dim = plan.effective_dim(site, spec)
            count = adapter_param_count(width, dim)
        rows.append(BudgetRow(site.branch, site.layer, site.position, dim, count))
    if plan.cross_modal:
        rows.append(
            BudgetRow(
                "cross_modal",
                0,
                "block",
                shared_cross_modal_dim(plan.d_base),
                cross_modal_param_count(
                    spec.vision_dim, spec.text_dim, spec.cond_dim, plan.d_base
                ),
            )
        )
    if plan.decoder_enh:
        rows.append(
            BudgetRow("decoder", 0, "enhancement", ENHANCE_CHANNELS, decoder_enhancement_param_count())
        )
    if include_refine_head:
        rows.append(BudgetRow("decoder", 0, "refine_head", 0, REFINE_HEAD_PARAMS))
    return ParamBudget.from_rows(rows)


# Reported totals for the full-size geometry, used for comparison printing.
PAPER_TOTALS = {
    "telescopic_vision_only": 498_000,
    "telescopic_vision_text": 593_000,
    "telescopic_full": 613_000,
    "lora_r4": 585_000,
}
