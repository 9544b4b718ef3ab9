"""Closed-form cost of global attention, baseline vs. anchor-shared subscenes.

One operation is one token-pair interaction; per-pair channel work is a common
factor and is dropped. Frame-wise attention is identical in both settings and
is left out.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .anchor_schedule import ExecutionPlan

DEFAULT_TOKENS_PER_FRAME = 1000
EXTRA_TOKENS_PER_FRAME = 5  # one camera token and four register tokens


def tokens_with_extras(patch_tokens):
    return patch_tokens + EXTRA_TOKENS_PER_FRAME


@dataclass(frozen=True)
class CostReport:
    baseline_ops: float
    partitioned_ops: float
    overhead_ops: float
    speedup: float
    per_subscene_ops: list
    tokens_per_frame: int

    def to_json(self):
        return asdict(self)

    @property
    def speedup_without_overhead(self):
        return self.baseline_ops / self.partitioned_ops


def attention_cost(num_frames, tokens_per_frame):
    if num_frames < 1 or tokens_per_frame < 1:
        raise ValueError("num_frames and tokens_per_frame must be >= 1")
    return float(num_frames * tokens_per_frame) ** 2


def partitioning_overhead(num_frames):
    """Frame-level similarity plus assignment work, unit constant."""
    return float(num_frames) ** 2


def plan_cost(plan: ExecutionPlan, tokens_per_frame=DEFAULT_TOKENS_PER_FRAME) -> CostReport:
    per = [attention_cost(len(seq), tokens_per_frame) for seq in plan.subscenes]
    partitioned = float(sum(per))
    overhead = partitioning_overhead(plan.n)
    baseline = attention_cost(plan.n, tokens_per_frame)
    return CostReport(
        baseline_ops=baseline,
        partitioned_ops=partitioned,
        overhead_ops=overhead,
        speedup=baseline / (partitioned + overhead),
        per_subscene_ops=per,
        tokens_per_frame=tokens_per_frame,
    )


def idealized_cost(num_frames, k, tokens_per_frame=DEFAULT_TOKENS_PER_FRAME) -> CostReport:
    """K equal subscenes of N/K frames, no shared anchor and no overhead term.

    This is the asymptotic setting in which the speedup is exactly K.
    """
    per_len = num_frames / k
    per = [(per_len * tokens_per_frame) ** 2] * k
    baseline = attention_cost(num_frames, tokens_per_frame)
    partitioned = float(sum(per))
    return CostReport(
        baseline_ops=baseline,
        partitioned_ops=partitioned,
        overhead_ops=0.0,
        speedup=baseline / partitioned,
        per_subscene_ops=per,
        tokens_per_frame=tokens_per_frame,
    )
