"""Anchor-shared execution plans and reassembly of per-subscene outputs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlanViolationError
from .soft_partition import Partition


@dataclass(frozen=True)
class ExecutionPlan:
    n: int
    anchor: int
    subscenes: tuple
    owner_of_anchor: int

    def __post_init__(self):
        object.__setattr__(self, "subscenes", tuple(tuple(int(f) for f in seq) for seq in self.subscenes))

    @property
    def k(self):
        return len(self.subscenes)

    def to_json(self):
        return {
            "version": 1,
            "n": self.n,
            "anchor": self.anchor,
            "owner_of_anchor": self.owner_of_anchor,
            "subscenes": [{"id": i, "frames": list(seq)} for i, seq in enumerate(self.subscenes)],
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("version") != 1:
            raise PlanViolationError(f"unsupported plan version {obj.get('version')!r}")
        subs = sorted(obj["subscenes"], key=lambda e: e["id"])
        return cls(n=obj["n"], anchor=obj["anchor"], subscenes=tuple(e["frames"] for e in subs), owner_of_anchor=obj["owner_of_anchor"])


def build_plan(p: Partition) -> ExecutionPlan:
    """Prepend the anchor to every group; members keep ascending frame order."""
    subs = []
    owner = None
    for gi, group in enumerate(p.groups):
        if p.anchor in group:
            owner = gi
        subs.append((p.anchor,) + tuple(f for f in sorted(group) if f != p.anchor))
    return ExecutionPlan(n=p.n, anchor=p.anchor, subscenes=tuple(subs), owner_of_anchor=owner)


def balanced_plan(n, k, anchor=0):
    """Plan over contiguous, near-equal frame blocks (used for benchmarks)."""
    bounds = np.linspace(0, n, k + 1).round().astype(int)
    groups = tuple(tuple(range(bounds[i], bounds[i + 1])) for i in range(k))
    return build_plan(Partition(n=n, groups=groups, anchor=anchor))


def validate_plan(plan: ExecutionPlan) -> list:
    """Return every invariant violation as a human-readable string (empty if valid)."""
    out = []
    if not 0 <= plan.anchor < plan.n:
        out.append(f"anchor {plan.anchor} outside [0, {plan.n})")
    if not plan.subscenes:
        out.append("plan has no subscenes")
    seen = {}
    for i, seq in enumerate(plan.subscenes):
        if not seq or seq[0] != plan.anchor:
            out.append(f"missing anchor: subscene {i} does not start with frame {plan.anchor}")
        if seq.count(plan.anchor) > 1:
            out.append(f"anchor repeated in subscene {i}")
        if len(seq) <= 1 and i != plan.owner_of_anchor:
            out.append(f"subscene {i} has no frames besides the anchor")
        for f in seq:
            if f == plan.anchor:
                continue
            if not 0 <= f < plan.n:
                out.append(f"frame {f} in subscene {i} outside [0, {plan.n})")
            elif f in seen and seen[f] != i:
                out.append(f"duplicate frame {f} in subscenes {seen[f]} and {i}")
            elif f in seen:
                out.append(f"duplicate frame {f} within subscene {i}")
            else:
                seen[f] = i
    missing = sorted(set(range(plan.n)) - set(seen) - {plan.anchor})
    if missing:
        out.append(f"frames not covered: {missing}")
    if plan.owner_of_anchor is None or not 0 <= plan.owner_of_anchor < len(plan.subscenes):
        out.append(f"owner_of_anchor {plan.owner_of_anchor} is not a subscene index")
    return out


def scatter_outputs(plan: ExecutionPlan, per_subscene) -> np.ndarray:
    """Reassemble per-subscene outputs into original frame order.

    ``per_subscene[i]`` holds one record per entry of subscene i, along the
    first axis. The anchor's record is taken from ``owner_of_anchor``.
    """
    if len(per_subscene) != plan.k:
        raise PlanViolationError(f"expected outputs for {plan.k} subscenes, got {len(per_subscene)}")
    arrays = [np.asarray(x) for x in per_subscene]
    for i, (seq, arr) in enumerate(zip(plan.subscenes, arrays)):
        if arr.shape[0] != len(seq):
            raise PlanViolationError(f"subscene {i}: {arr.shape[0]} records for {len(seq)} frames", subscene=i)
        if arr.shape[1:] != arrays[0].shape[1:] or arr.dtype != arrays[0].dtype:
            raise PlanViolationError(f"subscene {i}: record shape {arr.shape[1:]} differs from subscene 0", subscene=i)
    out = np.empty((plan.n,) + arrays[0].shape[1:], dtype=arrays[0].dtype)
    for i, (seq, arr) in enumerate(zip(plan.subscenes, arrays)):
        for pos, f in enumerate(seq):
            if f == plan.anchor and i != plan.owner_of_anchor:
                continue
            out[f] = arr[pos]
    return out
