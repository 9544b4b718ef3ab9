"""Desk-scale stand-ins: synthetic scenes, a quadratic workload, an exhaustive oracle.

The mock attention workload uses small-integer token features so every score
and every reduction is exact in float64. Checksums are therefore identical no
matter how blocks or subscenes are scheduled.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .anchor_schedule import ExecutionPlan
from .descriptor_io import DescriptorSet
from .errors import ConfigError, InfeasibleError
from .scene_graph import SimilarityGraph
from .soft_partition import AssignmentMatrix, GroupWeights, Partition, group_loss

DEFAULT_CHANNELS = 16
DEFAULT_SCENE_CHANNELS = 32
MAX_TOKENS = 65536
ORACLE_LIMIT = 10**7
_BLOCK_ROWS = 512
_TOKEN_RANGE = 3


@dataclass(frozen=True)
class SyntheticScene:
    descriptors: DescriptorSet
    true_labels: np.ndarray
    num_clusters: int
    noise_sigma: float
    seed: int

    def labels_json(self):
        return {
            "version": 1,
            "n": int(self.true_labels.size),
            "num_clusters": self.num_clusters,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "labels": self.true_labels.tolist(),
        }


@dataclass(frozen=True)
class BenchResult:
    workers: int
    total_ms: float
    per_subscene_ms: list
    per_subscene_ops: list
    measured_ops: int
    checksums: list

    @property
    def checksum(self):
        return sum(self.checksums)


def synth_scene(n, num_clusters, noise_sigma, seed=0, channels=DEFAULT_SCENE_CHANNELS) -> SyntheticScene:
    """Clustered descriptors: a random unit direction per cluster plus Gaussian noise.

    Frames are labelled in contiguous runs, like a camera sweeping through
    ``num_clusters`` places in order.
    """
    if not 1 <= num_clusters <= n:
        raise ConfigError(f"num_clusters must lie in [1, {n}]")
    if noise_sigma < 0:
        raise ConfigError("noise_sigma must be non-negative")
    gen = rng.stream(seed, "synth", n, num_clusters)
    dirs = gen.standard_normal((num_clusters, channels))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    labels = np.arange(n) * num_clusters // n
    noise = gen.standard_normal((n, channels))
    desc = dirs[labels] + noise_sigma * noise
    return SyntheticScene(DescriptorSet(desc), labels, num_clusters, float(noise_sigma), seed)


def _frame_tokens(frame, tokens_per_frame, channels, seed):
    gen = rng.stream(seed, "mock_tokens", frame, tokens_per_frame, channels)
    return gen.integers(-_TOKEN_RANGE, _TOKEN_RANGE + 1, size=(tokens_per_frame, channels)).astype(np.float64)


def mock_global_attention(seq_len_frames, tokens_per_frame, channels=DEFAULT_CHANNELS, frames=None, seed=0, max_tokens=MAX_TOKENS):
    """Dense m x m score computation over all tokens of a frame sequence.

    Returns ``(seconds, ops, checksum)`` with m = frames * tokens_per_frame and
    ops the multiply-adds actually issued (m * m * channels). The checksum
    sums every row maximum and every score, exactly.
    """
    frames = list(range(seq_len_frames)) if frames is None else list(frames)
    if len(frames) != seq_len_frames:
        raise ConfigError("frames must list seq_len_frames entries")
    m = seq_len_frames * tokens_per_frame
    if m > max_tokens:
        raise InfeasibleError(
            f"{seq_len_frames} frames x {tokens_per_frame} tokens = {m} exceeds the {max_tokens}-token "
            f"guard; use a smaller --tokens-per-frame (at most {max_tokens // seq_len_frames})"
        )
    start = time.perf_counter()
    x = np.concatenate([_frame_tokens(f, tokens_per_frame, channels, seed) for f in frames])
    ops = 0
    checksum = 0
    for r0 in range(0, m, _BLOCK_ROWS):
        block = x[r0:r0 + _BLOCK_ROWS]
        scores = block @ x.T
        ops += block.shape[0] * m * channels
        checksum += int(scores.max(axis=1).sum()) + int(scores.sum())
    return time.perf_counter() - start, ops, checksum


def run_plan(plan: ExecutionPlan, tokens_per_frame, channels=DEFAULT_CHANNELS, workers=1, seed=0, max_tokens=MAX_TOKENS) -> BenchResult:
    """Run the mock workload once per subscene, spread over ``workers`` threads."""
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    for i, seq in enumerate(plan.subscenes):
        if len(seq) * tokens_per_frame > max_tokens:
            raise InfeasibleError(
                f"subscene {i}: {len(seq)} frames x {tokens_per_frame} tokens exceeds the {max_tokens}-token "
                f"guard; use a smaller --tokens-per-frame"
            )

    def job(seq):
        return mock_global_attention(len(seq), tokens_per_frame, channels, frames=seq, seed=seed, max_tokens=max_tokens)

    start = time.perf_counter()
    if workers == 1:
        results = [job(seq) for seq in plan.subscenes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, plan.subscenes))
    total = time.perf_counter() - start
    return BenchResult(
        workers=workers,
        total_ms=total * 1e3,
        per_subscene_ms=[r[0] * 1e3 for r in results],
        per_subscene_ops=[r[1] for r in results],
        measured_ops=sum(r[1] for r in results),
        checksums=[r[2] for r in results],
    )


def count_capped_partitions(n, k, cap):
    """Set partitions of n labelled frames into exactly k blocks of size <= cap."""
    # n! [x^n] (sum_{j=1..cap} x^j / j!)^k / k!
    base = [Fraction(0)] + [Fraction(1, math.factorial(j)) for j in range(1, min(cap, n) + 1)]
    poly = [Fraction(1)]
    for _ in range(k):
        nxt = [Fraction(0)] * (n + 1)
        for i, a in enumerate(poly):
            if a:
                for j, b in enumerate(base):
                    if i + j > n:
                        break
                    nxt[i + j] += a * b
        poly = nxt
    return int(poly[n] * math.factorial(n) / math.factorial(k)) if n < len(poly) else 0


def _restricted_growth(n, k, cap):
    labels = [0] * n
    sizes = [0] * k

    def rec(i, used):
        if n - i < k - used:
            return
        if i == n:
            yield labels
            return
        for g in range(min(used + 1, k)):
            if sizes[g] >= cap:
                continue
            labels[i] = g
            sizes[g] += 1
            yield from rec(i + 1, max(used, g + 1))
            sizes[g] -= 1

    yield from rec(0, 0)


def brute_force_partition(s, k, w: GroupWeights, cap=None, anchor=0):
    """Exhaustive minimiser of the grouping loss over hard partitions.

    Enumerates partitions into exactly ``k`` non-empty groups of size at most
    ``cap`` as restricted-growth strings (lexicographic order), so the first
    minimiser found is the canonical tie-break.
    """
    mat = s.matrix if isinstance(s, SimilarityGraph) else np.asarray(s, dtype=np.float64)
    n = mat.shape[0]
    cap = n if cap is None else cap
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must lie in [1, {n}]")
    count = count_capped_partitions(n, k, cap)
    if count == 0:
        raise InfeasibleError(f"no partition of {n} frames into {k} groups with cap {cap}")
    if count > ORACLE_LIMIT:
        raise InfeasibleError(f"{count} candidate partitions exceed the oracle limit {ORACLE_LIMIT}")
    best, best_loss = None, math.inf
    for labels in _restricted_growth(n, k, cap):
        loss = group_loss(AssignmentMatrix.one_hot(labels, k), mat, w)
        if loss < best_loss:
            best, best_loss = list(labels), loss
    return Partition.from_labels(best, k=k, anchor=anchor), best_loss


def partition_metrics(p: Partition, scene: SyntheticScene, s) -> dict:
    mat = s.matrix if isinstance(s, SimilarityGraph) else np.asarray(s, dtype=np.float64)
    labels = p.labels()
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(p.n, dtype=bool)
    within = mat[same & off]
    cross = mat[~same]
    sizes = np.array([len(g) for g in p.groups])
    truth = np.asarray(scene.true_labels)
    purity = sum(np.bincount(truth[list(g)]).max() for g in p.groups) / p.n
    return {
        "size_min": int(sizes.min()),
        "size_max": int(sizes.max()),
        "size_std": float(sizes.std()),
        "within_similarity": float(within.mean()) if within.size else None,
        "cross_similarity": float(cross.mean()) if cross.size else None,
        "purity": float(purity),
    }
