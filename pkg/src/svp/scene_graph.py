"""Cosine scene graph, density estimate and the adaptive group count."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .descriptor_io import DescriptorSet
from .errors import ConfigError, DataIntegrityError, ZeroNormError

DEFAULT_THRESHOLD = 0.75
DEFAULT_K_MAX = 8
# Fixed block height: results must not depend on how many workers share the blocks.
ROW_BLOCK = 256


@dataclass(frozen=True)
class SimilarityGraph:
    matrix: np.ndarray

    def __post_init__(self):
        s = np.array(self.matrix, dtype=np.float64, copy=True)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
            raise DataIntegrityError(f"similarity matrix must be square and non-empty, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise DataIntegrityError("similarity matrix has non-finite entries")
        if not np.allclose(s, s.T, rtol=0.0, atol=1e-6):
            raise DataIntegrityError("similarity matrix is not symmetric")
        s.setflags(write=False)
        object.__setattr__(self, "matrix", s)

    @property
    def num_frames(self):
        return self.matrix.shape[0]

    def permuted(self, perm):
        perm = np.asarray(perm)
        return SimilarityGraph(self.matrix[np.ix_(perm, perm)])


@dataclass(frozen=True)
class DensityEstimate:
    per_frame_counts: np.ndarray
    density: float
    threshold: float


def similarity_matrix(dset: DescriptorSet, workers: int = 1) -> SimilarityGraph:
    d = np.asarray(dset.descriptors, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", d, d))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormError(zero.tolist())
    unit = d / norms[:, None]
    n = unit.shape[0]
    s = np.empty((n, n), dtype=np.float64)

    def fill(start):
        stop = min(start + ROW_BLOCK, n)
        s[start:stop] = unit[start:stop] @ unit.T

    starts = range(0, n, ROW_BLOCK)
    if workers > 1 and n > ROW_BLOCK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    s = 0.5 * (s + s.T)
    np.clip(s, -1.0, 1.0, out=s)
    np.fill_diagonal(s, 1.0)
    return SimilarityGraph(s)


def density(graph: SimilarityGraph, threshold: float = DEFAULT_THRESHOLD) -> DensityEstimate:
    if not -1.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (-1, 1), got {threshold}")
    above = graph.matrix > threshold
    np.fill_diagonal(above, False)
    counts = above.sum(axis=1).astype(np.int64)
    return DensityEstimate(per_frame_counts=counts, density=float(counts.mean()), threshold=float(threshold))


def _round_half_away(x):
    return math.floor(x + 0.5) if x >= 0 else -math.floor(-x + 0.5)


def group_count(est: DensityEstimate, k_max: int = DEFAULT_K_MAX, n: int | None = None, override: int | None = None) -> int:
    """Number of subscenes: ``override`` if given, else round(density) clamped to [1, min(k_max, n)]."""
    if n is None:
        n = len(est.per_frame_counts)
    if k_max < 1:
        raise ConfigError(f"k_max must be >= 1, got {k_max}")
    if override is not None:
        if not 1 <= override <= n:
            raise ConfigError(f"--groups {override} outside [1, {n}]")
        return int(override)
    return int(min(max(_round_half_away(est.density), 1), min(k_max, n)))
