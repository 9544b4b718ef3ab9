"""Soft assignment of frames to subscenes, hardening and cap-driven rebalancing.

The assignment matrix A (N x K, rows are distributions over groups) is the
row-wise softmax of a logit matrix Z. The grouping objective

    L = w_coh * sum_k |h_k - h_avg|^2
      + w_bal * sum_k (m_k - N/K)^2
      + w_sharp * sum_{s,k} A_sk (1 - A_sk)

with m_k = sum_s A_sk, h_k = (1/m_k) sum_s A_sk S[s, :] and h_avg the mean
row of S, is minimised by gradient descent on Z with halving backtracking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigError, DegenerateGroupError, InfeasibleError
from .scene_graph import SimilarityGraph

LOGIT_GUARD = 50.0
MIN_GROUP_MASS = 1e-8
MAX_HALVINGS = 8


def _matrix(s):
    return s.matrix if isinstance(s, SimilarityGraph) else np.asarray(s, dtype=np.float64)


def _values(a):
    return a.a if isinstance(a, AssignmentMatrix) else np.asarray(a, dtype=np.float64)


@dataclass(frozen=True)
class LogitMatrix:
    z: np.ndarray
    guard: float = LOGIT_GUARD

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64, copy=True)
        if z.ndim != 2 or min(z.shape) < 1:
            raise ConfigError(f"logits must be a non-empty (N, K) array, got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ConfigError("logits must be finite")
        if np.abs(z).max() > self.guard:
            raise ConfigError(f"logit magnitude exceeds guard {self.guard}")
        object.__setattr__(self, "z", z)

    @property
    def n(self):
        return self.z.shape[0]

    @property
    def k(self):
        return self.z.shape[1]


@dataclass(frozen=True)
class AssignmentMatrix:
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64, copy=True)
        if a.ndim != 2 or min(a.shape) < 1:
            raise ConfigError(f"assignment must be a non-empty (N, K) array, got {a.shape}")
        if a.min() < 0.0 or a.max() > 1.0 or not np.allclose(a.sum(axis=1), 1.0, rtol=0.0, atol=1e-6):
            raise ConfigError("assignment rows must be distributions")
        object.__setattr__(self, "a", a)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def k(self):
        return self.a.shape[1]

    @classmethod
    def one_hot(cls, labels, k):
        labels = np.asarray(labels)
        a = np.zeros((labels.size, k))
        a[np.arange(labels.size), labels] = 1.0
        return cls(a)

    @classmethod
    def uniform(cls, n, k):
        return cls(np.full((n, k), 1.0 / k))


@dataclass(frozen=True)
class GroupWeights:
    coh: float = 1.0
    bal: float = 1.0
    sharp: float = 0.1

    def __post_init__(self):
        vals = (self.coh, self.bal, self.sharp)
        if min(vals) < 0 or not any(vals):
            raise ConfigError(f"weights must be non-negative and not all zero, got {vals}")

    @classmethod
    def default(cls, n, coh=None, bal=None, sharp=None):
        """Default weights for N frames; the balance weight scales as 1/N."""
        return cls(
            coh=1.0 if coh is None else coh,
            bal=1.0 / n if bal is None else bal,
            sharp=0.1 if sharp is None else sharp,
        )

    def as_dict(self):
        return {"coh": self.coh, "bal": self.bal, "sharp": self.sharp}


@dataclass(frozen=True)
class OptimizeConfig:
    iterations: int = 10
    step: float = 0.5
    seed: int = 0
    init_noise: float = 0.01
    backtracking: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.step > 0:
            raise ConfigError("step must be positive")
        if self.init_noise < 0:
            raise ConfigError("init_noise must be non-negative")


@dataclass(frozen=True)
class OptimizeResult:
    assignment: AssignmentMatrix
    logits: np.ndarray
    loss_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class Partition:
    n: int
    groups: tuple
    anchor: int = 0

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(f) for f in g)) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        flat = [f for g in groups for f in g]
        if any(len(g) == 0 for g in groups):
            raise ConfigError("partition has an empty group")
        if sorted(flat) != list(range(self.n)):
            raise ConfigError("partition groups must be disjoint and cover all frames")
        if not 0 <= self.anchor < self.n:
            raise ConfigError(f"anchor {self.anchor} outside [0, {self.n})")

    @property
    def k(self):
        return len(self.groups)

    def labels(self):
        out = np.empty(self.n, dtype=np.int64)
        for gi, g in enumerate(self.groups):
            out[list(g)] = gi
        return out

    def one_hot(self):
        return AssignmentMatrix.one_hot(self.labels(), self.k)

    @classmethod
    def from_labels(cls, labels, k=None, anchor=0):
        labels = np.asarray(labels, dtype=np.int64)
        k = int(labels.max()) + 1 if k is None else k
        return cls(n=labels.size, groups=tuple(tuple(np.flatnonzero(labels == g).tolist()) for g in range(k)), anchor=anchor)


def soft_assign(z) -> AssignmentMatrix:
    z = z.z if isinstance(z, LogitMatrix) else np.asarray(z, dtype=np.float64)
    return AssignmentMatrix(_softmax(z))


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _group_means(a, s):
    m = a.sum(axis=0)
    small = np.flatnonzero(m < MIN_GROUP_MASS)
    if small.size:
        raise DegenerateGroupError(small.tolist())
    h = (a.T @ s) / m[:, None]
    return m, h


def coherence_loss(a, s) -> float:
    a, s = _values(a), _matrix(s)
    _, h = _group_means(a, s)
    diff = h - s.mean(axis=0)
    return float(np.sum(diff * diff))


def balance_loss(a) -> float:
    a = _values(a)
    n, k = a.shape
    dev = a.sum(axis=0) - n / k
    return float(np.sum(dev * dev))


def sharpness_loss(a) -> float:
    a = _values(a)
    return float(np.sum(a * (1.0 - a)))


def group_loss(a, s, w: GroupWeights) -> float:
    total = 0.0
    if w.coh:
        total += w.coh * coherence_loss(a, s)
    if w.bal:
        total += w.bal * balance_loss(a)
    if w.sharp:
        total += w.sharp * sharpness_loss(a)
    return total


def _loss_and_grad_a(a, s, w):
    """Loss and its gradient with respect to the assignment entries."""
    n, k = a.shape
    loss = 0.0
    grad = np.zeros_like(a)
    if w.coh:
        m, h = _group_means(a, s)
        diff = h - s.mean(axis=0)
        loss += w.coh * float(np.sum(diff * diff))
        g = 2.0 * diff
        # d/dA_sk of |h_k - h_avg|^2 = g_k . (S_s - h_k) / m_k
        grad += w.coh * (s @ g.T - np.sum(g * h, axis=1)[None, :]) / m[None, :]
    if w.bal:
        dev = a.sum(axis=0) - n / k
        loss += w.bal * float(np.sum(dev * dev))
        grad += w.bal * 2.0 * dev[None, :]
    if w.sharp:
        loss += w.sharp * float(np.sum(a * (1.0 - a)))
        grad += w.sharp * (1.0 - 2.0 * a)
    return loss, grad


def group_loss_grad(z, s, w: GroupWeights):
    """Loss at softmax(z) and its exact gradient with respect to the logits z."""
    z = z.z if isinstance(z, LogitMatrix) else np.asarray(z, dtype=np.float64)
    a = _softmax(z)
    loss, ga = _loss_and_grad_a(a, _matrix(s), w)
    gz = a * (ga - np.sum(ga * a, axis=1, keepdims=True))
    return loss, gz


def _loss_at(z, s, w):
    return group_loss(_softmax(z), s, w)


def initial_logits(n, k, cfg: OptimizeConfig):
    gen = rng.stream(cfg.seed, "init_logits", n, k)
    return np.clip(cfg.init_noise * gen.standard_normal((n, k)), -LOGIT_GUARD, LOGIT_GUARD)


def optimize(s, k: int, w: GroupWeights, cfg: OptimizeConfig = OptimizeConfig()) -> OptimizeResult:
    """Descend on the logits from a seeded near-uniform start.

    With backtracking the step is halved (at most ``MAX_HALVINGS`` times) until
    the loss does not increase; if no such step is found the iterate stays put.
    The returned trace holds the initial loss followed by one entry per step.
    """
    s = _matrix(s)
    n = s.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} must lie in [1, {n}]")
    z = initial_logits(n, k, cfg)
    try:
        loss = _loss_at(z, s, w)
    except DegenerateGroupError as exc:
        raise DegenerateGroupError(exc.groups, iteration=0) from None
    trace = [loss]
    for it in range(1, cfg.iterations + 1):
        try:
            loss, grad = group_loss_grad(z, s, w)
        except DegenerateGroupError as exc:
            raise DegenerateGroupError(exc.groups, iteration=it) from None
        step = cfg.step
        for _ in range(MAX_HALVINGS + 1):
            cand = np.clip(z - step * grad, -LOGIT_GUARD, LOGIT_GUARD)
            try:
                cand_loss = _loss_at(cand, s, w)
            except DegenerateGroupError as exc:
                if not cfg.backtracking:
                    raise DegenerateGroupError(exc.groups, iteration=it) from None
                cand_loss = math.inf
            if not cfg.backtracking or cand_loss <= loss:
                z, loss = cand, cand_loss
                break
            step *= 0.5
        trace.append(loss)
    return OptimizeResult(assignment=AssignmentMatrix(_softmax(z)), logits=z, loss_trace=trace)


def harden(a, anchor: int = 0) -> Partition:
    """Argmax each row (ties to the lowest group), then refill empty groups.

    An empty group k takes the frame with the largest a[s, k] among frames
    whose current group still has at least two members.
    """
    a = _values(a)
    n, k = a.shape
    labels = np.argmax(a, axis=1)
    sizes = np.bincount(labels, minlength=k)
    for g in range(k):
        if sizes[g]:
            continue
        donors = np.flatnonzero(sizes[labels] >= 2)
        if donors.size == 0:
            raise InfeasibleError(f"cannot fill empty group {g}: k={k} > n={n}")
        # argmax returns the first maximum, so ties go to the lowest frame index
        pick = donors[np.argmax(a[donors, g])]
        sizes[labels[pick]] -= 1
        labels[pick] = g
        sizes[g] = 1
    return Partition.from_labels(labels, k=k, anchor=anchor)


def default_cap(n, k):
    return -(-n // k) + 1


def rebalance(p: Partition, s, cap: int | None = None) -> Partition:
    """Move frames out of over-full groups until every group has at most ``cap`` members.

    Each move takes the member of the lowest-indexed over-cap group with the
    lowest mean similarity to the rest of its group, and puts it in the
    under-cap group it is most similar to on average.
    """
    s = _matrix(s)
    cap = default_cap(p.n, p.k) if cap is None else cap
    if cap * p.k < p.n:
        raise InfeasibleError(f"cap {cap} with {p.k} groups cannot hold {p.n} frames")
    groups = [list(g) for g in p.groups]
    while True:
        over = [gi for gi, g in enumerate(groups) if len(g) > cap]
        if not over:
            break
        src = groups[over[0]]
        src.sort()
        sub = s[np.ix_(src, src)]
        own = (sub.sum(axis=1) - np.diag(sub)) / (len(src) - 1)
        frame = src[int(np.argmin(own))]
        best, best_sim = None, -math.inf
        for gi, g in enumerate(groups):
            if len(g) >= cap:
                continue
            sim = float(s[frame, g].mean())
            if sim > best_sim:
                best, best_sim = gi, sim
        src.remove(frame)
        groups[best].append(frame)
    return Partition(n=p.n, groups=tuple(groups), anchor=p.anchor)


SWAP_LIMIT = 512


def _hard_state(labels, s, k):
    onehot = np.zeros((labels.size, k))
    onehot[np.arange(labels.size), labels] = 1.0
    m = onehot.sum(axis=0)
    mu = (onehot.T @ s) / m[:, None]
    return m, mu


def refine(p: Partition, s, w: GroupWeights, cap: int | None = None, max_moves: int | None = None, swaps: bool | None = None) -> Partition:
    """Greedy best-improvement local search on the hard objective.

    Candidate edits are single-frame moves (source keeps >= 1 member, target
    stays within ``cap``) and, for N <= ``SWAP_LIMIT``, swaps of two frames in
    different groups. The best strictly improving edit is applied until none
    remains or ``max_moves`` edits were made (default 4N). Sharpness is zero on
    hard assignments, so only coherence and balance enter the deltas.
    """
    s = _matrix(s)
    n, k = p.n, p.k
    cap = default_cap(n, k) if cap is None else cap
    if max(len(g) for g in p.groups) > cap:
        raise InfeasibleError("refine expects a partition already within the cap")
    max_moves = 4 * n if max_moves is None else max_moves
    swaps = n <= SWAP_LIMIT if swaps is None else swaps
    if k == 1:
        return p
    labels = p.labels()
    h_avg = s.mean(axis=0)
    sq = np.einsum("ij,ij->i", s, s)
    gram = s @ s.T if swaps else None
    target = n / k
    for _ in range(max_moves):
        m, mu = _hard_state(labels, s, k)
        u = mu - h_avg
        u_sq = np.einsum("ij,ij->i", u, u)
        su = s @ u.T                                    # (N, K): S_s . u_g
        smu = s @ mu.T                                  # (N, K): S_s . mu_g
        mu_sq = np.einsum("ij,ij->i", mu, mu)
        tol = 1e-12 * max(1.0, float(np.sum(u_sq)))
        rows = np.arange(n)
        best_delta, best_edit = -tol, None

        if w.coh or w.bal:
            g0 = labels
            m0 = m[g0]
            # removing s from its group: vector becomes u + (mu - S_s) / (m - 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                d = m0 - 1.0
                cross = np.einsum("ij,ij->i", u, mu)[g0] - su[rows, g0]
                dist = mu_sq[g0] - 2.0 * smu[rows, g0] + sq
                rem = 2.0 * cross / d + dist / (d * d)
            # adding s to group g: vector becomes u + (S_s - mu) / (m + 1)
            e = m[None, :] + 1.0
            add_cross = su - np.einsum("ij,ij->i", u, mu)[None, :]
            add_dist = sq[:, None] - 2.0 * smu + mu_sq[None, :]
            add = 2.0 * add_cross / e + add_dist / (e * e)
            delta = w.coh * (rem[:, None] + add)
            bal = ((m0 - 1.0 - target) ** 2 - (m0 - target) ** 2)[:, None] + ((m[None, :] + 1.0 - target) ** 2 - (m[None, :] - target) ** 2)
            delta = delta + w.bal * bal
            invalid = (m0 < 2)[:, None] | (m[None, :] >= cap) | (np.arange(k)[None, :] == g0[:, None])
            delta = np.where(invalid, np.inf, delta)
            idx = int(np.argmin(delta))
            if delta.flat[idx] < best_delta:
                best_delta, best_edit = float(delta.flat[idx]), ("move", idx // k, idx % k)

        if swaps and w.coh:
            # swapping s (group a) with t (group b): u_a += (S_t - S_s)/m_a, u_b += (S_s - S_t)/m_b
            diff_sq = sq[:, None] + sq[None, :] - 2.0 * gram
            ga = labels
            m_s = m[ga]
            su_own = su[rows, ga]
            # contribution for group of s: 2 u_a.(S_t - S_s)/m_a + |S_t - S_s|^2 / m_a^2
            cs = 2.0 * (su[:, ga].T - su_own[:, None]) / m_s[:, None] + diff_sq / (m_s[:, None] ** 2)
            delta = w.coh * (cs + cs.T)
            invalid = ga[:, None] == ga[None, :]
            invalid |= np.tri(n, dtype=bool)
            delta = np.where(invalid, np.inf, delta)
            idx = int(np.argmin(delta))
            if delta.flat[idx] < best_delta:
                best_delta, best_edit = float(delta.flat[idx]), ("swap", idx // n, idx % n)

        if best_edit is None:
            break
        kind, x, y = best_edit
        if kind == "move":
            labels[x] = y
        else:
            labels[x], labels[y] = labels[y], labels[x]
    return Partition.from_labels(labels, k=k, anchor=p.anchor)


def hard_loss(p: Partition, s, w: GroupWeights) -> float:
    return group_loss(p.one_hot(), s, w)


def partition_frames(s, k: int, w: GroupWeights | None = None, cfg: OptimizeConfig = OptimizeConfig(), anchor: int = 0, cap: int | None = None, refine_steps: bool = True):
    """Optimize, harden, rebalance and (by default) refine. Returns ``(Partition, OptimizeResult)``."""
    s = _matrix(s)
    w = GroupWeights.default(s.shape[0]) if w is None else w
    result = optimize(s, k, w, cfg)
    part = rebalance(harden(result.assignment, anchor=anchor), s, cap)
    if refine_steps:
        part = refine(part, s, w, cap)
    return part, result
