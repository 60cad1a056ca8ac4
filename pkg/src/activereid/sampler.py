"""Candidate selection: view-aware schedule plus baseline strategies.

The view-aware sampler takes the m1(t) smallest-distance undecided pairs
from the same-view pool and m2(t) from the cross-view pool; the schedule
switches from (s1, s3) to (s2, s4) at iteration t0 so annotation shifts
from same-view (easier) to cross-view (harder) pairs over time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .labels import LabelState
from .metric import CROSS_VIEW, SAME_VIEW, Pair, PairPool


@dataclass(frozen=True)
class SamplingSchedule:
    s1: int
    s2: int
    s3: int
    s4: int
    t0: int = 5
    allow_inverted: bool = False

    def __post_init__(self):
        for name in ("s1", "s2", "s3", "s4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.s1 <= self.s3 or self.s4 <= self.s2:
            msg = (
                f"schedule violates easy-to-hard ordering (wants s1 > s3 and "
                f"s4 > s2): s1={self.s1} s2={self.s2} s3={self.s3} s4={self.s4}"
            )
            if self.allow_inverted:
                warnings.warn(msg)
            else:
                raise ValueError(msg)


def default_schedule(same_view_pairs: int, cross_view_pairs: int, t0: int = 5) -> SamplingSchedule:
    """Scale the schedule with pool sizes: s1 = 0.2% of same-view pairs,
    s3 = 0.05% of cross-view pairs, s2 = s1/2, s4 = 4*s3."""
    s1 = max(1, round(0.002 * same_view_pairs))
    s3 = max(1, round(0.0005 * cross_view_pairs))
    s2 = max(0, s1 // 2)
    s4 = 4 * s3
    if s1 <= s3:
        s1 = s3 + 1
    if s4 <= s2:
        s4 = s2 + 1
    return SamplingSchedule(s1=s1, s2=s2, s3=s3, s4=s4, t0=t0)


def schedule_counts(t: int, schedule: SamplingSchedule) -> tuple[int, int]:
    """Piecewise-constant (m1, m2); the boundary t == t0 takes the late branch."""
    if t < 1:
        raise ValueError(f"iteration must be >= 1, got {t}")
    m1 = schedule.s1 if t < schedule.t0 else schedule.s2
    m2 = schedule.s3 if t < schedule.t0 else schedule.s4
    return m1, m2


@dataclass
class Candidate:
    pair: Pair
    view: str
    distance: float


@dataclass
class CandidateBatch:
    pairs: list[Candidate] = field(default_factory=list)
    iteration: int = 0
    same_view_selected: int = 0
    cross_view_selected: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    def pair_set(self) -> set[Pair]:
        return {c.pair for c in self.pairs}


def _take_undecided(pool: PairPool, state: LabelState, m: int, view: str) -> list[Candidate]:
    out: list[Candidate] = []
    for i in range(len(pool)):
        if len(out) >= m:
            break
        p = pool.pair(i)
        if not state.is_decided(p):
            out.append(Candidate(p, view, float(pool.dist[i])))
    return out


def select_view_aware(
    pools: tuple[PairPool, PairPool],
    state: LabelState,
    t: int,
    schedule: SamplingSchedule,
) -> CandidateBatch:
    """Smallest-distance undecided pairs, m1 same-view plus m2 cross-view."""
    same_pool, cross_pool = pools
    m1, m2 = schedule_counts(t, schedule)
    same = _take_undecided(same_pool, state, m1, SAME_VIEW)
    cross = _take_undecided(cross_pool, state, m2, CROSS_VIEW)
    return CandidateBatch(
        pairs=same + cross,
        iteration=t,
        same_view_selected=len(same),
        cross_view_selected=len(cross),
    )


def select_mixed_view(
    pools: tuple[PairPool, PairPool],
    state: LabelState,
    t: int,
    schedule: SamplingSchedule,
) -> CandidateBatch:
    """View-ignoring baseline: m1 + m2 smallest pairs from the merged pool."""
    same_pool, cross_pool = pools
    m1, m2 = schedule_counts(t, schedule)
    budget = m1 + m2
    out: list[Candidate] = []
    i = j = 0
    while len(out) < budget and (i < len(same_pool) or j < len(cross_pool)):
        take_same = j >= len(cross_pool) or (
            i < len(same_pool)
            and (same_pool.dist[i], same_pool.a[i], same_pool.b[i])
            <= (cross_pool.dist[j], cross_pool.a[j], cross_pool.b[j])
        )
        if take_same:
            p = same_pool.pair(i)
            if not state.is_decided(p):
                out.append(Candidate(p, SAME_VIEW, float(same_pool.dist[i])))
            i += 1
        else:
            p = cross_pool.pair(j)
            if not state.is_decided(p):
                out.append(Candidate(p, CROSS_VIEW, float(cross_pool.dist[j])))
            j += 1
    same_n = sum(1 for c in out if c.view == SAME_VIEW)
    return CandidateBatch(
        pairs=out,
        iteration=t,
        same_view_selected=same_n,
        cross_view_selected=len(out) - same_n,
    )


def select_random(
    state: LabelState,
    budget: int,
    seed,
    pools: tuple[PairPool, PairPool] | None = None,
    iteration: int = 0,
) -> CandidateBatch:
    """Uniform sample without replacement from the undecided pairs."""
    tids = sorted(state.assignments)
    n = len(tids)
    total = n * (n - 1) // 2
    undecided_total = total - len(state.must_link) - len(state.cannot_link)
    budget = min(budget, undecided_total)
    rng = np.random.default_rng(seed)

    dist_of: dict[Pair, tuple[str, float]] = {}
    if pools is not None:
        for pool, view in zip(pools, (SAME_VIEW, CROSS_VIEW)):
            for i in range(len(pool)):
                dist_of[pool.pair(i)] = (view, float(pool.dist[i]))

    chosen: list[Pair] = []
    seen: set[Pair] = set()
    # rejection-sample while the undecided fraction is healthy
    attempts = 0
    max_attempts = 20 * max(budget, 1) + 100
    while len(chosen) < budget and attempts < max_attempts:
        attempts += 1
        k = int(rng.integers(total))
        # unrank the k-th pair of the upper triangle
        i = int(n - 2 - np.floor(np.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2.0 - 0.5))
        j = int(k + i + 1 - i * (2 * n - i - 1) // 2)
        p = Pair.of(tids[i], tids[j])
        if p in seen or state.is_decided(p):
            continue
        seen.add(p)
        chosen.append(p)
    if len(chosen) < budget:
        # dense fallback near pool exhaustion: enumerate the rest
        remaining = [
            Pair.of(tids[i], tids[j])
            for i in range(n)
            for j in range(i + 1, n)
            if Pair(tids[i], tids[j]) not in seen
            and not state.is_decided(Pair(tids[i], tids[j]))
        ]
        extra = rng.permutation(len(remaining))[: budget - len(chosen)]
        chosen.extend(remaining[int(e)] for e in sorted(extra))

    cands = []
    for p in chosen:
        view, dist = dist_of.get(p, ("unknown", float("nan")))
        cands.append(Candidate(p, view, dist))
    same_n = sum(1 for c in cands if c.view == SAME_VIEW)
    cross_n = sum(1 for c in cands if c.view == CROSS_VIEW)
    return CandidateBatch(
        pairs=cands,
        iteration=iteration,
        same_view_selected=same_n,
        cross_view_selected=cross_n,
    )


def kmeans(X: np.ndarray, k: int, seed, max_iters: int = 100, tol: float = 1e-6):
    """Lloyd iterations with k-means++ seeding.

    Returns (centers, labels, distances-to-assigned-center).
    """
    n = X.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        probs = closest / closest.sum() if closest.sum() > 0 else np.full(n, 1.0 / n)
        centers[c] = X[int(rng.choice(n, p=probs))]
        closest = np.minimum(closest, np.sum((X - centers[c]) ** 2, axis=1))

    for _ in range(max_iters):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = X[labels == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < tol:
            break
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    dist = np.sqrt(d2[np.arange(n), labels])
    return centers, labels, dist


def select_kmeans(
    tracklet_features: np.ndarray,
    tracklet_ids: list[int],
    state: LabelState,
    k: int,
    budget: int,
    seed,
) -> list[int]:
    """K-means baseline: rank tracklets by distance to their assigned center
    ascending (ties by tracklet id) and return the top ``budget`` for direct
    identity annotation."""
    _, _, dist = kmeans(np.asarray(tracklet_features, dtype=np.float64), k, seed)
    order = sorted(range(len(tracklet_ids)), key=lambda i: (dist[i], tracklet_ids[i]))
    return [tracklet_ids[i] for i in order[:budget]]
