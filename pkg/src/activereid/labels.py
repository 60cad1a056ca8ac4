"""Pseudo-label state: constraint graph, transitive closure, label merging.

Tracklets start as singleton clusters. A positive verdict merges the two
clusters and auto-derives every cross pair as must-link; a negative verdict
derives cluster-level cannot-links. Label merging runs DBSCAN over the
0/1 merge-distance matrix (0 for must-link pairs), which with eps < 1 and
MinPts = 2 reduces to connected components of the must-link graph; noise
points keep fresh singleton labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import DatasetManifest
from .metric import Pair

MATCH = "match"
NOMATCH = "nomatch"


class ContradictionError(ValueError):
    """A verdict conflicts with the existing closure; the pair is parked."""


class AlreadyKnownError(ValueError):
    """The queried pair was already decided (wasted query)."""

    def __init__(self, pair: Pair, verdict: str):
        super().__init__(f"pair {tuple(pair)} already decided as {verdict}")
        self.pair = pair
        self.verdict = verdict


@dataclass
class ApplyResult:
    """Newly decided pairs from one manual annotation (closure included)."""

    new_must: set[Pair] = field(default_factory=set)
    new_cannot: set[Pair] = field(default_factory=set)

    def auto_annotated(self, queried: Pair) -> set[Pair]:
        return (self.new_must | self.new_cannot) - {queried}


class LabelState:
    """Single-writer pseudo-label state; readers take copy() snapshots."""

    def __init__(self, tracklet_ids):
        tids = sorted(tracklet_ids)
        self.assignments: dict[int, int] = {t: t for t in tids}
        self.clusters: dict[int, set[int]] = {t: {t} for t in tids}
        self.must_link: set[Pair] = set()
        self.cannot_link: set[Pair] = set()
        # cluster-level cannot adjacency, kept in sync with cannot_link
        self.cluster_cannot: dict[int, set[int]] = {t: set() for t in tids}
        self.generation = 0
        self.manual_count = 0
        self.wasted_count = 0
        self.review_queue: list[tuple[Pair, str]] = []

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)

    def cluster_of(self, tid: int) -> int:
        return self.assignments[tid]

    def is_decided(self, pair: Pair) -> bool:
        return pair in self.must_link or pair in self.cannot_link

    def image_labels(self, manifest: DatasetManifest) -> dict[int, int]:
        """Per-image pseudo labels, inherited through the tracklet mapping."""
        return {
            rec.image_id: self.assignments[rec.tracklet_id]
            for rec in manifest.images
        }

    def copy(self) -> "LabelState":
        out = LabelState(self.assignments)
        out.assignments = dict(self.assignments)
        out.clusters = {c: set(m) for c, m in self.clusters.items()}
        out.must_link = set(self.must_link)
        out.cannot_link = set(self.cannot_link)
        out.cluster_cannot = {c: set(n) for c, n in self.cluster_cannot.items()}
        out.generation = self.generation
        out.manual_count = self.manual_count
        out.wasted_count = self.wasted_count
        out.review_queue = list(self.review_queue)
        return out


def init_labels(manifest: DatasetManifest) -> LabelState:
    """One singleton cluster per tracklet, empty constraint graph."""
    return LabelState(manifest.tracklet_ids)


def _cross_pairs(members_a, members_b) -> set[Pair]:
    return {Pair.of(x, y) for x in members_a for y in members_b}


def apply_annotation(state: LabelState, pair: Pair, verdict: str) -> ApplyResult:
    """Apply one manual verdict, restore closure, return derived pairs.

    Raises AlreadyKnownError for decided pairs (counted as wasted) and
    ContradictionError when the verdict conflicts with the closure (the
    pair is parked in the review queue).
    """
    if verdict not in (MATCH, NOMATCH):
        raise ValueError(f"unknown verdict {verdict!r}")
    if pair in state.must_link:
        state.wasted_count += 1
        raise AlreadyKnownError(pair, MATCH)
    if pair in state.cannot_link:
        state.wasted_count += 1
        raise AlreadyKnownError(pair, NOMATCH)

    ca, cb = state.assignments[pair.a], state.assignments[pair.b]
    result = ApplyResult()

    if verdict == MATCH:
        if cb in state.cluster_cannot[ca]:
            state.review_queue.append((pair, verdict))
            raise ContradictionError(
                f"match verdict for {tuple(pair)} contradicts a derived cannot-link"
            )
        mem_a, mem_b = state.clusters[ca], state.clusters[cb]
        result.new_must = _cross_pairs(mem_a, mem_b)
        state.must_link |= result.new_must
        # merge into the smaller cluster id for deterministic labeling
        keep, drop = (ca, cb) if ca < cb else (cb, ca)
        merged = state.clusters[keep] | state.clusters[drop]
        for t in state.clusters[drop]:
            state.assignments[t] = keep
        state.clusters[keep] = merged
        del state.clusters[drop]
        # cannot-links of either half extend to the whole merged cluster
        neigh = state.cluster_cannot[keep] | state.cluster_cannot.pop(drop)
        state.cluster_cannot[keep] = neigh
        for other in neigh:
            state.cluster_cannot[other].discard(drop)
            state.cluster_cannot[other].add(keep)
            expansion = _cross_pairs(merged, state.clusters[other])
            result.new_cannot |= expansion - state.cannot_link
            state.cannot_link |= expansion
    else:
        if ca == cb:
            state.review_queue.append((pair, verdict))
            raise ContradictionError(
                f"nomatch verdict for {tuple(pair)} contradicts a must-link closure"
            )
        expansion = _cross_pairs(state.clusters[ca], state.clusters[cb])
        result.new_cannot = expansion - state.cannot_link
        state.cannot_link |= expansion
        state.cluster_cannot[ca].add(cb)
        state.cluster_cannot[cb].add(ca)

    state.manual_count += 1
    return result


def dbscan(dist: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density-based clustering over a precomputed distance matrix.

    Returns a label per point; noise points get -1. Deterministic: points
    are visited in index order and clusters expanded breadth-first.
    """
    n = dist.shape[0]
    neighbors = [np.nonzero(dist[i] <= eps)[0] for i in range(n)]  # includes i
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(n, -1, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        visited[i] = True
        labels[i] = cluster
        frontier = list(neighbors[i])
        while frontier:
            j = frontier.pop()
            if labels[j] == -1:
                labels[j] = cluster
            if visited[j]:
                continue
            visited[j] = True
            if core[j]:
                frontier.extend(int(k) for k in neighbors[j])
        cluster += 1
    return labels


def merge_distance_matrix(tracklet_ids: list[int], must_link) -> np.ndarray:
    """0 for must-link pairs (and the diagonal), 1 otherwise."""
    idx = {t: i for i, t in enumerate(tracklet_ids)}
    n = len(tracklet_ids)
    d = np.ones((n, n))
    np.fill_diagonal(d, 0.0)
    for p in must_link:
        i, j = idx[p.a], idx[p.b]
        d[i, j] = d[j, i] = 0.0
    return d


def merge_labels(state: LabelState, eps: float = 0.01, min_pts: int = 2) -> LabelState:
    """Re-derive cluster assignments by DBSCAN over the merge-distance matrix.

    With eps < 1 and MinPts = 2 this is exactly connected components of
    must_link; noise points (tracklets with no confirmed match) keep fresh
    singleton cluster ids. Existing cluster ids are kept stable where the
    partition is unchanged (minimum member tracklet id names each cluster).
    """
    tids = sorted(state.assignments)
    d = merge_distance_matrix(tids, state.must_link)
    raw = dbscan(d, eps, min_pts)

    groups: dict[int, list[int]] = {}
    for tid, lab in zip(tids, raw):
        if lab < 0:
            groups[-1 - tid] = [tid]  # unique key per noise singleton
        else:
            groups.setdefault(int(lab), []).append(tid)

    assignments: dict[int, int] = {}
    clusters: dict[int, set[int]] = {}
    for members in groups.values():
        cid = min(members)
        clusters[cid] = set(members)
        for t in members:
            assignments[t] = cid
    state.assignments = assignments
    state.clusters = clusters
    # rebuild cluster-level cannot adjacency under the new cluster ids
    cluster_cannot: dict[int, set[int]] = {c: set() for c in clusters}
    for p in state.cannot_link:
        ca, cb = assignments[p.a], assignments[p.b]
        if ca != cb:
            cluster_cannot[ca].add(cb)
            cluster_cannot[cb].add(ca)
    state.cluster_cannot = cluster_cannot
    return state
