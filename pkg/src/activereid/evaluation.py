"""Budget accounting and re-ID retrieval metrics.

The annotation ratio divides the manual pair count by T_pa, the average
number of random pair annotations needed to decide every pair when the
same closure rules synchronize history. Retrieval quality is measured by
CMC rank-k rates and mAP over set-to-set ranked galleries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import DatasetManifest
from .labels import LabelState
from .metric import Pair, set_to_set_distance


@dataclass
class BudgetReport:
    tp_manual: int
    auto_count: int
    T_pa: float | None = None
    gained_tp_ratio: float | None = None

    @property
    def annotation_ratio(self) -> float | None:
        if self.T_pa is None or self.T_pa <= 0:
            return None
        return self.tp_manual / self.T_pa


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return ra


def _simulate_total_annotations(identity, n: int, rng) -> int:
    """One random-annotation run with full closure synchronization.

    Walks a uniform permutation of all pairs; a pick counts as manual only
    if still undecided at its turn, which makes each manual pick uniform
    over the currently undecided pairs.
    """
    uf = _UnionFind(n)
    sizes = [1] * n
    cannot: list[set[int]] = [set() for _ in range(n)]  # keyed by cluster root
    decided_pairs = 0
    total_pairs = n * (n - 1) // 2
    manual = 0

    order = rng.permutation(total_pairs)
    iu, ju = np.triu_indices(n, k=1)
    for k in order:
        if decided_pairs >= total_pairs:
            break
        i, j = int(iu[k]), int(ju[k])
        ri, rj = uf.find(i), uf.find(j)
        if ri == rj or rj in cannot[ri]:
            continue
        manual += 1
        if identity[i] == identity[j]:
            # merge: cross pairs become must; cannot sets propagate
            decided_pairs += sizes[ri] * sizes[rj]
            for other in cannot[rj] - cannot[ri]:
                decided_pairs += sizes[ri] * sizes[other]
            for other in cannot[ri] - cannot[rj]:
                decided_pairs += sizes[rj] * sizes[other]
            keep = uf.union(ri, rj)
            drop = rj if keep == ri else ri
            merged_cannot = cannot[ri] | cannot[rj]
            for other in merged_cannot:
                cannot[other].discard(ri)
                cannot[other].discard(rj)
                cannot[other].add(keep)
            cannot[keep] = merged_cannot
            sizes[keep] = sizes[ri] + sizes[rj]
        else:
            decided_pairs += sizes[ri] * sizes[rj]
            cannot[ri].add(rj)
            cannot[rj].add(ri)
    return manual


def estimate_T_pa(identities, runs: int = 10, seed: int = 0) -> float:
    """Mean manual-annotation count over ``runs`` random labeling simulations.

    ``identities`` maps tracklet id -> ground-truth identity (dict) or is a
    sequence of identities in tracklet order.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if isinstance(identities, dict):
        ident = [identities[t] for t in sorted(identities)]
    else:
        ident = list(identities)
    n = len(ident)
    if n < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    totals = [_simulate_total_annotations(ident, n, rng) for _ in range(runs)]
    return float(np.mean(totals))


def true_positive_pairs(identities: dict[int, int]) -> set[Pair]:
    groups: dict[int, list[int]] = {}
    for tid, ident in identities.items():
        groups.setdefault(ident, []).append(tid)
    out: set[Pair] = set()
    for members in groups.values():
        members = sorted(members)
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                out.add(Pair(members[i], members[j]))
    return out


def gained_tp_ratio(state: LabelState, identities: dict[int, int]) -> float:
    """Fraction of all true-positive pairs present in must_link."""
    tp = true_positive_pairs(identities)
    if not tp:
        return 1.0
    gained = sum(1 for p in state.must_link if p in tp)
    return gained / len(tp)


@dataclass
class ReidResult:
    cmc: dict[int, float]
    mAP: float
    excluded_queries: list[int] = field(default_factory=list)


def evaluate_reid(
    embeddings: np.ndarray,
    manifest: DatasetManifest,
    query_set: list[int],
    gallery_set: list[int],
    K_dist: int = 3,
    exclude_same_camera: bool = True,
    ranks=(1, 5, 10, 20),
    dist_matrix: np.ndarray | None = None,
    dist_tracklet_ids: list[int] | None = None,
) -> ReidResult:
    """CMC and mAP over set-to-set ranked galleries.

    Gallery entries equal to the query, and (by default) same-camera
    same-identity entries, are excluded. Queries left with no valid match
    are dropped from the averages and reported.
    """
    if not query_set or not gallery_set:
        raise ValueError("query and gallery sets must be non-empty")
    identities = manifest.tracklet_identities()
    rows = manifest.image_index()
    features = np.asarray(embeddings, dtype=np.float64)

    def tracklet_features(tid: int) -> np.ndarray:
        return features[[rows[i] for i in manifest.tracklets[tid].image_ids]]

    if dist_matrix is not None:
        idx = {t: i for i, t in enumerate(dist_tracklet_ids)}

        def distance(q: int, g: int) -> float:
            return float(dist_matrix[idx[q], idx[g]])

    else:
        cache: dict[Pair, float] = {}

        def distance(q: int, g: int) -> float:
            p = Pair.of(q, g)
            if p not in cache:
                cache[p] = set_to_set_distance(
                    tracklet_features(p.a), tracklet_features(p.b), K_dist
                )
            return cache[p]

    max_rank = max(ranks)
    cmc_hits = np.zeros(max_rank)
    aps: list[float] = []
    excluded: list[int] = []
    valid_queries = 0

    for q in query_set:
        entries = []
        for g in gallery_set:
            if g == q:
                continue
            same_id = identities[g] == identities[q]
            if (
                exclude_same_camera
                and same_id
                and manifest.camera_of(g) == manifest.camera_of(q)
            ):
                continue
            entries.append((distance(q, g), g, same_id))
        entries.sort(key=lambda e: (e[0], e[1]))
        matches = np.array([e[2] for e in entries], dtype=bool)
        if not matches.any():
            excluded.append(q)
            continue
        valid_queries += 1
        first = int(np.argmax(matches))
        if first < max_rank:
            cmc_hits[first:] += 1
        # average precision with all relevant gallery items
        rel_pos = np.nonzero(matches)[0]
        precisions = [(k + 1) / (pos + 1) for k, pos in enumerate(rel_pos)]
        aps.append(float(np.mean(precisions)))

    if valid_queries == 0:
        raise ValueError("no query has a valid gallery match")
    cmc = {k: float(cmc_hits[k - 1] / valid_queries) for k in ranks if k <= max_rank}
    return ReidResult(cmc=cmc, mAP=float(np.mean(aps)), excluded_queries=excluded)
