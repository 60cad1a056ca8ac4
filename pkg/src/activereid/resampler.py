"""Adaptive resampling: label propagation and reciprocal cluster filtering.

Soft cluster distributions diffuse through a fully connected transition
matrix built from tracklet distances; rows of tracklets in multi-member
clusters are clamped to their one-hot indicators. A candidate pair then
survives only if each side's cluster is among the other's top-K soft-label
neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import LabelState
from .metric import DistanceCache
from .sampler import CandidateBatch


def sigma_median_sq(dist_matrix: np.ndarray) -> float:
    """Kernel bandwidth from the median of all squared off-diagonal distances.

    Dominated by far (between-identity) pairs, which flattens the kernel on
    datasets with many identities; prefer sigma_nn_median_sq for the loop.
    """
    n = dist_matrix.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    med = float(np.median(dist_matrix[iu, ju] ** 2))
    return med if med > 0 else 1.0


def sigma_nn_median_sq(
    dist_matrix: np.ndarray,
    tracklet_ids: list[int] | None = None,
    assignments: dict[int, int] | None = None,
) -> float:
    """Local-scale kernel bandwidth: median squared nearest-neighbor distance.

    Keeps the transition kernel discriminative between near and far pairs
    regardless of how many identities the dataset holds. When cluster
    assignments are given, neighbors inside a tracklet's own cluster are
    skipped: merged tracklets get pulled together by the model refresh, and
    a bandwidth tracking those collapsed gaps would underflow every weight
    across the undecided frontier. The frontier scale (nearest tracklet in
    a different cluster) is what the kernel has to resolve.
    """
    n = dist_matrix.shape[0]
    if n < 2:
        return 1.0
    exclude = np.eye(n, dtype=bool)
    if assignments is not None and tracklet_ids is not None:
        labels = np.asarray([assignments[t] for t in tracklet_ids])
        exclude |= labels[:, None] == labels[None, :]
    masked = np.where(exclude, np.inf, dist_matrix)
    nn = masked.min(axis=1)
    nn = nn[np.isfinite(nn)]  # a cluster spanning everything leaves no frontier
    if not len(nn):
        return 1.0
    med = float(np.median(nn**2))
    return med if med > 0 else 1.0


def build_transition(distances, sigma: float) -> np.ndarray:
    """Column-normalized transition matrix T_ij = w_ij / sum_k w_kj with
    w_ij = exp(-d_ij^2 / sigma). The diagonal uses d_ii = 0, so w_ii = 1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    d = distances.matrix if isinstance(distances, DistanceCache) else np.asarray(distances)
    w = np.exp(-(d.astype(np.float64) ** 2) / sigma)
    return w / w.sum(axis=0, keepdims=True)


def _row_normalize(Z: np.ndarray) -> np.ndarray:
    sums = Z.sum(axis=1, keepdims=True)
    sums[sums == 0] = 1.0
    return Z / sums


@dataclass
class SoftLabels:
    """Row-stochastic soft cluster assignments per tracklet."""

    matrix: np.ndarray  # (C, N_c)
    tracklet_ids: list[int]
    cluster_ids: list[int]
    converged: bool = True
    iterations: int = 0
    # pre-clamp readout of the final step; meaningful for clamped rows,
    # which are exactly one-hot in `matrix`
    readout: np.ndarray | None = None

    def row_index(self) -> dict[int, int]:
        return {t: i for i, t in enumerate(self.tracklet_ids)}

    def col_index(self) -> dict[int, int]:
        return {c: j for j, c in enumerate(self.cluster_ids)}

    def smoothed(self) -> "SoftLabels":
        """Same labels with the pre-clamp readout as the distribution."""
        m = self.readout if self.readout is not None else self.matrix
        return SoftLabels(
            matrix=m,
            tracklet_ids=self.tracklet_ids,
            cluster_ids=self.cluster_ids,
            converged=self.converged,
            iterations=self.iterations,
        )


def one_hot_labels(state: LabelState) -> tuple[np.ndarray, list[int], list[int], np.ndarray]:
    """(Z, tracklet_ids, cluster_ids, clamp_mask) for the current assignments."""
    tids = sorted(state.assignments)
    cids = sorted(state.clusters)
    col = {c: j for j, c in enumerate(cids)}
    Z = np.zeros((len(tids), len(cids)))
    clamp = np.zeros(len(tids), dtype=bool)
    for i, t in enumerate(tids):
        c = state.assignments[t]
        Z[i, col[c]] = 1.0
        clamp[i] = len(state.clusters[c]) >= 2
    return Z, tids, cids, clamp


def propagate(
    T: np.ndarray,
    state: LabelState,
    max_iters: int = 50,
    tol: float = 1e-6,
) -> SoftLabels:
    """Iterate (Z <- T Z, row-normalize, clamp) from the one-hot init until
    the max row-wise L1 change drops below tol or max_iters is reached."""
    Z0, tids, cids, clamp = one_hot_labels(state)
    Z = Z0.copy()
    converged = False
    it = 0
    pre_clamp = Z
    for it in range(1, max_iters + 1):
        nxt = _row_normalize(T @ Z)
        pre_clamp = nxt.copy()
        nxt[clamp] = Z0[clamp]
        delta = np.abs(nxt - Z).sum(axis=1).max() if len(tids) else 0.0
        Z = nxt
        if delta < tol:
            converged = True
            break
    return SoftLabels(
        matrix=Z,
        tracklet_ids=tids,
        cluster_ids=cids,
        converged=converged,
        iterations=it,
        readout=pre_clamp,
    )


def top_k_clusters(soft: SoftLabels, row: int, k: int, columns: np.ndarray | None = None) -> list[int]:
    """Cluster ids of the k largest probabilities in one row; ties broken by
    cluster id ascending. `columns` restricts the ranking to a subset of
    column indices."""
    probs = soft.matrix[row]
    cids = np.asarray(soft.cluster_ids)
    if columns is not None:
        probs = probs[columns]
        cids = cids[columns]
    order = np.lexsort((cids, -probs))
    return [int(c) for c in cids[order[:k]]]


def _top_k_row(scores: np.ndarray, cids: np.ndarray, k: int) -> set[int]:
    # ties broken by cluster id ascending
    order = np.lexsort((cids, -scores))
    return {int(c) for c in cids[order[:k]]}


def reciprocal_filter(
    batch: CandidateBatch,
    soft: SoftLabels,
    K_recip: int,
    state: LabelState,
    cameras: dict[int, int] | None = None,
    distances: np.ndarray | None = None,
) -> CandidateBatch:
    """Keep a pair only if each tracklet's cluster is among the other
    tracklet's top-K cluster neighbors. Preserves input order.

    Without camera information, neighbors are ranked by the soft-label rows
    as-is. With `cameras` (tracklet id to camera id) and the pairwise
    tracklet `distances` matrix (rows/columns in soft.tracklet_ids order),
    each side ranks clusters by their nearest member from the partner's
    camera. Same-camera and cross-camera distances live on different scales
    when views are biased, so a pooled soft-label ranking buries cross-view
    true matches under the same-view crowd; nearest-member ranking within
    the partner's camera keeps the mutual top-K test meaningful on both
    pool types and is insensitive to cluster size.
    """
    if K_recip >= len(soft.cluster_ids):
        kept = list(batch.pairs)
    else:
        rows = soft.row_index()
        cids = np.asarray(soft.cluster_ids)
        per_view = cameras is not None and distances is not None
        col = soft.col_index()
        cam_members: dict[int, tuple[np.ndarray, np.ndarray]] = {}

        def members_for(cam: int) -> tuple[np.ndarray, np.ndarray]:
            # (row indices of cam's tracklets, their cluster column codes)
            if cam not in cam_members:
                idx = np.fromiter(
                    (i for i, t in enumerate(soft.tracklet_ids) if cameras[t] == cam),
                    dtype=np.intp,
                )
                codes = np.fromiter(
                    (col[state.cluster_of(soft.tracklet_ids[i])] for i in idx),
                    dtype=np.intp,
                )
                cam_members[cam] = (idx, codes)
            return cam_members[cam]

        cache: dict[tuple[int, int | None], set[int]] = {}

        def neighbors(tid: int, partner: int) -> set[int]:
            cam = cameras[partner] if per_view else None
            key = (tid, cam)
            if key not in cache:
                if per_view:
                    idx, codes = members_for(cam)
                    nearest = np.full(len(cids), np.inf)
                    np.minimum.at(nearest, codes, distances[rows[tid], idx])
                    cache[key] = _top_k_row(-nearest, cids, K_recip)
                else:
                    cache[key] = _top_k_row(soft.matrix[rows[tid]], cids, K_recip)
            return cache[key]

        kept = [
            c
            for c in batch.pairs
            if state.cluster_of(c.pair.b) in neighbors(c.pair.a, c.pair.b)
            and state.cluster_of(c.pair.a) in neighbors(c.pair.b, c.pair.a)
        ]
    same_n = sum(1 for c in kept if c.view == "same_view")
    cross_n = sum(1 for c in kept if c.view == "cross_view")
    return CandidateBatch(
        pairs=kept,
        iteration=batch.iteration,
        same_view_selected=same_n,
        cross_view_selected=cross_n,
    )
