"""Set-to-set tracklet distance and per-view sorted pair pools.

The tracklet dissimilarity is the mean of the K smallest image-pair
Euclidean distances between the two image sets. Pools hold every tracklet
pair, split into same-view and cross-view, sorted ascending by distance
with (a, b) lexicographic tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import DatasetManifest

SAME_VIEW = "same_view"
CROSS_VIEW = "cross_view"


class Pair(NamedTuple):
    """Canonical unordered tracklet pair (a < b)."""

    a: int
    b: int

    @staticmethod
    def of(x: int, y: int) -> "Pair":
        if x == y:
            raise ValueError(f"pair members must differ, got ({x}, {y})")
        return Pair(x, y) if x < y else Pair(y, x)


def view_class(manifest: DatasetManifest, pair: Pair) -> str:
    same = manifest.camera_of(pair.a) == manifest.camera_of(pair.b)
    return SAME_VIEW if same else CROSS_VIEW


def set_to_set_distance(P, Q, K: int = 3) -> float:
    """Mean of the K smallest Euclidean distances between images of P and Q.

    Falls back to averaging all |P|*|Q| pairs when K exceeds the pair count,
    so single-image tracklets stay comparable.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if P.size == 0 or Q.size == 0:
        raise ValueError("set_to_set_distance: empty image set")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    diff = P[:, None, :] - Q[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).ravel()
    if K >= d.size:
        return float(d.mean())
    return float(np.partition(d, K - 1)[:K].mean())


@dataclass
class DistanceCache:
    """Full tracklet-to-tracklet distance matrix under one embedding stamp."""

    tracklet_ids: list[int]
    matrix: np.ndarray  # (C, C), symmetric, zero diagonal
    stamp: int

    def index_of(self) -> dict[int, int]:
        return {tid: i for i, tid in enumerate(self.tracklet_ids)}

    def distance(self, pair: Pair) -> float:
        idx = self.index_of()
        return float(self.matrix[idx[pair.a], idx[pair.b]])


@dataclass
class PairPool:
    """Tracklet pairs of one view class, ascending by (distance, a, b)."""

    a: np.ndarray
    b: np.ndarray
    dist: np.ndarray

    def __len__(self) -> int:
        return len(self.dist)

    def pair(self, i: int) -> Pair:
        return Pair(int(self.a[i]), int(self.b[i]))


def _tracklet_distance_matrix(
    manifest: DatasetManifest, features: np.ndarray, K: int
) -> tuple[list[int], np.ndarray]:
    """Vectorized all-pairs set-to-set distances.

    Pads tracklets to a common image count against a sentinel row at
    infinite distance, so the K-smallest selection stays exact; pairs with
    fewer than K real image pairs fall back to the mean of all of them.
    """
    tids = manifest.tracklet_ids
    C = len(tids)
    idx_map = manifest.image_index()
    n_img = features.shape[0]

    sizes = np.array([len(manifest.tracklets[t].image_ids) for t in tids])
    m_max = int(sizes.max())
    # member row indices padded with the sentinel index n_img
    members = np.full((C, m_max), n_img, dtype=np.int64)
    for i, tid in enumerate(tids):
        rows = [idx_map[iid] for iid in manifest.tracklets[tid].image_ids]
        members[i, : len(rows)] = rows

    # image-level distance matrix with an extra +inf sentinel row/column
    sq = np.einsum("ij,ij->i", features, features)
    g = features @ features.T
    d2 = sq[:, None] + sq[None, :] - 2.0 * g
    np.maximum(d2, 0.0, out=d2)
    dimg = np.sqrt(d2)
    dpad = np.full((n_img + 1, n_img + 1), np.inf)
    dpad[:n_img, :n_img] = dimg

    out = np.zeros((C, C))
    flat_members = members.reshape(-1)
    # chunk rows so the gathered (chunk, C, m_max^2) block stays modest
    chunk = max(1, int(4e7 // max(1, C * m_max * m_max)))
    for start in range(0, C, chunk):
        rows = members[start : start + chunk]  # (c, m_max)
        block = dpad[rows.reshape(-1)][:, flat_members]
        c = rows.shape[0]
        block = (
            block.reshape(c, m_max, C, m_max)
            .transpose(0, 2, 1, 3)
            .reshape(c, C, m_max * m_max)
        )
        cnt = sizes[start : start + chunk, None] * sizes[None, :]
        k_eff = np.minimum(K, cnt)
        if K < m_max * m_max:
            part = np.partition(block, K - 1, axis=2)[:, :, :K]
        else:
            part = np.sort(block, axis=2)
        # the partitioned prefix holds the K smallest entries; padded +inf
        # entries appear only when cnt < K, where the fallback is the mean
        # of all real pairs -- summing the finite entries covers both cases
        finite = np.where(np.isfinite(part), part, 0.0)
        out[start : start + chunk] = finite.sum(axis=2) / k_eff
    np.fill_diagonal(out, 0.0)
    # exact symmetry regardless of summation order
    out = np.minimum(out, out.T)
    return tids, out


def build_distance_pools(
    manifest: DatasetManifest,
    embeddings: np.ndarray,
    K: int = 3,
    stamp: int = 0,
    top_m: int | None = None,
) -> tuple[DistanceCache, PairPool, PairPool]:
    """Compute all C(C-1)/2 pair distances and the two sorted view pools.

    ``top_m`` optionally truncates each pool to its M smallest pairs (the
    blocked mode for large C); prefixes are identical to the full pools.
    """
    features = np.asarray(embeddings, dtype=np.float64)
    tids, matrix = _tracklet_distance_matrix(manifest, features, K)
    cache = DistanceCache(tracklet_ids=tids, matrix=matrix, stamp=stamp)

    C = len(tids)
    iu, ju = np.triu_indices(C, k=1)
    tid_arr = np.array(tids)
    cams = np.array([manifest.camera_of(t) for t in tids])
    a = tid_arr[iu]
    b = tid_arr[ju]
    dist = matrix[iu, ju]
    same = cams[iu] == cams[ju]

    pools = []
    for mask in (same, ~same):
        pa, pb, pd = a[mask], b[mask], dist[mask]
        order = np.lexsort((pb, pa, pd))
        if top_m is not None and top_m < len(order):
            order = order[:top_m]
        pools.append(PairPool(pa[order], pb[order], pd[order]))
    return cache, pools[0], pools[1]


def save_distance_cache(cache: DistanceCache, manifest_hash: str, path) -> None:
    np.savez_compressed(
        path,
        tracklet_ids=np.array(cache.tracklet_ids),
        matrix=cache.matrix,
        stamp=np.array([cache.stamp]),
        manifest_hash=np.array([manifest_hash]),
    )


def load_distance_cache(path, manifest_hash: str, stamp: int) -> DistanceCache | None:
    """Return the cached matrix if it matches (manifest hash, stamp), else None."""
    data = np.load(path, allow_pickle=False)
    if str(data["manifest_hash"][0]) != manifest_hash or int(data["stamp"][0]) != stamp:
        return None
    return DistanceCache(
        tracklet_ids=[int(t) for t in data["tracklet_ids"]],
        matrix=data["matrix"],
        stamp=int(data["stamp"][0]),
    )
