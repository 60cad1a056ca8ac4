"""Shared fixtures and independent reference oracles for the test suite.

Oracles here are deliberately naive re-implementations (brute-force
enumeration, union-find components, dense AP computation) kept separate
from the package so the two can disagree.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from activereid.dataset import DatasetManifest, ImageRecord


def make_manifest(
    tracklet_features: dict[int, np.ndarray],
    cameras: dict[int, int],
    identities: dict[int, int] | None = None,
    camera_count: int | None = None,
) -> DatasetManifest:
    """Build a manifest from per-tracklet (m, D) feature blocks."""
    images = []
    image_id = 0
    dim = next(iter(tracklet_features.values())).shape[1]
    for tid in sorted(tracklet_features):
        for row in np.atleast_2d(tracklet_features[tid]):
            images.append(
                ImageRecord(
                    image_id=image_id,
                    tracklet_id=tid,
                    camera_id=cameras[tid],
                    feature=tuple(float(v) for v in row),
                    identity=None if identities is None else identities[tid],
                )
            )
            image_id += 1
    if camera_count is None:
        camera_count = len(set(cameras.values()))
    return DatasetManifest(dim, camera_count, images)


def brute_set_to_set(P, Q, K: int) -> float:
    """Reference set-to-set distance: enumerate, sort, average K smallest."""
    dists = sorted(
        float(np.linalg.norm(np.asarray(p, float) - np.asarray(q, float)))
        for p, q in itertools.product(np.atleast_2d(P), np.atleast_2d(Q))
    )
    return float(np.mean(dists[: min(K, len(dists))]))


class UnionFindOracle:
    """Independent connected-components oracle over must-link edges."""

    def __init__(self, ids):
        self.parent = {i: i for i in ids}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def partition(self) -> dict:
        groups: dict = {}
        for x in self.parent:
            groups.setdefault(self.find(x), set()).add(x)
        return groups


def canonical_partition(assignments: dict[int, int]) -> set[frozenset]:
    groups: dict[int, set[int]] = {}
    for tid, cid in assignments.items():
        groups.setdefault(cid, set()).add(tid)
    return {frozenset(g) for g in groups.values()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
