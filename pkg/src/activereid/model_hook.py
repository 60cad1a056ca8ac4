"""Embedding refresh hook standing in for the model-learning stage.

The shipped reference pulls each image vector toward its cluster centroid,
emulating the qualitative effect of supervised fine-tuning: annotated
clusters tighten, which sharpens subsequent candidate selection. A real
trainer can be plugged in through the snapshot exchange file format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import DatasetManifest
from .labels import LabelState


@dataclass
class EmbeddingSnapshot:
    stamp: int
    vectors: np.ndarray  # (N, D), rows aligned with manifest image order
    image_ids: list[int]

    def row_index(self) -> dict[int, int]:
        return {iid: i for i, iid in enumerate(self.image_ids)}


def initial_snapshot(manifest: DatasetManifest) -> EmbeddingSnapshot:
    return EmbeddingSnapshot(
        stamp=0,
        vectors=manifest.feature_matrix().copy(),
        image_ids=[r.image_id for r in manifest.images],
    )


def refresh(
    snapshot: EmbeddingSnapshot,
    state: LabelState,
    manifest: DatasetManifest,
    alpha: float = 0.3,
) -> EmbeddingSnapshot:
    """Centroid pull: v' = (1 - alpha) * v + alpha * centroid(cluster(v)).

    alpha = 0 is the identity refresher (stamp still advances); alpha = 1
    maps every image exactly onto its cluster centroid.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    vectors = snapshot.vectors
    if alpha == 0.0:
        new = vectors.copy()
    else:
        rows = snapshot.row_index()
        # image row indices per cluster
        cluster_rows: dict[int, list[int]] = {}
        for rec in manifest.images:
            cid = state.assignments[rec.tracklet_id]
            cluster_rows.setdefault(cid, []).append(rows[rec.image_id])
        new = vectors.copy()
        for members in cluster_rows.values():
            idx = np.array(members)
            centroid = vectors[idx].mean(axis=0)
            new[idx] = (1.0 - alpha) * vectors[idx] + alpha * centroid
    return EmbeddingSnapshot(
        stamp=snapshot.stamp + 1, vectors=new, image_ids=list(snapshot.image_ids)
    )


def write_snapshot(snapshot: EmbeddingSnapshot, path) -> None:
    """Snapshot exchange format for external trainers: a stamp header line
    followed by one {"image_id", "feature"} record per image."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"stamp": snapshot.stamp}) + "\n")
        for iid, vec in zip(snapshot.image_ids, snapshot.vectors):
            fh.write(json.dumps({"image_id": iid, "feature": list(map(float, vec))}) + "\n")


def read_snapshot(path) -> EmbeddingSnapshot:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln]
    header = json.loads(lines[0])
    image_ids: list[int] = []
    vectors: list[list[float]] = []
    for line in lines[1:]:
        rec = json.loads(line)
        image_ids.append(int(rec["image_id"]))
        vectors.append([float(v) for v in rec["feature"]])
    return EmbeddingSnapshot(
        stamp=int(header["stamp"]),
        vectors=np.array(vectors, dtype=np.float64),
        image_ids=image_ids,
    )


class ExternalTrainerHook:
    """Shell-out adapter: write the snapshot and labels, run a command that
    produces a refreshed snapshot file, read it back."""

    def __init__(self, command: list[str], workdir):
        self.command = command
        self.workdir = workdir

    def __call__(self, snapshot, state, manifest, alpha=None) -> EmbeddingSnapshot:
        import pathlib
        import subprocess

        workdir = pathlib.Path(self.workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        in_path = workdir / "snapshot_in.jsonl"
        labels_path = workdir / "labels.json"
        out_path = workdir / "snapshot_out.jsonl"
        write_snapshot(snapshot, in_path)
        labels_path.write_text(json.dumps(state.image_labels(manifest)))
        subprocess.run(
            self.command + [str(in_path), str(labels_path), str(out_path)], check=True
        )
        return read_snapshot(out_path)
