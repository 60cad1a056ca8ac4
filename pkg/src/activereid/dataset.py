"""Dataset ingestion and synthetic multi-camera dataset generation.

A manifest holds per-image embedding vectors together with the
image -> tracklet mapping and camera ids. Ground-truth identities are
optional and only meant to be consumed by the simulated oracle.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np


class ManifestError(ValueError):
    """Raised when a manifest file violates the format or its invariants."""


@dataclass(frozen=True)
class ImageRecord:
    image_id: int
    tracklet_id: int
    camera_id: int
    feature: tuple[float, ...]
    image_path: str | None = None
    identity: int | None = None


@dataclass(frozen=True)
class Tracklet:
    tracklet_id: int
    camera_id: int
    image_ids: tuple[int, ...]


@dataclass
class DatasetManifest:
    dimension: int
    camera_count: int
    images: list[ImageRecord]
    tracklets: dict[int, Tracklet] = field(default_factory=dict)

    def __post_init__(self):
        if not self.tracklets:
            self.tracklets = derive_tracklets(self.images)
        self._feature_matrix = None
        self._image_index = None

    @property
    def num_images(self) -> int:
        return len(self.images)

    @property
    def num_tracklets(self) -> int:
        return len(self.tracklets)

    @property
    def tracklet_ids(self) -> list[int]:
        return sorted(self.tracklets)

    def camera_of(self, tracklet_id: int) -> int:
        return self.tracklets[tracklet_id].camera_id

    def feature_matrix(self) -> np.ndarray:
        """(N, D) array in image order, cached after first call."""
        if self._feature_matrix is None:
            self._feature_matrix = np.array(
                [r.feature for r in self.images], dtype=np.float64
            )
        return self._feature_matrix

    def image_index(self) -> dict[int, int]:
        """image_id -> row index into feature_matrix()."""
        if self._image_index is None:
            self._image_index = {r.image_id: i for i, r in enumerate(self.images)}
        return self._image_index

    def has_identities(self) -> bool:
        return all(r.identity is not None for r in self.images)

    def tracklet_identities(self) -> dict[int, int]:
        """Ground-truth identity per tracklet. Oracle/evaluation use only."""
        if not self.has_identities():
            raise ManifestError("manifest carries no ground-truth identities")
        out: dict[int, int] = {}
        for rec in self.images:
            prev = out.setdefault(rec.tracklet_id, rec.identity)
            if prev != rec.identity:
                raise ManifestError(
                    f"tracklet {rec.tracklet_id} mixes identities {prev} and {rec.identity}"
                )
        return out

    def public_view(self) -> "DatasetManifest":
        """Copy with ground-truth identities stripped (for the active loop)."""
        return DatasetManifest(
            dimension=self.dimension,
            camera_count=self.camera_count,
            images=[replace(r, identity=None) for r in self.images],
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.dimension},{self.camera_count}".encode())
        for r in self.images:
            h.update(
                f"{r.image_id},{r.tracklet_id},{r.camera_id},{r.feature!r}".encode()
            )
        return h.hexdigest()


def derive_tracklets(images: list[ImageRecord]) -> dict[int, Tracklet]:
    members: dict[int, list[int]] = {}
    cameras: dict[int, int] = {}
    for rec in images:
        members.setdefault(rec.tracklet_id, []).append(rec.image_id)
        cam = cameras.setdefault(rec.tracklet_id, rec.camera_id)
        if cam != rec.camera_id:
            raise ManifestError(
                f"tracklet {rec.tracklet_id} spans cameras {cam} and {rec.camera_id}"
            )
    return {
        tid: Tracklet(tid, cameras[tid], tuple(sorted(ids)))
        for tid, ids in members.items()
    }


def _validate(manifest: DatasetManifest) -> DatasetManifest:
    seen: set[int] = set()
    for i, rec in enumerate(manifest.images):
        if rec.image_id in seen:
            raise ManifestError(f"record {i}: duplicate image_id {rec.image_id}")
        seen.add(rec.image_id)
        if len(rec.feature) != manifest.dimension:
            raise ManifestError(
                f"record {i} (image {rec.image_id}): feature length "
                f"{len(rec.feature)} != declared dimension {manifest.dimension}"
            )
    if manifest.camera_count < 1:
        raise ManifestError("camera_count must be >= 1")
    return manifest


def load_manifest(path) -> DatasetManifest:
    """Parse a line-delimited manifest file (header line + one record per image)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln]
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        dimension = int(header["dimension"])
        camera_count = int(header["camera_count"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: malformed header line: {exc}") from exc

    images: list[ImageRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            images.append(
                ImageRecord(
                    image_id=int(rec["image_id"]),
                    tracklet_id=int(rec["tracklet_id"]),
                    camera_id=int(rec["camera_id"]),
                    feature=tuple(float(v) for v in rec["feature"]),
                    image_path=rec.get("image_path"),
                    identity=rec.get("identity"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}:{lineno}: malformed record: {exc}") from exc
    return _validate(DatasetManifest(dimension, camera_count, images))


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {"dimension": manifest.dimension, "camera_count": manifest.camera_count}
            )
            + "\n"
        )
        for r in manifest.images:
            rec = {
                "image_id": r.image_id,
                "tracklet_id": r.tracklet_id,
                "camera_id": r.camera_id,
                "feature": list(r.feature),
            }
            if r.image_path is not None:
                rec["image_path"] = r.image_path
            if r.identity is not None:
                rec["identity"] = r.identity
            fh.write(json.dumps(rec) + "\n")


def _as_sampler(spec):
    """Accept an int (constant) or (low, high) inclusive range for counts."""
    if isinstance(spec, (tuple, list)):
        lo, hi = int(spec[0]), int(spec[1])
        if lo < 1 or hi < lo:
            raise ValueError(f"bad count range {spec}")
        return lambda rng: int(rng.integers(lo, hi + 1))
    n = int(spec)
    if n < 1:
        raise ValueError(f"count must be positive, got {n}")
    return lambda rng: n


def generate_synthetic(
    identities: int,
    cameras: int,
    tracklets_per_identity_per_camera=1,
    images_per_tracklet=5,
    dimension: int = 32,
    within_id_std: float = 0.1,
    cross_camera_shift_std: float = 1.0,
    seed: int = 0,
    normalize: bool = False,
) -> DatasetManifest:
    """Generate a multi-camera dataset with known identities.

    Each identity has a unit-Gaussian base vector; each (identity, camera)
    pair gets an offset with std ``cross_camera_shift_std`` so that
    same-camera matches are closer than cross-camera matches; images add
    per-image noise with std ``within_id_std``.
    """
    if identities < 1 or cameras < 1 or dimension < 1:
        raise ValueError("identities, cameras and dimension must be positive")
    if within_id_std < 0 or cross_camera_shift_std < 0:
        raise ValueError("stds must be >= 0")
    n_tracklets = _as_sampler(tracklets_per_identity_per_camera)
    n_images = _as_sampler(images_per_tracklet)

    rng = np.random.default_rng(seed)
    images: list[ImageRecord] = []
    image_id = 0
    tracklet_id = 0
    for ident in range(identities):
        base = rng.normal(size=dimension)
        for cam in range(cameras):
            offset = rng.normal(scale=cross_camera_shift_std or 0.0, size=dimension) \
                if cross_camera_shift_std > 0 else np.zeros(dimension)
            for _ in range(n_tracklets(rng)):
                for _ in range(n_images(rng)):
                    noise = rng.normal(scale=within_id_std, size=dimension) \
                        if within_id_std > 0 else np.zeros(dimension)
                    vec = base + offset + noise
                    if normalize:
                        vec = vec / np.linalg.norm(vec)
                    images.append(
                        ImageRecord(
                            image_id=image_id,
                            tracklet_id=tracklet_id,
                            camera_id=cam,
                            feature=tuple(float(v) for v in vec),
                            identity=ident,
                        )
                    )
                    image_id += 1
                tracklet_id += 1
    return _validate(DatasetManifest(dimension, cameras, images))
