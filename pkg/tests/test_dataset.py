"""Manifest ingestion, validation, round-trips, and synthetic generation."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activereid.dataset import (
    DatasetManifest,
    ImageRecord,
    ManifestError,
    generate_synthetic,
    load_manifest,
    write_manifest,
)
from activereid.metric import set_to_set_distance


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_small_manifest(tmp_path):
    p = tmp_path / "m.jsonl"
    write_lines(
        p,
        [
            json.dumps({"dimension": 8, "camera_count": 2}),
            *(
                json.dumps(
                    {
                        "image_id": i,
                        "tracklet_id": i // 2,
                        "camera_id": i // 2,
                        "feature": [float(i)] * 8,
                    }
                )
                for i in range(4)
            ),
        ],
    )
    m = load_manifest(p)
    assert m.num_tracklets == 2
    assert m.num_images == 4
    assert m.dimension == 8
    assert m.tracklets[0].image_ids == (0, 1)
    assert m.tracklets[1].camera_id == 1


def test_dimension_mismatch_reports_record(tmp_path):
    p = tmp_path / "m.jsonl"
    write_lines(
        p,
        [
            json.dumps({"dimension": 8, "camera_count": 1}),
            json.dumps({"image_id": 0, "tracklet_id": 0, "camera_id": 0, "feature": [0.0] * 7}),
        ],
    )
    with pytest.raises(ManifestError, match="feature length 7"):
        load_manifest(p)


def test_duplicate_image_id_rejected(tmp_path):
    p = tmp_path / "m.jsonl"
    rec = json.dumps({"image_id": 3, "tracklet_id": 0, "camera_id": 0, "feature": [0.0]})
    write_lines(p, [json.dumps({"dimension": 1, "camera_count": 1}), rec, rec])
    with pytest.raises(ManifestError, match="duplicate image_id 3"):
        load_manifest(p)


def test_malformed_record_reports_line(tmp_path):
    p = tmp_path / "m.jsonl"
    write_lines(p, [json.dumps({"dimension": 1, "camera_count": 1}), "{not json"])
    with pytest.raises(ManifestError, match=r":2: malformed record"):
        load_manifest(p)


def test_empty_and_headerless_files_rejected(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text("", encoding="utf-8")
    with pytest.raises(ManifestError, match="empty"):
        load_manifest(p)
    p.write_text('{"image_id": 0}\n', encoding="utf-8")
    with pytest.raises(ManifestError, match="malformed header"):
        load_manifest(p)


def test_tracklet_spanning_cameras_rejected():
    images = [
        ImageRecord(0, 0, 0, (0.0,)),
        ImageRecord(1, 0, 1, (0.0,)),
    ]
    with pytest.raises(ManifestError, match="spans cameras"):
        DatasetManifest(1, 2, images)


def test_partition_property_on_generated_data():
    m = generate_synthetic(identities=6, cameras=3, tracklets_per_identity_per_camera=2, seed=3)
    members = [iid for t in m.tracklets.values() for iid in t.image_ids]
    assert len(members) == m.num_images
    assert len(set(members)) == m.num_images


@settings(max_examples=25, deadline=None)
@given(
    identities=st.integers(1, 5),
    cameras=st.integers(1, 3),
    seed=st.integers(0, 10_000),
    imgs=st.integers(1, 4),
)
def test_manifest_round_trip(tmp_path_factory, identities, cameras, seed, imgs):
    m = generate_synthetic(
        identities=identities,
        cameras=cameras,
        tracklets_per_identity_per_camera=(1, 2),
        images_per_tracklet=imgs,
        dimension=5,
        seed=seed,
    )
    p = tmp_path_factory.mktemp("rt") / "m.jsonl"
    write_manifest(m, p)
    back = load_manifest(p)
    assert back.dimension == m.dimension
    assert back.camera_count == m.camera_count
    assert back.images == m.images
    assert back.tracklets == m.tracklets


def test_generation_deterministic():
    kw = dict(identities=2, cameras=2, tracklets_per_identity_per_camera=1,
              images_per_tracklet=3, dimension=4, seed=7)
    a = generate_synthetic(**kw)
    b = generate_synthetic(**kw)
    assert a.images == b.images
    assert a.content_hash() == b.content_hash()


def test_zero_noise_collapses_identity_images():
    m = generate_synthetic(
        identities=3, cameras=2, within_id_std=0.0, cross_camera_shift_std=0.0, seed=1
    )
    ident_features = {}
    for rec in m.images:
        ident_features.setdefault(rec.identity, set()).add(rec.feature)
    assert all(len(feats) == 1 for feats in ident_features.values())


def test_normalize_flag_unit_norms():
    m = generate_synthetic(identities=2, cameras=1, seed=0, normalize=True)
    for rec in m.images:
        assert np.linalg.norm(rec.feature) == pytest.approx(1.0, abs=1e-12)


def _mean_same_vs_cross(seed: int) -> tuple[float, float]:
    m = generate_synthetic(
        identities=8,
        cameras=2,
        tracklets_per_identity_per_camera=2,
        images_per_tracklet=4,
        dimension=16,
        within_id_std=0.1,
        cross_camera_shift_std=0.2,
        seed=seed,
    )
    feats = m.feature_matrix()
    rows = m.image_index()
    by_tid = {
        t.tracklet_id: feats[[rows[i] for i in t.image_ids]] for t in m.tracklets.values()
    }
    ident = m.tracklet_identities()
    same, cross = [], []
    tids = m.tracklet_ids
    for i, a in enumerate(tids):
        for b in tids[i + 1 :]:
            if ident[a] != ident[b]:
                continue
            d = set_to_set_distance(by_tid[a], by_tid[b], 3)
            (same if m.camera_of(a) == m.camera_of(b) else cross).append(d)
    return float(np.mean(same)), float(np.mean(cross))


def test_view_bias_same_camera_closer_over_seeds():
    # same-identity same-camera distances must undercut cross-camera ones
    # when the camera shift dominates the per-image noise
    sames, crosses = zip(*(_mean_same_vs_cross(seed) for seed in range(12)))
    assert np.mean(sames) < np.mean(crosses)


def test_identity_access_rules():
    m = generate_synthetic(identities=2, cameras=1, seed=0)
    assert m.has_identities()
    assert set(m.tracklet_identities().values()) == {0, 1}
    public = m.public_view()
    assert not public.has_identities()
    with pytest.raises(ManifestError, match="no ground-truth identities"):
        public.tracklet_identities()


def test_mixed_identity_tracklet_rejected():
    images = [
        ImageRecord(0, 0, 0, (0.0,), identity=1),
        ImageRecord(1, 0, 0, (0.0,), identity=2),
    ]
    m = DatasetManifest(1, 1, images)
    with pytest.raises(ManifestError, match="mixes identities"):
        m.tracklet_identities()


def test_count_distributions_and_bad_inputs():
    m = generate_synthetic(
        identities=3,
        cameras=2,
        tracklets_per_identity_per_camera=(1, 3),
        images_per_tracklet=(2, 5),
        seed=4,
    )
    sizes = {len(t.image_ids) for t in m.tracklets.values()}
    assert sizes <= set(range(2, 6))
    assert 6 <= m.num_tracklets <= 18
    with pytest.raises(ValueError):
        generate_synthetic(identities=0, cameras=1)
    with pytest.raises(ValueError):
        generate_synthetic(identities=1, cameras=1, within_id_std=-0.1)
    with pytest.raises(ValueError):
        generate_synthetic(identities=1, cameras=1, images_per_tracklet=(3, 2))
