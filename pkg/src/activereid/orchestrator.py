"""Iterative driver: model refresh, candidate selection, annotation, merging.

Each iteration runs, in order: embedding refresh, distance-pool build,
strategy-specific candidate selection, optional propagation + reciprocal
filtering, oracle answering with closure, label merging, and metrics
export. Runs are deterministic for a fixed (manifest, config, seed) and
fully reconstructible from the ledger.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import model_hook, resampler
from .config import RunConfig
from .dataset import DatasetManifest
from .evaluation import evaluate_reid, estimate_T_pa, true_positive_pairs
from .labels import (
    MATCH,
    AlreadyKnownError,
    ContradictionError,
    apply_annotation,
    init_labels,
    merge_labels,
)
from .ledger import AUTO, MANUAL, LedgerWriter, read_ledger
from .metric import Pair, build_distance_pools
from .sampler import (
    CandidateBatch,
    SamplingSchedule,
    default_schedule,
    schedule_counts,
    select_kmeans,
    select_mixed_view,
    select_random,
    select_view_aware,
)

METRIC_COLUMNS = [
    "iteration",
    "tp_manual",
    "auto_count",
    "AR",
    "gained_TP_ratio",
    "rank1",
    "rank5",
    "rank10",
    "rank20",
    "mAP",
]

WASTED = "wasted"
CONTRADICTION = "contradiction"


def view_pair_counts(manifest: DatasetManifest) -> tuple[int, int]:
    """(same_view, cross_view) pair counts from the camera partition alone."""
    per_cam: dict[int, int] = {}
    for tid in manifest.tracklet_ids:
        cam = manifest.camera_of(tid)
        per_cam[cam] = per_cam.get(cam, 0) + 1
    same = sum(n * (n - 1) // 2 for n in per_cam.values())
    total = manifest.num_tracklets * (manifest.num_tracklets - 1) // 2
    return same, total - same


@dataclass
class IterationReport:
    iteration: int
    selected: int
    filtered_out: int
    applied: int
    gained_pairs: int
    pool_exhausted: bool


@dataclass
class RunState:
    t: int = 0
    stopped_reason: str | None = None
    tp_gained: int = 0
    crossings: dict[float, int] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)


class Orchestrator:
    def __init__(
        self,
        manifest: DatasetManifest,
        config: RunConfig,
        oracle=None,
        out_dir=None,
        gain_targets=(0.9, 0.95, 0.99),
    ):
        self.manifest = manifest
        self.config = config
        self.oracle = oracle
        self.out_dir = out_dir
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        self.ledger = (
            LedgerWriter(os.path.join(out_dir, "ledger.jsonl")) if out_dir else None
        )

        self.state = init_labels(manifest)
        self._cameras = {tid: manifest.camera_of(tid) for tid in manifest.tracklet_ids}
        self.snapshot = model_hook.initial_snapshot(manifest)
        self.run_state = RunState()
        self.gain_targets = tuple(gain_targets)

        same_n, cross_n = view_pair_counts(manifest)
        if config.s1 > 0:
            self.schedule = SamplingSchedule(
                s1=config.s1, s2=config.s2, s3=config.s3, s4=config.s4, t0=config.t0
            )
        else:
            self.schedule = default_schedule(same_n, cross_n, t0=config.t0)

        self.truth = (
            manifest.tracklet_identities() if manifest.has_identities() else None
        )
        self.tp_total = len(true_positive_pairs(self.truth)) if self.truth else 0
        self.T_pa = None
        if self.truth and config.tpa_runs > 0:
            self.T_pa = estimate_T_pa(
                self.truth, runs=config.tpa_runs, seed=config.seed
            )
        self._zero_gain_streak = 0
        self._auto_count = 0
        self._pools = None
        self._cache = None

    # -- helpers ---------------------------------------------------------

    @property
    def total_pairs(self) -> int:
        c = self.manifest.num_tracklets
        return c * (c - 1) // 2

    def undecided_count(self) -> int:
        return self.total_pairs - len(self.state.must_link) - len(self.state.cannot_link)

    def _iteration_rng(self, t: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, t])

    def _needs_pools(self) -> bool:
        if self.config.strategy in ("view_aware_resample", "view_aware_only", "mixed_view"):
            return True
        every = self.config.eval_reid_every
        return every > 0 and (self.run_state.t % every == 0)

    def _build_pools(self):
        self._cache, same_pool, cross_pool = build_distance_pools(
            self.manifest,
            self.snapshot.vectors,
            K=self.config.K_dist,
            stamp=self.snapshot.stamp,
        )
        self._pools = (same_pool, cross_pool)

    def _tracklet_mean_features(self):
        rows = self.snapshot.row_index()
        tids = self.manifest.tracklet_ids
        feats = np.stack(
            [
                self.snapshot.vectors[
                    [rows[i] for i in self.manifest.tracklets[t].image_ids]
                ].mean(axis=0)
                for t in tids
            ]
        )
        return feats, tids

    def _track_gain(self, result, pair: Pair) -> int:
        if self.truth is None:
            return 0
        gained = sum(
            1 for p in result.new_must if self.truth[p.a] == self.truth[p.b]
        )
        self.run_state.tp_gained += gained
        if self.tp_total:
            ratio = self.run_state.tp_gained / self.tp_total
            for target in self.gain_targets:
                if target not in self.run_state.crossings and ratio >= target:
                    self.run_state.crossings[target] = self.state.manual_count
        return gained

    def gained_ratio(self) -> float | None:
        if not self.truth or not self.tp_total:
            return None
        return self.run_state.tp_gained / self.tp_total

    # -- verdict application --------------------------------------------

    def _apply_verdict(self, t: int, pair: Pair, verdict: str) -> int:
        """Apply one manual verdict, ledger it with its closure, track gain."""
        try:
            result = apply_annotation(self.state, pair, verdict)
        except AlreadyKnownError:
            if self.ledger:
                self.ledger.record(t, pair, verdict, WASTED)
            return 0
        except ContradictionError:
            if self.ledger:
                self.ledger.record(t, pair, verdict, CONTRADICTION)
            return 0
        if self.ledger:
            self.ledger.record(t, pair, verdict, MANUAL)
            for p in sorted(result.new_must - {pair}):
                self.ledger.record(t, p, "match", AUTO)
            for p in sorted(result.new_cannot - {pair}):
                self.ledger.record(t, p, "nomatch", AUTO)
        self._auto_count += len(result.auto_annotated(pair))
        self._track_gain(result, pair)
        return len(result.new_must) + len(result.new_cannot)

    def _annotate_batch(self, t: int, batch: CandidateBatch) -> int:
        """Answer a candidate batch through the oracle and apply verdicts."""
        applied = 0
        if hasattr(self.oracle, "collect"):
            # human queue: enqueue everything, apply in arrival order
            pending = [c.pair for c in batch.pairs if not self.state.is_decided(c.pair)]
            for verdict in self.oracle.collect(pending):
                applied += 1 if self._apply_verdict(t, verdict.pair, verdict.verdict) else 0
        else:
            for cand in batch.pairs:
                if self.state.is_decided(cand.pair):
                    continue  # decided by closure earlier in this batch
                verdict = self.oracle(cand.pair)
                applied += 1 if self._apply_verdict(t, cand.pair, verdict.verdict) else 0
        return applied

    def _annotate_kmeans(self, t: int) -> int:
        """Direct-ID baseline: selected tracklets are identified by pairwise
        queries against one representative per known identity group."""
        m1, m2 = schedule_counts(t, self.schedule)
        budget = m1 + m2
        feats, tids = self._tracklet_mean_features()
        k = self.config.kmeans_k or max(1, round(math.sqrt(len(tids))))
        k = min(k, len(tids))
        selected = select_kmeans(
            feats, tids, self.state, k, budget, np.random.default_rng([self.config.seed, t])
        )
        # representatives: min tracklet id of each cluster touched by a
        # previous manual query (reconstructible from the ledger)
        applied = 0
        round_annotated: list[int] = list(self._id_annotated())
        for s in selected:
            reps = sorted(
                {
                    min(self.state.clusters[self.state.cluster_of(a)])
                    for a in round_annotated
                }
            )
            matched = False
            for rep in reps:
                if rep == s or self.state.cluster_of(rep) == self.state.cluster_of(s):
                    matched = True
                    break
                pair = Pair.of(s, rep)
                if self.state.is_decided(pair):
                    if pair in self.state.must_link:
                        matched = True
                        break
                    continue
                verdict = self.oracle(pair)
                applied += 1 if self._apply_verdict(t, pair, verdict.verdict) else 0
                if verdict.verdict == MATCH:
                    matched = True
                    break
            if not matched:
                round_annotated.append(s)
        return applied

    def _id_annotated(self) -> set[int]:
        out: set[int] = set()
        for p in self.state.must_link | self.state.cannot_link:
            out.add(p.a)
            out.add(p.b)
        return out

    # -- the loop --------------------------------------------------------

    def run_iteration(self) -> IterationReport:
        self.run_state.t += 1
        t = self.run_state.t
        cfg = self.config

        # (1) model hook refresh
        self.snapshot = model_hook.refresh(
            self.snapshot, self.state, self.manifest, cfg.refresh_alpha
        )
        # (2) distance pools (skipped when nothing this iteration reads them)
        if self._needs_pools():
            self._build_pools()
        else:
            self._pools = None
            self._cache = None

        # (3) strategy selection, (4) adaptive resampling
        filtered_out = 0
        applied = 0
        gained_before = len(self.state.must_link) + len(self.state.cannot_link)
        if cfg.strategy == "kmeans":
            applied = self._annotate_kmeans(t)
            selected = applied
        else:
            if cfg.strategy == "random":
                m1, m2 = schedule_counts(t, self.schedule)
                batch = select_random(
                    self.state,
                    m1 + m2,
                    np.random.default_rng([cfg.seed, t]),
                    pools=self._pools,
                    iteration=t,
                )
            elif cfg.strategy == "mixed_view":
                batch = select_mixed_view(self._pools, self.state, t, self.schedule)
            else:
                batch = select_view_aware(self._pools, self.state, t, self.schedule)

            if cfg.strategy == "view_aware_resample" and len(batch):
                if cfg.sigma_mode == "fixed":
                    sigma = cfg.sigma_value
                elif cfg.sigma_mode == "median_sq":
                    sigma = resampler.sigma_median_sq(self._cache.matrix)
                else:
                    sigma = resampler.sigma_nn_median_sq(
                        self._cache.matrix,
                        self._cache.tracklet_ids,
                        self.state.assignments,
                    )
                T = resampler.build_transition(self._cache, sigma)
                soft = resampler.propagate(
                    T, self.state, max_iters=cfg.prop_max_iters, tol=cfg.prop_tol
                )
                kept = resampler.reciprocal_filter(
                    batch,
                    soft,
                    cfg.K_recip,
                    self.state,
                    self._cameras,
                    self._cache.matrix,
                )
                filtered_out = len(batch) - len(kept)
                if not len(kept) and len(batch):
                    # forced progress: the filter rejected the whole batch,
                    # annotate the single closest candidate instead of stalling
                    closest = min(batch.pairs, key=lambda c: (c.distance, c.pair))
                    kept = CandidateBatch(
                        pairs=[closest],
                        iteration=t,
                        same_view_selected=int(closest.view == "same_view"),
                        cross_view_selected=int(closest.view == "cross_view"),
                    )
                    filtered_out -= 1
                batch = kept
            selected = len(batch)

            # (5)+(6) oracle verdicts with closure
            applied = self._annotate_batch(t, batch)

        # (7) label merging
        merge_labels(self.state, cfg.dbscan_eps, cfg.dbscan_min_pts)
        self.state.generation = t

        # (8) metrics
        self._append_metrics(t)
        if self.ledger:
            self.ledger.flush()
        self._write_outputs()

        gained_pairs = (
            len(self.state.must_link) + len(self.state.cannot_link) - gained_before
        )
        return IterationReport(
            iteration=t,
            selected=selected,
            filtered_out=filtered_out,
            applied=applied,
            gained_pairs=gained_pairs,
            pool_exhausted=self.undecided_count() == 0,
        )

    def _append_metrics(self, t: int) -> None:
        cfg = self.config
        row = {
            "iteration": t,
            "tp_manual": self.state.manual_count,
            "auto_count": self._auto_count,
            "AR": (
                self.state.manual_count / self.T_pa
                if self.T_pa
                else None
            ),
            "gained_TP_ratio": self.gained_ratio(),
            "rank1": None,
            "rank5": None,
            "rank10": None,
            "rank20": None,
            "mAP": None,
        }
        if (
            cfg.eval_reid_every > 0
            and t % cfg.eval_reid_every == 0
            and self.truth is not None
        ):
            if self._cache is None:
                self._build_pools()
            tids = self.manifest.tracklet_ids
            res = evaluate_reid(
                self.snapshot.vectors,
                self.manifest,
                tids,
                tids,
                K_dist=cfg.K_dist,
                exclude_same_camera=self.manifest.camera_count > 1,
                dist_matrix=self._cache.matrix,
                dist_tracklet_ids=self._cache.tracklet_ids,
            )
            row.update(
                rank1=res.cmc.get(1),
                rank5=res.cmc.get(5),
                rank10=res.cmc.get(10),
                rank20=res.cmc.get(20),
                mAP=res.mAP,
            )
        self.run_state.history.append(row)

    def _write_outputs(self) -> None:
        if not self.out_dir:
            return
        jsonl = os.path.join(self.out_dir, "metrics.jsonl")
        with open(jsonl, "w", encoding="utf-8") as fh:
            for row in self.run_state.history:
                fh.write(json.dumps(row) + "\n")
        wide = os.path.join(self.out_dir, "metrics.csv")
        with open(wide, "w", encoding="utf-8") as fh:
            fh.write(",".join(METRIC_COLUMNS) + "\n")
            for row in self.run_state.history:
                fh.write(
                    ",".join(
                        "" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else str(row[c])
                        for c in METRIC_COLUMNS
                    )
                    + "\n"
                )

    def run(self, stop_at_gained: float | None = None) -> RunState:
        zero_streak = 0
        while self.run_state.t < self.config.max_iterations:
            if self.config.stop_when_pools_exhausted and self.undecided_count() == 0:
                self.run_state.stopped_reason = "pools_exhausted"
                break
            report = self.run_iteration()
            gained = self.gained_ratio()
            if stop_at_gained is not None and gained is not None and gained >= stop_at_gained:
                self.run_state.stopped_reason = "gain_target"
                break
            zero_streak = zero_streak + 1 if report.gained_pairs == 0 else 0
            if zero_streak >= 2:
                self.run_state.stopped_reason = "stalled"
                break
        else:
            self.run_state.stopped_reason = "max_iterations"
        return self.run_state


def replay(manifest: DatasetManifest, ledger_path, config: RunConfig, out_dir=None) -> Orchestrator:
    """Reconstruct an orchestrator (label state, counters, metrics history)
    from an annotation ledger; the result can resume the run."""
    orch = Orchestrator(manifest, config, oracle=None, out_dir=None)
    orch.out_dir = out_dir  # avoid clobbering the ledger we are reading
    records = read_ledger(ledger_path)
    by_iter: dict[int, list] = {}
    for rec in records:
        by_iter.setdefault(rec.iteration, []).append(rec)

    for t in sorted(by_iter):
        orch.run_state.t = t
        orch.snapshot = model_hook.refresh(
            orch.snapshot, orch.state, manifest, config.refresh_alpha
        )
        orch._pools = None
        orch._cache = None  # rebuilt lazily inside _append_metrics when needed
        for rec in by_iter[t]:
            if rec.source == MANUAL:
                result = apply_annotation(orch.state, rec.pair, rec.verdict)
                orch._auto_count += len(result.auto_annotated(rec.pair))
                orch._track_gain(result, rec.pair)
            elif rec.source == WASTED:
                orch.state.wasted_count += 1
            elif rec.source == CONTRADICTION:
                orch.state.review_queue.append((rec.pair, rec.verdict))
            # AUTO records are re-derived by the closure itself
        merge_labels(orch.state, config.dbscan_eps, config.dbscan_min_pts)
        orch.state.generation = t
        orch._append_metrics(t)
    if out_dir is not None:
        orch.ledger = LedgerWriter.resume(os.path.join(out_dir, "ledger.jsonl"))
        orch._write_outputs()
    return orch
