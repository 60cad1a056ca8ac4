"""Multi-strategy comparison harness and curve export."""

from __future__ import annotations

import dataclasses
import json
import os

from .config import RunConfig
from .dataset import DatasetManifest
from .oracle import SimulatedOracle
from .orchestrator import Orchestrator


def run_to_gain_target(
    manifest: DatasetManifest,
    config: RunConfig,
    target: float,
    gain_targets=(0.9, 0.95, 0.99),
    out_dir=None,
) -> Orchestrator:
    """Run the simulated-oracle loop until ``target`` gained-TP ratio (or a
    terminal condition) and return the orchestrator for inspection."""
    orch = Orchestrator(
        manifest,
        config,
        oracle=SimulatedOracle(manifest),
        out_dir=out_dir,
        gain_targets=gain_targets,
    )
    orch.run(stop_at_gained=target)
    return orch


def compare_strategies(
    manifest_factory,
    base_config: RunConfig,
    strategies,
    seeds,
    target: float = 0.9,
    gain_targets=(0.9, 0.95, 0.99),
    out_dir=None,
):
    """Run each strategy over each seed on a freshly generated manifest.

    ``manifest_factory(seed)`` builds the dataset; every strategy sees the
    same manifest per seed so comparisons isolate the sampling choice.
    Returns {strategy: {seed: {"crossings": ..., "history": ...}}}.
    """
    results: dict[str, dict] = {}
    for seed in seeds:
        manifest = manifest_factory(seed)
        for strategy in strategies:
            config = dataclasses.replace(base_config, strategy=strategy, seed=seed)
            run_dir = (
                os.path.join(out_dir, f"{strategy}_seed{seed}") if out_dir else None
            )
            orch = run_to_gain_target(
                manifest, config, target, gain_targets=gain_targets, out_dir=run_dir
            )
            results.setdefault(strategy, {})[seed] = {
                "crossings": dict(orch.run_state.crossings),
                "manual": orch.state.manual_count,
                "gained": orch.gained_ratio(),
                "stopped": orch.run_state.stopped_reason,
                "history": orch.run_state.history,
            }
    if out_dir:
        summary = {
            strategy: {
                str(seed): {k: v for k, v in res.items() if k != "history"}
                for seed, res in per_seed.items()
            }
            for strategy, per_seed in results.items()
        }
        with open(os.path.join(out_dir, "compare_summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
        _export_curves(results, os.path.join(out_dir, "curves.csv"))
    return results


def _export_curves(results, path) -> None:
    """Wide table for plotting gained-TP / retrieval curves per strategy."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "strategy,seed,iteration,tp_manual,auto_count,AR,gained_TP_ratio,rank1,mAP\n"
        )
        for strategy, per_seed in results.items():
            for seed, res in per_seed.items():
                for row in res["history"]:
                    fh.write(
                        ",".join(
                            str(v) if v is not None else ""
                            for v in (
                                strategy,
                                seed,
                                row["iteration"],
                                row["tp_manual"],
                                row["auto_count"],
                                row["AR"],
                                row["gained_TP_ratio"],
                                row["rank1"],
                                row["mAP"],
                            )
                        )
                        + "\n"
                    )


def mean_crossing(results: dict, strategy: str, target: float) -> float:
    """Average manual-annotation count at which a strategy crossed a
    gained-TP target, over seeds; inf when any seed never crossed."""
    vals = []
    for res in results[strategy].values():
        crossing = res["crossings"].get(target)
        if crossing is None:
            return float("inf")
        vals.append(crossing)
    return sum(vals) / len(vals)
