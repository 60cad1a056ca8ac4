"""Command line entry points: generate, run, serve, replay, eval,
estimate-tpa, compare."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import RunConfig, load_config, save_config
from .dataset import generate_synthetic, load_manifest, write_manifest
from .evaluation import estimate_T_pa, evaluate_reid
from .oracle import SimulatedOracle
from .orchestrator import Orchestrator, replay


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    for f in dataclasses.fields(RunConfig):
        if f.name == "seed":
            continue
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None)


def _build_config(args, seed: int) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {"seed": seed}
    for f in dataclasses.fields(RunConfig):
        if f.name == "seed":
            continue
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        if f.type == "bool":
            overrides[f.name] = str(raw).lower() in ("true", "1", "yes")
        elif f.type == "int":
            overrides[f.name] = int(raw)
        elif f.type == "float":
            overrides[f.name] = float(raw)
        else:
            overrides[f.name] = raw
    return dataclasses.replace(config, **overrides)


def cmd_generate(args) -> int:
    manifest = generate_synthetic(
        identities=args.identities,
        cameras=args.cameras,
        tracklets_per_identity_per_camera=args.tracklets_per_id_per_cam,
        images_per_tracklet=args.images_per_tracklet,
        dimension=args.dimension,
        within_id_std=args.within_id_std,
        cross_camera_shift_std=args.cross_camera_shift_std,
        seed=args.seed,
    )
    write_manifest(manifest, args.out)
    print(
        f"wrote {args.out}: {manifest.num_images} images, "
        f"{manifest.num_tracklets} tracklets, {manifest.camera_count} cameras"
    )
    return 0


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _build_config(args, args.seed)
    orch = Orchestrator(
        manifest, config, oracle=SimulatedOracle(manifest), out_dir=args.out_dir
    )
    save_config(config, f"{args.out_dir}/config.txt")
    state = orch.run(stop_at_gained=args.stop_at_gained)
    print(
        f"stopped after iteration {state.t} ({state.stopped_reason}): "
        f"manual={orch.state.manual_count} auto={orch._auto_count} "
        f"gained_TP_ratio={orch.gained_ratio()}"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import AnnotationService, create_app

    manifest = load_manifest(args.manifest)
    config = _build_config(args, args.seed)
    orch = Orchestrator(manifest, config, out_dir=args.out_dir)
    service = AnnotationService(orch, reissue_timeout=args.reissue_timeout)
    app = create_app(service, token=args.token, static_dir=args.static_dir)
    service.start()
    uvicorn.run(app, host=args.host, port=args.port)
    service.stop()
    return 0


def cmd_replay(args) -> int:
    manifest = load_manifest(args.manifest)
    config = load_config(args.config) if args.config else RunConfig(seed=args.seed)
    orch = replay(manifest, args.ledger, config, out_dir=args.out_dir)
    print(
        f"replayed {orch.run_state.t} iterations: manual={orch.state.manual_count} "
        f"clusters={orch.state.cluster_count} gained={orch.gained_ratio()}"
    )
    return 0


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    tids = manifest.tracklet_ids
    res = evaluate_reid(
        manifest.feature_matrix(),
        manifest,
        tids,
        tids,
        K_dist=args.k_dist,
        exclude_same_camera=not args.include_same_camera,
    )
    print(json.dumps({"cmc": res.cmc, "mAP": res.mAP}, indent=2))
    return 0


def cmd_estimate_tpa(args) -> int:
    manifest = load_manifest(args.manifest)
    value = estimate_T_pa(
        manifest.tracklet_identities(), runs=args.runs, seed=args.seed
    )
    print(f"T_pa = {value}")
    return 0


def cmd_compare(args) -> int:
    from .experiments import compare_strategies, mean_crossing

    manifest = load_manifest(args.manifest)
    config = _build_config(args, args.seed)
    strategies = args.strategies.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    results = compare_strategies(
        lambda seed: manifest,
        config,
        strategies,
        seeds,
        target=args.target,
        out_dir=args.out_dir,
    )
    for strategy in strategies:
        print(
            f"{strategy}: mean manual annotations at gained>={args.target}: "
            f"{mean_crossing(results, strategy, args.target)}"
        )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="activereid")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--identities", type=int, default=50)
    p.add_argument("--cameras", type=int, default=2)
    p.add_argument("--tracklets-per-id-per-cam", type=int, default=2)
    p.add_argument("--images-per-tracklet", type=int, default=5)
    p.add_argument("--dimension", type=int, default=32)
    p.add_argument("--within-id-std", type=float, default=0.1)
    p.add_argument("--cross-camera-shift-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the loop with the simulated oracle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stop-at-gained", type=float, default=None)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="run in human-oracle mode with the HTTP API")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--token", default=None)
    p.add_argument("--static-dir", default=None, help="serve the web console from this directory")
    p.add_argument("--reissue-timeout", type=float, default=60.0)
    _add_config_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild run state from a ledger")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ledger", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("eval", help="CMC/mAP over the manifest features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k-dist", type=int, default=3)
    p.add_argument("--include-same-camera", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate-tpa", help="Monte-Carlo estimate of T_pa")
    p.add_argument("--manifest", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate_tpa)

    p = sub.add_parser("compare", help="multi-strategy experiment with curve export")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument(
        "--strategies",
        default="view_aware_resample,random",
        help="comma-separated strategy list",
    )
    p.add_argument("--seeds", default="0", help="comma-separated seed list")
    p.add_argument("--target", type=float, default=0.9)
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
