"""HTTP service for human annotation: queue, verdicts, metrics, clusters."""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .labels import MATCH, NOMATCH
from .metric import Pair
from .oracle import SKIP, AlreadyAnsweredError, HumanOracle, PairQueue
from .orchestrator import Orchestrator


class VerdictBody(BaseModel):
    verdict: str  # "match" | "nomatch" | "skip"


class AnnotationService:
    """Owns the orchestrator loop thread and the human verdict queue."""

    def __init__(self, orchestrator: Orchestrator, reissue_timeout: float = 60.0):
        self.queue = PairQueue(reissue_timeout=reissue_timeout)
        self.stop_event = threading.Event()
        self.orchestrator = orchestrator
        self.orchestrator.oracle = HumanOracle(
            self.queue, poll_timeout=0.25, stop_event=self.stop_event
        )
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.orchestrator.run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.stop_event.set()

    @property
    def generation(self) -> int:
        return self.orchestrator.state.generation


def create_app(service: AnnotationService, token: str | None = None, static_dir=None) -> FastAPI:
    app = FastAPI(title="activereid annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    orch = service.orchestrator
    manifest = orch.manifest

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if token and request.url.path.startswith(("/queue", "/metrics", "/clusters", "/pairs")):
            if request.headers.get("x-auth-token") != token:
                return JSONResponse({"detail": "invalid token"}, status_code=401)
        return await call_next(request)

    def tracklet_panel(tid: int) -> dict:
        tk = manifest.tracklets[tid]
        recs = {r.image_id: r for r in manifest.images}
        return {
            "tracklet_id": tid,
            "camera_id": tk.camera_id,
            "images": [
                {
                    "image_id": iid,
                    "image_path": recs[iid].image_path,
                    "feature": list(recs[iid].feature),
                }
                for iid in tk.image_ids
            ],
        }

    @app.get("/queue/next")
    def queue_next():
        pair = service.queue.next_pending()
        if pair is None:
            return {
                "generation": service.generation,
                "pair": None,
                "pending": service.queue.pending_count(),
            }
        dist = None
        if orch._cache is not None:
            dist = orch._cache.distance(pair)
        return {
            "generation": service.generation,
            "pair_id": PairQueue.pair_id(pair),
            "pair": [pair.a, pair.b],
            "distance": dist,
            "tracklets": [tracklet_panel(pair.a), tracklet_panel(pair.b)],
            "pending": service.queue.pending_count(),
        }

    @app.post("/queue/{pair_id}/verdict")
    def post_verdict(pair_id: str, body: VerdictBody):
        if body.verdict not in (MATCH, NOMATCH, SKIP):
            raise HTTPException(422, f"unknown verdict {body.verdict!r}")
        try:
            pair = PairQueue.parse_pair_id(pair_id)
        except (ValueError, IndexError):
            raise HTTPException(400, f"malformed pair id {pair_id!r}")
        try:
            v = service.queue.submit(pair, body.verdict)
        except AlreadyAnsweredError:
            raise HTTPException(409, "pair already answered")
        except KeyError:
            raise HTTPException(404, "pair not queued")
        return {
            "generation": service.generation,
            "accepted": True,
            "skipped": v is None,
        }

    @app.get("/metrics")
    def metrics():
        return {
            "generation": service.generation,
            "tp_manual": orch.state.manual_count,
            "auto_count": orch._auto_count,
            "wasted": orch.state.wasted_count,
            "T_pa": orch.T_pa,
            "AR": orch.state.manual_count / orch.T_pa if orch.T_pa else None,
            "gained_TP_ratio": orch.gained_ratio(),
            "history": orch.run_state.history,
        }

    @app.get("/clusters")
    def clusters():
        return {
            "generation": service.generation,
            "cluster_count": orch.state.cluster_count,
            "clusters": [
                {"cluster_id": cid, "tracklets": sorted(members)}
                for cid, members in sorted(orch.state.clusters.items())
            ],
        }

    @app.get("/pairs/{a}/{b}")
    def pair_info(a: int, b: int):
        try:
            pair = Pair.of(a, b)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        if pair.a not in manifest.tracklets or pair.b not in manifest.tracklets:
            raise HTTPException(404, "unknown tracklet id")
        if pair in orch.state.must_link:
            status = "must_link"
        elif pair in orch.state.cannot_link:
            status = "cannot_link"
        else:
            status = "undecided"
        dist = orch._cache.distance(pair) if orch._cache is not None else None
        return {
            "generation": service.generation,
            "pair": [pair.a, pair.b],
            "distance": dist,
            "status": status,
        }

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
