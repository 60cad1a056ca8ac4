"""Pair-query oracles: ground-truth simulation and the human verdict queue."""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

from .dataset import DatasetManifest
from .labels import MATCH, NOMATCH
from .metric import Pair

SKIP = "skip"


@dataclass(frozen=True)
class OracleVerdict:
    pair: Pair
    verdict: str  # MATCH or NOMATCH
    latency: float = 0.0
    source: str = "simulated"


class SimulatedOracle:
    """Pure function of ground-truth identities: Match iff identities equal."""

    def __init__(self, manifest: DatasetManifest):
        self.identities = manifest.tracklet_identities()

    def answer(self, pair: Pair) -> OracleVerdict:
        verdict = MATCH if self.identities[pair.a] == self.identities[pair.b] else NOMATCH
        return OracleVerdict(pair=pair, verdict=verdict, latency=0.0, source="simulated")

    def __call__(self, pair: Pair) -> OracleVerdict:
        return self.answer(pair)


class AlreadyAnsweredError(ValueError):
    """A verdict for this pair was already submitted."""


class PairQueue:
    """Pending pair-annotation queue for human annotators.

    One producer (the orchestrator) enqueues batches; many consumers pull
    pairs via next_pending() and submit verdicts. A pair is handed to at
    most one client at a time; unanswered issues are re-offered after
    ``reissue_timeout`` seconds. Skip verdicts re-queue the pair at the
    tail without charging anything.
    """

    def __init__(self, reissue_timeout: float = 60.0):
        self.reissue_timeout = reissue_timeout
        self._lock = threading.Condition()
        self._pending: deque[Pair] = deque()
        self._issued: dict[Pair, float] = {}
        self._verdicts: dict[Pair, OracleVerdict] = {}
        self._answered: deque[OracleVerdict] = deque()

    @staticmethod
    def pair_id(pair: Pair) -> str:
        return f"{pair.a}-{pair.b}"

    @staticmethod
    def parse_pair_id(pair_id: str) -> Pair:
        a, b = pair_id.split("-")
        return Pair.of(int(a), int(b))

    def enqueue(self, pairs) -> None:
        with self._lock:
            for p in pairs:
                if p not in self._verdicts and p not in self._pending and p not in self._issued:
                    self._pending.append(p)
            self._lock.notify_all()

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending) + len(self._issued)

    def next_pending(self) -> Pair | None:
        """Hand out the next pair, re-offering timed-out issues first."""
        with self._lock:
            now = time.monotonic()
            stale = [p for p, t in self._issued.items() if now - t > self.reissue_timeout]
            for p in stale:
                del self._issued[p]
                self._pending.appendleft(p)
            if not self._pending:
                return None
            p = self._pending.popleft()
            self._issued[p] = now
            return p

    def submit(self, pair: Pair, verdict: str) -> OracleVerdict | None:
        """Record a human verdict; returns None for a skip (pair re-queued)."""
        if verdict not in (MATCH, NOMATCH, SKIP):
            raise ValueError(f"unknown verdict {verdict!r}")
        with self._lock:
            if pair in self._verdicts:
                raise AlreadyAnsweredError(f"pair {tuple(pair)} already answered")
            if pair not in self._issued and pair not in self._pending:
                raise KeyError(f"pair {tuple(pair)} is not queued")
            issued_at = self._issued.pop(pair, None)
            if verdict == SKIP:
                self._pending.append(pair)
                return None
            if pair in self._pending:
                self._pending.remove(pair)
            latency = time.monotonic() - issued_at if issued_at is not None else 0.0
            v = OracleVerdict(pair=pair, verdict=verdict, latency=latency, source="human")
            self._verdicts[pair] = v
            self._answered.append(v)
            self._lock.notify_all()
            return v

    def dequeue_verdict(self, timeout: float | None = None) -> OracleVerdict | None:
        """Consume verdicts in arrival order; blocks up to ``timeout``."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._lock:
            while not self._answered:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return None
                self._lock.wait(remaining)
            return self._answered.popleft()


class HumanOracle:
    """Batch oracle adapter over a PairQueue, used in serve mode.

    The orchestrator enqueues a whole candidate batch and consumes verdicts
    in arrival order until every pair in the batch is answered.
    """

    def __init__(self, queue: PairQueue, poll_timeout: float = 1.0, stop_event=None):
        self.queue = queue
        self.poll_timeout = poll_timeout
        self.stop_event = stop_event

    def collect(self, pairs):
        """Yield verdicts for ``pairs`` as annotators submit them."""
        waiting = set(pairs)
        self.queue.enqueue(pairs)
        while waiting:
            if self.stop_event is not None and self.stop_event.is_set():
                return
            v = self.queue.dequeue_verdict(timeout=self.poll_timeout)
            if v is None:
                continue
            waiting.discard(v.pair)
            yield v
