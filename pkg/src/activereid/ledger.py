"""Append-only annotation ledger: replayable record of every decided pair."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone

from .metric import Pair

MANUAL = "manual"
AUTO = "auto"


@dataclass(frozen=True)
class LedgerRecord:
    seq: int
    iteration: int
    pair: Pair
    verdict: str  # "match" | "nomatch"
    source: str  # "manual" | "auto"
    timestamp: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "iteration": self.iteration,
                "pair": [self.pair.a, self.pair.b],
                "verdict": self.verdict,
                "source": self.source,
                "timestamp": self.timestamp,
            }
        )

    @staticmethod
    def from_json(line: str) -> "LedgerRecord":
        rec = json.loads(line)
        return LedgerRecord(
            seq=int(rec["seq"]),
            iteration=int(rec["iteration"]),
            pair=Pair.of(int(rec["pair"][0]), int(rec["pair"][1])),
            verdict=rec["verdict"],
            source=rec["source"],
            timestamp=rec.get("timestamp", ""),
        )


class LedgerWriter:
    """Buffers records within an iteration and flushes them atomically at the
    iteration boundary, so a killed run never leaves a partial iteration."""

    def __init__(self, path):
        self.path = path
        self._seq = 0
        self._buffer: list[LedgerRecord] = []

    def record(self, iteration: int, pair: Pair, verdict: str, source: str) -> LedgerRecord:
        self._seq += 1
        rec = LedgerRecord(
            seq=self._seq,
            iteration=iteration,
            pair=pair,
            verdict=verdict,
            source=source,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        self._buffer.append(rec)
        return rec

    def flush(self) -> None:
        if not self._buffer:
            return
        with open(self.path, "a", encoding="utf-8") as fh:
            for rec in self._buffer:
                fh.write(rec.to_json() + "\n")
        self._buffer.clear()

    @classmethod
    def resume(cls, path) -> "LedgerWriter":
        w = cls(path)
        records = read_ledger(path)
        w._seq = records[-1].seq if records else 0
        return w


def read_ledger(path) -> list[LedgerRecord]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [LedgerRecord.from_json(ln) for ln in fh if ln.strip()]
    except FileNotFoundError:
        return []
