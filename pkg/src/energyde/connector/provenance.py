"""Append-only provenance log: JSON-lines, strictly increasing record ids."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

ACTIVITY_KINDS = {"query-served", "query-rejected", "catalog-served"}


@dataclass
class ProvenanceRecord:
    id: int
    kind: str  # query-served | query-rejected | catalog-served
    consumer: str
    contract: Optional[str]
    request_digest: str
    result_digest: str
    timestamp: str

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "consumer": self.consumer,
                "contract": self.contract, "requestDigest": self.request_digest,
                "resultDigest": self.result_digest, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, raw: dict) -> "ProvenanceRecord":
        return cls(id=raw["id"], kind=raw["kind"], consumer=raw["consumer"],
                   contract=raw.get("contract"),
                   request_digest=raw["requestDigest"],
                   result_digest=raw["resultDigest"],
                   timestamp=raw["timestamp"])


class ProvenanceLog:
    """Single serialized write path; appends are totally ordered per node."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._next_id = 1
        if self.path.exists():
            existing = read_log(self.path)
            if existing:
                self._next_id = existing[-1].id + 1
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()

    def append(self, kind: str, consumer: str, contract: Optional[str],
               request_digest: str, result_digest: str, timestamp: str) -> ProvenanceRecord:
        if kind not in ACTIVITY_KINDS:
            raise ValueError(f"unknown activity kind {kind!r}")
        with self._lock:
            record = ProvenanceRecord(
                id=self._next_id, kind=kind, consumer=consumer, contract=contract,
                request_digest=request_digest, result_digest=result_digest,
                timestamp=timestamp)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            self._next_id += 1
            return record


def read_log(path) -> list[ProvenanceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ProvenanceRecord.from_dict(json.loads(line)))
    return records


def replay_audit(records, contracts, node_id: str, resource: str) -> list[str]:
    """Re-check every served record against the contract store; returns a list
    of findings (empty means the log shows no leak)."""
    from .contracts import authorize
    from .messages import Message, parse_rfc3339

    findings = []
    last_id = 0
    for record in records:
        if record.id <= last_id:
            findings.append(f"record {record.id}: id not strictly increasing")
        last_id = record.id
        if record.kind == "query-rejected":
            continue
        operation = "query" if record.kind == "query-served" else "catalog"
        probe = Message(
            type="QueryRequest" if operation == "query" else "CatalogRequest",
            sender=record.consumer,
            body={"contractId": record.contract})
        decision = authorize(probe, contracts, node_id, resource,
                             parse_rfc3339(record.timestamp))
        if decision is not None:
            findings.append(
                f"record {record.id}: served {operation} for {record.consumer} "
                f"but contract check now denies: {decision[0]}")
    return findings
