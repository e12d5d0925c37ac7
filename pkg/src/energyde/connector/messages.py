"""Wire message envelopes and canonical digests."""

from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

MESSAGE_TYPES = {
    "CatalogRequest", "CatalogResponse", "QueryRequest", "QueryResult", "Rejection",
}

REJECTION_REASONS = {
    "NOT_AUTHORIZED", "CONTRACT_EXPIRED", "CONTRACT_NOT_YET_VALID",
    "UNKNOWN_CONTRACT", "OPERATION_NOT_PERMITTED", "MALFORMED", "INTERNAL",
}


class MessageError(ValueError):
    pass


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_rfc3339(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


@dataclass
class Message:
    type: str
    sender: str
    body: dict = field(default_factory=dict)
    correlation_id: str = field(default_factory=lambda: str(uuid.uuid4()))
    issued: str = field(default_factory=now_rfc3339)

    def to_dict(self) -> dict:
        return {"type": self.type, "sender": self.sender,
                "correlationId": self.correlation_id, "issued": self.issued,
                "body": self.body}

    @classmethod
    def from_dict(cls, raw) -> "Message":
        if not isinstance(raw, dict):
            raise MessageError("message must be a JSON object")
        for key in ("type", "sender", "correlationId", "issued", "body"):
            if key not in raw:
                raise MessageError(f"message missing {key!r}")
        if raw["type"] not in MESSAGE_TYPES:
            raise MessageError(f"unknown message type {raw['type']!r}")
        if not isinstance(raw["body"], dict):
            raise MessageError("message body must be a JSON object")
        return cls(type=raw["type"], sender=str(raw["sender"]),
                   correlation_id=str(raw["correlationId"]),
                   issued=str(raw["issued"]), body=raw["body"])


def canonical_json(obj) -> str:
    """Sorted keys, no insignificant whitespace; basis for all digests."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def rejection(request: Message, node_id: str, reason: str, text: str) -> Message:
    assert reason in REJECTION_REASONS
    return Message(type="Rejection", sender=node_id,
                   correlation_id=request.correlation_id,
                   body={"reason": reason, "text": text})
