"""Client side of the connector wire protocol."""

from __future__ import annotations

import socket
from typing import Optional

from ..sparql import SolutionSequence, solutions_from_json
from .framing import recv_frame, send_frame
from .messages import Message


class RejectionError(RuntimeError):
    def __init__(self, source_id: str, reason: str, text: str):
        super().__init__(f"{source_id}: {reason}: {text}")
        self.source_id = source_id
        self.reason = reason
        self.text = text


class SourceUnreachableError(ConnectionError):
    def __init__(self, source_id: str, endpoint: str, cause: Exception):
        super().__init__(f"source {source_id!r} unreachable at {endpoint}: {cause}")
        self.source_id = source_id


class NodeClient:
    """One remote node, addressed as host:port, queried under one contract.
    A fresh connection per request keeps the client thread-safe."""

    def __init__(self, endpoint: str, sender_id: str, contract_id: str,
                 source_id: Optional[str] = None, timeout: float = 10.0):
        host, _, port = endpoint.rpartition(":")
        self.host, self.port = host, int(port)
        self.endpoint = endpoint
        self.sender_id = sender_id
        self.contract_id = contract_id
        self.source_id = source_id or endpoint
        self.timeout = timeout

    def _roundtrip(self, request: Message) -> Message:
        try:
            with socket.create_connection((self.host, self.port),
                                          timeout=self.timeout) as sock:
                send_frame(sock, request.to_dict())
                raw = recv_frame(sock)
        except OSError as exc:
            raise SourceUnreachableError(self.source_id, self.endpoint, exc) from None
        response = Message.from_dict(raw)
        if response.correlation_id != request.correlation_id:
            raise RuntimeError(
                f"{self.source_id}: correlation id mismatch in response")
        if response.type == "Rejection":
            raise RejectionError(self.source_id, response.body.get("reason", "?"),
                                 response.body.get("text", ""))
        return response

    def catalog(self) -> dict:
        request = Message(type="CatalogRequest", sender=self.sender_id,
                          body={"contractId": self.contract_id})
        response = self._roundtrip(request)
        return response.body["source"]

    def query(self, query_text: str) -> SolutionSequence:
        request = Message(type="QueryRequest", sender=self.sender_id,
                          body={"contractId": self.contract_id,
                                "query": query_text})
        response = self._roundtrip(request)
        return solutions_from_json(response.body["results"])

    def query_raw(self, query_text: str) -> Message:
        request = Message(type="QueryRequest", sender=self.sender_id,
                          body={"contractId": self.contract_id,
                                "query": query_text})
        return self._roundtrip(request)


class LocalClient:
    """In-process client evaluating directly against a graph; used where the
    federation engine queries data it already holds."""

    def __init__(self, graph, source_id: str = "local"):
        self.graph = graph
        self.source_id = source_id

    def query(self, query_text: str) -> SolutionSequence:
        from ..sparql import evaluate, parse_query
        return evaluate(parse_query(query_text), self.graph)
