"""Connector node: config, request handling, and the TCP server."""

from __future__ import annotations

import socketserver
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import yaml

from ..rdf import Graph, IRI, load_graph
from ..sparql import evaluate, parse_query, solutions_to_json, QueryParseError
from ..vocab import RDF_TYPE
from .contracts import ContractStore, authorize, load_contracts
from .framing import ConnectionClosed, FrameError, recv_frame, send_frame
from .messages import Message, MessageError, digest, rejection
from .provenance import ProvenanceLog


class NodeConfigError(ValueError):
    pass


@dataclass
class NodeConfig:
    id: str
    host: str
    port: int
    graph_paths: list
    contracts_path: str
    provenance_path: str
    resource: str
    classes: Optional[list] = None     # override the derived catalog entry
    predicates: Optional[list] = None


def load_node_config(path) -> NodeConfig:
    path = Path(path)
    doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise NodeConfigError(f"{path}: not a YAML mapping")
    try:
        listen = doc.get("listen") or {}
        graphs = doc.get("graphs")
        if graphs is None:
            graphs = [doc["graph"]]
        base = path.parent
        return NodeConfig(
            id=str(doc["id"]),
            host=str(listen.get("host", "127.0.0.1")),
            port=int(listen.get("port", 0)),
            graph_paths=[str(base / g) for g in graphs],
            contracts_path=str(base / doc["contracts"]),
            provenance_path=str(base / doc["provenance_log"]),
            resource=str(doc.get("resource", f"{doc['id']}-graph")),
            classes=doc.get("classes"),
            predicates=doc.get("predicates"),
        )
    except KeyError as exc:
        raise NodeConfigError(f"{path}: missing key {exc}") from None


class NodeState:
    def __init__(self, node_id: str, graph: Graph, contracts: ContractStore,
                 provenance: ProvenanceLog, resource: str,
                 endpoint: str = "", classes=None, predicates=None):
        self.node_id = node_id
        self.graph = graph
        self.contracts = contracts
        self.provenance = provenance
        self.resource = resource
        self.endpoint = endpoint
        self._classes = classes
        self._predicates = predicates

    @classmethod
    def from_config(cls, config: NodeConfig) -> "NodeState":
        graph = Graph()
        for gp in config.graph_paths:
            for triple in load_graph(gp):
                graph.insert(triple)
        return cls(node_id=config.id, graph=graph,
                   contracts=load_contracts(config.contracts_path),
                   provenance=ProvenanceLog(config.provenance_path),
                   resource=config.resource,
                   endpoint=f"{config.host}:{config.port}",
                   classes=config.classes, predicates=config.predicates)

    def source_description(self) -> dict:
        """Catalog entry for this node; derived from the graph unless the
        config pins explicit class/predicate lists."""
        if self._predicates is not None:
            predicates = sorted(self._predicates)
        else:
            predicates = sorted({t.predicate.value for t in self.graph})
        if self._classes is not None:
            classes = sorted(self._classes)
        else:
            classes = sorted({t.object.value
                              for t in self.graph.match(None, IRI(RDF_TYPE), None)
                              if isinstance(t.object, IRI)})
        return {"id": self.node_id, "endpoint": self.endpoint,
                "classes": classes, "predicates": predicates}


def handle(state: NodeState, request: Message,
           now: Optional[datetime] = None) -> Message:
    """Authorize and serve one decoded request.  Exactly one provenance record
    is appended before the response is returned."""
    if now is None:
        now = datetime.now(timezone.utc)
    # the record carries the clock the decision was made against, so a later
    # replay of the log re-authorizes under the same conditions
    timestamp = now.isoformat().replace("+00:00", "Z")
    request_digest = digest(request.body)

    def log_and_reject(reason: str, text: str) -> Message:
        response = rejection(request, state.node_id, reason, text)
        record = state.provenance.append(
            kind="query-rejected", consumer=request.sender,
            contract=request.body.get("contractId"),
            request_digest=request_digest, result_digest=digest(response.body),
            timestamp=timestamp)
        response.body["provenanceRecordId"] = record.id
        return response

    if request.type not in ("CatalogRequest", "QueryRequest"):
        return log_and_reject("MALFORMED", f"cannot serve a {request.type}")
    decision = authorize(request, state.contracts, state.node_id,
                         state.resource, now)
    if decision is not None:
        return log_and_reject(*decision)
    if request.type == "CatalogRequest":
        source = state.source_description()
        record = state.provenance.append(
            kind="catalog-served", consumer=request.sender,
            contract=request.body.get("contractId"),
            request_digest=request_digest, result_digest=digest(source),
            timestamp=timestamp)
        return Message(type="CatalogResponse", sender=state.node_id,
                       correlation_id=request.correlation_id,
                       body={"source": source, "provenanceRecordId": record.id})
    query_text = request.body.get("query")
    if not isinstance(query_text, str):
        return log_and_reject("MALFORMED", "QueryRequest body needs a 'query' string")
    try:
        query = parse_query(query_text)
    except QueryParseError as exc:
        return log_and_reject("MALFORMED", f"query does not parse: {exc}")
    try:
        results = solutions_to_json(evaluate(query, state.graph))
    except Exception as exc:  # evaluator fault: reject, still logged
        return log_and_reject("INTERNAL", f"evaluation failed: {exc}")
    record = state.provenance.append(
        kind="query-served", consumer=request.sender,
        contract=request.body.get("contractId"),
        request_digest=request_digest, result_digest=digest(results),
        timestamp=timestamp)
    return Message(type="QueryResult", sender=state.node_id,
                   correlation_id=request.correlation_id,
                   body={"results": results, "provenanceRecordId": record.id})


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        state: NodeState = self.server.state  # type: ignore[attr-defined]
        while True:
            try:
                raw = recv_frame(self.request)
            except ConnectionClosed:
                return
            except FrameError:
                # not even a JSON frame: close; nothing decoded, nothing logged
                return
            except OSError:
                return
            try:
                message = Message.from_dict(raw)
            except MessageError as exc:
                # valid JSON but not a message envelope: reject, best effort on
                # the correlation id
                reject = Message(
                    type="Rejection", sender=state.node_id,
                    correlation_id=str(raw.get("correlationId", ""))
                    if isinstance(raw, dict) else "",
                    body={"reason": "MALFORMED", "text": str(exc)})
                try:
                    send_frame(self.request, reject.to_dict())
                except OSError:
                    pass
                continue
            response = handle(state, message)
            try:
                send_frame(self.request, response.to_dict())
            except OSError:
                return


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class NodeServer:
    """Running connector node; use as a context manager or call start/stop."""

    def __init__(self, state: NodeState, host: str = "127.0.0.1", port: int = 0):
        self.state = state
        self._server = _Server((host, port), _Handler)
        self._server.state = state  # type: ignore[attr-defined]
        self.host, self.port = self._server.server_address[:2]
        state.endpoint = f"{self.host}:{self.port}"
        self._thread: Optional[threading.Thread] = None

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "NodeServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
            daemon=True, name=f"node-{self.state.node_id}")
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(config: NodeConfig) -> NodeServer:
    """Build node state from config and start serving.  Caller stops it."""
    state = NodeState.from_config(config)
    server = NodeServer(state, config.host, config.port)
    return server.start()
