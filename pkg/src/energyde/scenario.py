"""Scripted multi-node demonstration: runs requirement-tagged steps over
running connector nodes and records a transcript."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .connector.client import NodeClient, RejectionError
from .connector.node import NodeServer, NodeState, load_node_config
from .federation import federated_query, load_catalog
from .rdf import load_graph

REQUIRED_TAGS = {f"RQ-{i}" for i in range(1, 9)}


class ScenarioError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioStep:
    rq: str
    kind: str                 # catalog | query | federated | publish
    sender: str
    receiver: Optional[str] = None
    contract: Optional[str] = None
    query: Optional[str] = None
    graph: Optional[str] = None
    catalog: Optional[str] = None
    expect: str = "allow"     # "allow" or a rejection reason code


def parse_scenario(text: str) -> list[ScenarioStep]:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "steps" not in doc:
        raise ScenarioError("scenario must have a top-level 'steps' list")
    if not doc["steps"]:
        raise ScenarioError("scenario has no steps")
    steps = []
    for i, raw in enumerate(doc["steps"]):
        try:
            step = ScenarioStep(
                rq=str(raw["rq"]), kind=str(raw["kind"]),
                sender=str(raw["sender"]),
                receiver=raw.get("receiver"), contract=raw.get("contract"),
                query=raw.get("query"), graph=raw.get("graph"),
                catalog=raw.get("catalog"),
                expect=str(raw.get("expect", "allow")))
        except KeyError as exc:
            raise ScenarioError(f"steps[{i}]: missing key {exc}") from None
        if step.kind not in ("catalog", "query", "federated", "publish"):
            raise ScenarioError(f"steps[{i}]: unknown kind {step.kind!r}")
        steps.append(step)
    return steps


def load_scenario(path) -> list[ScenarioStep]:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


class NodeSet:
    """Starts every node listed in a nodes file and stops them on exit."""

    def __init__(self, nodes_path, port_override: Optional[dict] = None):
        nodes_path = Path(nodes_path)
        doc = yaml.safe_load(nodes_path.read_text(encoding="utf-8"))
        self.servers: dict[str, NodeServer] = {}
        self._configs = []
        for entry in doc["nodes"]:
            config = load_node_config(nodes_path.parent / entry)
            if port_override is not None:
                config.port = port_override.get(config.id, config.port)
            self._configs.append(config)

    def start(self) -> "NodeSet":
        try:
            for config in self._configs:
                state = NodeState.from_config(config)
                server = NodeServer(state, config.host, config.port)
                server.start()
                self.servers[config.id] = server
        except Exception:
            self.stop()
            raise
        return self

    def stop(self) -> None:
        for server in self.servers.values():
            server.stop()
        self.servers.clear()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def endpoint(self, node_id: str) -> str:
        return self.servers[node_id].endpoint


def run_scenario(steps: list, nodes: NodeSet, base_dir,
                 transcript_path=None) -> list[dict]:
    """Execute the steps in order; a rejection at a step expecting 'allow'
    fails the scenario with that step's requirement tag."""
    base = Path(base_dir)
    transcript: list[dict] = []
    for index, step in enumerate(steps):
        entry: dict = {"step": index, "rq": step.rq, "kind": step.kind,
                       "sender": step.sender}
        if step.kind == "publish":
            payload = load_graph(base / step.graph)
            node = nodes.servers[step.sender].state
            before = len(node.graph)
            node.graph.update(payload)
            entry.update({"response": "inserted",
                          "triples_added": len(node.graph) - before})
        elif step.kind == "federated":
            catalog = load_catalog(base / step.catalog)
            # endpoints in the catalog may be stale if nodes were started on
            # ephemeral ports; rewrite from the running set
            rewritten = []
            for source in catalog.sources:
                if source.id in nodes.servers:
                    from dataclasses import replace
                    source = replace(source, endpoint=nodes.endpoint(source.id))
                rewritten.append(source)
            catalog.sources = rewritten
            query_text = (base / step.query).read_text(encoding="utf-8")
            solutions = federated_query(query_text, catalog)
            entry.update({"response": "QueryResult", "rows": len(solutions)})
        elif step.kind in ("catalog", "query"):
            client = NodeClient(endpoint=nodes.endpoint(step.receiver),
                                sender_id=step.sender,
                                contract_id=step.contract or "",
                                source_id=step.receiver)
            entry["receiver"] = step.receiver
            try:
                if step.kind == "catalog":
                    response = client._roundtrip(
                        _catalog_request(step.sender, step.contract))
                else:
                    query_text = (base / step.query).read_text(encoding="utf-8")
                    response = client.query_raw(query_text)
                entry.update({
                    "response": response.type,
                    "provenance_record": response.body.get("provenanceRecordId"),
                })
                if response.type == "QueryResult":
                    entry["rows"] = len(response.body["results"]["results"]
                                        ["bindings"])
                if step.expect != "allow":
                    raise ScenarioError(
                        f"step {index} ({step.rq}): expected rejection "
                        f"{step.expect}, got {response.type}")
            except RejectionError as exc:
                entry.update({"response": "Rejection", "reason": exc.reason})
                if step.expect == "allow":
                    raise ScenarioError(
                        f"step {index} ({step.rq}): unexpected rejection "
                        f"{exc.reason}: {exc.text}") from None
                if step.expect != exc.reason:
                    raise ScenarioError(
                        f"step {index} ({step.rq}): expected {step.expect}, "
                        f"got {exc.reason}") from None
        else:
            raise ScenarioError(f"step {index}: unknown kind {step.kind!r}")
        transcript.append(entry)
    if transcript_path is not None:
        with open(transcript_path, "w", encoding="utf-8") as fh:
            for entry in transcript:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return transcript


def _catalog_request(sender: str, contract: Optional[str]):
    from .connector.messages import Message
    return Message(type="CatalogRequest", sender=sender,
                   body={"contractId": contract})


def coverage(transcript: list) -> set:
    return {entry["rq"] for entry in transcript}
