"""Federated query engine: metadata-driven source selection, decomposition
into per-source subqueries, remote execution, and join of the results."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .rdf import IRI
from .sparql import (Comparison, Query, SolutionSequence, TriplePattern,
                     Variable, format_query, parse_query)
from .vocab import PREFIXES, RDF_TYPE


class FederationError(RuntimeError):
    pass


class UnanswerablePatternError(FederationError):
    def __init__(self, pattern: TriplePattern):
        from .sparql import format_pattern_term
        text = " ".join(format_pattern_term(t) for t in pattern)
        super().__init__(f"no source in the catalog can answer pattern: {text}")
        self.pattern = pattern


@dataclass(frozen=True)
class SourceDescription:
    id: str
    endpoint: str
    classes: frozenset
    predicates: frozenset
    counts: Optional[dict] = None       # per-predicate triple-count estimates
    contract: Optional[str] = None      # default contract for this source

    def __post_init__(self):
        if not self.predicates:
            raise FederationError(f"source {self.id!r}: empty predicate set")


@dataclass
class FederationCatalog:
    sources: list
    client_id: str = "federator"

    def __post_init__(self):
        if not self.sources:
            raise FederationError("catalog must list at least one source")
        ids = [s.id for s in self.sources]
        if len(set(ids)) != len(ids):
            raise FederationError("duplicate source ids in catalog")

    def source(self, source_id: str) -> SourceDescription:
        for s in self.sources:
            if s.id == source_id:
                return s
        raise FederationError(f"unknown source {source_id!r}")


def parse_catalog(text: str) -> FederationCatalog:
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict) or "sources" not in doc:
        raise FederationError("catalog must have a top-level 'sources' list")
    prefixes = dict(PREFIXES)
    prefixes.update(doc.get("prefixes") or {})

    def expand(v: str) -> str:
        label, sep, local = str(v).partition(":")
        if sep and label in prefixes:
            return prefixes[label] + local
        return str(v)

    sources = []
    for entry in doc["sources"]:
        sources.append(SourceDescription(
            id=str(entry["id"]),
            endpoint=str(entry["endpoint"]),
            classes=frozenset(expand(c) for c in entry.get("classes") or []),
            predicates=frozenset(expand(p) for p in entry.get("predicates") or []),
            counts=entry.get("counts"),
            contract=entry.get("contract")))
    return FederationCatalog(sources=sources,
                             client_id=str(doc.get("client_id", "federator")))


def load_catalog(path) -> FederationCatalog:
    return parse_catalog(Path(path).read_text(encoding="utf-8"))


def select_sources(query: Query, catalog: FederationCatalog) -> dict[int, set[str]]:
    """Relevant sources per triple pattern.  A source answers a pattern iff the
    pattern's predicate is in its capabilities; rdf:type patterns go by the
    class object instead; variable predicates match every source."""
    selection: dict[int, set[str]] = {}
    for i, pattern in enumerate(query.patterns):
        relevant: set[str] = set()
        predicate = pattern.predicate
        for source in catalog.sources:
            if isinstance(predicate, Variable):
                relevant.add(source.id)
            elif predicate.value == RDF_TYPE and isinstance(pattern.object, IRI):
                if pattern.object.value in source.classes \
                        or RDF_TYPE in source.predicates:
                    relevant.add(source.id)
            elif predicate.value in source.predicates:
                relevant.add(source.id)
        if not relevant:
            raise UnanswerablePatternError(pattern)
        selection[i] = relevant
    return selection


@dataclass
class Subquery:
    sources: tuple  # source ids this subquery is dispatched to (results unioned)
    query: Query
    pattern_indexes: tuple


@dataclass
class JoinEdge:
    left: int
    right: int
    shared: frozenset

    @property
    def cartesian(self) -> bool:
        return not self.shared


@dataclass
class DecomposedQuery:
    query: Query             # the federated query (projection/distinct/limit)
    subqueries: list
    join_edges: list
    residual_filters: tuple = ()

    def to_dict(self) -> dict:
        return {
            "subqueries": [{
                "sources": list(sq.sources),
                "patterns": len(sq.query.patterns),
                "projection": list(sq.query.projected),
                "query": format_query(sq.query),
            } for sq in self.subqueries],
            "joins": [{
                "left": e.left, "right": e.right,
                "vars": sorted(e.shared), "cartesian": e.cartesian,
            } for e in self.join_edges],
        }


def decompose(query: Query, selection: dict[int, set[str]]) -> DecomposedQuery:
    """Group patterns into per-source subqueries.

    Patterns answerable by exactly one source merge into that source's
    subquery (fewest subqueries).  A pattern answerable by several sources
    becomes its own subquery, dispatched to each and unioned, so that data
    split across sources is still found.
    """
    exclusive: dict[str, list[int]] = {}
    multi: list[tuple[int, tuple]] = []
    for i in sorted(selection):
        sources = selection[i]
        if len(sources) == 1:
            exclusive.setdefault(next(iter(sources)), []).append(i)
        else:
            multi.append((i, tuple(sorted(sources))))

    groups: list[tuple[tuple, tuple]] = []  # (source ids, pattern indexes)
    for source_id in sorted(exclusive):
        groups.append(((source_id,), tuple(exclusive[source_id])))
    for i, sources in multi:
        groups.append((sources, (i,)))

    # variables needed above each subquery: the federated projection, every
    # cross-subquery join variable, and filter variables
    group_vars = []
    for _, indexes in groups:
        vars_here: set[str] = set()
        for i in indexes:
            vars_here |= query.patterns[i].variables()
        group_vars.append(vars_here)
    shared_anywhere: set[str] = set()
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            shared_anywhere |= group_vars[a] & group_vars[b]
    filter_vars = {f.variable.name for f in query.filters}
    needed = set(query.projected) | shared_anywhere | filter_vars

    subqueries = []
    for (sources, indexes), vars_here in zip(groups, group_vars):
        patterns = tuple(query.patterns[i] for i in indexes)
        # a filter whose variable is bound here is pushed into the subquery
        pushed = tuple(f for f in query.filters if f.variable.name in vars_here)
        projected = tuple(sorted(needed & vars_here)) or tuple(sorted(vars_here))
        subqueries.append(Subquery(
            sources=sources,
            query=Query(projected=projected, distinct=True, patterns=patterns,
                        filters=pushed),
            pattern_indexes=indexes))

    join_edges = []
    for a in range(len(subqueries)):
        for b in range(a + 1, len(subqueries)):
            join_edges.append(JoinEdge(
                left=a, right=b,
                shared=frozenset(group_vars[a] & group_vars[b])))
    residual = tuple(
        f for f in query.filters
        if not any(f.variable.name in gv for gv in group_vars))
    return DecomposedQuery(query=query, subqueries=subqueries,
                           join_edges=join_edges, residual_filters=residual)


def hash_join(left: SolutionSequence, right: SolutionSequence,
              shared: set[str]) -> SolutionSequence:
    """Join two solution sequences on their shared variables; with no shared
    variables this is the Cartesian product."""
    variables = list(dict.fromkeys(left.variables + right.variables))
    if not shared:
        rows = [{**a, **b} for a in left.rows for b in right.rows]
        return SolutionSequence(variables=variables, rows=rows)
    build, probe = (left, right) if len(left.rows) <= len(right.rows) else (right, left)
    key_vars = sorted(shared)
    table: dict[tuple, list[dict]] = {}
    for row in build.rows:
        key = tuple(row.get(v) for v in key_vars)
        table.setdefault(key, []).append(row)
    rows = []
    for row in probe.rows:
        key = tuple(row.get(v) for v in key_vars)
        for match in table.get(key, ()):
            rows.append({**match, **row})
    return SolutionSequence(variables=variables, rows=rows)


def _dedupe(rows: list[dict], variables: list[str]) -> list[dict]:
    seen = set()
    out = []
    for row in rows:
        key = tuple(row.get(v) for v in variables)
        if key not in seen:
            seen.add(key)
            out.append(row)
    return out


def execute_federated(plan: DecomposedQuery, clients: dict) -> SolutionSequence:
    """Dispatch subqueries concurrently, union multi-source results, then join
    pairwise in ascending result-size order (hash join on shared variables)."""
    for sq in plan.subqueries:
        for source_id in sq.sources:
            if source_id not in clients:
                raise FederationError(f"no client for source {source_id!r}")

    def run_subquery(sq: Subquery) -> SolutionSequence:
        text = format_query(sq.query)
        merged: list[dict] = []
        for source_id in sq.sources:
            merged.extend(clients[source_id].query(text).rows)
        return SolutionSequence(variables=list(sq.query.projected),
                                rows=_dedupe(merged, list(sq.query.projected)))

    if len(plan.subqueries) == 1:
        results = [run_subquery(plan.subqueries[0])]
    else:
        with ThreadPoolExecutor(max_workers=max(2, len(plan.subqueries))) as pool:
            results = list(pool.map(run_subquery, plan.subqueries))

    pending = list(results)
    while len(pending) > 1:
        pending.sort(key=len)
        left = pending.pop(0)
        # prefer a partner sharing variables; fall back to Cartesian product
        partner_index = 0
        left_vars = set(left.variables)
        for i, candidate in enumerate(pending):
            if left_vars & set(candidate.variables):
                partner_index = i
                break
        right = pending.pop(partner_index)
        pending.append(hash_join(left, right, left_vars & set(right.variables)))
    joined = pending[0]

    from .sparql import _filter_ok  # row predicates, same semantics as local eval
    rows = joined.rows
    for comparison in plan.query.filters:
        rows = [r for r in rows if _filter_ok(r, comparison)]
    projected_vars = list(plan.query.projected)
    rows = [{v: r[v] for v in projected_vars if v in r} for r in rows]
    rows = _dedupe(rows, projected_vars) if plan.query.distinct else rows
    if plan.query.limit is not None:
        rows = rows[:plan.query.limit]
    return SolutionSequence(variables=projected_vars, rows=rows)


def build_clients(catalog: FederationCatalog, client_factory=None) -> dict:
    """Default clients speak the connector wire protocol using each source's
    endpoint and default contract."""
    from .connector.client import NodeClient
    clients = {}
    for source in catalog.sources:
        if client_factory is not None:
            clients[source.id] = client_factory(source)
        else:
            clients[source.id] = NodeClient(
                endpoint=source.endpoint, sender_id=catalog.client_id,
                contract_id=source.contract or "", source_id=source.id)
    return clients


def plan_query(text: str, catalog: FederationCatalog) -> DecomposedQuery:
    query = parse_query(text)
    selection = select_sources(query, catalog)
    return decompose(query, selection)


def federated_query(text: str, catalog: FederationCatalog,
                    clients: Optional[dict] = None) -> SolutionSequence:
    """parse -> select_sources -> decompose -> execute_federated."""
    plan = plan_query(text, catalog)
    if clients is None:
        needed = {s for sq in plan.subqueries for s in sq.sources}
        trimmed = FederationCatalog(
            sources=[s for s in catalog.sources if s.id in needed],
            client_id=catalog.client_id)
        clients = build_clients(trimmed)
    return execute_federated(plan, clients)
