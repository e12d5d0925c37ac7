"""Materialized knowledge-graph creation: staging, preprocessing, mapping,
linking, validation, and load, with a provenance graph alongside the output."""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Optional

import yaml

from .mapping import RawRecord, load_mapping, read_records
from .rdf import Graph, IRI, Literal, Triple, load_graph, save_graph, serialize_ntriples
from .shapes import load_shapes, validate
from .vocab import OWL_SAMEAS, PROV, RDF_TYPE, XSD_DATETIME


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessStep:
    kind: str  # rename-field | scale-numeric | aggregate | drop-missing
    params: tuple

    @classmethod
    def from_dict(cls, raw: dict, where: str) -> "PreprocessStep":
        kind = raw.get("kind")
        if kind == "rename-field":
            return cls(kind, (str(raw["from"]), str(raw["to"])))
        if kind == "scale-numeric":
            factor = Decimal(str(raw["factor"]))
            if not factor.is_finite() or factor == 0:
                raise PipelineError(f"{where}: scale factor must be finite, non-zero")
            return cls(kind, (str(raw["field"]), factor))
        if kind == "aggregate":
            group_by = tuple(raw.get("group_by") or ())
            if not group_by:
                raise PipelineError(f"{where}: aggregate needs group_by fields")
            return cls(kind, (group_by, str(raw["sum"])))
        if kind == "drop-missing":
            return cls(kind, (str(raw["field"]),))
        raise PipelineError(f"{where}: unknown preprocessing kind {kind!r}")


def canonical_decimal(value: Decimal) -> str:
    """No exponent, trailing zeros trimmed, '.' separator."""
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text or "0"


def preprocess(records: Iterable[RawRecord],
               steps: list) -> tuple[list[RawRecord], list[str]]:
    """Apply steps in order; returns (records, tally of record-level errors)."""
    rows = [dict(r) for r in records]
    errors: list[str] = []
    for step in steps:
        if step.kind == "rename-field":
            old, new = step.params
            rows = [{(new if k == old else k): v for k, v in r.items()}
                    for r in rows]
        elif step.kind == "drop-missing":
            (fld,) = step.params
            rows = [r for r in rows if r.get(fld) is not None]
        elif step.kind == "scale-numeric":
            fld, factor = step.params
            out = []
            for i, r in enumerate(rows):
                value = r.get(fld)
                if value is None:
                    out.append(r)
                    continue
                try:
                    scaled = Decimal(str(value)) * factor
                except InvalidOperation:
                    errors.append(f"scale-numeric: record {i}: "
                                  f"non-numeric {fld}={value!r}")
                    continue
                r = dict(r)
                r[fld] = canonical_decimal(scaled)
                out.append(r)
            rows = out
        elif step.kind == "aggregate":
            group_by, sum_field = step.params
            sums: dict[tuple, Decimal] = {}
            templates: dict[tuple, RawRecord] = {}
            order: list[tuple] = []
            for i, r in enumerate(rows):
                value = r.get(sum_field)
                try:
                    amount = Decimal(str(value))
                except (InvalidOperation, TypeError):
                    errors.append(f"aggregate: record {i}: "
                                  f"non-numeric {sum_field}={value!r}")
                    continue
                key = tuple(r.get(g) for g in group_by)
                if key not in sums:
                    sums[key] = Decimal(0)
                    templates[key] = {g: r.get(g) for g in group_by}
                    order.append(key)
                sums[key] += amount
            rows = []
            for key in order:
                record = dict(templates[key])
                record[sum_field] = canonical_decimal(sums[key])
                rows.append(record)
    return rows, errors


@dataclass(frozen=True)
class LinkingSpec:
    label_predicate: str
    reference_path: str
    link_predicate: str = OWL_SAMEAS


def link_entities(graph: Graph, reference: Graph,
                  spec: LinkingSpec) -> tuple[int, list]:
    """Exact-label linking: for each local node and reference node carrying an
    equal label, add a sameAs link into ``graph``.  Returns the link count and
    the ambiguous labels (one local label matching several reference nodes)."""
    label = IRI(spec.label_predicate)
    by_label: dict[str, list] = {}
    for triple in reference.match(None, label, None):
        if isinstance(triple.object, Literal):
            by_label.setdefault(triple.object.lexical, []).append(triple.subject)
    links = 0
    ambiguous = []
    link_pred = IRI(spec.link_predicate)
    for triple in list(graph.match(None, label, None)):
        if not isinstance(triple.object, Literal):
            continue
        matches = by_label.get(triple.object.lexical, [])
        if len(matches) > 1:
            ambiguous.append(triple.object.lexical)
        for target in matches:
            before = len(graph)
            if graph.insert(Triple(triple.subject, link_pred, target)) > before:
                links += 1
    return links, sorted(set(ambiguous))


@dataclass
class PipelineConfig:
    sources: list            # [{path, format, preprocess: [...]}, ...]
    mapping_path: Path
    shapes_path: Path
    linking: Optional[LinkingSpec]
    output_path: Path
    on_violation: str        # block | warn
    staging_dir: Path
    provenance_path: Path
    report_path: Optional[Path]
    base_dir: Path


def load_pipeline_config(path) -> PipelineConfig:
    path = Path(path)
    doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    base = path.parent
    policy = doc.get("on_violation", "block")
    if policy not in ("block", "warn"):
        raise PipelineError(f"on_violation must be 'block' or 'warn', got {policy!r}")
    linking = None
    if doc.get("linking"):
        link = doc["linking"]
        linking = LinkingSpec(label_predicate=str(link["label_predicate"]),
                              reference_path=str(base / link["reference"]),
                              link_predicate=str(link.get("link_predicate",
                                                          OWL_SAMEAS)))
    sources = []
    for entry in doc.get("sources") or []:
        steps = [PreprocessStep.from_dict(s, f"preprocess[{i}]")
                 for i, s in enumerate(entry.get("preprocess") or [])]
        sources.append({"path": str(entry["path"]),
                        "format": entry.get("format", "csv"),
                        "steps": steps})
    if not sources:
        raise PipelineError("pipeline config needs at least one source")
    output = base / doc["output"]
    config = PipelineConfig(
        sources=sources,
        mapping_path=base / doc["mapping"],
        shapes_path=base / doc["shapes"],
        linking=linking,
        output_path=output,
        on_violation=policy,
        staging_dir=base / doc.get("staging", "staging"),
        provenance_path=base / doc.get("provenance",
                                       output.with_suffix(".prov.nt").name),
        report_path=(base / doc["report"]) if doc.get("report") else None,
        base_dir=base)
    for required in ([config.mapping_path, config.shapes_path]
                     + [base / s["path"] for s in sources]
                     + ([Path(linking.reference_path)] if linking else [])):
        if not Path(required).exists():
            raise PipelineError(f"referenced file does not exist: {required}")
    return config


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class _ProvBuilder:
    """Minimal PROV-style activity trace serialized as N-Triples."""

    BASE = "http://w3id.org/energy/prov/"

    def __init__(self, run_id: str):
        self.graph = Graph()
        self.run_id = run_id

    def activity(self, stage: str, used: list, generated: list,
                 started: str, ended: str) -> None:
        a = IRI(f"{self.BASE}{self.run_id}/{stage}")
        self.graph.insert(Triple(a, IRI(RDF_TYPE), IRI(PROV + "Activity")))
        self.graph.insert(Triple(a, IRI(PROV + "startedAtTime"),
                                 Literal(started, XSD_DATETIME)))
        self.graph.insert(Triple(a, IRI(PROV + "endedAtTime"),
                                 Literal(ended, XSD_DATETIME)))
        for digest in used:
            self.graph.insert(Triple(a, IRI(PROV + "used"),
                                     IRI(f"{self.BASE}entity/{digest}")))
        for digest in generated:
            self.graph.insert(Triple(a, IRI(PROV + "generated"),
                                     IRI(f"{self.BASE}entity/{digest}")))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute staging -> preprocessing -> mapping -> linking -> validation ->
    load.  Returns the run report (also written to ``report`` if configured)."""
    report: dict = {"stages": {}, "errors": [], "aborted_stage": None,
                    "conforms": None, "loaded": False}
    # deterministic run id so re-runs of an unchanged config are idempotent
    run_id = hashlib.sha256(str(config.output_path).encode()).hexdigest()[:12]
    prov = _ProvBuilder(run_id)

    # staging: content-addressed copies of the raw inputs
    started = _now()
    config.staging_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    for source in config.sources:
        src = config.base_dir / source["path"]
        digest = _sha256_file(src)
        target = config.staging_dir / f"{digest}{Path(source['path']).suffix}"
        if not target.exists():
            shutil.copyfile(src, target)
        staged.append({"source": source["path"], "digest": digest})
    report["stages"]["staging"] = {"files": staged}
    prov.activity("staging", used=[s["digest"] for s in staged],
                  generated=[s["digest"] for s in staged],
                  started=started, ended=_now())

    # preprocessing
    started = _now()
    records_by_path: dict[str, list] = {}
    total_in = total_out = 0
    from .mapping import LogicalSource
    for source in config.sources:
        rows = read_records(LogicalSource(path=source["path"],
                                          format=source["format"]),
                            config.base_dir)
        total_in += len(rows)
        rows, errors = preprocess(rows, source["steps"])
        report["errors"].extend(errors)
        total_out += len(rows)
        resolved = (config.base_dir / source["path"]).resolve()
        records_by_path[str(resolved)] = rows
    report["stages"]["preprocess"] = {"records_in": total_in,
                                      "records_out": total_out}
    prov.activity("preprocess", used=[s["digest"] for s in staged], generated=[],
                  started=started, ended=_now())

    # mapping
    started = _now()
    try:
        doc = load_mapping(config.mapping_path)
    except Exception as exc:
        report["aborted_stage"] = "mapping"
        report["errors"].append(str(exc))
        return _finish(report, config, prov)
    graph = Graph()
    map_errors: list = []
    from .mapping import apply_triple_map
    mapping_base = config.mapping_path.parent
    for tmap in doc.maps:
        resolved = (mapping_base / tmap.source.path).resolve()
        rows = records_by_path.get(str(resolved))
        if rows is None:
            rows = read_records(tmap.source, mapping_base)
        apply_triple_map(tmap, rows, graph, map_errors)
    report["errors"].extend(f"mapping: record {i}: {m}" for i, m in map_errors)
    mapped_size = len(graph)
    report["stages"]["mapping"] = {"triples": mapped_size,
                                   "record_errors": len(map_errors)}
    mapped_digest = hashlib.sha256(
        serialize_ntriples(graph).encode()).hexdigest()
    prov.activity("mapping", used=[s["digest"] for s in staged],
                  generated=[mapped_digest], started=started, ended=_now())

    # linking / enrichment
    started = _now()
    link_count = 0
    ambiguous: list = []
    if config.linking is not None:
        reference = load_graph(config.linking.reference_path)
        link_count, ambiguous = link_entities(graph, reference, config.linking)
    report["stages"]["linking"] = {"links": link_count, "ambiguous": ambiguous}
    linked_digest = hashlib.sha256(serialize_ntriples(graph).encode()).hexdigest()
    prov.activity("linking", used=[mapped_digest], generated=[linked_digest],
                  started=started, ended=_now())

    # validation
    started = _now()
    try:
        shape_list = load_shapes(config.shapes_path)
    except Exception as exc:
        report["aborted_stage"] = "validation"
        report["errors"].append(str(exc))
        return _finish(report, config, prov)
    validation = validate(graph, shape_list)
    report["conforms"] = validation.conforms
    report["stages"]["validation"] = {
        "conforms": validation.conforms,
        "violations": [v.to_dict() for v in validation.violations]}
    prov.activity("validation", used=[linked_digest], generated=[],
                  started=started, ended=_now())

    # load
    started = _now()
    if not validation.conforms and config.on_violation == "block":
        report["stages"]["load"] = {"skipped": True,
                                    "reason": "validation failed, policy=block"}
    else:
        config.output_path.parent.mkdir(parents=True, exist_ok=True)
        save_graph(graph, config.output_path)
        report["loaded"] = True
        report["stages"]["load"] = {"skipped": False, "triples": len(graph),
                                    "output": str(config.output_path),
                                    "digest": _sha256_file(config.output_path)}
        prov.activity("load", used=[linked_digest],
                      generated=[report["stages"]["load"]["digest"]],
                      started=started, ended=_now())
    return _finish(report, config, prov)


def _finish(report: dict, config: PipelineConfig, prov: _ProvBuilder) -> dict:
    save_graph(prov.graph, config.provenance_path)
    report["provenance"] = str(config.provenance_path)
    if config.report_path is not None:
        config.report_path.write_text(json.dumps(report, indent=2) + "\n",
                                      encoding="utf-8")
    return report
