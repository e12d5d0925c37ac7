"""RDFizer: declarative mapping rules turning raw records into triples.

Mapping documents are a compact YAML dialect keeping the subject /
predicate-object structure of the usual mapping languages:

    prefixes:            # optional, label -> IRI base
      energy: http://w3id.org/energy/
    maps:
      - source: {path: capacity.csv, format: csv}      # format: csv | json-lines
        filter: {field: year, equals: "2020"}          # optional record filter
        subject:
          template: "http://w3id.org/energy/capacity/{country}/{type}"
          class: energy:GenerationCapacity             # optional rdf:type
        po:
          - {predicate: energy:country, field: country}
          - {predicate: energy:measure, field: measure, datatype: xsd:decimal}
          - {predicate: energy:source, constant: energy:transparency}
          - {predicate: energy:productionType, template: "http://w3id.org/energy/{type}"}
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import yaml

from .rdf import Graph, IRI, Literal, RdfError, Term, Triple
from .vocab import PREFIXES, RDF_TYPE
from urllib.parse import quote


class MappingError(ValueError):
    pass


RawRecord = dict  # field name -> string value (None for missing)

_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")


@dataclass(frozen=True)
class LogicalSource:
    path: str
    format: str  # "csv" | "json-lines"
    filter_field: Optional[str] = None
    filter_equals: Optional[str] = None


@dataclass(frozen=True)
class ObjectSpec:
    field: Optional[str] = None
    constant: Optional[Term] = None
    template: Optional[str] = None
    datatype: Optional[str] = None


@dataclass(frozen=True)
class TripleMap:
    source: LogicalSource
    subject_template: str
    subject_class: Optional[str]
    predicate_objects: tuple[tuple[str, ObjectSpec], ...]

    def referenced_fields(self) -> set[str]:
        fields = set(_PLACEHOLDER_RE.findall(self.subject_template))
        for _, spec in self.predicate_objects:
            if spec.field:
                fields.add(spec.field)
            if spec.template:
                fields |= set(_PLACEHOLDER_RE.findall(spec.template))
        if self.source.filter_field:
            fields.add(self.source.filter_field)
        return fields


@dataclass(frozen=True)
class MappingDocument:
    maps: tuple[TripleMap, ...]
    prefixes: dict = field(default_factory=dict, compare=False)


@dataclass
class MappingResult:
    graph: Graph
    errors: list  # (record index, message)

    @property
    def error_count(self) -> int:
        return len(self.errors)


def _expand(value: str, prefixes: dict, where: str) -> str:
    """Expand a prefixed name or pass through a full IRI."""
    if value.startswith("http://") or value.startswith("https://") or value.startswith("urn:"):
        return value
    label, sep, local = value.partition(":")
    if sep and label in prefixes:
        return prefixes[label] + local
    if sep:
        raise MappingError(f"{where}: unknown prefix {label!r}")
    raise MappingError(f"{where}: not an IRI or prefixed name: {value!r}")


_MAP_KEYS = {"source", "filter", "subject", "po"}
_PO_KEYS = {"predicate", "field", "constant", "template", "datatype"}


def parse_mapping(text: str, base_dir: Optional[Path] = None) -> MappingDocument:
    """Parse a mapping document.  When ``base_dir`` is given and a CSV source
    file is readable, template field references are checked against its header."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MappingError(f"invalid YAML: {exc}") from None
    if not isinstance(doc, dict) or "maps" not in doc:
        raise MappingError("mapping document must have a top-level 'maps' list")
    prefixes = dict(PREFIXES)
    prefixes.update(doc.get("prefixes") or {})
    extra = set(doc) - {"maps", "prefixes"}
    if extra:
        raise MappingError(f"unknown top-level keys: {sorted(extra)}")
    maps = []
    for i, entry in enumerate(doc["maps"]):
        where = f"maps[{i}]"
        if not isinstance(entry, dict):
            raise MappingError(f"{where}: expected a mapping entry")
        unknown = set(entry) - _MAP_KEYS
        if unknown:
            raise MappingError(f"{where}: unknown keys {sorted(unknown)}")
        for req in ("source", "subject", "po"):
            if req not in entry:
                raise MappingError(f"{where}: missing required key {req!r}")
        src = entry["source"]
        if not isinstance(src, dict) or "path" not in src:
            raise MappingError(f"{where}.source: needs a 'path'")
        fmt = src.get("format", "csv")
        if fmt not in ("csv", "json-lines"):
            raise MappingError(f"{where}.source.format: must be csv or json-lines")
        flt = entry.get("filter") or {}
        source = LogicalSource(path=src["path"], format=fmt,
                               filter_field=flt.get("field"),
                               filter_equals=flt.get("equals"))
        subject = entry["subject"]
        if not isinstance(subject, dict) or "template" not in subject:
            raise MappingError(f"{where}.subject: needs a 'template'")
        subject_class = subject.get("class")
        if subject_class is not None:
            subject_class = _expand(subject_class, prefixes, f"{where}.subject.class")
        pos = []
        po_list = entry["po"]
        if not isinstance(po_list, list) or not po_list:
            raise MappingError(f"{where}.po: must be a non-empty list")
        for j, po in enumerate(po_list):
            pwhere = f"{where}.po[{j}]"
            if not isinstance(po, dict) or "predicate" not in po:
                raise MappingError(f"{pwhere}: needs a 'predicate'")
            unknown = set(po) - _PO_KEYS
            if unknown:
                raise MappingError(f"{pwhere}: unknown keys {sorted(unknown)}")
            kinds = [k for k in ("field", "constant", "template") if k in po]
            if len(kinds) != 1:
                raise MappingError(
                    f"{pwhere}: exactly one of field/constant/template required")
            predicate = _expand(str(po["predicate"]), prefixes, pwhere)
            datatype = po.get("datatype")
            if datatype is not None:
                datatype = _expand(str(datatype), prefixes, f"{pwhere}.datatype")
            constant: Optional[Term] = None
            if "constant" in po:
                raw = str(po["constant"])
                if ":" in raw and not raw.startswith('"'):
                    constant = IRI(_expand(raw, prefixes, pwhere))
                else:
                    constant = Literal(raw.strip('"'), datatype) if datatype \
                        else Literal(raw.strip('"'))
            spec = ObjectSpec(field=po.get("field"), constant=constant,
                              template=po.get("template"), datatype=datatype)
            pos.append((predicate, spec))
        tmap = TripleMap(source=source,
                         subject_template=str(subject["template"]),
                         subject_class=subject_class,
                         predicate_objects=tuple(pos))
        if base_dir is not None:
            _check_fields(tmap, Path(base_dir), where)
        maps.append(tmap)
    return MappingDocument(maps=tuple(maps), prefixes=prefixes)


def load_mapping(path) -> MappingDocument:
    path = Path(path)
    return parse_mapping(path.read_text(encoding="utf-8"), base_dir=path.parent)


def _source_header(source: LogicalSource, base_dir: Path) -> Optional[set[str]]:
    path = base_dir / source.path
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        if source.format == "csv":
            reader = csv.reader(fh)
            try:
                return set(next(reader))
            except StopIteration:
                return set()
        first = fh.readline().strip()
        if not first:
            return None  # empty json-lines file has no schema to check
        return set(json.loads(first))


def _check_fields(tmap: TripleMap, base_dir: Path, where: str) -> None:
    header = _source_header(tmap.source, base_dir)
    if header is None:
        return
    missing = tmap.referenced_fields() - header
    if missing:
        raise MappingError(
            f"{where}: fields {sorted(missing)} not present in source header of "
            f"{tmap.source.path}")


def read_records(source: LogicalSource, base_dir: Path) -> list[RawRecord]:
    path = Path(base_dir) / source.path
    records: list[RawRecord] = []
    with open(path, encoding="utf-8") as fh:
        if source.format == "csv":
            for row in csv.DictReader(fh):
                records.append({k: (v if v != "" else None) for k, v in row.items()})
        else:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                records.append({k: (None if v is None else str(v))
                                for k, v in obj.items()})
    return records


def _render_template(template: str, record: RawRecord) -> Optional[str]:
    """Render {field} placeholders, percent-encoding values; None if any
    referenced field is missing (skip-null)."""
    ok = True

    def sub(m):
        nonlocal ok
        value = record.get(m.group(1))
        if value is None:
            ok = False
            return ""
        return quote(str(value), safe="")

    rendered = _PLACEHOLDER_RE.sub(sub, template)
    return rendered if ok else None


def _accepts(source: LogicalSource, record: RawRecord) -> bool:
    if source.filter_field is None:
        return True
    return record.get(source.filter_field) == source.filter_equals


def apply_triple_map(tmap: TripleMap, records: Iterable[RawRecord],
                     graph: Graph, errors: list) -> None:
    for index, record in enumerate(records):
        if not _accepts(tmap.source, record):
            continue
        rendered = _render_template(tmap.subject_template, record)
        if rendered is None:
            continue  # skip-null subject: record contributes nothing for this map
        try:
            subject = IRI(rendered)
        except RdfError as exc:
            errors.append((index, f"invalid subject IRI: {exc}"))
            continue
        if tmap.subject_class:
            graph.insert(Triple(subject, IRI(RDF_TYPE), IRI(tmap.subject_class)))
        for predicate, spec in tmap.predicate_objects:
            obj: Optional[Term]
            if spec.constant is not None:
                obj = spec.constant
            elif spec.field is not None:
                value = record.get(spec.field)
                if value is None:
                    continue  # skip-null
                obj = Literal(str(value), spec.datatype) if spec.datatype \
                    else Literal(str(value))
            else:
                rendered_o = _render_template(spec.template, record)
                if rendered_o is None:
                    continue
                try:
                    obj = IRI(rendered_o)
                except RdfError as exc:
                    errors.append((index, f"invalid object IRI: {exc}"))
                    continue
            graph.insert(Triple(subject, IRI(predicate), obj))


def apply_mapping(doc: MappingDocument,
                  records: Optional[Iterable[RawRecord]] = None,
                  base_dir: Optional[Path] = None) -> MappingResult:
    """Apply every triple map.  With ``records`` given, all maps run over that
    stream; otherwise each map loads its own logical source under ``base_dir``."""
    graph = Graph()
    errors: list = []
    shared = list(records) if records is not None else None
    for tmap in doc.maps:
        if shared is not None:
            rows = shared
        else:
            if base_dir is None:
                raise MappingError("base_dir required to load logical sources")
            rows = read_records(tmap.source, base_dir)
        apply_triple_map(tmap, rows, graph, errors)
    return MappingResult(graph=graph, errors=errors)
