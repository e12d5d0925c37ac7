"""RDF terms, triples, and an indexed in-memory graph with N-Triples I/O."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

from .vocab import RDF_LANGSTRING, XSD_STRING


class RdfError(ValueError):
    pass


class NTriplesParseError(RdfError):
    """Syntax error in N-Triples input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _check_iri(value: str) -> None:
    if ":" not in value:
        raise RdfError(f"IRI missing scheme separator: {value!r}")
    if any(c.isspace() for c in value) or any(c in value for c in '<>"'):
        raise RdfError(f"IRI contains forbidden character: {value!r}")


@dataclass(frozen=True, slots=True)
class IRI:
    value: str

    def __post_init__(self):
        _check_iri(self.value)

    def __repr__(self):
        return f"IRI({self.value!r})"


@dataclass(frozen=True, slots=True)
class Literal:
    lexical: str
    datatype: str = XSD_STRING
    lang: Optional[str] = None

    def __post_init__(self):
        # a language tag implies the language-string datatype
        if self.lang is not None:
            object.__setattr__(self, "datatype", RDF_LANGSTRING)
        _check_iri(self.datatype)

    def __repr__(self):
        if self.lang:
            return f"Literal({self.lexical!r}, lang={self.lang!r})"
        return f"Literal({self.lexical!r}, {self.datatype!r})"


@dataclass(frozen=True, slots=True)
class BlankNode:
    label: str


Term = Union[IRI, Literal, BlankNode]


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if isinstance(self.subject, Literal):
            raise RdfError("triple subject must not be a literal")
        if not isinstance(self.predicate, IRI):
            raise RdfError("triple predicate must be an IRI")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))


Pattern = tuple[Optional[Term], Optional[Term], Optional[Term]]


class Graph:
    """Set of triples with subject/predicate/object access indexes.

    Many concurrent readers or one writer; ``match`` materializes its result
    under the lock so iteration stays stable while other threads insert.
    """

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: set[Triple] = set()
        self._by_s: dict[Term, set[Triple]] = {}
        self._by_p: dict[Term, set[Triple]] = {}
        self._by_o: dict[Term, set[Triple]] = {}
        self._lock = threading.RLock()
        for t in triples:
            self.insert(t)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        with self._lock:
            return iter(list(self._triples))

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._triples == other._triples

    def insert(self, triple: Triple) -> int:
        """Insert one triple (set semantics); returns the new graph size."""
        if not isinstance(triple, Triple):
            raise RdfError(f"not a triple: {triple!r}")
        with self._lock:
            if triple not in self._triples:
                self._triples.add(triple)
                self._by_s.setdefault(triple.subject, set()).add(triple)
                self._by_p.setdefault(triple.predicate, set()).add(triple)
                self._by_o.setdefault(triple.object, set()).add(triple)
            return len(self._triples)

    def update(self, triples: Iterable[Triple]) -> int:
        for t in triples:
            self.insert(t)
        return len(self._triples)

    def index_size(self, position: str, term: Term) -> int:
        index = {"s": self._by_s, "p": self._by_p, "o": self._by_o}[position]
        return len(index.get(term, ()))

    def match(self, subject: Optional[Term] = None, predicate: Optional[Term] = None,
              object: Optional[Term] = None) -> list[Triple]:
        """All triples matching the bound positions, via the most selective index."""
        with self._lock:
            candidates = None
            best = None
            for index, term in ((self._by_s, subject), (self._by_p, predicate),
                                (self._by_o, object)):
                if term is None:
                    continue
                bucket = index.get(term)
                if bucket is None:
                    return []
                if best is None or len(bucket) < len(best):
                    best = bucket
            candidates = self._triples if best is None else best
            return [t for t in candidates
                    if (subject is None or t.subject == subject)
                    and (predicate is None or t.predicate == predicate)
                    and (object is None or t.object == object)]

    def subjects(self) -> list[Term]:
        with self._lock:
            return list(self._by_s)


# --- N-Triples -------------------------------------------------------------

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
            '"': '"', "'": "'", "\\": "\\"}


def _unescape(raw: str, line_no: int) -> str:
    out = []
    i = 0
    while i < len(raw):
        c = raw[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= len(raw):
            raise NTriplesParseError(line_no, "dangling escape")
        e = raw[i + 1]
        if e in _ESCAPES:
            out.append(_ESCAPES[e])
            i += 2
        elif e == "u" or e == "U":
            width = 4 if e == "u" else 8
            hexpart = raw[i + 2:i + 2 + width]
            if len(hexpart) != width:
                raise NTriplesParseError(line_no, f"bad \\{e} escape")
            try:
                out.append(chr(int(hexpart, 16)))
            except ValueError:
                raise NTriplesParseError(line_no, f"bad \\{e} escape") from None
            i += 2 + width
        else:
            raise NTriplesParseError(line_no, f"unknown escape \\{e}")
    return "".join(out)


def _escape(text: str) -> str:
    out = []
    for c in text:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\r":
            out.append("\\r")
        elif c == "\t":
            out.append("\\t")
        elif ord(c) < 0x20 or c in "\x85  ":
            # other control/line-separator characters would break the
            # one-statement-per-line framing
            out.append(f"\\u{ord(c):04X}")
        else:
            out.append(c)
    return "".join(out)


class _LineScanner:
    def __init__(self, line: str, line_no: int):
        self.line = line
        self.pos = 0
        self.line_no = line_no

    def error(self, msg: str):
        raise NTriplesParseError(self.line_no, f"{msg} (column {self.pos + 1})")

    def skip_ws(self):
        while self.pos < len(self.line) and self.line[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.line)

    def term(self) -> Term:
        self.skip_ws()
        if self.at_end():
            self.error("expected term")
        c = self.line[self.pos]
        if c == "<":
            end = self.line.find(">", self.pos)
            if end < 0:
                self.error("unterminated IRI")
            value = self.line[self.pos + 1:end]
            self.pos = end + 1
            try:
                return IRI(_unescape(value, self.line_no))
            except RdfError as exc:
                self.error(str(exc))
        if c == "_":
            if not self.line.startswith("_:", self.pos):
                self.error("expected blank node label")
            i = self.pos + 2
            while i < len(self.line) and (self.line[i].isalnum() or self.line[i] in "_-."):
                i += 1
            label = self.line[self.pos + 2:i]
            if not label:
                self.error("empty blank node label")
            self.pos = i
            return BlankNode(label)
        if c == '"':
            i = self.pos + 1
            while i < len(self.line):
                if self.line[i] == "\\":
                    i += 2
                    continue
                if self.line[i] == '"':
                    break
                i += 1
            else:
                self.error("unterminated literal")
            lexical = _unescape(self.line[self.pos + 1:i], self.line_no)
            self.pos = i + 1
            if self.line.startswith("^^<", self.pos):
                end = self.line.find(">", self.pos + 3)
                if end < 0:
                    self.error("unterminated datatype IRI")
                datatype = self.line[self.pos + 3:end]
                self.pos = end + 1
                try:
                    return Literal(lexical, datatype)
                except RdfError as exc:
                    self.error(str(exc))
            if self.line.startswith("@", self.pos):
                i = self.pos + 1
                while i < len(self.line) and (self.line[i].isalnum() or self.line[i] == "-"):
                    i += 1
                lang = self.line[self.pos + 1:i]
                if not lang:
                    self.error("empty language tag")
                self.pos = i
                return Literal(lexical, lang=lang)
            return Literal(lexical)
        self.error(f"unexpected character {c!r}")


def parse_ntriples(text: str) -> Graph:
    """Parse N-Triples text, one statement per line.  Fails fast on the first
    syntax error, reporting its line number."""
    graph = Graph()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        scanner = _LineScanner(line, line_no)
        s = scanner.term()
        p = scanner.term()
        o = scanner.term()
        scanner.skip_ws()
        if scanner.at_end() or scanner.line[scanner.pos] != ".":
            raise NTriplesParseError(line_no, 'missing terminal "."')
        scanner.pos += 1
        scanner.skip_ws()
        if not scanner.at_end() and not scanner.line[scanner.pos:].lstrip().startswith("#"):
            raise NTriplesParseError(line_no, "trailing content after terminal \".\"")
        try:
            graph.insert(Triple(s, p, o))
        except RdfError as exc:
            raise NTriplesParseError(line_no, str(exc)) from None
    return graph


def format_term(term: Term) -> str:
    if isinstance(term, IRI):
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    if isinstance(term, Literal):
        body = f'"{_escape(term.lexical)}"'
        if term.lang:
            return f"{body}@{term.lang}"
        if term.datatype != XSD_STRING:
            return f"{body}^^<{term.datatype}>"
        return body
    raise RdfError(f"not a term: {term!r}")


def format_triple(triple: Triple) -> str:
    return (f"{format_term(triple.subject)} {format_term(triple.predicate)} "
            f"{format_term(triple.object)} .")


def serialize_ntriples(graph: Graph) -> str:
    """Deterministic N-Triples output: one line per triple, lexicographically
    sorted.  ``parse_ntriples(serialize_ntriples(g)) == g``."""
    lines = sorted(format_triple(t) for t in graph)
    return "".join(line + "\n" for line in lines)


def load_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_ntriples(fh.read())


def save_graph(graph: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_ntriples(graph))
