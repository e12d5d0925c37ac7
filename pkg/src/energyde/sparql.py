"""Parser and evaluator for the SPARQL subset used here.

Grammar: PREFIX declarations; SELECT [DISTINCT] var-list; WHERE { dot-separated
triple patterns, optional FILTER(var op constant) }; optional LIMIT n.
Prefixed names are expanded at parse time; no prefixes survive into the algebra.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .rdf import Graph, IRI, Literal, BlankNode, RdfError, Term, format_term
from .vocab import (RDF_TYPE, XSD, XSD_DECIMAL, XSD_INTEGER)


class QueryParseError(ValueError):
    """Syntax error; carries position and an expected-token message."""


class UndeclaredPrefixError(QueryParseError):
    def __init__(self, prefix: str):
        super().__init__(f"undeclared prefix: {prefix!r}")
        self.prefix = prefix


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __repr__(self):
        return f"?{self.name}"


PatternTerm = Union[Term, Variable]

_COMPARE_OPS = ("=", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True, slots=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def variables(self) -> set[str]:
        return {t.name for t in (self.subject, self.predicate, self.object)
                if isinstance(t, Variable)}

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))


@dataclass(frozen=True, slots=True)
class Comparison:
    variable: Variable
    op: str
    constant: Term


@dataclass(frozen=True)
class Query:
    projected: tuple[str, ...]
    distinct: bool
    patterns: tuple[TriplePattern, ...]
    filters: tuple[Comparison, ...] = ()
    limit: Optional[int] = None
    prefixes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bound = set()
        for p in self.patterns:
            bound |= p.variables()
        for f in self.filters:
            bound.add(f.variable.name)
        for v in self.projected:
            if v not in bound:
                raise QueryParseError(
                    f"projected variable ?{v} appears in no pattern or filter")

    def variables(self) -> set[str]:
        out = set()
        for p in self.patterns:
            out |= p.variables()
        return out


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<WS>\s+|\#[^\n]*)
  | (?P<IRIREF><[^<>"{}|^`\\\s]*>)
  | (?P<VAR>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<DTYPE>\^\^)
  | (?P<LANGTAG>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<NUMBER>[+-]?[0-9]+(?:\.[0-9]+)?)
  | (?P<PNAME>[A-Za-z_][A-Za-z0-9_.-]*?:[A-Za-z0-9_][A-Za-z0-9_.-]*|[A-Za-z_][A-Za-z0-9_.-]*?:)
  | (?P<NAME>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<OP>!=|<=|>=|=|<|>)
  | (?P<PUNCT>[{}().;,*])
""", re.VERBOSE)

_KEYWORDS = {"prefix", "select", "distinct", "where", "filter", "limit"}


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QueryParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "WS":
            continue
        tokens.append((kind, m.group(), m.start()))
    tokens.append(("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, expected: str):
        kind, value, offset = self.peek()
        got = value if value else "end of input"
        raise QueryParseError(f"at offset {offset}: expected {expected}, got {got!r}")

    def keyword(self) -> Optional[str]:
        kind, value, _ = self.peek()
        if kind == "NAME" and value.lower() in _KEYWORDS:
            return value.lower()
        return None

    def expect_keyword(self, word: str):
        if self.keyword() != word:
            self.error(word.upper())
        self.next()

    def expect_punct(self, ch: str):
        kind, value, _ = self.peek()
        if (kind in ("PUNCT", "OP") and value == ch):
            self.next()
            return
        self.error(repr(ch))

    def parse(self) -> Query:
        while self.keyword() == "prefix":
            self.next()
            kind, value, _ = self.peek()
            if kind != "PNAME" or not value.endswith(":"):
                self.error("prefix label")
            label = self.next()[1][:-1]
            kind, value, _ = self.peek()
            if kind != "IRIREF":
                self.error("IRI")
            self.prefixes[label] = self.next()[1][1:-1]
        self.expect_keyword("select")
        distinct = False
        if self.keyword() == "distinct":
            self.next()
            distinct = True
        projected = []
        star = False
        if self.peek()[:2] == ("PUNCT", "*"):
            self.next()
            star = True
        else:
            while self.peek()[0] == "VAR":
                projected.append(self.next()[1][1:])
            if not projected:
                self.error("projected variable or *")
        if self.keyword() == "where":
            self.next()
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list[Comparison] = []
        while True:
            kind, value, _ = self.peek()
            if kind == "PUNCT" and value == "}":
                self.next()
                break
            if self.keyword() == "filter":
                self.next()
                filters.append(self.parse_filter())
            else:
                s = self.pattern_term(position="subject")
                p = self.pattern_term(position="predicate")
                o = self.pattern_term(position="object")
                try:
                    patterns.append(TriplePattern(s, p, o))
                except RdfError as exc:
                    raise QueryParseError(str(exc)) from None
            kind, value, _ = self.peek()
            if kind == "PUNCT" and value == ".":
                self.next()
        limit = None
        if self.keyword() == "limit":
            self.next()
            kind, value, _ = self.peek()
            if kind != "NUMBER" or not value.isdigit():
                self.error("non-negative integer")
            limit = int(self.next()[1])
        if self.peek()[0] != "EOF":
            self.error("end of query")
        if star:
            projected = sorted({v for p in patterns for v in p.variables()})
        return Query(projected=tuple(projected), distinct=distinct,
                     patterns=tuple(patterns), filters=tuple(filters),
                     limit=limit, prefixes=dict(self.prefixes))

    def parse_filter(self) -> Comparison:
        self.expect_punct("(")
        kind, value, _ = self.peek()
        if kind != "VAR":
            self.error("variable")
        var = Variable(self.next()[1][1:])
        kind, value, _ = self.peek()
        if kind != "OP" or value not in _COMPARE_OPS:
            self.error("comparison operator")
        op = self.next()[1]
        const = self.constant_term()
        self.expect_punct(")")
        return Comparison(var, op, const)

    def expand_pname(self, pname: str) -> IRI:
        label, _, local = pname.partition(":")
        if label not in self.prefixes:
            raise UndeclaredPrefixError(label)
        return IRI(self.prefixes[label] + local)

    def constant_term(self) -> Term:
        kind, value, _ = self.peek()
        if kind == "IRIREF":
            self.next()
            try:
                return IRI(value[1:-1])
            except RdfError as exc:
                raise QueryParseError(str(exc)) from None
        if kind == "PNAME":
            self.next()
            return self.expand_pname(value)
        if kind == "STRING":
            self.next()
            lexical = _unquote(value)
            kind2, value2, _ = self.peek()
            if kind2 == "DTYPE":
                self.next()
                kind3, value3, _ = self.peek()
                if kind3 == "IRIREF":
                    self.next()
                    return Literal(lexical, value3[1:-1])
                if kind3 == "PNAME":
                    self.next()
                    return Literal(lexical, self.expand_pname(value3).value)
                self.error("datatype IRI")
            if kind2 == "LANGTAG":
                self.next()
                return Literal(lexical, lang=value2[1:])
            return Literal(lexical)
        if kind == "NUMBER":
            self.next()
            dt = XSD_DECIMAL if "." in value else XSD_INTEGER
            return Literal(value, dt)
        self.error("RDF term")

    def pattern_term(self, position: str) -> PatternTerm:
        kind, value, _ = self.peek()
        if kind == "VAR":
            return Variable(self.next()[1][1:])
        if kind == "NAME" and value == "a" and position == "predicate":
            self.next()
            return IRI(RDF_TYPE)
        if kind == "NAME" and value.startswith("_"):
            pass
        if kind == "PNAME" and value.startswith("_:"):
            self.next()
            return BlankNode(value[2:])
        return self.constant_term()


def _unquote(raw: str) -> str:
    # raw includes the surrounding quotes; resolve the same escapes N-Triples uses
    from .rdf import _unescape
    return _unescape(raw[1:-1], 0)


def parse_query(text: str) -> Query:
    return _Parser(text).parse()


def format_pattern_term(term: PatternTerm) -> str:
    if isinstance(term, Variable):
        return f"?{term.name}"
    return format_term(term)


def format_query(query: Query) -> str:
    """Canonical text form of a query; all IRIs fully written out.
    ``parse_query(format_query(parse_query(t))) == parse_query(t)``."""
    head = "SELECT " + ("DISTINCT " if query.distinct else "")
    head += " ".join(f"?{v}" for v in query.projected) if query.projected \
        else "*"
    lines = [head, "WHERE {"]
    for p in query.patterns:
        lines.append("  " + " ".join(format_pattern_term(t) for t in p) + " .")
    for f in query.filters:
        lines.append(f"  FILTER(?{f.variable.name} {f.op} {format_term(f.constant)})")
    lines.append("}")
    if query.limit is not None:
        lines.append(f"LIMIT {query.limit}")
    return "\n".join(lines) + "\n"


# --- evaluation ------------------------------------------------------------

@dataclass
class SolutionSequence:
    variables: list[str]
    rows: list[dict[str, Term]]

    def tuples(self) -> set[tuple]:
        """Projected rows as a set of tuples (None for unbound)."""
        return {tuple(row.get(v) for v in self.variables) for row in self.rows}

    def __len__(self):
        return len(self.rows)


_NUMERIC_DATATYPES = {
    XSD + name for name in (
        "integer", "decimal", "double", "float", "long", "int", "short", "byte",
        "nonNegativeInteger", "nonPositiveInteger", "negativeInteger",
        "positiveInteger", "unsignedLong", "unsignedInt", "unsignedShort",
        "unsignedByte",
    )
}


def _lexical_value(term: Term) -> str:
    if isinstance(term, IRI):
        return term.value
    if isinstance(term, Literal):
        return term.lexical
    return term.label


def _compare(value: Term, op: str, constant: Term) -> bool:
    # numeric XSD datatypes compare in value space, everything else lexically
    if (isinstance(value, Literal) and isinstance(constant, Literal)
            and value.datatype in _NUMERIC_DATATYPES
            and constant.datatype in _NUMERIC_DATATYPES):
        try:
            left, right = float(value.lexical), float(constant.lexical)
        except ValueError:
            return False
    else:
        left, right = _lexical_value(value), _lexical_value(constant)
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise ValueError(f"unknown operator {op!r}")


def _filter_ok(row: dict[str, Term], comparison: Comparison) -> bool:
    value = row.get(comparison.variable.name)
    if value is None:
        return False
    return _compare(value, comparison.op, comparison.constant)


def _order_patterns(patterns, graph: Graph):
    """Greedy join order: most bound positions first, then the smallest
    index-cardinality estimate."""
    remaining = list(patterns)
    ordered = []
    known: set[str] = set()

    def score(p: TriplePattern):
        bound = 0
        estimate = len(graph) + 1
        for pos, term in zip("spo", p):
            if isinstance(term, Variable):
                if term.name in known:
                    bound += 1
            else:
                bound += 1
                estimate = min(estimate, graph.index_size(pos, term))
        return (-bound, estimate)

    while remaining:
        best = min(remaining, key=score)
        remaining.remove(best)
        ordered.append(best)
        known |= best.variables()
    return ordered


def _resolve(term: PatternTerm, row: dict[str, Term]) -> Optional[Term]:
    if isinstance(term, Variable):
        return row.get(term.name)
    return term


def evaluate(query: Query, graph: Graph) -> SolutionSequence:
    """Standard BGP semantics over one graph, then filters, projection,
    DISTINCT, and LIMIT."""
    rows: list[dict[str, Term]] = [{}]
    for pattern in _order_patterns(query.patterns, graph):
        next_rows = []
        for row in rows:
            s = _resolve(pattern.subject, row)
            p = _resolve(pattern.predicate, row)
            o = _resolve(pattern.object, row)
            for triple in graph.match(s, p, o):
                extended = dict(row)
                ok = True
                for term, value in zip(pattern, triple):
                    if isinstance(term, Variable):
                        existing = extended.get(term.name)
                        if existing is not None and existing != value:
                            ok = False
                            break
                        extended[term.name] = value
                if ok:
                    next_rows.append(extended)
        rows = next_rows
        if not rows:
            break
    for comparison in query.filters:
        rows = [r for r in rows if _filter_ok(r, comparison)]
    projected = [{v: r[v] for v in query.projected if v in r} for r in rows]
    if query.distinct:
        seen = set()
        deduped = []
        for r in projected:
            key = tuple(r.get(v) for v in query.projected)
            if key not in seen:
                seen.add(key)
                deduped.append(r)
        projected = deduped
    if query.limit is not None:
        projected = projected[:query.limit]
    return SolutionSequence(variables=list(query.projected), rows=projected)


# --- SPARQL JSON results ---------------------------------------------------

def _binding_entry(term: Term) -> dict:
    if isinstance(term, IRI):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BlankNode):
        return {"type": "bnode", "value": term.label}
    entry = {"type": "literal", "value": term.lexical}
    if term.lang:
        entry["xml:lang"] = term.lang
    elif term.datatype != XSD + "string":
        entry["datatype"] = term.datatype
    return entry


def _row_sort_key(variables):
    def key(row):
        return tuple(format_term(row[v]) if v in row else "" for v in variables)
    return key


def solutions_to_json(solutions: SolutionSequence) -> dict:
    rows = sorted(solutions.rows, key=_row_sort_key(solutions.variables))
    return {
        "head": {"vars": list(solutions.variables)},
        "results": {"bindings": [
            {v: _binding_entry(row[v]) for v in solutions.variables if v in row}
            for row in rows
        ]},
    }


def serialize_results(solutions: SolutionSequence) -> str:
    """W3C SPARQL Query Results JSON Format; rows sorted lexicographically by
    projected values for determinism."""
    return json.dumps(solutions_to_json(solutions), indent=2, sort_keys=True) + "\n"


def solutions_from_json(doc: dict) -> SolutionSequence:
    variables = list(doc["head"]["vars"])
    rows = []
    for binding in doc["results"]["bindings"]:
        row: dict[str, Term] = {}
        for var, entry in binding.items():
            if entry["type"] == "uri":
                row[var] = IRI(entry["value"])
            elif entry["type"] == "bnode":
                row[var] = BlankNode(entry["value"])
            else:
                row[var] = Literal(entry["value"],
                                   entry.get("datatype", XSD + "string"),
                                   entry.get("xml:lang"))
        rows.append(row)
    return SolutionSequence(variables=variables, rows=rows)
