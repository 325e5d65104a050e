"""In-memory triple graph for the context model.

Supports a terse statement syntax (``@prefix`` declarations, ``.``-terminated
statements, ``;`` predicate lists, ``,`` object lists, quoted string literals,
bare decimal numbers, ``a`` as the type predicate), canonical serialization,
wildcard pattern matching and set diffing.  Graph values are immutable, so
readers may share them freely; building a new graph never mutates an old one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

_NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d+)?|\.\d+)")
_LOCAL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")


class ParseError(Exception):
    """Malformed context-model source, with 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnresolvedPrefixError(ParseError):
    """A prefixed name used a prefix that was never declared."""


@dataclass(frozen=True)
class Iri:
    """An identifier term; always stored fully expanded."""

    value: str


@dataclass(frozen=True)
class Literal:
    text: str

    @property
    def number(self) -> float | None:
        """Numeric view of the text, or None when it is not a plain decimal."""
        if _NUMBER_RE.fullmatch(self.text):
            return float(self.text)
        return None


@dataclass(frozen=True)
class BlankNode:
    label: str


Term = Union[Iri, Literal, BlankNode]


@dataclass(frozen=True)
class Wildcard:
    """Unbound slot in a match pattern; equal names must bind consistently."""

    name: str


Pattern = tuple[Union[Term, Wildcard], Union[Term, Wildcard], Union[Term, Wildcard]]


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Iri
    object: Term

    def __post_init__(self) -> None:
        if not isinstance(self.predicate, Iri):
            raise ValueError("triple predicate must be an IRI")
        if isinstance(self.subject, Literal):
            raise ValueError("triple subject cannot be a literal")


def term_sort_key(term: Term) -> tuple[int, str]:
    if isinstance(term, Iri):
        return (0, term.value)
    if isinstance(term, BlankNode):
        return (1, term.label)
    return (2, term.text)


def triple_sort_key(triple: Triple) -> tuple:
    return (
        term_sort_key(triple.subject),
        term_sort_key(triple.predicate),
        term_sort_key(triple.object),
    )


@dataclass(frozen=True, eq=False)
class TripleGraph:
    """A set of triples plus the prefix table used to read/write them.

    Equality is by triple set; prefixes are serialization metadata only.
    """

    triples: frozenset[Triple]
    prefixes: Mapping[str, str]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TripleGraph):
            return NotImplemented
        return self.triples == other.triples

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triples

    def sorted_triples(self) -> list[Triple]:
        return sorted(self.triples, key=triple_sort_key)


EMPTY_GRAPH = TripleGraph(frozenset(), {})


INSERT = "insert"
DELETE = "delete"


@dataclass(frozen=True)
class ChangeEvent:
    kind: str  # INSERT or DELETE
    triple: Triple
    sequence: int


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<WS>[ \t\r]+)
    | (?P<NL>\n)
    | (?P<COMMENT>\#[^\n]*)
    | (?P<PREFIX_KW>@prefix\b)
    | (?P<IRIREF><[^<>"\s]*>)
    | (?P<LITERAL>"(?:[^"\\\n]|\\.)*")
    | (?P<NUMBER>[+-]?(?:\d+(?:\.\d+)?|\.\d+))
    | (?P<BLANK>_:[A-Za-z_][A-Za-z0-9_-]*)
    | (?P<PNAME>(?:[A-Za-z_][A-Za-z0-9_-]*)?:[A-Za-z_][A-Za-z0-9_-]*)
    | (?P<PNAME_NS>(?:[A-Za-z_][A-Za-z0-9_-]*)?:)
    | (?P<A>a\b)
    | (?P<DOT>\.)
    | (?P<SEMI>;)
    | (?P<COMMA>,)
    """,
    re.VERBOSE,
)

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            col = pos - line_start + 1
            ch = text[pos]
            if ch == '"':
                raise ParseError("unterminated string literal", line, col)
            raise ParseError(f"unexpected character {ch!r}", line, col)
        kind = match.lastgroup or ""
        col = match.start() - line_start + 1
        if kind == "NL":
            line += 1
            line_start = match.end()
        elif kind not in ("WS", "COMMENT"):
            tokens.append(_Token(kind, match.group(), line, col))
        pos = match.end()
    tokens.append(_Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


def _unescape(raw: str, line: int, column: int) -> str:
    out: list[str] = []
    i = 0
    body = raw[1:-1]
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            i += 1
            if i >= len(body) or body[i] not in _ESCAPES:
                raise ParseError("unsupported escape in string literal", line, column)
            out.append(_ESCAPES[body[i]])
        else:
            out.append(ch)
        i += 1
    return "".join(out)


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0
        self.prefixes: dict[str, str] = {}
        self.triples: set[Triple] = set()

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def next(self) -> _Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def parse(self) -> TripleGraph:
        while self.peek().kind != "EOF":
            if self.peek().kind == "PREFIX_KW":
                self._prefix_declaration()
            else:
                self._statement()
        return TripleGraph(frozenset(self.triples), dict(self.prefixes))

    def _prefix_declaration(self) -> None:
        self.next()
        tok = self.next()
        if tok.kind == "PNAME_NS":
            name = tok.text[:-1]
        elif tok.kind == "PNAME":
            raise ParseError("prefix declaration must end with ':'", tok.line, tok.column)
        else:
            raise ParseError(f"expected prefix name, found {tok.text!r}", tok.line, tok.column)
        iri = self.expect("IRIREF", "IRI reference")
        self.expect("DOT", "'.'")
        self.prefixes[name] = iri.text[1:-1]

    def _statement(self) -> None:
        subject = self._term("subject", allow_literal=False)
        while True:
            predicate = self._predicate()
            while True:
                obj = self._term("object", allow_literal=True)
                self.triples.add(Triple(subject, predicate, obj))
                if self.peek().kind == "COMMA":
                    self.next()
                    continue
                break
            if self.peek().kind == "SEMI":
                self.next()
                continue
            break
        self.expect("DOT", "'.'")

    def _predicate(self) -> Iri:
        tok = self.next()
        if tok.kind == "A":
            return Iri(RDF_TYPE)
        if tok.kind == "IRIREF":
            return Iri(tok.text[1:-1])
        if tok.kind == "PNAME":
            return self._expand(tok)
        raise ParseError(f"expected predicate IRI, found {tok.text!r}", tok.line, tok.column)

    def _term(self, role: str, allow_literal: bool) -> Term:
        tok = self.next()
        if tok.kind == "IRIREF":
            return Iri(tok.text[1:-1])
        if tok.kind == "PNAME":
            return self._expand(tok)
        if tok.kind == "BLANK":
            return BlankNode(tok.text[2:])
        if allow_literal and tok.kind == "LITERAL":
            return Literal(_unescape(tok.text, tok.line, tok.column))
        if allow_literal and tok.kind == "NUMBER":
            return Literal(tok.text)
        raise ParseError(f"expected {role}, found {tok.text!r}", tok.line, tok.column)

    def _expand(self, tok: _Token) -> Iri:
        prefix, _, local = tok.text.partition(":")
        if prefix not in self.prefixes:
            raise UnresolvedPrefixError(
                f"undeclared prefix {prefix + ':'!r}", tok.line, tok.column
            )
        return Iri(self.prefixes[prefix] + local)


def parse_context(text: str) -> TripleGraph:
    """Parse context-model source into a graph; raises ParseError on bad input."""
    return _Parser(text).parse()


# --- serialization ---------------------------------------------------------

def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
    )


def _render(term: Term, prefixes: Mapping[str, str], predicate: bool = False) -> str:
    if isinstance(term, Iri):
        if predicate and term.value == RDF_TYPE:
            return "a"
        best: tuple[int, str] | None = None
        for name, base in prefixes.items():
            if term.value.startswith(base):
                local = term.value[len(base):]
                if _LOCAL_RE.fullmatch(local):
                    key = (len(base), name)
                    if best is None or key[0] > best[0] or (key[0] == best[0] and name < best[1]):
                        best = key
        if best is not None:
            name = best[1]
            return f"{name}:{term.value[len(prefixes[name]):]}"
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    if _NUMBER_RE.fullmatch(term.text):
        return term.text
    return f'"{_escape(term.text)}"'


def serialize(graph: TripleGraph) -> str:
    """Canonical text form: prefixes sorted by name, triples sorted by s/p/o."""
    lines = [f"@prefix {name}: <{iri}> ." for name, iri in sorted(graph.prefixes.items())]
    if lines and graph.triples:
        lines.append("")
    for triple in graph.sorted_triples():
        lines.append(
            f"{_render(triple.subject, graph.prefixes)} "
            f"{_render(triple.predicate, graph.prefixes, predicate=True)} "
            f"{_render(triple.object, graph.prefixes)} ."
        )
    return "\n".join(lines) + ("\n" if lines else "")


# --- queries and diffs -----------------------------------------------------

def _unify(pattern: Pattern, triple: Triple) -> dict[str, Term] | None:
    binding: dict[str, Term] = {}
    for slot, actual in zip(pattern, (triple.subject, triple.predicate, triple.object)):
        if isinstance(slot, Wildcard):
            bound = binding.get(slot.name)
            if bound is None:
                binding[slot.name] = actual
            elif bound != actual:
                return None
        elif slot != actual:
            return None
    return binding


def match_pattern(graph: TripleGraph, pattern: Pattern) -> list[dict[str, Term]]:
    """All wildcard assignments whose instantiation is in the graph.

    Results are sorted by the bound terms' expanded text, in the order the
    wildcards appear in the pattern.
    """
    names: list[str] = []
    for slot in pattern:
        if isinstance(slot, Wildcard) and slot.name not in names:
            names.append(slot.name)
    results = []
    for triple in graph.triples:
        binding = _unify(pattern, triple)
        if binding is not None:
            results.append(binding)
    results.sort(key=lambda b: tuple(term_sort_key(b[name]) for name in names))
    return results


def diff(old: TripleGraph, new: TripleGraph) -> list[ChangeEvent]:
    """Change events (deletes, then inserts) turning old into new."""
    events: list[ChangeEvent] = []
    sequence = 0
    for triple in sorted(old.triples - new.triples, key=triple_sort_key):
        events.append(ChangeEvent(DELETE, triple, sequence))
        sequence += 1
    for triple in sorted(new.triples - old.triples, key=triple_sort_key):
        events.append(ChangeEvent(INSERT, triple, sequence))
        sequence += 1
    return events


def apply_events(graph: TripleGraph, events: Iterable[ChangeEvent]) -> TripleGraph:
    """Apply change events in order; keeps the input graph's prefixes."""
    triples = set(graph.triples)
    for event in events:
        if event.kind == INSERT:
            triples.add(event.triple)
        elif event.kind == DELETE:
            triples.discard(event.triple)
        else:
            raise ValueError(f"unknown change event kind {event.kind!r}")
    return TripleGraph(frozenset(triples), dict(graph.prefixes))
