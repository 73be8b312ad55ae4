"""In-memory triple store with the indexes the linking pipeline queries.

The store ingests line-oriented triples (an N-Triples subset: IRIs in
angle brackets, plain literals in double quotes, terminating dot) and
builds subject/predicate/object indexes plus a type index keyed by a
configurable type predicate. Graphs are immutable once loaded and safe
to share across threads.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Union

log = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"


class ParseError(ValueError):
    """Raised for a malformed triple line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownPredicateError(KeyError):
    def __init__(self, predicate: str):
        super().__init__(predicate)
        self.predicate = predicate

    def __str__(self) -> str:
        return f"unknown predicate: {self.predicate}"


@dataclass(frozen=True)
class Literal:
    """An opaque literal value; may appear only in object position."""

    value: str

    def __str__(self) -> str:
        return self.value


Node = Union[str, Literal]  # IRIs are plain strings


def node_key(node: Node) -> tuple[int, str]:
    """Sort key giving IRIs before literals, each lexicographically."""
    if isinstance(node, Literal):
        return (1, node.value)
    return (0, node)


def local_name(iri: str) -> str:
    """Substring after the last '#' or '/'."""
    cut = max(iri.rfind("#"), iri.rfind("/"))
    return iri[cut + 1 :]


_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_SPLIT_RE = re.compile(r"[_\-]+|(?<=\D)(?=\d)|(?<=\d)(?=\D)")


def tokenize_name(name: str) -> tuple[str, ...]:
    """Split a local name on camelCase, '_', '-', and digit boundaries; lowercase."""
    parts = []
    for chunk in _SPLIT_RE.split(name):
        if not chunk:
            continue
        parts.extend(p for p in _CAMEL_RE.split(chunk) if p)
    return tuple(p.lower() for p in parts)


def valid_iri(iri: str) -> bool:
    return bool(iri) and not any(c.isspace() for c in iri) and bool(local_name(iri))


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: Node

    def sort_key(self):
        return (self.subject, self.predicate, node_key(self.object))


@dataclass(frozen=True)
class RelationLabel:
    """A predicate IRI with its tokenized local name."""

    relation: str
    tokens: tuple[str, ...]


_IRI_TERM = r"<([^<>\s]+)>"
_LIT_TERM = r'"([^"]*)"'
_LINE_RE = re.compile(
    rf"^\s*{_IRI_TERM}\s+{_IRI_TERM}\s+(?:{_IRI_TERM}|{_LIT_TERM})\s*\.\s*$"
)


def parse_line(line: str, line_no: int) -> Triple:
    m = _LINE_RE.match(line)
    if not m:
        raise ParseError(line_no, f"not a valid triple: {line.strip()!r}")
    subject, predicate, obj_iri, obj_lit = m.groups()
    if not valid_iri(subject):
        raise ParseError(line_no, f"invalid subject IRI: {subject!r}")
    if not valid_iri(predicate):
        raise ParseError(line_no, f"invalid predicate IRI: {predicate!r}")
    obj: Node
    if obj_iri is not None:
        if not valid_iri(obj_iri):
            raise ParseError(line_no, f"invalid object IRI: {obj_iri!r}")
        obj = obj_iri
    else:
        obj = Literal(obj_lit)
    return Triple(subject, predicate, obj)


def iter_triples(lines: Iterable[str]) -> Iterator[Triple]:
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield parse_line(line, line_no)


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable indexed triple set.

    Indexes cover every bound-position lookup the pipeline needs:
    ``sp`` for (s, p, ?), ``po`` for (?, p, o), ``p`` for (?, p, ?) and
    ``s`` for (s, ?, ?). ``type_index`` holds exactly the triples whose
    predicate equals ``type_predicate``.
    """

    triples: frozenset[Triple]
    type_predicate: str = RDF_TYPE
    _sp: dict = field(repr=False, default_factory=dict)
    _po: dict = field(repr=False, default_factory=dict)
    _p: dict = field(repr=False, default_factory=dict)
    _s: dict = field(repr=False, default_factory=dict)
    type_index: dict = field(repr=False, default_factory=dict)
    predicate_set: frozenset[str] = frozenset()
    type_set: frozenset[str] = frozenset()
    entity_set: frozenset[str] = frozenset()
    _label_cache: dict = field(repr=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.triples)

    # -- lookups ---------------------------------------------------------

    def objects(self, subject: str, predicate: str) -> frozenset[Node]:
        return self._sp.get((subject, predicate), frozenset())

    def subjects(self, predicate: str, obj: Node) -> frozenset[str]:
        return self._po.get((predicate, obj), frozenset())

    def by_predicate(self, predicate: str) -> tuple[tuple[str, Node], ...]:
        """All (subject, object) pairs of a predicate, in deterministic order."""
        return self._p.get(predicate, ())

    def by_subject(self, subject: str) -> tuple[Triple, ...]:
        return self._s.get(subject, ())

    def has_triple(self, subject: str, predicate: str, obj: Node) -> bool:
        return obj in self.objects(subject, predicate)

    def types_of(self, node: Node) -> frozenset[str]:
        return self.type_index.get(node, frozenset())

    def predicate_count(self, predicate: str) -> int:
        return len(self._p.get(predicate, ()))

    # -- derived dictionaries --------------------------------------------

    def relation_labels(self) -> dict[str, RelationLabel]:
        """Tokenized labels for every predicate except the type predicate."""
        cached = self._label_cache.get("relations")
        if cached is None:
            cached = {
                p: RelationLabel(p, tokenize_name(local_name(p)))
                for p in sorted(self.predicate_set)
                if p != self.type_predicate
            }
            self._label_cache["relations"] = cached
        return cached

    def entity_labels(self) -> dict[tuple[str, ...], str]:
        """Token-sequence index over entity local names (exact-match lookups)."""
        cached = self._label_cache.get("entities")
        if cached is None:
            cached = {}
            for entity in sorted(self.entity_set):
                key = tokenize_name(local_name(entity))
                if key and key not in cached:
                    cached[key] = entity
            self._label_cache["entities"] = cached
        return cached


def load(
    source: Union[str, Path, IO[str], Iterable[str]],
    type_predicate: str = RDF_TYPE,
) -> KnowledgeGraph:
    """Parse and index a triple stream; duplicates are dropped silently."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            triples = set(iter_triples(fh))
    else:
        triples = set(iter_triples(source))

    sp: dict[tuple[str, str], set[Node]] = {}
    po: dict[tuple[str, Node], set[str]] = {}
    p_idx: dict[str, list[tuple[str, Node]]] = {}
    s_idx: dict[str, list[Triple]] = {}
    type_index: dict[Node, set[str]] = {}
    predicates: set[str] = set()
    types: set[str] = set()
    entities: set[str] = set()

    for t in sorted(triples, key=Triple.sort_key):
        predicates.add(t.predicate)
        entities.add(t.subject)
        sp.setdefault((t.subject, t.predicate), set()).add(t.object)
        po.setdefault((t.predicate, t.object), set()).add(t.subject)
        p_idx.setdefault(t.predicate, []).append((t.subject, t.object))
        s_idx.setdefault(t.subject, []).append(t)
        if t.predicate == type_predicate:
            if isinstance(t.object, Literal):
                continue
            type_index.setdefault(t.subject, set()).add(t.object)
            types.add(t.object)
        elif not isinstance(t.object, Literal):
            entities.add(t.object)

    g = KnowledgeGraph(
        triples=frozenset(triples),
        type_predicate=type_predicate,
        _sp={k: frozenset(v) for k, v in sp.items()},
        _po={k: frozenset(v) for k, v in po.items()},
        _p={k: tuple(v) for k, v in p_idx.items()},
        _s={k: tuple(v) for k, v in s_idx.items()},
        type_index={k: frozenset(v) for k, v in type_index.items()},
        predicate_set=frozenset(predicates),
        type_set=frozenset(types),
        entity_set=frozenset(entities),
    )
    # pre-warm derived dictionaries: the graph is shared across threads
    # after load, so no lazy population should happen later
    g.relation_labels()
    g.entity_labels()
    type_dictionary(g)
    log.info(
        "loaded graph: %d triples, %d predicates, %d types, %d entities",
        len(g.triples), len(g.predicate_set), len(g.type_set), len(g.entity_set),
    )
    return g


def type_dictionary(g: KnowledgeGraph) -> dict[tuple[str, ...], str]:
    """Map tokenized type local names to type IRIs.

    When two type IRIs share a token key, the one with more instances in
    the graph wins and the loser is logged.
    """
    cached = g._label_cache.get("type_dict")
    if cached is not None:
        return cached
    instance_counts: dict[str, int] = {}
    for types in g.type_index.values():
        for t in types:
            instance_counts[t] = instance_counts.get(t, 0) + 1

    out: dict[tuple[str, ...], str] = {}
    for type_iri in sorted(g.type_set):
        key = tokenize_name(local_name(type_iri))
        if not key:
            continue
        if key in out:
            incumbent = out[key]
            if instance_counts.get(type_iri, 0) > instance_counts.get(incumbent, 0):
                log.info("type dictionary: %s displaces %s for key %s",
                         type_iri, incumbent, key)
                out[key] = type_iri
            else:
                log.info("type dictionary: discarding %s (key %s taken by %s)",
                         type_iri, key, incumbent)
        else:
            out[key] = type_iri
    g._label_cache["type_dict"] = out
    return out


def load_prefixes(path: Union[str, Path]) -> dict[str, str]:
    """Prefix table (prefix -> IRI base), used only for display."""
    import json

    with open(path, encoding="utf-8") as fh:
        table = json.load(fh)
    if not isinstance(table, dict):
        raise ValueError("prefix table must be a JSON object")
    return {str(k): str(v) for k, v in table.items()}


def shorten(iri: str, prefixes: Mapping[str, str]) -> str:
    for prefix, base in sorted(prefixes.items(), key=lambda kv: -len(kv[1])):
        if iri.startswith(base):
            return f"{prefix}:{iri[len(base):]}"
    return iri
