"""Meta-element detection: type mentions and relation mentions in a sentence.

Types are matched greedily (longest span first) against the graph's type
dictionary. Relation mentions are candidate n-grams scored against the
predicate labels through a tiered scorer: a lexicon hit is worth 1.0,
otherwise a blend of token-set overlap and edit similarity. Nested
compound phrases are carried through the sentence as pseudo-relation
tokens that stand for an already-linked pattern.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from . import text
from .kg import KnowledgeGraph, RelationLabel, local_name, type_dictionary
from .patterns import SubgraphPattern

log = logging.getLogger(__name__)

DEFAULT_THETA_REL = 0.6
MAX_MENTION_TOKENS = 3

JACCARD_WEIGHT = 0.7
EDIT_WEIGHT = 0.3


@dataclass(frozen=True)
class PseudoRelation:
    """A nested phrase already linked to a pattern, standing in for a relation."""

    phrase: str
    pattern: SubgraphPattern

    @property
    def mask_name(self) -> str:
        return "-".join(text.tokenize(self.phrase)) or "nested"


RelationRef = Union[str, PseudoRelation]  # IRI or nested stand-in


def relation_mask_name(ref: RelationRef) -> str:
    if isinstance(ref, PseudoRelation):
        return ref.mask_name
    return local_name(ref)


Token = Union[str, PseudoRelation]  # sentence tokens after substitution


@dataclass(frozen=True)
class Span:
    start: int
    end: int  # exclusive

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class TypeHit:
    span: Span
    type_iri: str


@dataclass(frozen=True)
class RelationHit:
    span: Span
    relation: RelationRef
    score: float


@dataclass(frozen=True)
class MetaElements:
    """Detected node labels (types) and edge labels (relations), in sentence order."""

    types: tuple[TypeHit, ...]
    relations: tuple[RelationHit, ...]


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class Lexicon:
    """Surface token-sequences mapped to the predicates they may denote."""

    entries: Mapping[tuple[str, ...], frozenset[str]] = field(default_factory=dict)

    @classmethod
    def from_mapping(
        cls, raw: Mapping[str, Sequence[str]], g: Optional[KnowledgeGraph] = None
    ) -> "Lexicon":
        entries: dict[tuple[str, ...], frozenset[str]] = {}
        for surface, iris in raw.items():
            key = tuple(text.tokenize(surface))
            if not key:
                raise LexiconError(f"unusable lexicon surface: {surface!r}")
            if g is not None:
                unknown = [i for i in iris if i not in g.predicate_set]
                if unknown:
                    raise LexiconError(
                        f"lexicon entry {surface!r} targets unknown predicates: {unknown}"
                    )
            entries[key] = frozenset(iris)
        return cls(entries)

    @classmethod
    def load(
        cls, path: Union[str, Path], g: Optional[KnowledgeGraph] = None
    ) -> "Lexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh), g)

    def get(self, tokens: Sequence[str]) -> frozenset[str]:
        return self.entries.get(tuple(tokens), frozenset())

    @classmethod
    def empty(cls) -> "Lexicon":
        return cls({})


def _label_text(label: RelationLabel) -> str:
    return " ".join(label.tokens)


def mention_score(mention_tokens: Sequence[str], label: RelationLabel) -> float:
    """Similarity blend used below the lexicon tier."""
    jac = text.jaccard(mention_tokens, label.tokens)
    edit = text.edit_similarity(" ".join(mention_tokens), _label_text(label))
    return JACCARD_WEIGHT * jac + EDIT_WEIGHT * edit


def link_simple(
    phrase: str,
    g: KnowledgeGraph,
    lex: Lexicon,
    theta_rel: float = DEFAULT_THETA_REL,
) -> Optional[tuple[str, float]]:
    """Best-scoring predicate for a mention, or None below the threshold.

    A lexicon hit scores a flat 1.0 and dominates the similarity blend.
    Ties break on the lexically smallest IRI for reproducibility.
    """
    tokens = text.tokenize(phrase)
    if not tokens:
        return None
    labels = g.relation_labels()

    best: Optional[tuple[str, float]] = None
    lex_targets = lex.get(tokens)
    for iri, label in labels.items():
        score = mention_score(tokens, label)
        if iri in lex_targets:
            score = 1.0
        if score >= theta_rel and (best is None or score > best[1]):
            best = (iri, score)
    return best


def exact_match_relation(
    phrase: str, g: KnowledgeGraph, lex: Lexicon
) -> Optional[str]:
    """Exact-tier linking only: token-identical label or lexicon entry."""
    tokens = tuple(text.tokenize(phrase))
    if not tokens:
        return None
    lex_targets = lex.get(tokens)
    if lex_targets:
        return sorted(lex_targets)[0]
    for iri, label in g.relation_labels().items():
        if label.tokens == tokens:
            return iri
    return None


def detect_types(
    tokens: Sequence[Token],
    g: KnowledgeGraph,
    type_dict: Optional[Mapping[tuple[str, ...], str]] = None,
) -> list[TypeHit]:
    """Greedy longest-span-first matching against the type dictionary."""
    if type_dict is None:
        type_dict = type_dictionary(g)
    if not type_dict:
        return []
    max_len = max(len(k) for k in type_dict)
    hits: list[TypeHit] = []
    taken: list[Span] = []
    for length in range(min(max_len, len(tokens)), 0, -1):
        for start in range(0, len(tokens) - length + 1):
            span = Span(start, start + length)
            if any(span.overlaps(t) for t in taken):
                continue
            window = tokens[span.start : span.end]
            if any(isinstance(t, PseudoRelation) for t in window):
                continue
            key = tuple(str(t) for t in window)
            iri = type_dict.get(key)
            if iri is not None:
                hits.append(TypeHit(span, iri))
                taken.append(span)
    hits.sort(key=lambda h: h.span.start)
    return hits


def _candidate_spans(
    tokens: Sequence[Token], stopwords: frozenset[str], blocked: Sequence[Span]
) -> list[Span]:
    """N-gram spans (n <= 3) whose endpoints are content words."""
    spans = []
    for start in range(len(tokens)):
        if isinstance(tokens[start], PseudoRelation):
            continue
        if str(tokens[start]) in stopwords:
            continue
        for end in range(start + 1, min(start + MAX_MENTION_TOKENS, len(tokens)) + 1):
            span = Span(start, end)
            window = tokens[start:end]
            if any(isinstance(t, PseudoRelation) for t in window):
                break
            if str(tokens[end - 1]) in stopwords:
                continue
            if any(span.overlaps(b) for b in blocked):
                continue
            spans.append(span)
    return spans


def detect_relations(
    tokens: Sequence[Token],
    g: KnowledgeGraph,
    lex: Lexicon,
    theta_rel: float = DEFAULT_THETA_REL,
    stopwords: Optional[frozenset[str]] = None,
    type_spans: Sequence[Span] = (),
) -> list[RelationHit]:
    """Relation mentions in sentence order, non-overlapping.

    Pseudo-relation tokens are unconditional hits. Overlaps resolve by
    higher score, then longer span, then earlier position. The type
    predicate itself is never produced.
    """
    if stopwords is None:
        stopwords = text.default_stopwords()

    scored: list[RelationHit] = []
    for i, tok in enumerate(tokens):
        if isinstance(tok, PseudoRelation):
            scored.append(RelationHit(Span(i, i + 1), tok, 1.0))

    for span in _candidate_spans(tokens, stopwords, list(type_spans)):
        mention = " ".join(str(t) for t in tokens[span.start : span.end])
        hit = link_simple(mention, g, lex, theta_rel)
        if hit is None:
            continue
        iri, score = hit
        if iri == g.type_predicate:
            continue
        scored.append(RelationHit(span, iri, score))

    scored.sort(key=lambda h: (-h.score, -len(h.span), h.span.start))
    chosen: list[RelationHit] = []
    for hit in scored:
        if any(hit.span.overlaps(c.span) for c in chosen):
            continue
        chosen.append(hit)
    chosen.sort(key=lambda h: h.span.start)
    return chosen


def detect_elements(
    tokens: Sequence[Token],
    g: KnowledgeGraph,
    lex: Lexicon,
    theta_rel: float = DEFAULT_THETA_REL,
    stopwords: Optional[frozenset[str]] = None,
    type_dict: Optional[Mapping[tuple[str, ...], str]] = None,
) -> MetaElements:
    """Run type detection, then relation detection outside the type spans."""
    types = detect_types(tokens, g, type_dict)
    relations = detect_relations(
        tokens, g, lex, theta_rel, stopwords, [t.span for t in types]
    )
    return MetaElements(tuple(types), tuple(relations))


@dataclass(frozen=True)
class DirectHit:
    category: str  # "relation" | "type" | "entity"
    iri: str


def direct_match(
    phrase: str,
    g: KnowledgeGraph,
    lex: Lexicon,
    type_dict: Optional[Mapping[tuple[str, ...], str]] = None,
) -> Optional[DirectHit]:
    """Does the phrase name a relation, type, or entity of the graph outright?

    Only the exact tier applies for relations (no similarity fallback):
    a phrase is "simple" when it matches a predicate label verbatim or
    through the lexicon.
    """
    rel = exact_match_relation(phrase, g, lex)
    if rel is not None:
        return DirectHit("relation", rel)
    key = tuple(text.tokenize(phrase))
    if not key:
        return None
    if type_dict is None:
        type_dict = type_dictionary(g)
    if key in type_dict:
        return DirectHit("type", type_dict[key])
    entity = g.entity_labels().get(key)
    if entity is not None:
        return DirectHit("entity", entity)
    return None
