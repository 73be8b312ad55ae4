"""Recursive compound-phrase linking.

The pipeline for a phrase: a direct predicate hit short-circuits to a
single-edge pattern; otherwise the phrase's explanation sentence is
analyzed. Detected relation mentions are assembled under the classified
meta pattern, in sentence order first, then with the order swapped, then
through the remaining shapes, accepting the first candidate the graph
validates. Unlinked content n-grams that the explainer can define are
linked recursively and spliced back in as pseudo-relations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import text
from .classify import PatternClassifier, mask
from .explain import ExplanationService, normalize_phrase
from .kg import KnowledgeGraph
from .linking import (
    DEFAULT_THETA_REL,
    Lexicon,
    MetaElements,
    PseudoRelation,
    RelationHit,
    Span,
    Token,
    TypeHit,
    detect_elements,
    direct_match,
)
from .patterns import (
    MetaPattern,
    PatternEdge,
    SubgraphPattern,
    has_instance,
    instantiate,
)

log = logging.getLogger(__name__)

STRICT = "strict"
PERMISSIVE = "permissive"


@dataclass
class LinkConfig:
    max_recursion_depth: int = 3
    theta_rel: float = DEFAULT_THETA_REL
    tie_break: tuple[MetaPattern, ...] = (
        MetaPattern.RP2,
        MetaPattern.RP4,
        MetaPattern.RP3,
    )
    validation: str = STRICT
    data_driven_fallback: bool = True
    type_window: int = 3

    def __post_init__(self):
        if self.max_recursion_depth < 1:
            raise ValueError("max_recursion_depth must be >= 1")
        if self.validation not in (STRICT, PERMISSIVE):
            raise ValueError(f"unknown validation mode: {self.validation!r}")


@dataclass
class LinkResult:
    phrase: str
    pattern: Optional[SubgraphPattern]
    trace: list[dict]
    depth: int

    @property
    def matched(self) -> bool:
        return self.pattern is not None

    def to_json(self) -> dict:
        return {
            "phrase": self.phrase,
            "pattern": self.pattern.to_json() if self.pattern else None,
            "depth": self.depth,
            "trace": self.trace,
        }


def _span_gap(a: Span, b: Span) -> int:
    """Tokens strictly between two spans (0 when adjacent or overlapping)."""
    if a.start > b.start:
        a, b = b, a
    return max(0, b.start - a.end)


def _source_sink(sp: SubgraphPattern) -> Optional[tuple[str, str]]:
    """The unique source and sink variables, if the pattern has them."""
    outdeg: dict[str, int] = {}
    indeg: dict[str, int] = {}
    for e in sp.edges:
        outdeg[e.src] = outdeg.get(e.src, 0) + 1
        indeg.setdefault(e.src, indeg.get(e.src, 0))
        indeg[e.dst] = indeg.get(e.dst, 0) + 1
        outdeg.setdefault(e.dst, outdeg.get(e.dst, 0))
    sources = [v for v in sp.variables() if indeg.get(v, 0) == 0 and outdeg.get(v, 0) > 0]
    sinks = [v for v in sp.variables() if outdeg.get(v, 0) == 0 and indeg.get(v, 0) > 0]
    if len(sources) == 1 and len(sinks) == 1:
        return sources[0], sinks[0]
    return None


class Linker:
    """Binds the graph, explainer, lexicon, classifier, and config together."""

    def __init__(
        self,
        g: KnowledgeGraph,
        explainer: ExplanationService,
        lexicon: Lexicon,
        classifier: PatternClassifier,
        config: Optional[LinkConfig] = None,
    ):
        self.g = g
        self.explainer = explainer
        self.lexicon = lexicon
        self.classifier = classifier
        self.config = config or LinkConfig()
        self._stopwords = text.default_stopwords()

    # -- public entry -------------------------------------------------------

    def link(self, phrase: str) -> LinkResult:
        if not phrase or not phrase.strip():
            raise ValueError("phrase must be non-empty")
        trace: list[dict] = []
        state = _LinkState(trace=trace, active={normalize_phrase(phrase)})

        hit = direct_match(phrase, self.g, self.lexicon)
        if hit is not None and hit.category == "relation":
            pattern = instantiate(MetaPattern.RP1, [hit.iri])
            trace.append({"step": "direct-match", "relation": hit.iri})
            return LinkResult(phrase, pattern, trace, depth=0)

        explanation = self.explainer.explain(phrase)
        if explanation is None:
            trace.append({"step": "explanation-miss", "phrase": normalize_phrase(phrase)})
            return LinkResult(phrase, None, trace, depth=0)
        trace.append(
            {
                "step": "explanation",
                "phrase": explanation.phrase,
                "sentence": explanation.sentence,
                "source": explanation.source,
            }
        )
        tokens: list[Token] = list(text.tokenize(explanation.sentence))
        pattern = self._link_sentence(tokens, 1, state)
        return LinkResult(phrase, pattern, trace, depth=state.max_depth)

    # -- algorithm core -------------------------------------------------------

    def _link_sentence(
        self, tokens: list[Token], depth: int, state: "_LinkState"
    ) -> Optional[SubgraphPattern]:
        if depth > self.config.max_recursion_depth:
            state.trace.append({"step": "recursion-limit", "depth": depth})
            return None
        state.max_depth = max(state.max_depth, depth)

        elems = detect_elements(
            tokens, self.g, self.lexicon, self.config.theta_rel, self._stopwords
        )
        state.trace.append(_elements_step(tokens, elems, depth))

        substituted = self._resolve_nested(tokens, elems, depth, state)
        if substituted is not None:
            tokens, elems = substituted

        relations = list(elems.relations)
        if not relations:
            state.trace.append({"step": "no-match", "reason": "no relations detected"})
            return None

        if len(relations) == 1:
            return self._link_single(relations[0], elems.types, state)

        masked = mask(tokens, elems)
        mp, confidence = self.classifier.predict(masked)
        state.trace.append(
            {
                "step": "classified",
                "masked": list(masked.tokens),
                "meta_pattern": mp.value,
                "confidence": round(confidence, 6),
            }
        )
        if len(relations) == 2:
            return self._assemble_pair(relations[0], relations[1], elems.types, mp, state)
        return self._fold(relations, elems.types, mp, state)

    def _link_single(
        self,
        hit: RelationHit,
        types: Sequence[TypeHit],
        state: "_LinkState",
    ) -> Optional[SubgraphPattern]:
        if isinstance(hit.relation, PseudoRelation):
            # identity substitution: the nested pattern is the answer
            pattern = hit.relation.pattern
            if self._validate(pattern, state):
                state.trace.append(
                    {"step": "single-relation", "nested": hit.relation.phrase,
                     "pattern": pattern.to_json()}
                )
                return pattern
            return None
        pattern = instantiate(MetaPattern.RP1, [hit.relation])
        pattern = self._attach_types(pattern, [(hit, ("x", "y"))], types)
        if not self._validate(pattern, state):
            untyped = instantiate(MetaPattern.RP1, [hit.relation])
            if pattern.types and self._validate(untyped, state):
                state.trace.append({"step": "types-dropped", "pattern": untyped.to_json()})
                pattern = untyped
            else:
                return None
        state.trace.append({"step": "single-relation", "pattern": pattern.to_json()})
        return pattern

    def _resolve_nested(
        self,
        tokens: list[Token],
        elems: MetaElements,
        depth: int,
        state: "_LinkState",
    ) -> Optional[tuple[list[Token], MetaElements]]:
        """Recursively link unexplained n-grams; returns updated sentence or None."""
        changed = False
        while True:
            candidate = self._nested_candidate(tokens, elems, state)
            if candidate is None:
                break
            span, gram, explanation = candidate
            state.trace.append(
                {
                    "step": "nested-phrase",
                    "phrase": gram,
                    "sentence": explanation.sentence,
                    "depth": depth + 1,
                }
            )
            sub_tokens: list[Token] = list(text.tokenize(explanation.sentence))
            key = normalize_phrase(gram)
            state.active.add(key)
            try:
                sub_pattern = self._link_sentence(sub_tokens, depth + 1, state)
            finally:
                state.active.discard(key)
            if sub_pattern is None:
                state.trace.append({"step": "nested-unlinked", "phrase": gram})
                state.failed_nested.add(normalize_phrase(gram))
                continue
            pseudo = PseudoRelation(gram, sub_pattern)
            tokens = tokens[: span.start] + [pseudo] + tokens[span.end :]
            elems = detect_elements(
                tokens, self.g, self.lexicon, self.config.theta_rel, self._stopwords
            )
            state.trace.append(_elements_step(tokens, elems, depth, resubstituted=True))
            changed = True
        return (tokens, elems) if changed else None

    def _nested_candidate(
        self, tokens: list[Token], elems: MetaElements, state: "_LinkState"
    ):
        """Longest leftmost unlinked content n-gram the explainer can define."""
        blocked = [t.span for t in elems.types] + [r.span for r in elems.relations]
        for length in range(3, 0, -1):
            for start in range(0, len(tokens) - length + 1):
                span = Span(start, start + length)
                window = tokens[span.start : span.end]
                if any(isinstance(t, PseudoRelation) for t in window):
                    continue
                if any(span.overlaps(b) for b in blocked):
                    continue
                words = [str(t) for t in window]
                if words[0] in self._stopwords or words[-1] in self._stopwords:
                    continue
                gram = " ".join(words)
                key = normalize_phrase(gram)
                if key in state.active or key in state.failed_nested:
                    continue
                explanation = self.explainer.explain(gram)
                if explanation is not None:
                    return span, gram, explanation
        return None

    # -- assembly -------------------------------------------------------------

    def _candidate_plans(
        self, mp: MetaPattern, first: RelationHit, second: RelationHit
    ) -> list[tuple[MetaPattern, tuple[RelationHit, RelationHit]]]:
        """Primary candidate, order swap for RP2, then remaining shapes.

        At most four plans: the RP2 orders count separately, RP3/RP4 are
        order-insensitive up to renaming.
        """
        ordered, swapped = (first, second), (second, first)
        plans = [(mp, ordered)]
        if mp is MetaPattern.RP2:
            plans.append((MetaPattern.RP2, swapped))
        if self.config.data_driven_fallback:
            for kind in self.config.tie_break:
                if kind is mp:
                    continue
                plans.append((kind, ordered))
                if kind is MetaPattern.RP2:
                    plans.append((MetaPattern.RP2, swapped))
        return plans

    def _assemble_pair(
        self,
        first: RelationHit,
        second: RelationHit,
        types: Sequence[TypeHit],
        mp: MetaPattern,
        state: "_LinkState",
    ) -> Optional[SubgraphPattern]:
        for kind, (a, b) in self._candidate_plans(mp, first, second):
            built = self._build_pattern(kind, (a, b), types)
            if built is None:
                state.trace.append(
                    {
                        "step": "candidate",
                        "meta_pattern": kind.value,
                        "order": [_hit_name(a), _hit_name(b)],
                        "accepted": False,
                        "reason": "unspliceable nested pattern",
                    }
                )
                continue
            pattern = built
            accepted = self._validate(pattern, state)
            state.trace.append(
                {
                    "step": "candidate",
                    "meta_pattern": kind.value,
                    "order": [_hit_name(a), _hit_name(b)],
                    "pattern": pattern.to_json(),
                    "accepted": accepted,
                    "reason": None if accepted else "no instance in graph",
                }
            )
            if accepted:
                return pattern
        state.trace.append({"step": "no-match", "reason": "no candidate validated"})
        return None

    def _fold(
        self,
        relations: list[RelationHit],
        types: Sequence[TypeHit],
        mp: MetaPattern,
        state: "_LinkState",
    ) -> Optional[SubgraphPattern]:
        """Left-fold more than two relations into nested pseudo-relations."""
        remaining = list(relations)
        while len(remaining) > 1:
            first, second = remaining[0], remaining[1]
            sub = self._assemble_pair(first, second, types, mp, state)
            if sub is None:
                return None
            merged = Span(first.span.start, second.span.end)
            pseudo = RelationHit(merged, PseudoRelation("(fold)", sub), 1.0)
            state.trace.append(
                {"step": "fold", "pattern": sub.to_json(), "consumed": 2,
                 "remaining": len(remaining) - 1}
            )
            remaining = [pseudo] + remaining[2:]
        final = remaining[0].relation
        assert isinstance(final, PseudoRelation)
        return final.pattern

    def _build_pattern(
        self,
        kind: MetaPattern,
        pair: tuple[RelationHit, RelationHit],
        types: Sequence[TypeHit],
    ) -> Optional[SubgraphPattern]:
        """Instantiate a shape over the pair, splicing nested patterns in."""
        template = instantiate(kind, ["r0", "r1"])
        edges: list[PatternEdge] = []
        merged_types: dict[str, str] = {}
        endpoints: list[tuple[str, str]] = []
        fresh = _FreshVars()

        for template_edge, hit in zip(template.edges, pair):
            ref = hit.relation
            if isinstance(ref, PseudoRelation):
                spliced = self._splice(template_edge, ref, fresh)
                if spliced is None:
                    return None
                sub_edges, sub_types = spliced
                edges.extend(sub_edges)
                merged_types.update(sub_types)
            else:
                edges.append(PatternEdge(template_edge.src, ref, template_edge.dst))
            endpoints.append((template_edge.src, template_edge.dst))

        pattern = SubgraphPattern(tuple(edges), tuple(merged_types.items()))
        return self._attach_types(pattern, list(zip(pair, endpoints)), types)

    def _splice(
        self, slot: PatternEdge, pseudo: PseudoRelation, fresh: "_FreshVars"
    ) -> Optional[tuple[list[PatternEdge], dict[str, str]]]:
        ends = _source_sink(pseudo.pattern)
        if ends is None:
            return None
        source, sink = ends
        mapping = {source: slot.src, sink: slot.dst}
        for var in pseudo.pattern.variables():
            if var not in mapping:
                mapping[var] = fresh.next()
        renamed = pseudo.pattern.rename(mapping)
        return list(renamed.edges), renamed.type_map()

    def _attach_types(
        self,
        pattern: SubgraphPattern,
        hit_endpoints: Sequence[tuple[RelationHit, tuple[str, str]]],
        types: Sequence[TypeHit],
    ) -> SubgraphPattern:
        """A type mention restricts the object variable of each relation
        mention within the configured token window."""
        merged = pattern.type_map()
        best_gap: dict[str, int] = {}
        for type_hit in types:
            for rel_hit, (_, obj_var) in hit_endpoints:
                gap = _span_gap(type_hit.span, rel_hit.span)
                if gap > self.config.type_window:
                    continue
                if obj_var not in merged or gap < best_gap.get(obj_var, 10**9):
                    merged[obj_var] = type_hit.type_iri
                    best_gap[obj_var] = gap
        return pattern.with_types(merged)

    def _validate(self, pattern: SubgraphPattern, state: "_LinkState") -> bool:
        if self.config.validation == PERMISSIVE:
            state.trace.append(
                {"step": "validation-waived", "pattern": pattern.to_json()}
            )
            return True
        unknown = [r for r in pattern.relations() if r not in self.g.predicate_set]
        if unknown:
            state.trace.append(
                {"step": "warning", "reason": f"unknown relations: {unknown}"}
            )
            return False
        return has_instance(self.g, pattern)


@dataclass
class _LinkState:
    trace: list[dict]
    active: set[str]
    failed_nested: set[str] = field(default_factory=set)
    max_depth: int = 0


class _FreshVars:
    def __init__(self):
        self._n = 0

    def next(self) -> str:
        self._n += 1
        return f"v{self._n}"


def _hit_name(hit: RelationHit) -> str:
    if isinstance(hit.relation, PseudoRelation):
        return f"nested:{hit.relation.phrase}"
    return hit.relation


def _elements_step(
    tokens: Sequence[Token], elems: MetaElements, depth: int, resubstituted: bool = False
) -> dict:
    return {
        "step": "elements",
        "depth": depth,
        "resubstituted": resubstituted,
        "tokens": [
            f"<{t.phrase}>" if isinstance(t, PseudoRelation) else str(t) for t in tokens
        ],
        "types": [
            {"span": [t.span.start, t.span.end], "type": t.type_iri} for t in elems.types
        ],
        "relations": [
            {
                "span": [r.span.start, r.span.end],
                "relation": _hit_name(r),
                "score": round(r.score, 6),
            }
            for r in elems.relations
        ],
    }


def link_data_driven(
    elems: MetaElements, g: KnowledgeGraph
) -> Optional[SubgraphPattern]:
    """Baseline assembly without meta-pattern guidance.

    Retrieves every two-triple subgraph covering the first two detected
    relations by enumerating all ordered triple pairs (no index pruning:
    the baseline's defining cost is its unguided search space), then
    returns the first instantiated shape in the fixed order RP2 as
    detected, RP2 swapped, RP3, RP4.
    """
    real = [h.relation for h in elems.relations if isinstance(h.relation, str)]
    if len(real) < 2:
        return None
    r1, r2 = real[0], real[1]

    all_triples = _sorted_triples(g)
    found: set[tuple[MetaPattern, tuple[str, str]]] = set()
    for t1 in all_triples:
        for t2 in all_triples:
            if t1.predicate == r1 and t2.predicate == r2:
                if t1.object == t2.subject:
                    found.add((MetaPattern.RP2, (r1, r2)))
                if t1.object == t2.object:
                    found.add((MetaPattern.RP3, (r1, r2)))
                if t1.subject == t2.subject:
                    found.add((MetaPattern.RP4, (r1, r2)))
            if t1.predicate == r2 and t2.predicate == r1:
                if t1.object == t2.subject:
                    found.add((MetaPattern.RP2, (r2, r1)))
    order = [
        (MetaPattern.RP2, (r1, r2)),
        (MetaPattern.RP2, (r2, r1)),
        (MetaPattern.RP3, (r1, r2)),
        (MetaPattern.RP4, (r1, r2)),
    ]
    for kind, rels in order:
        if (kind, rels) in found:
            return instantiate(kind, list(rels))
    return None


def _sorted_triples(g: KnowledgeGraph):
    cached = g._label_cache.get("sorted_triples")
    if cached is None:
        cached = tuple(sorted(g.triples, key=lambda t: t.sort_key()))
        g._label_cache["sorted_triples"] = cached
    return cached
