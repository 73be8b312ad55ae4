"""Meta patterns, subgraph patterns, and pattern matching against the graph.

Four structural templates cover everything the assembler produces
directly: a single edge (RP1), a two-edge chain (RP2), two edges
converging on a shared target (RP3), and two edges diverging from a
shared source (RP4). Matching is by homomorphism: distinct variables may
bind to the same node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from .kg import KnowledgeGraph, Literal, Node, UnknownPredicateError, node_key


class MetaPattern(enum.Enum):
    RP1 = "RP1"
    RP2 = "RP2"  # two-edge chain
    RP3 = "RP3"  # shared target
    RP4 = "RP4"  # shared source

    @property
    def edge_slots(self) -> int:
        return 1 if self is MetaPattern.RP1 else 2

    def __str__(self) -> str:
        return self.value


COMPLEX = "complex"


@dataclass(frozen=True)
class PatternEdge:
    src: str
    rel: str
    dst: str

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"edge endpoints must differ: {self.src}")


@dataclass(frozen=True)
class SubgraphPattern:
    """An ordered set of variable edges with optional type restrictions.

    ``types`` is stored as a sorted tuple of (variable, type IRI) pairs so
    the pattern stays hashable; use :meth:`type_map` for dict access.
    """

    edges: tuple[PatternEdge, ...]
    types: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.edges:
            raise ValueError("pattern needs at least one edge")
        object.__setattr__(self, "types", tuple(sorted(self.types)))
        variables = self.variables()
        for var, _ in self.types:
            if var not in variables:
                raise ValueError(f"type restriction on unused variable {var!r}")
        if not self._connected():
            raise ValueError("pattern edges must form a connected graph")

    @classmethod
    def make(
        cls,
        edges: Iterable[PatternEdge | tuple[str, str, str]],
        types: Optional[Mapping[str, str]] = None,
    ) -> "SubgraphPattern":
        norm = tuple(
            e if isinstance(e, PatternEdge) else PatternEdge(*e) for e in edges
        )
        return cls(norm, tuple((types or {}).items()))

    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for e in self.edges:
            seen.setdefault(e.src)
            seen.setdefault(e.dst)
        return tuple(seen)

    def type_map(self) -> dict[str, str]:
        return dict(self.types)

    def relations(self) -> tuple[str, ...]:
        return tuple(e.rel for e in self.edges)

    def _connected(self) -> bool:
        variables = set(self.variables())
        adjacency: dict[str, set[str]] = {v: set() for v in variables}
        for e in self.edges:
            adjacency[e.src].add(e.dst)
            adjacency[e.dst].add(e.src)
        stack = [next(iter(variables))]
        seen: set[str] = set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(adjacency[v] - seen)
        return seen == variables

    def with_types(self, types: Mapping[str, str]) -> "SubgraphPattern":
        return SubgraphPattern(self.edges, tuple(types.items()))

    def rename(self, mapping: Mapping[str, str]) -> "SubgraphPattern":
        edges = tuple(
            PatternEdge(mapping.get(e.src, e.src), e.rel, mapping.get(e.dst, e.dst))
            for e in self.edges
        )
        types = tuple((mapping.get(v, v), t) for v, t in self.types)
        return SubgraphPattern(edges, types)

    # -- serialization (the CLI output and golden-file format) ------------

    def to_json(self) -> dict:
        out: dict = {
            "edges": [{"src": e.src, "rel": e.rel, "dst": e.dst} for e in self.edges]
        }
        out["types"] = {v: t for v, t in self.types}
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "SubgraphPattern":
        edges = tuple(
            PatternEdge(e["src"], e["rel"], e["dst"]) for e in data["edges"]
        )
        return cls(edges, tuple(dict(data.get("types", {})).items()))


def instantiate(mp: MetaPattern, relations: Sequence[str]) -> SubgraphPattern:
    """Wire fresh variables x/z/y into the template of ``mp``.

    RP1: x-r1->y; RP2: x-r1->z, z-r2->y; RP3: x-r1->z, y-r2->z;
    RP4: z-r1->x, z-r2->y.
    """
    if len(relations) != mp.edge_slots:
        raise ValueError(
            f"{mp} takes {mp.edge_slots} relation(s), got {len(relations)}"
        )
    r = list(relations)
    if mp is MetaPattern.RP1:
        edges = [PatternEdge("x", r[0], "y")]
    elif mp is MetaPattern.RP2:
        edges = [PatternEdge("x", r[0], "z"), PatternEdge("z", r[1], "y")]
    elif mp is MetaPattern.RP3:
        edges = [PatternEdge("x", r[0], "z"), PatternEdge("y", r[1], "z")]
    else:
        edges = [PatternEdge("z", r[0], "x"), PatternEdge("z", r[1], "y")]
    return SubgraphPattern(tuple(edges))


def shape_of(sp: SubgraphPattern) -> MetaPattern | str:
    """Classify a pattern's variable-sharing topology; "complex" otherwise."""
    if len(sp.edges) == 1:
        return MetaPattern.RP1
    if len(sp.edges) != 2:
        return COMPLEX
    a, b = sp.edges
    shared = {a.src, a.dst} & {b.src, b.dst}
    if len(shared) != 1:
        return COMPLEX
    if a.dst == b.src or b.dst == a.src:
        return MetaPattern.RP2
    if a.dst == b.dst:
        return MetaPattern.RP3
    if a.src == b.src:
        return MetaPattern.RP4
    return COMPLEX


def _node_has_type(g: KnowledgeGraph, node: Node, type_iri: str) -> bool:
    return type_iri in g.types_of(node)


def _search(g: KnowledgeGraph, sp: SubgraphPattern):
    """Yield every homomorphism binding, seeding on the rarest relation."""
    types = sp.type_map()
    order = sorted(range(len(sp.edges)), key=lambda i: g.predicate_count(sp.edges[i].rel))

    def ok(var: str, node: Node) -> bool:
        t = types.get(var)
        return t is None or _node_has_type(g, node, t)

    def extend(pos: int, binding: dict[str, Node]):
        if pos == len(order):
            yield dict(binding)
            return
        edge = sp.edges[order[pos]]
        bs, bo = binding.get(edge.src), binding.get(edge.dst)
        if bs is not None and bo is not None:
            if not isinstance(bs, Literal) and g.has_triple(bs, edge.rel, bo):
                yield from extend(pos + 1, binding)
            return
        if bs is not None:
            if isinstance(bs, Literal):
                return
            candidates = [(bs, o) for o in g.objects(bs, edge.rel)]
        elif bo is not None:
            candidates = [(s, bo) for s in g.subjects(edge.rel, bo)]
        else:
            candidates = list(g.by_predicate(edge.rel))
        for s, o in sorted(candidates, key=lambda p: (node_key(p[0]), node_key(p[1]))):
            if not ok(edge.src, s) or not ok(edge.dst, o):
                continue
            binding[edge.src] = s
            binding[edge.dst] = o
            yield from extend(pos + 1, binding)
            if bs is None:
                binding.pop(edge.src, None)
            if bo is None:
                binding.pop(edge.dst, None)

    yield from extend(0, {})


def match_instances(
    g: KnowledgeGraph,
    sp: SubgraphPattern,
    limit: Optional[int] = None,
) -> list[dict[str, Node]]:
    """Up to ``limit`` homomorphisms from pattern variables to graph nodes.

    Results are sorted lexicographically by the assigned nodes (variables
    in sorted order), so the returned prefix is reproducible. Unknown
    relations yield no matches.
    """
    if limit is not None and limit <= 0:
        return []
    for rel in sp.relations():
        if rel not in g.predicate_set:
            return []

    variables = sorted(sp.variables())
    unique = {tuple(r[v] for v in variables): r for r in _search(g, sp)}
    ordered = [
        unique[k] for k in sorted(unique, key=lambda t: tuple(node_key(n) for n in t))
    ]
    if limit is not None:
        ordered = ordered[:limit]
    return ordered


def has_instance(g: KnowledgeGraph, sp: SubgraphPattern) -> bool:
    """True iff at least one homomorphism exists (early-exit search)."""
    if any(rel not in g.predicate_set for rel in sp.relations()):
        return False
    return next(_search(g, sp), None) is not None


class ShapeUse(NamedTuple):
    """One way a relation pair instantiates in the graph: a shape plus the
    relation order feeding its edge slots (order matters only for RP2)."""

    kind: MetaPattern
    relations: tuple[str, ...]

    def pattern(self) -> SubgraphPattern:
        return instantiate(self.kind, self.relations)


def adjacent_instantiations(
    g: KnowledgeGraph, r1: str, r2: str
) -> frozenset[ShapeUse]:
    """The two-edge shapes over (r1, r2) that have at least one instance.

    RP2 counts separately per relation order; RP3/RP4 are canonicalized
    to sorted relation order since their two slots are symmetric.
    """
    for r in (r1, r2):
        if r not in g.predicate_set:
            raise UnknownPredicateError(r)
    candidates: list[ShapeUse] = [
        ShapeUse(MetaPattern.RP2, (r1, r2)),
        ShapeUse(MetaPattern.RP2, (r2, r1)),
        ShapeUse(MetaPattern.RP3, tuple(sorted((r1, r2)))),
        ShapeUse(MetaPattern.RP4, tuple(sorted((r1, r2)))),
    ]
    found = {
        use for use in candidates if has_instance(g, use.pattern())
    }
    return frozenset(found)
