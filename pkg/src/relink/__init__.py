"""relink: link natural-language relation phrases to knowledge-graph patterns."""

from .assemble import LinkConfig, Linker, LinkResult
from .classify import (
    MaskedSentence,
    PatternClassifier,
    TrainConfig,
    TrainingExample,
    harvest,
    mask,
    train,
)
from .explain import Explanation, ExplanationService, FixtureProvider
from .kg import KnowledgeGraph, Literal, Triple, load, type_dictionary
from .linking import (
    Lexicon,
    MetaElements,
    detect_elements,
    detect_relations,
    detect_types,
    direct_match,
    link_simple,
)
from .patterns import (
    MetaPattern,
    PatternEdge,
    SubgraphPattern,
    adjacent_instantiations,
    has_instance,
    instantiate,
    match_instances,
    shape_of,
)

__all__ = [
    "Explanation",
    "ExplanationService",
    "FixtureProvider",
    "KnowledgeGraph",
    "Lexicon",
    "LinkConfig",
    "LinkResult",
    "Linker",
    "Literal",
    "MaskedSentence",
    "MetaElements",
    "MetaPattern",
    "PatternClassifier",
    "PatternEdge",
    "SubgraphPattern",
    "TrainConfig",
    "TrainingExample",
    "Triple",
    "adjacent_instantiations",
    "detect_elements",
    "detect_relations",
    "detect_types",
    "direct_match",
    "harvest",
    "has_instance",
    "instantiate",
    "link_simple",
    "load",
    "mask",
    "match_instances",
    "shape_of",
    "train",
    "type_dictionary",
]

__version__ = "0.1.0"
