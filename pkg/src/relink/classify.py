"""Relation masking and meta-pattern classification.

Explanation sentences are masked by replacing each linked relation
mention with ``*<localname>`` before classification; the mask both marks
where relations sit and injects graph-specific vocabulary. A linear
bag-of-features model decides between the three two-edge shapes. Any
object with a compatible ``predict`` can replace the bundled model.

Training data comes from two sources: hand-labeled examples and the
harvester, which walks a phrase stream and keeps the phrases whose two
linked relations join in exactly one way in the graph.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import text
from .explain import ExplanationService
from .kg import KnowledgeGraph
from .linking import (
    DEFAULT_THETA_REL,
    Lexicon,
    MetaElements,
    PseudoRelation,
    Token,
    detect_elements,
    direct_match,
    relation_mask_name,
)
from .patterns import (
    MetaPattern,
    SubgraphPattern,
    adjacent_instantiations,
    shape_of,
)

log = logging.getLogger(__name__)

MODEL_FORMAT = "relink-linear/1"
CLASSES = (MetaPattern.RP2, MetaPattern.RP3, MetaPattern.RP4)
DEFAULT_TIE_BREAK = (MetaPattern.RP2, MetaPattern.RP4, MetaPattern.RP3)

MASK_PREFIX = "*"
GENERIC_MASK = "*REL"
_BETWEEN_MARKERS = ("of", "who", "from", "'s")


class FeaturizeError(ValueError):
    pass


class TrainingDataError(ValueError):
    pass


@dataclass(frozen=True)
class MaskedSentence:
    """Sentence tokens after relation masking; masks start with ``*``."""

    tokens: tuple[str, ...]
    relation_count: int

    def __str__(self) -> str:
        return " ".join(self.tokens)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "MaskedSentence":
        toks = tuple(tokens)
        return cls(toks, sum(1 for t in toks if t.startswith(MASK_PREFIX)))


def mask(tokens: Sequence[Token], elems: MetaElements) -> MaskedSentence:
    """Replace each relation mention span with ``*<localname>``.

    Type spans and plain words stay as lowercased tokens; a multi-token
    mention collapses to a single mask token.
    """
    n = len(tokens)
    span_starts = {}
    covered = set()
    for hit in elems.relations:
        if hit.span.start < 0 or hit.span.end > n:
            raise ValueError(f"relation span {hit.span} out of bounds for {n} tokens")
        span_starts[hit.span.start] = hit
        covered.update(range(hit.span.start, hit.span.end))

    out: list[str] = []
    i = 0
    while i < n:
        hit = span_starts.get(i)
        if hit is not None:
            out.append(MASK_PREFIX + relation_mask_name(hit.relation))
            i = hit.span.end
            continue
        if i in covered:  # interior of a span already emitted
            i += 1
            continue
        tok = tokens[i]
        out.append(str(tok).lower())
        i += 1
    return MaskedSentence(tuple(out), len(elems.relations))


def _is_mask(token: str) -> bool:
    return token.startswith(MASK_PREFIX)


def _token_features(tokens: Sequence[str]) -> dict[str, float]:
    feats: dict[str, float] = {}
    for tok in tokens:
        feats[f"uni={tok}"] = 1.0
        if _is_mask(tok):
            feats[f"uni={GENERIC_MASK}"] = 1.0
    general = [GENERIC_MASK if _is_mask(t) else t for t in tokens]
    for a, b in zip(general, general[1:]):
        feats[f"bi={a}|{b}"] = 1.0
    return feats


def featurize(ms: MaskedSentence) -> dict[str, float]:
    """Deterministic sparse features of a masked sentence.

    Besides token unigrams/bigrams, the window between the first two
    masks drives most of the signal: its tokens, marker words inside it,
    whether it is empty (adjacent masks), and its bucketed width.
    """
    if ms.relation_count < 2:
        raise FeaturizeError(
            f"need at least 2 masked relations, got {ms.relation_count}"
        )
    feats = _token_features(ms.tokens)

    mask_positions = [i for i, t in enumerate(ms.tokens) if _is_mask(t)]
    first, second = mask_positions[0], mask_positions[1]
    between = ms.tokens[first + 1 : second]
    for tok in between:
        feats[f"btw={tok}"] = 1.0
    for marker in _BETWEEN_MARKERS:
        if marker in between:
            feats[f"btw_has={marker}"] = 1.0
    if not between:
        feats["masks_adjacent"] = 1.0
    width = len(between)
    bucket = "0" if width == 0 else "1" if width == 1 else "2-3" if width <= 3 else "4+"
    feats[f"mask_dist={bucket}"] = 1.0
    return feats


def featurize_raw(tokens: Sequence[str]) -> dict[str, float]:
    """Unigram/bigram features of unmasked tokens (the ablation arm)."""
    return _token_features([t.lower() for t in tokens])


@dataclass(frozen=True)
class TrainingExample:
    phrase: str
    sentence: tuple[str, ...]  # raw tokens before masking
    masked: MaskedSentence
    label: MetaPattern
    pattern: SubgraphPattern
    origin: str = "manual"  # or "harvested"

    def __post_init__(self):
        if self.label not in CLASSES:
            raise ValueError(f"label must be one of {CLASSES}, got {self.label}")
        shape = shape_of(self.pattern)
        if shape is not self.label:
            raise ValueError(
                f"pattern shape {shape} does not match label {self.label}"
            )

    def to_json(self) -> dict:
        return {
            "phrase": self.phrase,
            "sentence": list(self.sentence),
            "masked": list(self.masked.tokens),
            "label": self.label.value,
            "pattern": self.pattern.to_json(),
            "origin": self.origin,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrainingExample":
        return cls(
            phrase=data["phrase"],
            sentence=tuple(data["sentence"]),
            masked=MaskedSentence.from_tokens(data["masked"]),
            label=MetaPattern(data["label"]),
            pattern=SubgraphPattern.from_json(data["pattern"]),
            origin=data.get("origin", "manual"),
        )


def save_examples(examples: Iterable[TrainingExample], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_json(), sort_keys=True) + "\n")


def load_examples(path: Union[str, Path]) -> list[TrainingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(TrainingExample.from_json(json.loads(line)))
    return out


def merge_review(
    examples: Sequence[TrainingExample], review: dict
) -> list[TrainingExample]:
    """Apply an accept/reject/relabel review file to harvested examples.

    Relabeling re-instantiates the pattern template under the new label,
    keeping the relation order, so the shape/label invariant holds.
    """
    from .patterns import instantiate

    out: list[TrainingExample] = []
    for ex in examples:
        verdict = review.get(ex.phrase, "accept")
        if verdict == "accept":
            out.append(ex)
        elif verdict == "reject":
            continue
        elif isinstance(verdict, dict) and "relabel" in verdict:
            label = MetaPattern(verdict["relabel"])
            pattern = instantiate(label, ex.pattern.relations())
            out.append(
                TrainingExample(
                    ex.phrase, ex.sentence, ex.masked, label, pattern, ex.origin
                )
            )
        else:
            raise ValueError(f"bad review verdict for {ex.phrase!r}: {verdict!r}")
    return out


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 42
    tie_break: tuple[MetaPattern, ...] = DEFAULT_TIE_BREAK


@dataclass
class TrainReport:
    class_counts: dict[str, int]
    train_accuracy: float


class PatternClassifier:
    """Multinomial linear model over sparse features."""

    def __init__(
        self,
        vocabulary: dict[str, int],
        weights: np.ndarray,
        bias: np.ndarray,
        classes: tuple[MetaPattern, ...] = CLASSES,
        tie_break: tuple[MetaPattern, ...] = DEFAULT_TIE_BREAK,
    ):
        self.vocabulary = vocabulary
        self.weights = weights  # shape (n_classes, n_features)
        self.bias = bias
        self.classes = classes
        self.tie_break = tie_break

    def _scores(self, feats: dict[str, float]) -> np.ndarray:
        z = self.bias.copy()
        for name, value in feats.items():
            idx = self.vocabulary.get(name)
            if idx is not None:
                z += value * self.weights[:, idx]
        return z

    def predict_features(self, feats: dict[str, float]) -> tuple[MetaPattern, float]:
        z = self._scores(feats)
        z = z - z.max()
        probs = np.exp(z)
        probs /= probs.sum()
        best = probs.max()
        # exact ties resolve through the configured class order
        tied = [c for c, p in zip(self.classes, probs) if p == best]
        for preferred in self.tie_break:
            if preferred in tied:
                return preferred, float(best)
        return tied[0], float(best)

    def predict(self, ms: MaskedSentence) -> tuple[MetaPattern, float]:
        return self.predict_features(featurize(ms))

    # -- persistence -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "classes": [c.value for c in self.classes],
            "tie_break": [c.value for c in self.tie_break],
            "vocabulary": self.vocabulary,
            "weights": [list(map(float, row)) for row in self.weights],
            "bias": [float(b) for b in self.bias],
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True), "utf-8")

    @classmethod
    def from_json(cls, data: dict) -> "PatternClassifier":
        if data.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format: {data.get('format')!r}")
        return cls(
            vocabulary={str(k): int(v) for k, v in data["vocabulary"].items()},
            weights=np.asarray(data["weights"], dtype=float),
            bias=np.asarray(data["bias"], dtype=float),
            classes=tuple(MetaPattern(c) for c in data["classes"]),
            tie_break=tuple(MetaPattern(c) for c in data["tie_break"]),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PatternClassifier":
        return cls.from_json(json.loads(Path(path).read_text("utf-8")))


def _fit(
    features: list[dict[str, float]],
    labels: list[MetaPattern],
    config: TrainConfig,
    classes: tuple[MetaPattern, ...] = CLASSES,
) -> tuple[PatternClassifier, TrainReport]:
    present = set(labels)
    missing = [c.value for c in classes if c not in present]
    if missing:
        raise TrainingDataError(f"missing training classes: {', '.join(missing)}")

    vocab: dict[str, int] = {}
    for feats in features:
        for name in feats:
            if name not in vocab:
                vocab[name] = len(vocab)
    vocab = {name: i for i, name in enumerate(sorted(vocab))}

    n, f, c = len(features), len(vocab), len(classes)
    x = np.zeros((n, f))
    for row, feats in enumerate(features):
        for name, value in feats.items():
            x[row, vocab[name]] = value
    class_index = {cls: i for i, cls in enumerate(classes)}
    y = np.zeros((n, c))
    for row, label in enumerate(labels):
        y[row, class_index[label]] = 1.0

    rng = np.random.default_rng(config.seed)
    w = rng.normal(0.0, 1e-3, size=(c, f))
    b = np.zeros(c)
    for _ in range(config.epochs):
        z = x @ w.T + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        grad = (p - y) / n
        w -= config.learning_rate * (grad.T @ x + config.l2 * w)
        b -= config.learning_rate * grad.sum(axis=0)

    clf = PatternClassifier(vocab, w, b, classes, config.tie_break)
    z = x @ w.T + b
    accuracy = float((z.argmax(axis=1) == y.argmax(axis=1)).mean())
    counts = {cls.value: labels.count(cls) for cls in classes}
    report = TrainReport(counts, accuracy)
    log.info("trained on %d examples, accuracy %.3f, counts %s", n, accuracy, counts)
    return clf, report


def train(
    examples: Sequence[TrainingExample],
    config: Optional[TrainConfig] = None,
) -> tuple[PatternClassifier, TrainReport]:
    """Fit the linear model on masked-sentence features."""
    if not examples:
        raise TrainingDataError("no training examples")
    config = config or TrainConfig()
    features = [featurize(ex.masked) for ex in examples]
    labels = [ex.label for ex in examples]
    return _fit(features, labels, config)


def train_raw(
    examples: Sequence[TrainingExample],
    config: Optional[TrainConfig] = None,
) -> tuple[PatternClassifier, TrainReport]:
    """Ablation arm: fit on raw (unmasked) sentence tokens."""
    if not examples:
        raise TrainingDataError("no training examples")
    config = config or TrainConfig()
    features = [featurize_raw(ex.sentence) for ex in examples]
    labels = [ex.label for ex in examples]
    return _fit(features, labels, config)


@dataclass(frozen=True)
class HarvestSkip:
    phrase: str
    reason: str


@dataclass
class HarvestResult:
    examples: list[TrainingExample]
    skipped: list[HarvestSkip]


def harvest(
    phrases: Iterable[str],
    g: KnowledgeGraph,
    explainer: ExplanationService,
    lexicon: Lexicon,
    kappa: int,
    theta_rel: float = DEFAULT_THETA_REL,
) -> HarvestResult:
    """Collect training examples from a phrase stream.

    A phrase contributes iff it does not name anything in the graph
    directly, its explanation links to exactly two relations, and that
    relation pair joins under exactly one two-edge shape. Processing is
    sequential so the kappa cutoff is deterministic.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    examples: list[TrainingExample] = []
    skipped: list[HarvestSkip] = []

    def skip(phrase: str, reason: str):
        skipped.append(HarvestSkip(phrase, reason))
        log.debug("harvest skip %r: %s", phrase, reason)

    for phrase in phrases:
        phrase = phrase.strip()
        if not phrase:
            continue
        if len(examples) >= kappa:
            break
        hit = direct_match(phrase, g, lexicon)
        if hit is not None:
            skip(phrase, f"direct {hit.category} match: {hit.iri}")
            continue
        explanation = explainer.explain(phrase)
        if explanation is None:
            skip(phrase, "no explanation")
            continue
        tokens = text.tokenize(explanation.sentence)
        elems = detect_elements(tokens, g, lexicon, theta_rel)
        relations = [
            h.relation for h in elems.relations if not isinstance(h.relation, PseudoRelation)
        ]
        if len(elems.relations) != 2 or len(relations) != 2:
            skip(phrase, f"{len(elems.relations)} relations detected, need exactly 2")
            continue
        uses = adjacent_instantiations(g, relations[0], relations[1])
        if len(uses) != 1:
            skip(
                phrase,
                "not adjacent in graph" if not uses else f"{len(uses)} shapes instantiable",
            )
            continue
        (use,) = uses
        examples.append(
            TrainingExample(
                phrase=phrase,
                sentence=tuple(tokens),
                masked=mask(tokens, elems),
                label=use.kind,
                pattern=use.pattern(),
                origin="harvested",
            )
        )
    return HarvestResult(examples, skipped)
