"""Command-line interface: ingest, link, collect-training, train, eval.

Paths default to the bundled fixture data so the tool works out of the
box; a JSON config file, RELINK_* environment variables, and flags
override them in that order. Exit codes: 0 success, 2 usage or config
error, 3 no match, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import classify, evaluate, kg
from .assemble import LinkConfig, Linker
from .classify import PatternClassifier, TrainConfig
from .explain import ExplanationService, FixtureProvider
from .linking import Lexicon

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_MATCH = 3
EXIT_DATA = 4

ENV_PREFIX = "RELINK_"


def data_path(name: str) -> Path:
    """Path of a bundled data file."""
    return Path(str(resources.files("relink.data").joinpath(name)))


@dataclass
class RunConfig:
    kg: str = ""
    lexicon: str = ""
    explanations: str = ""
    model: str = ""
    training: str = ""
    gold: str = ""
    prefixes: str = ""
    max_depth: int = 3
    validation: str = "strict"
    theta_rel: float = 0.6
    seed: int = 42
    output: str = "json"  # or "text"
    # optional live dictionary API (off unless a URL is configured)
    http_url: str = ""
    http_json_path: str = ""
    http_api_key_header: str = ""  # "Header-Name: value"
    http_timeout: float = 5.0
    http_cache_dir: str = ""

    def __post_init__(self):
        defaults = {
            "kg": data_path("family_geo.nt"),
            "lexicon": data_path("lexicon.json"),
            "explanations": data_path("explanations.json"),
            "training": data_path("training.jsonl"),
            "gold": data_path("gold.jsonl"),
            "prefixes": data_path("prefixes.json"),
        }
        for name, default in defaults.items():
            if not getattr(self, name):
                setattr(self, name, str(default))


def _apply_env(cfg: RunConfig) -> None:
    mapping = {
        "KG": ("kg", str),
        "LEXICON": ("lexicon", str),
        "EXPLANATIONS": ("explanations", str),
        "MODEL": ("model", str),
        "TRAINING": ("training", str),
        "GOLD": ("gold", str),
        "PREFIXES": ("prefixes", str),
        "MAX_DEPTH": ("max_depth", int),
        "VALIDATION": ("validation", str),
        "THETA_REL": ("theta_rel", float),
        "SEED": ("seed", int),
        "OUTPUT": ("output", str),
        "HTTP_URL": ("http_url", str),
        "HTTP_JSON_PATH": ("http_json_path", str),
        "HTTP_API_KEY_HEADER": ("http_api_key_header", str),
        "HTTP_TIMEOUT": ("http_timeout", float),
        "HTTP_CACHE_DIR": ("http_cache_dir", str),
    }
    for env_key, (attr, cast) in mapping.items():
        raw = os.environ.get(ENV_PREFIX + env_key)
        if raw:
            setattr(cfg, attr, cast(raw))


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        for key, value in raw.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key: {key!r}")
            setattr(cfg, key, value)
    _apply_env(cfg)
    for attr in ("kg", "lexicon", "explanations", "model", "max_depth",
                 "validation", "theta_rel", "seed", "output"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


class ConfigError(ValueError):
    pass


def _providers(cfg: RunConfig):
    providers = [FixtureProvider(cfg.explanations)]
    if cfg.http_url:
        from .explain import HttpProvider

        header = None
        if cfg.http_api_key_header:
            name, _, value = cfg.http_api_key_header.partition(":")
            header = (name.strip(), value.strip())
        providers.append(
            HttpProvider(
                cfg.http_url,
                cfg.http_json_path or "definition",
                api_key_header=header,
                timeout=cfg.http_timeout,
                cache_dir=cfg.http_cache_dir or None,
            )
        )
    return providers


def build_linker(cfg: RunConfig) -> Linker:
    for path_name in ("kg", "lexicon", "explanations"):
        path = getattr(cfg, path_name)
        if not Path(path).exists():
            raise ConfigError(f"{path_name} file not found: {path}")
    graph = kg.load(cfg.kg)
    try:
        lexicon = Lexicon.load(cfg.lexicon, graph)
    except Exception as exc:
        raise ConfigError(f"cannot load lexicon {cfg.lexicon}: {exc}") from exc
    explainer = ExplanationService(_providers(cfg))
    if cfg.model:
        if not Path(cfg.model).exists():
            raise ConfigError(f"model file not found: {cfg.model}")
        classifier = PatternClassifier.load(cfg.model)
    else:
        examples = classify.load_examples(cfg.training)
        classifier, _ = classify.train(examples, TrainConfig(seed=cfg.seed))
    link_config = LinkConfig(
        max_recursion_depth=cfg.max_depth,
        theta_rel=cfg.theta_rel,
        validation=cfg.validation,
    )
    return Linker(graph, explainer, lexicon, classifier, link_config)


# -- commands ------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    try:
        graph = kg.load(args.kg_path or cfg.kg)
    except kg.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    summary = {
        "triples": len(graph),
        "predicates": len(graph.predicate_set),
        "types": len(graph.type_set),
        "entities": len(graph.entity_set),
    }
    if cfg.output == "json":
        print(json.dumps(summary, sort_keys=True))
    else:
        for key in sorted(summary):
            print(f"{key}: {summary[key]}")
    return EXIT_OK


def cmd_link(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    linker = build_linker(cfg)
    result = linker.link(args.phrase)
    payload = result.to_json()
    if not args.trace:
        payload.pop("trace")
    if cfg.output == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        prefixes = {}
        if Path(cfg.prefixes).exists():
            prefixes = kg.load_prefixes(cfg.prefixes)
        if result.pattern is None:
            print(f"{result.phrase}: no match")
        else:
            print(f"{result.phrase}:")
            for e in result.pattern.edges:
                print(f"  {e.src} --{kg.shorten(e.rel, prefixes)}--> {e.dst}")
            for var, t in result.pattern.types:
                print(f"  {var}: {kg.shorten(t, prefixes)}")
        if args.trace:
            for step in result.trace:
                print(f"  # {json.dumps(step, sort_keys=True)}")
    return EXIT_OK if result.matched else EXIT_NO_MATCH


def cmd_collect(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    linker = build_linker(cfg)
    try:
        phrases = Path(args.phrases).read_text("utf-8").splitlines()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    result = classify.harvest(
        phrases, linker.g, linker.explainer, linker.lexicon,
        kappa=args.kappa, theta_rel=cfg.theta_rel,
    )
    classify.save_examples(result.examples, args.out)
    print(f"collected {len(result.examples)} examples -> {args.out}")
    for skip in result.skipped:
        print(f"skip {skip.phrase!r}: {skip.reason}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    try:
        examples = classify.load_examples(args.training or cfg.training)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.review:
        try:
            review = json.loads(Path(args.review).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        examples = classify.merge_review(examples, review)
    try:
        classifier, report = classify.train(examples, TrainConfig(seed=cfg.seed))
    except classify.TrainingDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    classifier.save(args.model_out)
    print(
        json.dumps(
            {
                "model": args.model_out,
                "examples": len(examples),
                "class_counts": report.class_counts,
                "train_accuracy": round(report.train_accuracy, 6),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    linker = build_linker(cfg)
    gold_path = args.gold or cfg.gold
    try:
        gold = evaluate.load_gold(gold_path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: cannot load gold file {gold_path}: {exc}", file=sys.stderr)
        return EXIT_DATA
    methods = args.methods.split(",") if args.methods else list(evaluate.METHODS)
    try:
        report = evaluate.evaluate(
            gold, methods, linker, timing=args.timing, timing_reps=args.timing_reps
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(report.render_text())
    if args.report_json:
        Path(args.report_json).write_text(
            json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n", "utf-8"
        )
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relink",
        description="Link relation phrases to knowledge-graph subgraph patterns",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--kg", help="knowledge-graph triples file")
    parser.add_argument("--lexicon", help="lexicon JSON file")
    parser.add_argument("--explanations", help="explanation fixture JSON file")
    parser.add_argument("--model", help="classifier model JSON file")
    parser.add_argument("--max-depth", dest="max_depth", type=int)
    parser.add_argument("--validation", choices=["strict", "permissive"])
    parser.add_argument("--theta-rel", dest="theta_rel", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output", choices=["json", "text"])
    parser.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate a knowledge graph")
    p.add_argument("kg_path", nargs="?", help="triples file (defaults to --kg)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("link", help="link a phrase to a subgraph pattern")
    p.add_argument("phrase")
    p.add_argument("--trace", action="store_true", help="include the step trace")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("collect-training", help="harvest training examples")
    p.add_argument("phrases", help="file with one phrase per line")
    p.add_argument("--kappa", type=int, default=500, help="example cap")
    p.add_argument("--out", required=True, help="output JSONL file")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train the meta-pattern classifier")
    p.add_argument("training", nargs="?", help="training JSONL (defaults to bundled)")
    p.add_argument("--review", help="accept/reject/relabel JSON file")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run the benchmark harness")
    p.add_argument("gold", nargs="?", help="gold JSONL (defaults to bundled)")
    p.add_argument("--methods", help="comma-separated subset of: " + ",".join(evaluate.METHODS))
    p.add_argument("--timing", action="store_true", help="measure per-phrase latency")
    p.add_argument("--timing-reps", type=int, default=20)
    p.add_argument("--report-json", help="write the machine-readable report here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except kg.ParseError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
