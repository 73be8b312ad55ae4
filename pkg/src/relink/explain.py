"""Phrase explanations from pluggable external-knowledge providers.

A phrase like "mother-in-law" is resolved to a short defining sentence.
Providers are consulted in priority order and the first answer wins.
The default provider reads a JSON fixture file so everything works
offline; an HTTP provider can be configured for live dictionary APIs.
Results are cached with per-phrase single-flight locking.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence, Union

log = logging.getLogger(__name__)


def normalize_phrase(phrase: str) -> str:
    """Lowercase and trim; internal hyphens are part of dictionary keys."""
    return " ".join(phrase.lower().split())


@dataclass(frozen=True)
class Explanation:
    phrase: str
    sentence: str
    source: str


class ExplanationProvider(Protocol):
    id: str

    def lookup(self, phrase: str) -> Optional[Explanation]: ...


class FixtureProvider:
    """Deterministic provider backed by a JSON map of phrase -> sentence."""

    def __init__(self, source: Union[str, Path, Mapping[str, str]], id: str = "fixture"):
        self.id = id
        if isinstance(source, (str, Path)):
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        else:
            raw = dict(source)
        self._entries = {
            normalize_phrase(k): str(v) for k, v in raw.items() if str(v).strip()
        }

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, phrase: str) -> Optional[Explanation]:
        sentence = self._entries.get(normalize_phrase(phrase))
        if sentence is None:
            return None
        return Explanation(normalize_phrase(phrase), sentence, self.id)


class HttpProvider:
    """Generic GET provider: URL template plus a dotted path into the JSON reply.

    Disabled unless explicitly constructed; replies are cached on disk so a
    phrase is fetched at most once per cache directory.
    """

    def __init__(
        self,
        url_template: str,
        json_path: str,
        id: str = "http",
        api_key_header: Optional[tuple[str, str]] = None,
        timeout: float = 5.0,
        cache_dir: Optional[Union[str, Path]] = None,
    ):
        self.id = id
        self.url_template = url_template
        self.json_path = json_path.split(".")
        self.api_key_header = api_key_header
        self.timeout = timeout
        self.cache_dir = Path(cache_dir) if cache_dir else None

    def _cache_file(self, phrase: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in phrase)
        return self.cache_dir / f"{safe}.json"

    def _extract(self, payload) -> Optional[str]:
        node = payload
        for step in self.json_path:
            if isinstance(node, list):
                try:
                    node = node[int(step)]
                except (ValueError, IndexError):
                    return None
            elif isinstance(node, dict):
                if step not in node:
                    return None
                node = node[step]
            else:
                return None
        return str(node) if isinstance(node, (str, int, float)) else None

    def lookup(self, phrase: str) -> Optional[Explanation]:
        from urllib.parse import quote
        from urllib.request import Request, urlopen

        phrase = normalize_phrase(phrase)
        cache_file = self._cache_file(phrase)
        if cache_file is not None and cache_file.exists():
            payload = json.loads(cache_file.read_text("utf-8"))
        else:
            url = self.url_template.format(phrase=quote(phrase))
            req = Request(url)
            if self.api_key_header:
                req.add_header(*self.api_key_header)
            with urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
            if cache_file is not None:
                cache_file.parent.mkdir(parents=True, exist_ok=True)
                cache_file.write_text(json.dumps(payload), "utf-8")
        sentence = self._extract(payload)
        if not sentence:
            return None
        return Explanation(phrase, sentence, self.id)


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    entries: int


class ExplanationService:
    """Front door for explanations: provider chain plus an in-memory cache.

    Lookups for the same phrase never run concurrently (single-flight);
    distinct phrases may. Provider failures are logged and skipped.
    """

    def __init__(self, providers: Sequence[ExplanationProvider]):
        self.providers = list(providers)
        self._cache: dict[str, Explanation] = {}
        self._hits = 0
        self._misses = 0
        self._stats_lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self._key_locks_guard = threading.Lock()

    def _lock_for(self, key: str) -> threading.Lock:
        with self._key_locks_guard:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._key_locks[key] = lock
            return lock

    def explain(self, phrase: str) -> Optional[Explanation]:
        if not phrase or not phrase.strip():
            raise ValueError("phrase must be non-empty")
        key = normalize_phrase(phrase)
        cached = self._cache.get(key)
        if cached is not None:
            with self._stats_lock:
                self._hits += 1
            return cached
        with self._lock_for(key):
            cached = self._cache.get(key)
            if cached is not None:
                with self._stats_lock:
                    self._hits += 1
                return cached
            with self._stats_lock:
                self._misses += 1
            for provider in self.providers:
                try:
                    result = provider.lookup(key)
                except Exception as exc:  # noqa: BLE001 - provider I/O must not abort linking
                    log.warning("explanation provider %s failed for %r: %s",
                                getattr(provider, "id", "?"), key, exc)
                    continue
                if result is not None:
                    self._cache[key] = result
                    return result
            return None

    def cache_stats(self) -> CacheStats:
        with self._stats_lock:
            return CacheStats(self._hits, self._misses, len(self._cache))
