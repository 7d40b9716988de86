"""Semantic-difference scoring between two claims.

Scores live in [0,1]: 0 means identical meaning, 1 means different
meaning. Three backends: a lexical Jaccard + negation-cue baseline (the
desk-scale stand-in for a trained classifier), a table oracle for tests,
and a remote HTTP classifier. Whatever the backend returns, identical
input strings are clamped to exactly 0.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

import httpx

from .textnorm import tokenize


class SemdiffError(Exception):
    pass


@dataclass(frozen=True)
class DiffScore:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise SemdiffError(f"diff score {self.value} outside [0,1]")


class DiffScorer(Protocol):
    def score(self, claim_a: str, claim_b: str) -> float: ...


def diff_score(scorer: DiffScorer, claim_a: str, claim_b: str) -> DiffScore:
    """Backend call plus the identity clamp: d(x, x) == 0 exactly."""
    if not claim_a.strip() or not claim_b.strip():
        raise SemdiffError("claims must be non-empty")
    if claim_a == claim_b:
        return DiffScore(0.0)
    value = scorer.score(claim_a, claim_b)
    return DiffScore(min(1.0, max(0.0, float(value))))


def _load_stopwords() -> frozenset[str]:
    text = resources.files("claimkit.resources").joinpath("stopwords.txt").read_text()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = _load_stopwords()

NEGATION_CUES = ("not", "no", "never", "without", "fails")


def _has_negation(tokens: list[str]) -> bool:
    return any(t in NEGATION_CUES or t.endswith("n't") for t in tokens)


class LexicalScorer:
    """Jaccard distance over content tokens plus a crude negation bonus.

    d = clamp01(J + nu) with J the Jaccard distance of stopword-filtered
    token sets and nu = 0.5 when exactly one claim carries a negation cue.
    Deliberately non-semantic; it exists to put meaning-flip pressure on
    the decoder in tests, not to understand language.
    """

    def score(self, claim_a: str, claim_b: str) -> float:
        toks_a, toks_b = tokenize(claim_a), tokenize(claim_b)
        set_a = {t for t in toks_a if t not in STOPWORDS}
        set_b = {t for t in toks_b if t not in STOPWORDS}
        union = set_a | set_b
        jaccard = 1.0 - len(set_a & set_b) / len(union) if union else 0.0
        nu = 0.5 if _has_negation(toks_a) != _has_negation(toks_b) else 0.0
        return min(1.0, jaccard + nu)


class TableScorer:
    """Fixed (a, b) -> value lookup with symmetric keys; unmapped pairs raise."""

    def __init__(self, pairs: dict[tuple[str, str], float]):
        self._table: dict[frozenset[str], float] = {}
        for (a, b), v in pairs.items():
            if not 0.0 <= v <= 1.0:
                raise SemdiffError(f"table value {v} outside [0,1]")
            self._table[frozenset((a, b))] = v

    def score(self, claim_a: str, claim_b: str) -> float:
        key = frozenset((claim_a, claim_b))
        if key not in self._table:
            raise SemdiffError(f"pair not in table: ({claim_a!r}, {claim_b!r})")
        return self._table[key]


class RemoteScorer:
    """POST {base}/v1/diff {"a": ..., "b": ...} -> {"score": float}."""

    def __init__(
        self,
        base_url: str | None = None,
        max_in_flight: int = 8,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        base = base_url or os.environ.get("SEMDIFF_BASE_URL")
        if not base:
            raise SemdiffError("no base url: pass base_url or set SEMDIFF_BASE_URL")
        self._sem = threading.Semaphore(max_in_flight)
        self._client = httpx.Client(
            base_url=base.rstrip("/"), timeout=timeout, transport=transport
        )

    def score(self, claim_a: str, claim_b: str) -> float:
        with self._sem:
            try:
                resp = self._client.post("/v1/diff", json={"a": claim_a, "b": claim_b})
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise SemdiffError(f"remote diff request failed: {exc}") from exc
        return float(resp.json()["score"])

    def close(self) -> None:
        self._client.close()
