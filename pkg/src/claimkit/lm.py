"""Next-token-distribution interface with two backends.

The toy backend is a deterministic add-alpha n-gram model good enough to
exercise the decoder at desk scale. The remote backend speaks HTTP+JSON
to any server exposing POST /v1/logprobs (top-K logprobs plus a
renormalization remainder) and POST /v1/generate (server-side greedy
completion). Real seq2seq correction models plug in through the remote
protocol.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import httpx
import numpy as np

from .textnorm import tokenize

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"

LOGPROB_NORM_TOL = 1e-6


class LmError(Exception):
    pass


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    pad_id: int = 0
    bos_id: int = 1
    eos_id: int = 2

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise LmError("vocab tokens must be unique")
        for i in (self.pad_id, self.bos_id, self.eos_id):
            if not 0 <= i < len(self.tokens):
                raise LmError(f"special id {i} out of range")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, texts: Sequence[str]) -> "Vocab":
        words = sorted({tok for t in texts for tok in tokenize(t)})
        return cls(tokens=(PAD, BOS, EOS, *words))

    def encode(self, text: str) -> list[int]:
        index = {t: i for i, t in enumerate(self.tokens)}
        out = []
        for tok in tokenize(text):
            if tok not in index:
                raise LmError(f"token {tok!r} not in vocab")
            out.append(index[tok])
        return out

    def decode(self, ids: Sequence[int]) -> str:
        specials = {self.pad_id, self.bos_id, self.eos_id}
        return " ".join(self.tokens[i] for i in ids if i not in specials)


def check_normalized(logprobs: np.ndarray) -> np.ndarray:
    """Distributions must sum to 1; renormalize tiny drift, reject garbage."""
    lse = float(np.logaddexp.reduce(logprobs))
    if abs(lse) <= LOGPROB_NORM_TOL:
        return logprobs
    if not math.isfinite(lse):
        raise LmError("distribution has no probability mass")
    return logprobs - lse


class LanguageModel(Protocol):
    vocab: Vocab

    def next_token_logprobs(self, context: Sequence[int]) -> np.ndarray: ...


@dataclass
class NgramModel:
    """Add-alpha smoothed n-gram model over a fixed vocab.

    Contexts are the last order-1 token ids, left-padded with BOS.
    Training appends EOS to every sequence so the model can terminate.
    """

    vocab: Vocab
    order: int
    alpha: float = 1.0
    counts: dict[tuple[int, ...], dict[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.order < 1:
            raise LmError("order must be >= 1")
        if self.alpha <= 0:
            raise LmError("alpha must be > 0")

    def _context_key(self, context: Sequence[int]) -> tuple[int, ...]:
        k = self.order - 1
        if k == 0:
            return ()
        window = list(context)[-k:]
        pad = [self.vocab.bos_id] * (k - len(window))
        return tuple(pad + window)

    def observe(self, sequence: Sequence[int]) -> None:
        seq = list(sequence) + [self.vocab.eos_id]
        history: list[int] = []
        for tok in seq:
            ctx = self._context_key(history)
            bucket = self.counts.setdefault(ctx, {})
            bucket[tok] = bucket.get(tok, 0) + 1
            history.append(tok)

    @classmethod
    def train(
        cls, vocab: Vocab, texts: Sequence[str], order: int = 2, alpha: float = 1.0
    ) -> "NgramModel":
        model = cls(vocab=vocab, order=order, alpha=alpha)
        for text in texts:
            model.observe(vocab.encode(text))
        return model

    def next_token_logprobs(self, context: Sequence[int]) -> np.ndarray:
        v = len(self.vocab)
        for i in context:
            if not 0 <= i < v:
                raise LmError(f"token id {i} out of range")
        bucket = self.counts.get(self._context_key(context), {})
        total = sum(bucket.values()) + self.alpha * v
        probs = np.full(v, self.alpha / total)
        for tok, cnt in bucket.items():
            probs[tok] = (cnt + self.alpha) / total
        return check_normalized(np.log(probs))

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        obj = {
            "tokens": list(self.vocab.tokens),
            "order": self.order,
            "alpha": self.alpha,
            "counts": [
                [list(ctx), sorted(bucket.items())]
                for ctx, bucket in sorted(self.counts.items())
            ],
        }
        Path(path).write_text(json.dumps(obj), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NgramModel":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        model = cls(
            vocab=Vocab(tokens=tuple(obj["tokens"])),
            order=int(obj["order"]),
            alpha=float(obj["alpha"]),
        )
        for ctx, items in obj["counts"]:
            model.counts[tuple(ctx)] = {int(t): int(c) for t, c in items}
        return model


def sequence_logprob(
    model: LanguageModel, tokens: Sequence[int], allow_unfinished: bool = False
) -> float:
    """Sum of stepwise log-probabilities of tokens given their prefix."""
    if not tokens:
        return 0.0
    if tokens[-1] != model.vocab.eos_id and not allow_unfinished:
        raise LmError("sequence does not end with eos (pass allow_unfinished)")
    total = 0.0
    for i, tok in enumerate(tokens):
        total += float(model.next_token_logprobs(tokens[:i])[tok])
    return total


def greedy_rollout(
    model: LanguageModel, prefix: Sequence[int], max_len: int
) -> list[int]:
    """Extend prefix argmax-by-argmax until eos or max_len total tokens.

    Ties break toward the lowest token id (argmax returns the first max).
    """
    if max_len < len(prefix):
        raise LmError("max_len must be >= len(prefix)")
    out = list(prefix)
    if out and out[-1] == model.vocab.eos_id:
        return out
    while len(out) < max_len:
        logprobs = model.next_token_logprobs(out)
        tok = int(np.argmax(logprobs))
        out.append(tok)
        if tok == model.vocab.eos_id:
            break
    return out


class RemoteLm:
    """Client for a remote next-token service.

    POST {base}/v1/logprobs  {"context_ids": [...], "top_k": K}
        -> {"topk": [[id, logprob], ...], "rest_mass": float}
    POST {base}/v1/generate  {"context_ids": [...], "max_len": N}
        -> {"token_ids": [...]}

    The top-K response is expanded to a full-vocab distribution by
    spreading rest_mass uniformly over the uncovered ids. In-flight
    requests are bounded; each request carries a timeout.
    """

    def __init__(
        self,
        vocab: Vocab,
        base_url: str | None = None,
        top_k: int = 256,
        max_in_flight: int = 8,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.vocab = vocab
        base = base_url or os.environ.get("LM_BASE_URL")
        if not base:
            raise LmError("no base url: pass base_url or set LM_BASE_URL")
        self.top_k = top_k
        self._sem = threading.Semaphore(max_in_flight)
        self._client = httpx.Client(
            base_url=base.rstrip("/"), timeout=timeout, transport=transport
        )

    def _post(self, path: str, payload: dict) -> dict:
        with self._sem:
            try:
                resp = self._client.post(path, json=payload)
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise LmError(f"remote lm request failed: {exc}") from exc
        return resp.json()

    def next_token_logprobs(self, context: Sequence[int]) -> np.ndarray:
        data = self._post(
            "/v1/logprobs", {"context_ids": list(context), "top_k": self.top_k}
        )
        v = len(self.vocab)
        logprobs = np.full(v, -np.inf)
        covered = set()
        for tok, lp in data["topk"]:
            if not 0 <= int(tok) < v:
                raise LmError(f"server returned out-of-vocab id {tok}")
            logprobs[int(tok)] = float(lp)
            covered.add(int(tok))
        rest = float(data.get("rest_mass", 0.0))
        uncovered = v - len(covered)
        if rest > 0 and uncovered > 0:
            fill = math.log(rest / uncovered)
            for i in range(v):
                if i not in covered:
                    logprobs[i] = fill
        return check_normalized(logprobs)

    def generate(self, context: Sequence[int], max_len: int) -> list[int]:
        data = self._post(
            "/v1/generate", {"context_ids": list(context), "max_len": max_len}
        )
        return [int(t) for t in data["token_ids"]]

    def close(self) -> None:
        self._client.close()
