"""Shared text normalization and tokenization.

Every equality check and every token-level metric in the toolkit goes
through these two functions so that "the claims are the same" means one
thing everywhere.
"""

from __future__ import annotations

import re

_WS = re.compile(r"\s+")

# Punctuation stripped from token ends (not interior: "covid-19" survives).
_TOKEN_TERMINAL_PUNCT = ".,;:!?\"')(]["


def normalize_claim(text: str) -> str:
    """Canonical form used for claim-equality checks.

    Lowercase, collapse internal whitespace, strip at most one terminal
    '.', '?' or '!'. Deliberately conservative: catches trivial casing or
    punctuation escapes without merging genuinely different claims.
    """
    out = _WS.sub(" ", text.strip()).lower()
    if out and out[-1] in ".?!":
        out = out[:-1].rstrip()
    return out


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenizer with per-token terminal punctuation stripping.

    Tokens that are pure punctuation vanish. This is the single tokenizer
    shared by the SARI metric, the lexical difference baseline, and toy
    language-model vocabulary construction.
    """
    toks = []
    for raw in text.lower().split():
        tok = raw.strip(_TOKEN_TERMINAL_PUNCT)
        if tok:
            toks.append(tok)
    return toks


def claims_equal(a: str, b: str) -> bool:
    return normalize_claim(a) == normalize_claim(b)
