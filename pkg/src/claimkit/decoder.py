"""Beam search and claim-aware lookahead decoding.

Plain beam search ranks partial sequences by cumulative log-probability.
The claim-aware variant additionally rolls every candidate forward with
a greedy lookahead, scores the estimated completion against the
incorrect claim with a semantic-difference model, and folds that signal
into the beam score:

    combined = logprob + lambda * log(max(epsilon, d(completion, incorrect)))

With lambda = 0 (or horizon 0) the combination collapses to exact beam
search, so the plain-beam ablation is a configuration, not a separate
code path.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import CorrectionRecord, Prediction, VerificationRecord
from .lm import LanguageModel, LmError, greedy_rollout
from .semdiff import DiffScorer, SemdiffError, diff_score

logger = logging.getLogger(__name__)


class DecodeError(Exception):
    pass


@dataclass(frozen=True)
class DecodeConfig:
    beam_width: int = 4
    branch_k: int = 4
    lookahead_horizon: int = 0  # 0 disables lookahead -> plain beam
    lam: float = 0.0
    epsilon: float = 1e-6
    max_len: int = 64  # cap on generated tokens, prompt excluded
    lookahead_every: int = 1
    prompt_template: str = "evidence: {evidence} claim: {claim}"
    explanation_separator: str = "Explanation:"
    on_diff_error: str = "fail"  # or "degrade": fall back to lambda=0

    def __post_init__(self):
        if self.beam_width < 1 or self.branch_k < 1:
            raise DecodeError("beam_width and branch_k must be >= 1")
        if self.lookahead_horizon < 0 or self.lam < 0:
            raise DecodeError("lookahead_horizon and lambda must be >= 0")
        if not 0 < self.epsilon < 1:
            raise DecodeError("epsilon must be in (0, 1)")
        if self.lookahead_every < 1:
            raise DecodeError("lookahead_every must be >= 1")
        if self.on_diff_error not in ("fail", "degrade"):
            raise DecodeError("on_diff_error must be 'fail' or 'degrade'")

    @property
    def claim_aware(self) -> bool:
        return self.lam > 0 and self.lookahead_horizon >= 1

    def digest(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: tuple[int, ...]  # generated ids only, prompt excluded
    logprob: float
    finished: bool
    last_diff: float | None = None
    combined_score: float = 0.0

    def sort_key(self):
        return (-self.combined_score, -self.logprob, self.tokens)


@dataclass(frozen=True)
class CandidateTrace:
    tail: int
    tokens: tuple[int, ...]
    logprob: float
    diff: float | None
    combined_score: float
    kept: bool
    finished: bool


@dataclass
class DecodeTrace:
    steps: list[list[CandidateTrace]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            [
                [
                    {
                        "tail": c.tail,
                        "tokens": list(c.tokens),
                        "logprob": c.logprob,
                        "diff": c.diff,
                        "combined_score": c.combined_score,
                        "kept": c.kept,
                        "finished": c.finished,
                    }
                    for c in step
                ]
                for step in self.steps
            ],
            sort_keys=True,
        )


@dataclass
class DecodeResult:
    hypotheses: list[BeamHypothesis]  # ranked; may be unfinished if none completed
    trace: DecodeTrace

    @property
    def best(self) -> BeamHypothesis:
        return self.hypotheses[0]


def _top_k_tokens(logprobs: np.ndarray, k: int) -> list[int]:
    # Stable sort on negated values: ties resolve to the lowest token id.
    order = np.argsort(-logprobs, kind="stable")
    return [int(t) for t in order[:k]]


def _rollout(model: LanguageModel, prefix: list[int], cap: int) -> list[int]:
    """Greedy completion, delegated to the backend when it can do it server-side."""
    if prefix and prefix[-1] == model.vocab.eos_id:
        return prefix
    generate = getattr(model, "generate", None)
    if generate is not None:
        return generate(prefix, cap)
    return greedy_rollout(model, prefix, cap)


class _DiffEvaluator:
    """Wraps the scorer with the epsilon floor and the degrade-on-error policy."""

    def __init__(self, scorer: DiffScorer | None, incorrect_claim: str, config: DecodeConfig):
        self.scorer = scorer
        self.incorrect = incorrect_claim
        self.config = config
        self.degraded = False

    @property
    def active(self) -> bool:
        return self.config.claim_aware and not self.degraded and self.scorer is not None

    def penalty(self, text: str) -> tuple[float | None, float]:
        """Return (diff value, lambda * log(max(epsilon, diff)))."""
        if not self.active:
            return None, 0.0
        try:
            d = diff_score(self.scorer, text, self.incorrect).value if text.strip() else 0.0
        except SemdiffError:
            if self.config.on_diff_error == "fail":
                raise
            logger.warning("semdiff backend failed; degrading to plain beam (lambda=0)")
            self.degraded = True
            return None, 0.0
        return d, self.config.lam * math.log(max(self.config.epsilon, d))


def _decode(
    model: LanguageModel,
    prompt_ids: Sequence[int],
    config: DecodeConfig,
    diff_eval: _DiffEvaluator,
) -> DecodeResult:
    prompt = list(prompt_ids)
    eos = model.vocab.eos_id
    live = [BeamHypothesis(tokens=(), logprob=0.0, finished=False)]
    completed: list[BeamHypothesis] = []
    trace = DecodeTrace()

    for step in range(1, config.max_len + 1):
        if not live:
            break
        scoring_step = diff_eval.active and (step - 1) % config.lookahead_every == 0
        pool: list[BeamHypothesis] = []
        for hyp in live:
            logprobs = model.next_token_logprobs(prompt + list(hyp.tokens))
            for tok in _top_k_tokens(logprobs, config.branch_k):
                if logprobs[tok] == -math.inf:  # zero-probability continuation
                    continue
                pool.append(
                    BeamHypothesis(
                        tokens=hyp.tokens + (tok,),
                        logprob=hyp.logprob + float(logprobs[tok]),
                        finished=tok == eos,
                        last_diff=hyp.last_diff,
                        combined_score=0.0,
                    )
                )

        scored: list[BeamHypothesis] = []
        for cand in pool:
            if diff_eval.active and (scoring_step or cand.finished):
                cap = len(prompt) + min(
                    config.max_len, len(cand.tokens) + config.lookahead_horizon
                )
                rollout = _rollout(model, prompt + list(cand.tokens), cap)
                d, bonus = diff_eval.penalty(model.vocab.decode(rollout[len(prompt):]))
                cand = replace(cand, last_diff=d, combined_score=cand.logprob + bonus)
            elif diff_eval.active:
                # Off-step: carry the parent's last lookahead estimate.
                d = cand.last_diff if cand.last_diff is not None else 1.0
                bonus = config.lam * math.log(max(config.epsilon, d))
                cand = replace(cand, combined_score=cand.logprob + bonus)
            else:
                cand = replace(cand, combined_score=cand.logprob)
            scored.append(cand)

        scored.sort(key=BeamHypothesis.sort_key)
        next_live: list[BeamHypothesis] = []
        kept_ids: set[int] = set()
        for idx, cand in enumerate(scored):
            if cand.finished:
                completed.append(cand)
            elif len(next_live) < config.beam_width:
                next_live.append(cand)
                kept_ids.add(idx)
        trace.steps.append(
            [
                CandidateTrace(
                    tail=c.tokens[-1],
                    tokens=c.tokens,
                    logprob=c.logprob,
                    diff=c.last_diff,
                    combined_score=c.combined_score,
                    kept=i in kept_ids,
                    finished=c.finished,
                )
                for i, c in enumerate(scored)
            ]
        )
        live = next_live

    if completed:
        ranked = sorted(completed, key=BeamHypothesis.sort_key)[: config.beam_width]
    else:
        # Nothing finished within max_len: surface the best unfinished
        # hypotheses; finished=False is the caller-visible flag.
        ranked = sorted(live, key=BeamHypothesis.sort_key)[: config.beam_width]
    return DecodeResult(hypotheses=ranked, trace=trace)


def beam_search(
    model: LanguageModel, prompt: str | Sequence[int], config: DecodeConfig
) -> DecodeResult:
    """Standard beam search by cumulative logprob (no lookahead, no scorer)."""
    prompt_ids = model.vocab.encode(prompt) if isinstance(prompt, str) else prompt
    plain = replace(config, lam=0.0) if config.lam > 0 else config
    return _decode(model, prompt_ids, plain, _DiffEvaluator(None, "", plain))


def claim_aware_decode(
    model: LanguageModel,
    scorer: DiffScorer | None,
    evidence_text: str,
    incorrect_claim: str,
    config: DecodeConfig,
) -> DecodeResult:
    """Lookahead decoding steered away from the incorrect claim's meaning."""
    prompt = config.prompt_template.format(
        evidence=evidence_text, claim=incorrect_claim
    )
    prompt_ids = model.vocab.encode(prompt)
    return _decode(
        model, prompt_ids, config, _DiffEvaluator(scorer, incorrect_claim, config)
    )


def split_claim_explanation(text: str, separator: str) -> tuple[str, str | None]:
    """Split decoded text at the first separator occurrence; absent -> claim only."""
    idx = text.find(separator)
    if idx < 0:
        return text.strip(), None
    return text[:idx].strip(), text[idx + len(separator):].strip() or None


def correct_claim(
    model: LanguageModel,
    scorer: DiffScorer | None,
    record: VerificationRecord | CorrectionRecord,
    config: DecodeConfig,
    method: str,
) -> tuple[Prediction, DecodeTrace]:
    """Decode a corrected claim for one record and package it as a Prediction."""
    incorrect = (
        record.claim if isinstance(record, VerificationRecord) else record.incorrect_claim
    )
    try:
        result = claim_aware_decode(
            model, scorer, record.evidence_text, incorrect, config
        )
    except (DecodeError, SemdiffError, LmError) as exc:
        raise DecodeError(f"decode failed for record {record.id}: {exc}") from exc
    text = model.vocab.decode(result.best.tokens)
    claim, explanation = split_claim_explanation(text, config.explanation_separator)
    if not claim:
        claim = text.strip() or "<empty>"
    return (
        Prediction(
            record_id=record.id,
            method=method,
            predicted_claim=claim,
            predicted_explanation=explanation,
            decode_config_digest=config.digest(),
        ),
        result.trace,
    )
