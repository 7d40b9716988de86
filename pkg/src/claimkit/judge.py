"""Automatic correction-accuracy estimation by few-shot chat prompting.

A binary judge: evidence (+ optional ground-truth fact) + claim in, a
single "Answer: True" or "Answer: False" line out. The few-shot prompt
is a versioned text file locked by a golden-file test; verdicts whose
responses never parse are excluded from the accuracy and counted.

Known bias, kept on purpose and surfaced in report output: an LLM judge
tends to overestimate LLM-generated corrections, so treat the accuracy
as an estimate, not ground truth.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .chat import ChatClient, GenPolicy

logger = logging.getLogger(__name__)

PROMPT_VERSION = "judge_v1"

_ANSWER_RE = re.compile(r"^Answer:\s*(True|False)\s*$", re.IGNORECASE | re.MULTILINE)

JUDGE_BIAS_NOTE = (
    "gpt_accuracy is an LLM-judge estimate; it tends to overestimate "
    "LLM-produced corrections and underestimate others"
)


class JudgeError(Exception):
    pass


@dataclass(frozen=True)
class JudgeVerdict:
    record_id: str
    verdict: bool | None  # None: response never parsed
    raw_response: str
    attempts: int

    @property
    def parseable(self) -> bool:
        return self.verdict is not None


def load_judge_prompt(version: str = PROMPT_VERSION) -> str:
    return (
        resources.files("claimkit.prompts").joinpath(f"{version}.txt").read_text()
    )


def render_judge_prompt(
    evidence: str,
    claim: str,
    fact: str | None = None,
    evidence_cap: int | None = None,
    version: str = PROMPT_VERSION,
) -> str:
    """Few-shot exemplars plus the query block, byte-stable for fixed inputs."""
    if evidence_cap is not None:
        evidence = evidence[:evidence_cap]
    return (
        load_judge_prompt(version)
        + "\n"
        + f"Evidence: {evidence}\n"
        + f"Fact: {fact if fact is not None else 'None'}\n"
        + f"Claim: {claim}\n"
        + "Answer:"
    )


def parse_verdict(response: str) -> bool | None:
    m = _ANSWER_RE.search(response)
    if not m:
        return None
    return m.group(1).lower() == "true"


def judge_one(
    client: ChatClient,
    record_id: str,
    evidence: str,
    claim: str,
    fact: str | None = None,
    policy: GenPolicy | None = None,
    evidence_cap: int | None = None,
) -> JudgeVerdict:
    """Judge one prediction; unparseable responses are retried, then excluded."""
    if not claim.strip():
        raise JudgeError(f"{record_id}: empty claim")
    policy = policy or client.policy
    prompt = render_judge_prompt(evidence, claim, fact, evidence_cap=evidence_cap)
    messages = [{"role": "user", "content": prompt}]
    response = ""
    for attempt in range(1, policy.max_attempts + 1):
        response = client.complete(messages, temperature=0.0)
        verdict = parse_verdict(response)
        if verdict is not None:
            return JudgeVerdict(
                record_id=record_id, verdict=verdict,
                raw_response=response, attempts=attempt,
            )
        messages = [
            {"role": "user", "content": prompt},
            {"role": "assistant", "content": response},
            {
                "role": "user",
                "content": "Respond with exactly 'Answer: True' or 'Answer: False'.",
            },
        ]
    logger.warning("%s: unparseable judge response after %d attempts", record_id, policy.max_attempts)
    return JudgeVerdict(
        record_id=record_id, verdict=None,
        raw_response=response, attempts=policy.max_attempts,
    )


@dataclass(frozen=True)
class GptAccuracy:
    percent: float
    n_true: int
    n_parseable: int
    n_excluded: int


def gpt_accuracy(verdicts: Sequence[JudgeVerdict]) -> GptAccuracy:
    parseable = [v for v in verdicts if v.parseable]
    excluded = len(verdicts) - len(parseable)
    if not parseable:
        raise JudgeError("no parseable verdicts")
    n_true = sum(1 for v in parseable if v.verdict)
    return GptAccuracy(
        percent=100.0 * n_true / len(parseable),
        n_true=n_true,
        n_parseable=len(parseable),
        n_excluded=excluded,
    )
