"""LLM-driven corruption of SUPPORTED verification records into correction records.

For every supported claim the chat model is asked for three labeled
fields (incorrect claim, explanation, augmented claim). Responses are
parsed strictly, validated against the correction-record invariants,
and retried with the violation quoted back; records that never comply
are skipped with a reason. Runs are resumable through a checkpoint file
keyed by record id, and resuming never re-requests completed records.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .chat import ChatClient, ChatError, GenPolicy
from .data import (
    SUPPORTED,
    CorrectionRecord,
    Provenance,
    VerificationRecord,
    correction_from_dict,
    to_dict,
    validate_correction_record,
)

logger = logging.getLogger(__name__)

PROMPT_VERSION = "corrupt_v1"

_FIELD_RE = re.compile(
    r"^(incorrect claim|explanation|augmented claim)\s*:\s*(.*)$", re.IGNORECASE
)


class DatagenError(Exception):
    pass


def load_prompt(version: str = PROMPT_VERSION) -> str:
    return (
        resources.files("claimkit.prompts").joinpath(f"{version}.txt").read_text()
    )


def parse_labeled_fields(text: str) -> dict[str, str]:
    """Strict labeled-line parse; continuation lines attach to the open field."""
    fields: dict[str, list[str]] = {}
    current: str | None = None
    for line in text.splitlines():
        m = _FIELD_RE.match(line.strip())
        if m:
            current = m.group(1).lower()
            fields[current] = [m.group(2).strip()]
        elif current and line.strip():
            fields[current].append(line.strip())
    return {k: " ".join(v).strip() for k, v in fields.items()}


@dataclass
class CorruptionResult:
    incorrect_claim: str
    explanation: str
    augmented_claim: str
    attempts: int


def _violations(rec: VerificationRecord, fields: dict[str, str]) -> list[str]:
    candidate = CorrectionRecord(
        id=rec.id,
        dataset=rec.dataset,
        evidence=rec.evidence,
        incorrect_claim=fields.get("incorrect claim", ""),
        correct_claim=rec.claim,
        explanation=fields.get("explanation", ""),
        augmented_claim=fields.get("augmented claim", ""),
        provenance=Provenance(model_name="", prompt_version=PROMPT_VERSION),
    )
    return validate_correction_record(candidate)


def corrupt_claim(
    client: ChatClient,
    record: VerificationRecord,
    policy: GenPolicy,
    prompt: str | None = None,
    two_call: bool = False,
) -> CorruptionResult:
    """Ask the LLM to corrupt one correct claim; retry until the fields validate."""
    base_prompt = prompt if prompt is not None else load_prompt()
    query = (
        f"Evidence: {record.evidence_text}\n"
        f"Correct Claim: {record.claim}\n"
    )
    messages = [
        {"role": "system", "content": base_prompt},
        {"role": "user", "content": query},
    ]
    if two_call:
        return _corrupt_two_call(client, record, policy, messages)
    last: list[str] = ["no attempt made"]
    for attempt in range(1, policy.max_attempts + 1):
        response = client.complete(messages)
        fields = parse_labeled_fields(response)
        problems = _violations(record, fields)
        if not problems:
            return CorruptionResult(
                incorrect_claim=fields["incorrect claim"],
                explanation=fields["explanation"],
                augmented_claim=fields["augmented claim"],
                attempts=attempt,
            )
        last = problems
        messages = messages + [
            {"role": "assistant", "content": response},
            {
                "role": "user",
                "content": (
                    "Your previous answer failed because: "
                    + "; ".join(problems)
                    + ". Answer again with the three labeled lines."
                ),
            },
        ]
    raise DatagenError("; ".join(last))


def _corrupt_two_call(client, record, policy, messages) -> CorruptionResult:
    """Variant for models that degrade with three fields: corruption+explanation
    first, augmented claim in a second call."""
    attempts = 0
    fields: dict[str, str] = {}
    for _ in range(policy.max_attempts):
        attempts += 1
        response = client.complete(messages)
        got = parse_labeled_fields(response)
        fields["incorrect claim"] = got.get("incorrect claim", "")
        fields["explanation"] = got.get("explanation", "")
        if not [v for v in _violations(record, fields) if "augmented" not in v]:
            break
    else:
        raise DatagenError("incorrect claim/explanation never validated")
    aug_messages = [
        messages[0],
        {
            "role": "user",
            "content": (
                f"Correct Claim: {record.claim}\n"
                "Respond with one line: 'Augmented Claim:' followed by a rewording "
                "of the correct claim with exactly the same meaning."
            ),
        },
    ]
    for _ in range(policy.max_attempts):
        attempts += 1
        got = parse_labeled_fields(client.complete(aug_messages))
        fields["augmented claim"] = got.get("augmented claim", "")
        if not _violations(record, fields):
            return CorruptionResult(
                incorrect_claim=fields["incorrect claim"],
                explanation=fields["explanation"],
                augmented_claim=fields["augmented claim"],
                attempts=attempts,
            )
    raise DatagenError("augmented claim never validated")


# --- checkpointed dataset build ----------------------------------------------


class Checkpoint:
    """Append-only JSONL of per-record outcomes, fsynced line by line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.done: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for lineno, line in enumerate(
                self.path.read_text(encoding="utf-8").splitlines(), start=1
            ):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    if entry["status"] not in ("ok", "skipped"):
                        raise ValueError(f"bad status {entry['status']!r}")
                    self.done[entry["id"]] = entry
                except (ValueError, KeyError, TypeError) as exc:
                    raise DatagenError(
                        f"corrupt checkpoint {self.path}:{lineno}: {exc}; "
                        "delete it or rerun with --force"
                    ) from exc

    def record(self, entry: dict) -> None:
        with self._lock:
            self.done[entry["id"]] = entry
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
                fh.flush()


@dataclass
class BuildOutcome:
    records: list[CorrectionRecord]
    skipped: list[tuple[str, str]]


def build_correction_dataset(
    verification: list[VerificationRecord],
    client: ChatClient,
    policy: GenPolicy,
    checkpoint: Checkpoint | None = None,
    parallel: int = 4,
    prompt: str | None = None,
    prompt_version: str = PROMPT_VERSION,
    two_call: bool = False,
) -> BuildOutcome:
    """Corrupt every SUPPORTED record; output order follows input order."""
    supported = [r for r in verification if r.label == SUPPORTED]

    def process(rec: VerificationRecord) -> dict:
        if checkpoint and rec.id in checkpoint.done:
            return checkpoint.done[rec.id]
        try:
            result = corrupt_claim(client, rec, policy, prompt=prompt, two_call=two_call)
            out = CorrectionRecord(
                id=rec.id,
                dataset=rec.dataset,
                evidence=rec.evidence,
                incorrect_claim=result.incorrect_claim,
                correct_claim=rec.claim,
                explanation=result.explanation,
                augmented_claim=result.augmented_claim,
                provenance=Provenance(
                    model_name=client.model,
                    prompt_version=prompt_version,
                    attempts=result.attempts,
                ),
            )
            entry = {"id": rec.id, "status": "ok", "record": to_dict(out)}
        except (DatagenError, ChatError) as exc:
            logger.warning("skipping %s: %s", rec.id, exc)
            entry = {"id": rec.id, "status": "skipped", "reason": str(exc)}
        if checkpoint:
            checkpoint.record(entry)
        return entry

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            entries = list(pool.map(process, supported))
    else:
        entries = [process(r) for r in supported]

    records, skipped = [], []
    for entry in entries:
        if entry["status"] == "ok":
            records.append(correction_from_dict(entry["record"]))
        else:
            skipped.append((entry["id"], entry["reason"]))
    return BuildOutcome(records=records, skipped=skipped)
