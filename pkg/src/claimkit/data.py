"""Canonical domain types, JSONL serialization, and dataset loading.

All pipeline stages exchange data as UTF-8 JSONL, one object per line,
field names matching the dataclass fields. Loading is tolerant of bad
lines (they are collected and reported, not fatal) but strict about
duplicate ids.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, TypeVar

from .textnorm import claims_equal

SUPPORTED = "SUPPORTED"
REFUTED = "REFUTED"
VERIFICATION_LABELS = (SUPPORTED, REFUTED)

JUDGMENT_LABELS = ("CORRECT", "INCORRECT_CLAIM", "CORRECT_BUT_UNRELATED")


class DataError(Exception):
    """Fatal dataset problem: unreadable file, duplicate ids, empty result."""


@dataclass(frozen=True)
class VerificationRecord:
    """Evidence + claim + SUPPORTED/REFUTED label from a claim-verification dataset."""

    id: str
    dataset: str
    evidence: tuple[str, ...]
    claim: str
    label: str

    def violations(self) -> list[str]:
        out = []
        if not self.id:
            out.append("empty id")
        if not self.evidence or any(not s.strip() for s in self.evidence):
            out.append("empty evidence")
        if not self.claim.strip():
            out.append("empty claim")
        if self.label not in VERIFICATION_LABELS:
            out.append(f"label not in {VERIFICATION_LABELS}")
        return out

    @property
    def evidence_text(self) -> str:
        return " ".join(self.evidence)


@dataclass(frozen=True)
class Provenance:
    model_name: str
    prompt_version: str
    attempts: int = 1


@dataclass(frozen=True)
class CorrectionRecord:
    """One generated correction example: evidence, wrong claim, right claim,
    explanation, and an alternate phrasing of the right claim."""

    id: str
    dataset: str
    evidence: tuple[str, ...]
    incorrect_claim: str
    correct_claim: str
    explanation: str
    augmented_claim: str
    provenance: Provenance

    @property
    def evidence_text(self) -> str:
        return " ".join(self.evidence)


def validate_correction_record(rec: CorrectionRecord) -> list[str]:
    """Return all invariant violations; empty list means the record is valid."""
    out = []
    if not rec.id:
        out.append("empty id")
    if not rec.evidence or any(not s.strip() for s in rec.evidence):
        out.append("empty evidence")
    if not rec.incorrect_claim.strip():
        out.append("empty incorrect claim")
    if not rec.correct_claim.strip():
        out.append("empty correct claim")
    elif claims_equal(rec.incorrect_claim, rec.correct_claim):
        out.append("incorrect equals correct")
    if not rec.explanation.strip():
        out.append("empty explanation")
    if not rec.augmented_claim.strip():
        out.append("empty augmented claim")
    elif claims_equal(rec.augmented_claim, rec.incorrect_claim):
        out.append("augmented equals incorrect")
    if rec.provenance.attempts < 1:
        out.append("attempts < 1")
    return out


@dataclass(frozen=True)
class Prediction:
    """A method's corrected claim for one record."""

    record_id: str
    method: str
    predicted_claim: str
    predicted_explanation: str | None
    decode_config_digest: str

    def violations(self) -> list[str]:
        out = []
        if not self.record_id:
            out.append("empty record_id")
        if not self.method:
            out.append("empty method")
        if not self.predicted_claim.strip():
            out.append("empty predicted claim")
        return out


@dataclass(frozen=True)
class Judgment:
    """One annotator's label for one (record, blinded method) prediction."""

    record_id: str
    method_blind_key: str
    annotator_id: str
    label: str
    timestamp: int

    def violations(self) -> list[str]:
        out = []
        if not self.record_id:
            out.append("empty record_id")
        if not self.method_blind_key:
            out.append("empty method_blind_key")
        if not self.annotator_id:
            out.append("empty annotator_id")
        if self.label not in JUDGMENT_LABELS:
            out.append(f"label not in {JUDGMENT_LABELS}")
        return out


# --- JSONL (de)serialization ------------------------------------------------

T = TypeVar("T")


def to_dict(rec: Any) -> dict:
    d = dataclasses.asdict(rec)
    for key, val in d.items():
        if isinstance(val, tuple):
            d[key] = list(val)
    return d


def _require(obj: dict, *fields: str) -> None:
    for f in fields:
        if f not in obj:
            raise ValueError(f"missing field {f}")


def verification_from_dict(obj: dict) -> VerificationRecord:
    _require(obj, "id", "dataset", "evidence", "claim", "label")
    return VerificationRecord(
        id=str(obj["id"]),
        dataset=str(obj["dataset"]),
        evidence=tuple(str(s) for s in obj["evidence"]),
        claim=str(obj["claim"]),
        label=str(obj["label"]),
    )


def correction_from_dict(obj: dict) -> CorrectionRecord:
    _require(
        obj, "id", "dataset", "evidence", "incorrect_claim", "correct_claim",
        "explanation", "augmented_claim", "provenance",
    )
    prov = obj["provenance"]
    _require(prov, "model_name", "prompt_version", "attempts")
    return CorrectionRecord(
        id=str(obj["id"]),
        dataset=str(obj["dataset"]),
        evidence=tuple(str(s) for s in obj["evidence"]),
        incorrect_claim=str(obj["incorrect_claim"]),
        correct_claim=str(obj["correct_claim"]),
        explanation=str(obj["explanation"]),
        augmented_claim=str(obj["augmented_claim"]),
        provenance=Provenance(
            model_name=str(prov["model_name"]),
            prompt_version=str(prov["prompt_version"]),
            attempts=int(prov["attempts"]),
        ),
    )


def prediction_from_dict(obj: dict) -> Prediction:
    _require(obj, "record_id", "method", "predicted_claim", "decode_config_digest")
    expl = obj.get("predicted_explanation")
    return Prediction(
        record_id=str(obj["record_id"]),
        method=str(obj["method"]),
        predicted_claim=str(obj["predicted_claim"]),
        predicted_explanation=None if expl is None else str(expl),
        decode_config_digest=str(obj["decode_config_digest"]),
    )


def judgment_from_dict(obj: dict) -> Judgment:
    _require(obj, "record_id", "method_blind_key", "annotator_id", "label", "timestamp")
    return Judgment(
        record_id=str(obj["record_id"]),
        method_blind_key=str(obj["method_blind_key"]),
        annotator_id=str(obj["annotator_id"]),
        label=str(obj["label"]),
        timestamp=int(obj["timestamp"]),
    )


@dataclass
class LoadResult:
    """Records that parsed and validated, plus (line_number, reason) rejects."""

    records: list
    rejects: list[tuple[int, str]] = field(default_factory=list)


def _load_jsonl(
    path: str | Path,
    parse: Callable[[dict], T],
    validate: Callable[[T], list[str]],
    unique_key: Callable[[T], Any] | None = None,
) -> LoadResult:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    records: list[T] = []
    rejects: list[tuple[int, str]] = []
    seen: dict[Any, int] = {}
    n_lines = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            n_lines += 1
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                rec = parse(obj)
            except (ValueError, TypeError, KeyError) as exc:
                rejects.append((lineno, str(exc)))
                continue
            problems = validate(rec)
            if problems:
                rejects.append((lineno, "; ".join(problems)))
                continue
            if unique_key is not None:
                key = unique_key(rec)
                if key in seen:
                    raise DataError(
                        f"{path}:{lineno}: duplicate id {key!r} (first seen line {seen[key]})"
                    )
                seen[key] = lineno
            records.append(rec)
    if n_lines > 0 and not records:
        raise DataError(f"{path}: all {n_lines} lines rejected: {rejects[:3]}...")
    return LoadResult(records=records, rejects=rejects)


def load_verification_dataset(path: str | Path) -> LoadResult:
    return _load_jsonl(
        path, verification_from_dict, lambda r: r.violations(), lambda r: r.id
    )


def load_correction_dataset(path: str | Path) -> LoadResult:
    return _load_jsonl(
        path, correction_from_dict, validate_correction_record, lambda r: r.id
    )


def load_predictions(path: str | Path) -> LoadResult:
    return _load_jsonl(
        path, prediction_from_dict, lambda r: r.violations(),
        lambda r: (r.record_id, r.method),
    )


def load_judgments(path: str | Path) -> LoadResult:
    return _load_jsonl(
        path, judgment_from_dict, lambda r: r.violations(),
        lambda r: (r.record_id, r.method_blind_key, r.annotator_id),
    )


def dump_jsonl_line(rec: Any) -> str:
    return json.dumps(to_dict(rec), ensure_ascii=False, sort_keys=True)


def save_jsonl(records: Iterable[Any], path: str | Path) -> None:
    """Write records atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(dump_jsonl_line(rec))
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def iter_jsonl_dicts(path: str | Path) -> Iterator[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
