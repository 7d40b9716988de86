"""Persistence and assignment logic for the blind annotation protocol.

All state lives in one directory:

    tasks.jsonl       task pool written at ingest (blind: no method names)
    methods.json      method -> blind key mapping (admin eyes only)
    annotators.jsonl  append-only registrations
    judgments.jsonl   append-only judgment log, fsynced before every ack
    snapshot.json     periodic dump of the assignment state (audit aid)
    meta.json         coverage target k

On open the full judgment log is replayed; an acked judgment therefore
survives any crash. Leases are deliberately in-memory: after a restart
they are gone, which is the same outcome as letting them expire.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import string
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from ..data import (
    JUDGMENT_LABELS,
    Judgment,
    load_correction_dataset,
    load_predictions,
)
from ..metrics import (
    MetricError,
    correction_accuracy,
    fleiss_kappa,
    judgment_count_table,
    pairwise_percent_agreement,
)
from ..textnorm import claims_equal

DEFAULT_COVERAGE = 3
DEFAULT_LEASE_SECONDS = 30 * 60
SNAPSHOT_EVERY = 50


class AnnotError(Exception):
    pass


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    record_id: str
    method_blind_key: str
    evidence: tuple[str, ...]
    incorrect_claim: str
    correct_claim: str
    proposed_claim: str
    equals_correct: bool
    equals_incorrect: bool

    def client_view(self) -> dict:
        """What annotators see; record/method identifiers stay server-side."""
        return {
            "task_id": self.task_id,
            "evidence": list(self.evidence),
            "incorrect_claim": self.incorrect_claim,
            "correct_claim": self.correct_claim,
            "proposed_claim": self.proposed_claim,
            "flags": {
                "equals_correct": self.equals_correct,
                "equals_incorrect": self.equals_incorrect,
            },
        }


@dataclass
class Lease:
    task_id: str
    annotator_id: str
    expires_at: float


def _blind_key(rng: random.Random) -> str:
    alphabet = string.ascii_lowercase + string.digits
    return "".join(rng.choice(alphabet) for _ in range(8))


class AnnotStore:
    def __init__(
        self,
        data_dir: str | Path,
        lease_seconds: float = DEFAULT_LEASE_SECONDS,
        clock=time.time,
        seed: int | None = None,
    ):
        self.dir = Path(data_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.lease_seconds = lease_seconds
        self.clock = clock
        self.rng = random.Random(seed)
        self._lock = threading.RLock()

        self.tasks: dict[str, AnnotationTask] = {}
        self.methods: dict[str, str] = {}  # method name -> blind key
        self.annotators: dict[str, str] = {}  # annotator id -> name
        self.judgments: list[Judgment] = []
        self._judged: dict[tuple[str, str], Judgment] = {}  # (task_id, annotator)
        self._leases: dict[tuple[str, str], Lease] = {}
        self.k = DEFAULT_COVERAGE
        self._load()

    # -- paths -----------------------------------------------------------

    @property
    def _tasks_path(self) -> Path:
        return self.dir / "tasks.jsonl"

    @property
    def _methods_path(self) -> Path:
        return self.dir / "methods.json"

    @property
    def _annotators_path(self) -> Path:
        return self.dir / "annotators.jsonl"

    @property
    def _judgments_path(self) -> Path:
        return self.dir / "judgments.jsonl"

    @property
    def _meta_path(self) -> Path:
        return self.dir / "meta.json"

    def _task_key(self, task: AnnotationTask) -> tuple[str, str]:
        return (task.record_id, task.method_blind_key)

    # -- load / persist ----------------------------------------------------

    def _load(self) -> None:
        if self._meta_path.exists():
            self.k = json.loads(self._meta_path.read_text())["k"]
        if self._methods_path.exists():
            self.methods = json.loads(self._methods_path.read_text())
        if self._tasks_path.exists():
            for line in self._tasks_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    obj["evidence"] = tuple(obj["evidence"])
                    task = AnnotationTask(**obj)
                    self.tasks[task.task_id] = task
        if self._annotators_path.exists():
            for line in self._annotators_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self.annotators[obj["annotator_id"]] = obj["name"]
        if self._judgments_path.exists():
            for line in self._judgments_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    j = Judgment(
                        record_id=obj["record_id"],
                        method_blind_key=obj["method_blind_key"],
                        annotator_id=obj["annotator_id"],
                        label=obj["label"],
                        timestamp=int(obj["timestamp"]),
                    )
                    self._apply_judgment(obj["task_id"], j)

    def _apply_judgment(self, task_id: str, j: Judgment) -> None:
        self.judgments.append(j)
        self._judged[(task_id, j.annotator_id)] = j

    def _append_fsync(self, path: Path, obj: dict) -> None:
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _write_snapshot(self) -> None:
        state = {}
        for task in self.tasks.values():
            annos = sorted(
                j.annotator_id
                for (tid, _), j in self._judged.items()
                if tid == task.task_id
            )
            if annos:
                state[task.task_id] = annos
        snapshot = {"judgment_count": len(self.judgments), "completed": state, "k": self.k}
        (self.dir / "snapshot.json").write_text(json.dumps(snapshot, sort_keys=True))

    # -- ingest ------------------------------------------------------------

    def ingest(self, predictions_path: str | Path, dataset_path: str | Path, k: int) -> dict:
        """Build the blinded task pool from a predictions file and its dataset."""
        with self._lock:
            preds = load_predictions(predictions_path).records
            dataset = {r.id: r for r in load_correction_dataset(dataset_path).records}
            methods = sorted({p.method for p in preds})
            for method in methods:
                if method not in self.methods:
                    key = _blind_key(self.rng)
                    while key in self.methods.values():
                        key = _blind_key(self.rng)
                    self.methods[method] = key
            added = 0
            for pred in preds:
                rec = dataset.get(pred.record_id)
                if rec is None:
                    raise AnnotError(
                        f"prediction {pred.record_id!r} has no dataset record"
                    )
                blind = self.methods[pred.method]
                task_id = "t" + hashlib.sha1(
                    f"{pred.record_id}|{blind}".encode()
                ).hexdigest()[:10]
                if task_id in self.tasks:
                    continue
                self.tasks[task_id] = AnnotationTask(
                    task_id=task_id,
                    record_id=pred.record_id,
                    method_blind_key=blind,
                    evidence=rec.evidence,
                    incorrect_claim=rec.incorrect_claim,
                    correct_claim=rec.correct_claim,
                    proposed_claim=pred.predicted_claim,
                    equals_correct=claims_equal(pred.predicted_claim, rec.correct_claim),
                    equals_incorrect=claims_equal(pred.predicted_claim, rec.incorrect_claim),
                )
                added += 1
            self.k = k
            self._meta_path.write_text(json.dumps({"k": k}))
            self._methods_path.write_text(json.dumps(self.methods, sort_keys=True))
            with self._tasks_path.open("w", encoding="utf-8") as fh:
                for task in self.tasks.values():
                    flat = {
                        "task_id": task.task_id,
                        "record_id": task.record_id,
                        "method_blind_key": task.method_blind_key,
                        "evidence": list(task.evidence),
                        "incorrect_claim": task.incorrect_claim,
                        "correct_claim": task.correct_claim,
                        "proposed_claim": task.proposed_claim,
                        "equals_correct": task.equals_correct,
                        "equals_incorrect": task.equals_incorrect,
                    }
                    fh.write(json.dumps(flat, sort_keys=True) + "\n")
            return {"n_tasks": added, "n_methods": len(methods), "k": k}

    # -- annotator flow ------------------------------------------------------

    def register(self, name: str) -> str:
        if not name.strip():
            raise AnnotError("annotator name must be non-empty")
        with self._lock:
            for aid, existing in self.annotators.items():
                if existing == name:
                    return aid
            aid = "a" + hashlib.sha1(
                f"{name}|{len(self.annotators)}".encode()
            ).hexdigest()[:8]
            self.annotators[aid] = name
            self._append_fsync(self._annotators_path, {"annotator_id": aid, "name": name})
            return aid

    def _active_leases(self, now: float) -> list[Lease]:
        return [l for l in self._leases.values() if l.expires_at > now]

    def _coverage(self, task: AnnotationTask, active: list[Lease]) -> int:
        done = sum(1 for (tid, _) in self._judged if tid == task.task_id)
        leased = sum(1 for l in active if l.task_id == task.task_id)
        return done + leased

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        with self._lock:
            if annotator_id not in self.annotators:
                raise AnnotError(f"unknown annotator {annotator_id!r}")
            now = self.clock()
            self._leases = {
                key: l for key, l in self._leases.items() if l.expires_at > now
            }
            active = self._active_leases(now)
            eligible = []
            for task_id in sorted(self.tasks):
                task = self.tasks[task_id]
                if (task_id, annotator_id) in self._judged:
                    continue
                if (task_id, annotator_id) in self._leases:
                    continue
                if self._coverage(task, active) >= self.k:
                    continue
                eligible.append(task)
            if not eligible:
                return None
            task = self.rng.choice(eligible)
            self._leases[(task.task_id, annotator_id)] = Lease(
                task_id=task.task_id,
                annotator_id=annotator_id,
                expires_at=now + self.lease_seconds,
            )
            return task

    def submit_judgment(self, annotator_id: str, task_id: str, label: str) -> dict:
        with self._lock:
            if annotator_id not in self.annotators:
                raise AnnotError(f"unknown annotator {annotator_id!r}")
            task = self.tasks.get(task_id)
            if task is None:
                raise AnnotError(f"unknown task {task_id!r}")
            if label not in JUDGMENT_LABELS:
                raise AnnotError(f"label must be one of {JUDGMENT_LABELS}")
            existing = self._judged.get((task_id, annotator_id))
            if existing is not None:
                if existing.label == label:
                    return {"status": "ok", "duplicate": True}
                raise AnnotError(
                    f"conflicting resubmission: stored {existing.label}, got {label}"
                )
            lease = self._leases.get((task_id, annotator_id))
            now = self.clock()
            if lease is None or lease.expires_at <= now:
                self._leases.pop((task_id, annotator_id), None)
                raise AnnotError("lease expired; task returned to the pool")
            j = Judgment(
                record_id=task.record_id,
                method_blind_key=task.method_blind_key,
                annotator_id=annotator_id,
                label=label,
                timestamp=int(now),
            )
            # Durability before ack: the log line is fsynced, then state updates.
            self._append_fsync(
                self._judgments_path,
                {
                    "task_id": task_id,
                    "record_id": j.record_id,
                    "method_blind_key": j.method_blind_key,
                    "annotator_id": j.annotator_id,
                    "label": j.label,
                    "timestamp": j.timestamp,
                },
            )
            self._apply_judgment(task_id, j)
            del self._leases[(task_id, annotator_id)]
            if len(self.judgments) % SNAPSHOT_EVERY == 0:
                self._write_snapshot()
            return {"status": "ok", "duplicate": False}

    # -- reporting -------------------------------------------------------------

    def stats(self) -> dict:
        with self._lock:
            out: dict = {
                "total_judgments": len(self.judgments),
                "n_tasks": len(self.tasks),
                "coverage_target": self.k,
                "methods": {},
            }
            for blind in sorted(set(self.methods.values())):
                entry: dict = {
                    "n_judgments": sum(
                        1 for j in self.judgments if j.method_blind_key == blind
                    )
                }
                try:
                    acc = correction_accuracy(self.judgments, blind)
                    entry["correction_accuracy"] = {
                        "mean": acc.mean,
                        "std": acc.std,
                        "per_annotator": acc.per_annotator,
                    }
                except MetricError:
                    entry["correction_accuracy"] = None
                table = judgment_count_table(self.judgments, blind, self.k)
                entry["fleiss_kappa"] = None
                entry["pairwise_agreement"] = None
                if len(table) >= 2 and self.k >= 2:
                    try:
                        entry["fleiss_kappa"] = fleiss_kappa(table, self.k)
                    except MetricError:
                        pass
                    entry["pairwise_agreement"] = pairwise_percent_agreement(table, self.k)
                out["methods"][blind] = entry
            return out

    def unblind(self) -> dict:
        with self._lock:
            return {method: key for method, key in sorted(self.methods.items())}
