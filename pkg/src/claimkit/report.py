"""Per-method metric aggregation and report rendering.

Joins a correction dataset with predictions (plus optional judge
verdicts and human judgments) into one MetricReport per method, a
fixed-width text table (SARI / GPT / Diff columns), a tab-delimited
dump, and JSON. Correlations are Pearson r across examples between the
per-example human accuracy and each automatic metric.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass

from .data import CorrectionRecord, Judgment, Prediction
from .judge import JUDGE_BIAS_NOTE, JudgeError, JudgeVerdict, gpt_accuracy
from .metrics import (
    MetricError,
    MetricReport,
    correction_accuracy,
    fleiss_kappa,
    judgment_count_table,
    no_alteration_rate,
    pairwise_percent_agreement,
    pearson,
    sari,
)
from .semdiff import LexicalScorer, diff_score
from .textnorm import tokenize


@dataclass
class ReportBundle:
    reports: list[MetricReport]
    notes: list[str]

    def as_dict(self) -> dict:
        return {
            "methods": [r.as_dict() for r in self.reports],
            "notes": self.notes,
        }


def per_example_rows(
    dataset: dict[str, CorrectionRecord], predictions: list[Prediction]
) -> list[dict]:
    """Per-prediction SARI and lexical diff values, keyed by record and method."""
    scorer = LexicalScorer()
    rows = []
    for pred in predictions:
        rec = dataset.get(pred.record_id)
        if rec is None:
            continue
        breakdown = sari(
            tokenize(rec.incorrect_claim),
            tokenize(pred.predicted_claim),
            [tokenize(rec.correct_claim), tokenize(rec.augmented_claim)],
        )
        rows.append(
            {
                "record_id": pred.record_id,
                "method": pred.method,
                "sari": breakdown.sari,
                "diff": diff_score(scorer, pred.predicted_claim, rec.incorrect_claim).value,
            }
        )
    return rows


def build_reports(
    dataset: dict[str, CorrectionRecord],
    predictions: list[Prediction],
    verdicts: dict[str, list[JudgeVerdict]] | None = None,
    judgments: list[Judgment] | None = None,
    method_to_blind: dict[str, str] | None = None,
    coverage: int = 3,
) -> ReportBundle:
    notes = []
    rows = per_example_rows(dataset, predictions)
    by_method: dict[str, list[dict]] = defaultdict(list)
    for row in rows:
        by_method[row["method"]].append(row)

    reports = []
    for method in sorted(by_method):
        mrows = by_method[method]
        report = MetricReport(method=method, n_examples=len(mrows))
        report.sari_mean = sum(r["sari"] for r in mrows) / len(mrows)
        report.diff_mean = 100.0 * sum(r["diff"] for r in mrows) / len(mrows)
        preds = {p.record_id: p for p in predictions if p.method == method}
        pairs = [
            (dataset[rid].incorrect_claim, preds[rid].predicted_claim)
            for rid in preds
            if rid in dataset
        ]
        if pairs:
            report.no_alteration = no_alteration_rate(pairs)

        verdict_by_record: dict[str, JudgeVerdict] = {}
        if verdicts and method in verdicts:
            vs = verdicts[method]
            try:
                acc = gpt_accuracy(vs)
                report.gpt_accuracy = acc.percent
                report.gpt_excluded = acc.n_excluded
            except JudgeError as exc:
                notes.append(f"{method}: gpt accuracy unavailable ({exc})")
            verdict_by_record = {v.record_id: v for v in vs if v.parseable}
            if JUDGE_BIAS_NOTE not in notes:
                notes.append(JUDGE_BIAS_NOTE)

        human_by_record: dict[str, float] = {}
        if judgments and method_to_blind and method in method_to_blind:
            blind = method_to_blind[method]
            try:
                acc = correction_accuracy(judgments, blind)
                report.correction_accuracy_mean = acc.mean
                report.correction_accuracy_std = acc.std
                report.per_annotator = acc.per_annotator
            except MetricError as exc:
                notes.append(f"{method}: correction accuracy unavailable ({exc})")
            table = judgment_count_table(judgments, blind, coverage)
            if len(table) >= 2:
                try:
                    report.agreement = fleiss_kappa(table, coverage)
                except MetricError:
                    report.agreement = None
                report.pairwise_agreement = pairwise_percent_agreement(table, coverage)
            labels_by_record: dict[str, list[str]] = defaultdict(list)
            for j in judgments:
                if j.method_blind_key == blind:
                    labels_by_record[j.record_id].append(j.label)
            human_by_record = {
                rid: sum(1.0 for lab in labs if lab == "CORRECT") / len(labs)
                for rid, labs in labels_by_record.items()
            }

        if human_by_record:
            correlations = {}
            series = {
                "sari": {r["record_id"]: r["sari"] for r in mrows},
                "diff": {r["record_id"]: r["diff"] for r in mrows},
                "gpt": {
                    rid: (1.0 if v.verdict else 0.0)
                    for rid, v in verdict_by_record.items()
                },
            }
            for name, values in series.items():
                shared = sorted(set(values) & set(human_by_record))
                if len(shared) < 2:
                    continue
                try:
                    correlations[name] = pearson(
                        [human_by_record[rid] for rid in shared],
                        [values[rid] for rid in shared],
                    )
                except MetricError:
                    notes.append(f"{method}: correlation with {name} degenerate")
            if correlations:
                report.correlations = correlations
        reports.append(report)
    return ReportBundle(reports=reports, notes=notes)

def format_table(bundle: ReportBundle) -> str:
    """Fixed-width table with the SARI / GPT / Diff columns."""

    def fmt(v) -> str:
        return f"{v:8.2f}" if v is not None else f"{'-':>8}"

    width = max([len("Method"), *(len(r.method) for r in bundle.reports)]) + 2
    lines = [f"{'Method':<{width}}{'SARI':>8}{'GPT':>8}{'Diff':>8}{'HumanAcc':>10}"]
    lines.append("-" * (width + 34))
    for r in bundle.reports:
        human = (
            f"{r.correction_accuracy_mean:7.2f} " if r.correction_accuracy_mean is not None else f"{'-':>8} "
        )
        lines.append(
            f"{r.method:<{width}}{fmt(r.sari_mean)}{fmt(r.gpt_accuracy)}"
            f"{fmt(r.diff_mean)}{human:>10}"
        )
    return "\n".join(lines) + "\n"


def format_tsv(bundle: ReportBundle) -> str:
    cols = [
        "method", "n_examples", "sari_mean", "gpt_accuracy", "diff_mean",
        "correction_accuracy_mean", "correction_accuracy_std", "agreement",
        "pairwise_agreement", "no_alteration",
    ]
    lines = ["\t".join(cols)]
    for r in bundle.reports:
        d = r.as_dict()
        lines.append("\t".join("" if d[c] is None else str(d[c]) for c in cols))
    return "\n".join(lines) + "\n"


def to_json(bundle: ReportBundle) -> str:
    return json.dumps(bundle.as_dict(), indent=2, sort_keys=True)
