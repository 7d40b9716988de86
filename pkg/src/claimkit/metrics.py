"""Evaluation statistics: SARI, Pearson correlation, Fleiss' kappa,
human correction accuracy, and the no-alteration rate.

The SARI here is the set-based variant: n-grams are sets (multiplicity
ignored) and reference support is the fraction of references containing
the n-gram. The zero-denominator convention (both sides empty -> 1,
exactly one side empty -> 0) makes the identity case score exactly 100.
All functions are pure.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .data import Judgment

NGRAM_ORDERS = (1, 2, 3, 4)


class MetricError(Exception):
    """Degenerate metric input: empty lists, zero variance, bad tables."""


@dataclass(frozen=True)
class SariComponents:
    f_add: float
    f_keep: float
    p_del: float


@dataclass(frozen=True)
class SariBreakdown:
    per_n: dict[int, SariComponents]
    sari: float


def _ngram_set(tokens: Sequence[str], n: int) -> frozenset[tuple[str, ...]]:
    return frozenset(
        tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
    )


def _ratio(num: float, cand_side: float, target_side: float) -> float:
    # Zero-denominator rule: both sides empty -> vacuously perfect,
    # exactly one side empty -> failure.
    if cand_side == 0 and target_side == 0:
        return 1.0
    if cand_side == 0 or target_side == 0:
        return 0.0
    return num / cand_side


def _fmean(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def sari(
    source: Sequence[str],
    prediction: Sequence[str],
    references: Sequence[Sequence[str]],
) -> SariBreakdown:
    """Set-based SARI over n-gram orders 1..4.

    For each order, with S and P the source/prediction n-gram sets and
    rho(g) the fraction of references whose set contains g:

      add:  candidates P\\S, good ones have rho>0; recall over {rho>0}\\S
      keep: candidates S&P, weighted by rho; recall against total rho mass of S
      del:  candidates S\\P, weighted by 1-rho; precision only

    Each component applies the zero-denominator rule so that
    source == prediction == reference scores exactly 100.
    """
    if not references:
        raise MetricError("sari requires at least one reference")
    per_n: dict[int, SariComponents] = {}
    total = 0.0
    for n in NGRAM_ORDERS:
        s = _ngram_set(source, n)
        p = _ngram_set(prediction, n)
        ref_sets = [_ngram_set(ref, n) for ref in references]
        # Integer count divided once keeps rho exact at the 0 and 1
        # boundaries, where the zero-denominator rule switches.
        containing: dict[tuple[str, ...], int] = defaultdict(int)
        for rs in ref_sets:
            for g in rs:
                containing[g] += 1
        support = {g: c / len(ref_sets) for g, c in containing.items()}
        rho = lambda g: support.get(g, 0.0)

        # ADD
        a_cand = p - s
        a_good = {g for g in a_cand if rho(g) > 0}
        a_target = {g for g in support if rho(g) > 0} - s
        p_add = _ratio(len(a_good), len(a_cand), len(a_target))
        r_add = _ratio(len(a_good), len(a_target), len(a_cand))
        f_add = _fmean(p_add, r_add)

        # KEEP
        k_cand = s & p
        keep_mass = sum(rho(g) for g in k_cand)
        source_mass = sum(rho(g) for g in s)
        p_keep = _ratio(keep_mass, len(k_cand), source_mass)
        r_keep = _ratio(keep_mass, source_mass, len(k_cand))
        f_keep = _fmean(p_keep, r_keep)

        # DEL (precision only)
        d_cand = s - p
        del_mass = sum(1.0 - rho(g) for g in d_cand)
        deletable_mass = sum(1.0 - rho(g) for g in s)
        p_del = _ratio(del_mass, len(d_cand), deletable_mass)

        per_n[n] = SariComponents(f_add=f_add, f_keep=f_keep, p_del=p_del)
        total += (f_add + f_keep + p_del) / 3.0
    return SariBreakdown(per_n=per_n, sari=100.0 * total / len(NGRAM_ORDERS))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; raises on mismatched/short/constant input."""
    if len(x) != len(y):
        raise MetricError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise MetricError("pearson requires at least 2 points")
    mx = sum(x) / len(x)
    my = sum(y) / len(y)
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        raise MetricError("degenerate input: zero variance")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    # separate square roots: sxx * syy can under/overflow for extreme scales
    return sxy / (math.sqrt(sxx) * math.sqrt(syy))


def fleiss_kappa(table: Sequence[Sequence[int]], raters_per_item: int) -> float:
    """Fleiss' kappa from an items x categories count matrix."""
    if len(table) < 2:
        raise MetricError("fleiss_kappa requires at least 2 items")
    if raters_per_item < 2:
        raise MetricError("fleiss_kappa requires at least 2 raters per item")
    n_cat = len(table[0])
    for i, row in enumerate(table):
        if len(row) != n_cat:
            raise MetricError(f"ragged table at row {i}")
        if sum(row) != raters_per_item:
            raise MetricError(
                f"row {i} sums to {sum(row)}, expected {raters_per_item}"
            )
    n = raters_per_item
    n_items = len(table)
    p_cat = [sum(row[j] for row in table) / (n_items * n) for j in range(n_cat)]
    p_bar = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in table
    ) / n_items
    p_e = sum(p * p for p in p_cat)
    if p_e == 1.0:
        if p_bar == 1.0:
            return 1.0
        raise MetricError("expected agreement is 1 but observed is not")
    return (p_bar - p_e) / (1.0 - p_e)


def pairwise_percent_agreement(
    table: Sequence[Sequence[int]], raters_per_item: int
) -> float:
    """Mean fraction of agreeing rater pairs per item (chance-uncorrected)."""
    if not table:
        raise MetricError("empty table")
    if raters_per_item < 2:
        raise MetricError("pairwise agreement requires at least 2 raters per item")
    n = raters_per_item
    pairs = n * (n - 1) / 2
    total = 0.0
    for row in table:
        agree = sum(c * (c - 1) / 2 for c in row)
        total += agree / pairs
    return total / len(table)


@dataclass(frozen=True)
class AccuracySummary:
    mean: float
    std: float
    per_annotator: dict[str, float]


def correction_accuracy(
    judgments: Iterable[Judgment], method_blind_key: str
) -> AccuracySummary:
    """Percent of CORRECT labels per annotator for one method, then mean and
    sample std across annotators. CORRECT_BUT_UNRELATED counts as not correct."""
    per: dict[str, list[bool]] = defaultdict(list)
    seen: set[tuple[str, str]] = set()
    for j in judgments:
        if j.method_blind_key != method_blind_key:
            continue
        key = (j.record_id, j.annotator_id)
        if key in seen:
            raise MetricError(f"duplicate (record, annotator) pair {key}")
        seen.add(key)
        per[j.annotator_id].append(j.label == "CORRECT")
    if not per:
        raise MetricError(f"no judgments for method key {method_blind_key!r}")
    accs = {
        a: 100.0 * sum(labels) / len(labels) for a, labels in sorted(per.items())
    }
    values = list(accs.values())
    mean = sum(values) / len(values)
    if len(values) > 1:
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))
    else:
        std = 0.0
    return AccuracySummary(mean=mean, std=std, per_annotator=accs)


def no_alteration_rate(pairs: Sequence[tuple[str, str]]) -> float:
    """Fraction of (input_claim, output_claim) pairs left unchanged."""
    from .textnorm import claims_equal

    if not pairs:
        raise MetricError("no_alteration_rate requires a non-empty list")
    same = sum(1 for inp, out in pairs if claims_equal(inp, out))
    return same / len(pairs)


@dataclass
class MetricReport:
    """Aggregate metrics for one method; optional blocks are None when the
    corresponding inputs (verdicts, judgments) were not provided."""

    method: str
    n_examples: int
    sari_mean: float | None = None
    diff_mean: float | None = None
    gpt_accuracy: float | None = None
    gpt_excluded: int = 0
    correction_accuracy_mean: float | None = None
    correction_accuracy_std: float | None = None
    per_annotator: dict[str, float] | None = None
    agreement: float | None = None
    pairwise_agreement: float | None = None
    no_alteration: float | None = None
    correlations: dict[str, float] | None = None

    def as_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def judgment_count_table(
    judgments: Sequence[Judgment], method_blind_key: str, raters_per_item: int
) -> list[list[int]]:
    """Items x 3-category count matrix over records with full coverage."""
    from .data import JUDGMENT_LABELS

    by_record: dict[str, list[str]] = defaultdict(list)
    for j in judgments:
        if j.method_blind_key == method_blind_key:
            by_record[j.record_id].append(j.label)
    table = []
    for rid in sorted(by_record):
        labels = by_record[rid]
        if len(labels) != raters_per_item:
            continue
        table.append([labels.count(lab) for lab in JUDGMENT_LABELS])
    return table
