"""Evaluation metrics: whole-word accuracy, summed character edit distance,
and morpheme-level F1, plus multi-seed aggregation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import MORPHEME_SEPARATOR, normalize_nfd
from .errors import EmptyResults, LengthMismatch


def _check_lengths(preds, golds):
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} references")


def whole_word_accuracy(preds, golds):
    """Fraction of words whose predicted segmentation matches gold exactly
    (after NFD normalization)."""
    _check_lengths(preds, golds)
    if not golds:
        return 0.0
    hits = sum(normalize_nfd(p) == normalize_nfd(g) for p, g in zip(preds, golds))
    return hits / len(golds)


def edit_distance(a, b):
    """Unit-cost Levenshtein distance over NFD codepoints."""
    a = normalize_nfd(a)
    b = normalize_nfd(b)
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1,
                         cur[j - 1] + 1,
                         prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def edit_distance_total(preds, golds):
    _check_lengths(preds, golds)
    return sum(edit_distance(p, g) for p, g in zip(preds, golds))


def morpheme_f1(preds, golds, separator=MORPHEME_SEPARATOR, average="micro"):
    """Precision/recall/F1 over morpheme multisets obtained by splitting each
    word on the separator.  Micro pools counts over the corpus; macro averages
    per-word proportions.  Empty denominators contribute 0."""
    _check_lengths(preds, golds)
    if average not in ("micro", "macro"):
        raise ValueError(f"average must be micro or macro, got {average!r}")
    if average == "micro":
        hits = n_pred = n_gold = 0
        for p, g in zip(preds, golds):
            pm = Counter(normalize_nfd(p).split(separator))
            gm = Counter(normalize_nfd(g).split(separator))
            hits += sum((pm & gm).values())
            n_pred += sum(pm.values())
            n_gold += sum(gm.values())
        precision = hits / n_pred if n_pred else 0.0
        recall = hits / n_gold if n_gold else 0.0
    else:
        precisions = []
        recalls = []
        for p, g in zip(preds, golds):
            pm = Counter(normalize_nfd(p).split(separator))
            gm = Counter(normalize_nfd(g).split(separator))
            hits = sum((pm & gm).values())
            precisions.append(hits / sum(pm.values()) if pm else 0.0)
            recalls.append(hits / sum(gm.values()) if gm else 0.0)
        precision = float(np.mean(precisions)) if precisions else 0.0
        recall = float(np.mean(recalls)) if recalls else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


@dataclass
class RunAggregate:
    mean: dict
    std: dict
    single_run: bool


def aggregate_runs(results):
    """Arithmetic mean and sample (n-1) standard deviation per metric.
    A single run reports std 0 and sets the single_run flag."""
    if not results:
        raise EmptyResults("no run results to aggregate")
    metrics = {
        "accuracy": [r.accuracy for r in results],
        "f1": [r.f1 for r in results],
        "edit_distance": [float(r.edit_distance) for r in results],
    }
    single = len(results) == 1
    mean = {k: float(np.mean(v)) for k, v in metrics.items()}
    std = {k: (0.0 if single else float(np.std(v, ddof=1))) for k, v in metrics.items()}
    return RunAggregate(mean=mean, std=std, single_run=single)
