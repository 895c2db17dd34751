"""Multi-label evaluation: micro/macro F1, P@n, PR AUC, Pearson correlation,
frequency-binned F1, and report comparison.

Scores are n_docs x n_labels matrices in [0, 1]; gold matrices are binary
with the same shape. All operations are pure and permutation-invariant in
document order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

REPORT_FORMAT_VERSION = 1

# Presence threshold: scores strictly greater than 0.5 count as predicted.
DEFAULT_THRESHOLD = 0.5


def binarize(scores: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    return np.asarray(scores) > threshold


def _select(matrix: np.ndarray, labels) -> np.ndarray:
    matrix = np.asarray(matrix)
    if labels is None:
        return matrix
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("label subset is empty")
    return matrix[:, labels]


def micro_counts(pred: np.ndarray, gold: np.ndarray, labels=None) -> tuple[int, int, int]:
    """Pooled (TP, FP, FN) over all (document, label) cells of the subset."""
    p = _select(pred, labels).astype(bool)
    g = _select(gold, labels).astype(bool)
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    return tp, fp, fn


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def micro_f1(pred: np.ndarray, gold: np.ndarray, labels=None) -> float:
    """F1 over confusion counts pooled across every cell of the subset."""
    return _f1_from_counts(*micro_counts(pred, gold, labels))


def macro_f1(pred: np.ndarray, gold: np.ndarray, labels=None) -> float:
    """Unweighted mean of per-label F1. Every label in the subset must have
    at least one gold positive, otherwise its recall is undefined."""
    p = _select(pred, labels).astype(bool)
    g = _select(gold, labels).astype(bool)
    support = g.sum(axis=0)
    if np.any(support == 0):
        raise ValueError(
            "macro F1 is undefined for labels without gold positives; "
            "restrict the label subset"
        )
    scores = []
    for k in range(p.shape[1]):
        tp = int(np.sum(p[:, k] & g[:, k]))
        fp = int(np.sum(p[:, k] & ~g[:, k]))
        fn = int(np.sum(~p[:, k] & g[:, k]))
        scores.append(_f1_from_counts(tp, fp, fn))
    return float(np.mean(scores))


def precision_at_n(scores: np.ndarray, gold: np.ndarray, n: int) -> float:
    """Mean over documents of the precision of the n top-scored labels.

    Ties are broken toward the lower label index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    gold = np.asarray(gold)
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > scores.shape[1]:
        raise ValueError(f"n={n} exceeds the number of labels {scores.shape[1]}")
    hits = []
    label_idx = np.arange(scores.shape[1])
    for row, grow in zip(scores, gold):
        top = np.lexsort((label_idx, -row))[:n]
        hits.append(float(np.sum(grow[top] > 0)) / n)
    return float(np.mean(hits)) if hits else 0.0


def pr_auc(scores: np.ndarray, gold: np.ndarray) -> float:
    """Area under pooled micro precision vs micro recall.

    Thresholds sweep every distinct score plus 0 and 1; a cell is predicted
    positive when its score is strictly greater than the threshold. Precision
    is integrated over recall with a right-continuous step rule.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    g = np.asarray(gold).ravel().astype(bool)
    n_pos = int(g.sum())
    if n_pos == 0:
        raise ValueError("PR AUC is undefined without gold positives")
    thresholds = np.unique(np.concatenate([s, [0.0, 1.0]]))[::-1]
    area = 0.0
    prev_recall = 0.0
    for t in thresholds:
        pred = s > t
        tp = int(np.sum(pred & g))
        n_pred = int(pred.sum())
        recall = tp / n_pos
        if n_pred == 0:
            continue
        precision = tp / n_pred
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return float(area)


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d sequences")
    if x.size < 2:
        raise ValueError("need at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(np.dot(xc, xc))
    vy = float(np.dot(yc, yc))
    if vx == 0.0 or vy == 0.0:
        raise ValueError("correlation is undefined for zero-variance input")
    return float(np.dot(xc, yc) / math.sqrt(vx * vy))


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta function (Lentz's method).
    max_iter, eps, fpmin = 200, 3e-14, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < eps:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    # Regularized incomplete beta I_x(a, b).
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def pearson_test(x, y) -> tuple[float, float]:
    """Pearson correlation with its two-sided p-value (t distribution)."""
    rho = pearson(x, y)
    n = len(np.asarray(x))
    dof = n - 2
    if dof <= 0:
        return rho, 1.0
    if abs(rho) >= 1.0:
        return rho, 0.0
    t2 = rho * rho * dof / (1.0 - rho * rho)
    p = _betainc(dof / 2.0, 0.5, dof / (dof + t2))
    return rho, float(min(1.0, max(0.0, p)))


@dataclass
class BinRow:
    bin_lo: float
    bin_hi: float
    n_labels: int
    micro_f1: float | None


def frequency_binned_f1(
    pred: np.ndarray,
    gold: np.ndarray,
    train_counts,
    n_bins: int = 10,
) -> list[BinRow]:
    """Micro F1 per bin of ln(training count), over labels present in both
    the training set (count >= 1) and the evaluation gold (support >= 1).

    Bin edges are equal-width over [min, max] of the natural log of counts.
    """
    pred = np.asarray(pred).astype(bool)
    gold = np.asarray(gold).astype(bool)
    counts = np.asarray(train_counts, dtype=np.float64)
    eligible = np.flatnonzero((counts >= 1) & (gold.sum(axis=0) >= 1))
    if eligible.size == 0:
        raise ValueError("no label is present in both the training and evaluation sets")
    logs = np.log(counts[eligible])
    lo, hi = float(logs.min()), float(logs.max())
    width = (hi - lo) / n_bins
    if width == 0.0:
        assignment = np.zeros(eligible.size, dtype=np.int64)
    else:
        assignment = np.minimum(((logs - lo) / width).astype(np.int64), n_bins - 1)
    rows = []
    for b in range(n_bins):
        members = eligible[assignment == b]
        rows.append(
            BinRow(
                bin_lo=lo + b * width,
                bin_hi=lo + (b + 1) * width,
                n_labels=int(members.size),
                micro_f1=micro_f1(pred, gold, members) if members.size else None,
            )
        )
    return rows


@dataclass
class MetricsReport:
    n_docs: int
    n_labels: int
    threshold: float
    tp: int
    fp: int
    fn: int
    micro_f1: float
    micro_f1_by_group: dict[str, float]
    macro_f1: float | None
    macro_n_labels: int
    p_at: dict[str, float]
    pr_auc: float
    bins: list[BinRow] | None
    bin_log_base: str = "e"
    format_version: int = REPORT_FORMAT_VERSION

    def to_json(self) -> str:
        obj = asdict(self)
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        obj = json.loads(text)
        obj["bins"] = (
            None if obj.get("bins") is None else [BinRow(**row) for row in obj["bins"]]
        )
        return cls(**obj)


def evaluate_predictions(
    scores: np.ndarray,
    gold: np.ndarray,
    *,
    threshold: float = DEFAULT_THRESHOLD,
    p_at: tuple[int, ...] = (8,),
    groups=None,
    train_counts=None,
    macro_labels=None,
) -> MetricsReport:
    """Assemble the full report for a score matrix.

    `groups` is an optional per-label tag sequence; `train_counts` an optional
    per-label training-frequency vector enabling the binned table;
    `macro_labels` an optional label subset for macro F1 (every member must
    have gold support).
    """
    scores = np.asarray(scores, dtype=np.float64)
    gold01 = np.asarray(gold)
    pred = binarize(scores, threshold)
    tp, fp, fn = micro_counts(pred, gold01)

    by_group: dict[str, float] = {}
    if groups is not None:
        tags = list(groups)
        for tag in sorted(set(tags)):
            if tag == "none":
                continue
            members = np.flatnonzero(np.array([t == tag for t in tags]))
            by_group[tag] = micro_f1(pred, gold01, members)

    macro = None
    macro_n = 0
    if macro_labels is not None:
        macro_labels = np.asarray(macro_labels, dtype=np.int64)
        macro = macro_f1(pred, gold01, macro_labels)
        macro_n = int(macro_labels.size)

    bins = None
    if train_counts is not None:
        bins = frequency_binned_f1(pred, gold01, train_counts)

    return MetricsReport(
        n_docs=int(scores.shape[0]),
        n_labels=int(scores.shape[1]),
        threshold=float(threshold),
        tp=tp, fp=fp, fn=fn,
        micro_f1=micro_f1(pred, gold01),
        micro_f1_by_group=by_group,
        macro_f1=macro,
        macro_n_labels=macro_n,
        p_at={str(n): precision_at_n(scores, gold01, n) for n in p_at},
        pr_auc=pr_auc(scores, gold01),
        bins=bins,
    )


def compare_reports(a: MetricsReport, b: MetricsReport) -> dict:
    """Elementwise deltas b - a for two reports over the same label space."""
    if a.n_labels != b.n_labels:
        raise ValueError("reports cover different label spaces")
    delta: dict = {
        "micro_f1": b.micro_f1 - a.micro_f1,
        "pr_auc": b.pr_auc - a.pr_auc,
        "p_at": {
            n: b.p_at[n] - a.p_at[n] for n in sorted(set(a.p_at) & set(b.p_at))
        },
    }
    if a.macro_f1 is not None and b.macro_f1 is not None:
        delta["macro_f1"] = b.macro_f1 - a.macro_f1
    shared_groups = set(a.micro_f1_by_group) & set(b.micro_f1_by_group)
    if shared_groups:
        delta["micro_f1_by_group"] = {
            g: b.micro_f1_by_group[g] - a.micro_f1_by_group[g]
            for g in sorted(shared_groups)
        }
    if a.bins is not None and b.bins is not None:
        if len(a.bins) != len(b.bins) or any(
            (ra.bin_lo, ra.bin_hi) != (rb.bin_lo, rb.bin_hi)
            for ra, rb in zip(a.bins, b.bins)
        ):
            raise ValueError("reports use different binnings")
        delta["bins"] = [
            None
            if ra.micro_f1 is None or rb.micro_f1 is None
            else rb.micro_f1 - ra.micro_f1
            for ra, rb in zip(a.bins, b.bins)
        ]
    return delta
