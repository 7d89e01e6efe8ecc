"""Sliding-window scoring, F1 / point-adjusted F1 / AUROC, threshold search."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import DataError
from .model import forward_batch


@dataclass
class AnomalyScores:
    scores: np.ndarray    # per-timestamp mean over covering windows, in [0,1]
    coverage: np.ndarray  # number of windows contributing per timestamp


@dataclass
class MetricReport:
    tp: int
    fp: int
    fn: int
    f1: float
    threshold_f1: float
    f1_pa: float
    threshold_pa: float
    auroc: float


def _segment_starts(seg_start, seg_stop, n, stride):
    """Window starts for one boundary segment: stride grid + right-aligned tail."""
    last = seg_stop - n
    starts = list(range(seg_start, seg_stop - n + 1, stride))
    if starts[-1] != last:
        starts.append(last)
    return starts


def sliding_scores(params, config, test, stride=16, batch_size=32):
    """Score a test series with overlapping windows, averaging overlaps."""
    n = config.window_size
    t_total = len(test)
    starts = []
    for a, b in test.segments():
        if b - a < n:
            raise DataError(
                f"segment [{a}, {b}) of '{test.name}' is shorter than the "
                f"window size {n}")
        starts.extend(_segment_starts(a, b, n, stride))

    score_sum = np.zeros(t_total)
    coverage = np.zeros(t_total, dtype=np.int64)
    for i in range(0, len(starts), batch_size):
        chunk = starts[i:i + batch_size]
        windows = np.stack([test.values[s:s + n] for s in chunk])
        out = forward_batch(windows, params, config).data
        for s, row in zip(chunk, out):
            score_sum[s:s + n] += row
            coverage[s:s + n] += 1
    return AnomalyScores(scores=score_sum / coverage, coverage=coverage)


def confusion(labels, preds):
    labels = np.asarray(labels).astype(bool)
    preds = np.asarray(preds).astype(bool)
    if labels.shape != preds.shape:
        raise ValueError(f"length mismatch: {labels.shape} vs {preds.shape}")
    tp = int(np.sum(preds & labels))
    fp = int(np.sum(preds & ~labels))
    fn = int(np.sum(~preds & labels))
    return tp, fp, fn


def f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def label_segments(labels):
    """Maximal runs of 1s as half-open (start, stop) pairs."""
    labels = np.asarray(labels).astype(np.int8)
    diff = np.diff(np.concatenate(([0], labels, [0])))
    starts = np.flatnonzero(diff == 1)
    stops = np.flatnonzero(diff == -1)
    return list(zip(starts, stops))


def point_adjust(labels, preds):
    """Mark a whole ground-truth segment detected if any point in it is."""
    preds = np.asarray(preds).astype(bool).copy()
    for s, e in label_segments(labels):
        if preds[s:e].any():
            preds[s:e] = True
    return preds


def best_f1_search(scores, labels, adjust=False):
    """Exact best F1 over all distinct score values as thresholds (pred >= t).

    Ties in F1 are broken toward the larger threshold. Returns (threshold, f1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int8)
    if labels.sum() == 0:
        raise ValueError("labels contain no positives")
    best_t, best_f1 = np.inf, 0.0
    for t in np.unique(scores)[::-1]:
        preds = scores >= t
        if adjust:
            preds = point_adjust(labels, preds)
        value = f1(*confusion(labels, preds))
        if value > best_f1:
            best_t, best_f1 = float(t), value
    return best_t, best_f1


def auroc(scores, labels):
    """Rank-statistic AUROC: P(random positive outranks random negative),
    ties counting one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc requires both classes present")
    ranks = rankdata(scores)
    pos_rank_sum = ranks[labels].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def evaluate_scores(scores, labels):
    """Full MetricReport: independent best-F1 searches and AUROC."""
    t_f1, best = best_f1_search(scores, labels, adjust=False)
    t_pa, best_pa = best_f1_search(scores, labels, adjust=True)
    preds = np.asarray(scores) >= t_f1
    tp, fp, fn = confusion(labels, preds)
    return MetricReport(tp=tp, fp=fp, fn=fn, f1=best, threshold_f1=t_f1,
                        f1_pa=best_pa, threshold_pa=t_pa,
                        auroc=auroc(scores, labels))
