"""Brute-force reference implementations used by the tests."""

import itertools

import numpy as np
from scipy.stats import rankdata

from catchcomp.core import iou_box
from catchcomp.stats.detection import IOU_THRESHOLDS, RECALL_POINTS


def wilcoxon_enumerate(diffs, alternative="two-sided"):
    """Exact signed-rank p by listing every sign assignment."""
    d = np.round(np.asarray(diffs, dtype=float), 9)
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 1.0
    ranks = rankdata(np.abs(d))
    obs = ranks[d > 0].sum()
    total = ranks.sum()
    sums = [sum(r for r, s in zip(ranks, signs) if s) for signs in
            itertools.product((False, True), repeat=n)]
    if alternative == "greater":
        return sum(s >= obs for s in sums) / 2 ** n
    if alternative == "less":
        return sum(s <= obs for s in sums) / 2 ** n
    low = min(obs, total - obs)
    return min(1.0, 2 * sum(s <= low for s in sums) / 2 ** n)


def _greedy_tp(preds, gts, t):
    used = [False] * len(gts)
    flags = []
    for p in preds:
        best, best_iou = None, -1.0
        for j, g in enumerate(gts):
            if used[j] or g.frame_index != p.frame_index:
                continue
            v = iou_box(p.bbox, g.bbox)
            if v >= t and v > best_iou:
                best, best_iou = j, v
        if best is not None:
            used[best] = True
        flags.append(best is not None)
    return flags


def map_bruteforce(preds, gts):
    """mAP by building the PR curve one rank cut at a time."""
    order = sorted(preds, key=lambda d: (-d.confidence, d.frame_index, d.bbox.x, d.bbox.y,
                                         d.bbox.w, d.bbox.h))
    aps = []
    recall50 = 0.0
    for t in IOU_THRESHOLDS:
        flags = _greedy_tp(order, gts, t)
        points = []
        for k in range(1, len(order) + 1):
            tp = sum(flags[:k])
            points.append((tp / len(gts), tp / k))
        interp = []
        for r in RECALL_POINTS:
            ok = [p for rec, p in points if rec >= r]
            interp.append(max(ok) if ok else 0.0)
        aps.append(sum(interp) / len(interp))
        if t == 0.5:
            recall50 = sum(flags) / len(gts)
    return sum(aps) / len(aps), recall50
