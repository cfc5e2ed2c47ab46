"""COCO-style average precision over a sweep of IoU thresholds."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import ContractError, Detection, iou_box, iou_mask

# k/20 for k = 1..19; exact decimal floats rather than an arange.
IOU_THRESHOLDS: tuple[float, ...] = tuple(k / 20 for k in range(1, 20))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class PRCurve:
    iou_threshold: float
    precision: np.ndarray
    recall: np.ndarray
    ap: float


@dataclass(frozen=True)
class DetectionEvalResult:
    map_box: float
    map_mask: Optional[float]
    recall: float
    curves: tuple[PRCurve, ...]
    mask_curves: tuple[PRCurve, ...] = ()


def _sort_key(det: Detection):
    b = det.bbox
    return (-det.confidence, det.frame_index, b.x, b.y, b.w, b.h)


def _iou(pred, gt, kind: str) -> float:
    if kind == "box":
        return iou_box(pred.bbox, gt.bbox)
    if pred.mask is None or gt.mask is None:
        raise ContractError("mask IoU requested but a prediction or annotation has no mask")
    return iou_mask(pred.mask, gt.mask)


def match_predictions(preds: Sequence[Detection], gts: Sequence, threshold: float,
                      kind: str = "box") -> tuple[np.ndarray, int]:
    """Greedy matching in descending confidence; returns TP flags and matched GT count.

    Each prediction takes the unmatched ground truth in its frame with the
    highest IoU, provided the IoU reaches ``threshold``.
    """
    by_frame = defaultdict(list)
    for g in gts:
        by_frame[g.frame_index].append(g)
    used = {f: [False] * len(v) for f, v in by_frame.items()}
    tp = np.zeros(len(preds), dtype=bool)
    for k, p in enumerate(preds):
        cands = by_frame.get(p.frame_index, [])
        best, best_iou = -1, -1.0
        for j, g in enumerate(cands):
            if used[p.frame_index][j]:
                continue
            v = _iou(p, g, kind)
            if v >= threshold and v > best_iou:
                best, best_iou = j, v
        if best >= 0:
            used[p.frame_index][best] = True
            tp[k] = True
    return tp, int(tp.sum())


def average_precision(tp: np.ndarray, n_gt: int, interpolation: str = "101") -> tuple[float, np.ndarray, np.ndarray]:
    """AP from ranked TP flags; precision envelope sampled at 101 recall points.

    ``interpolation="all"`` integrates the envelope over every recall step.
    """
    if tp.size == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    recall = ctp / n_gt
    precision = ctp / (ctp + cfp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    if interpolation == "all":
        prev = np.concatenate(([0.0], recall[:-1]))
        ap = float(np.sum((recall - prev) * envelope))
    elif interpolation == "101":
        idx = np.searchsorted(recall, RECALL_POINTS, side="left")
        q = np.where(idx < recall.size, envelope[np.minimum(idx, recall.size - 1)], 0.0)
        ap = float(q.mean())
    else:
        raise ContractError(f"unknown interpolation {interpolation!r}")
    return ap, precision, recall


def _curves(preds, gts, kind, interpolation):
    curves = []
    recall50 = 0.0
    for t in IOU_THRESHOLDS:
        tp, matched = match_predictions(preds, gts, t, kind)
        ap, prec, rec = average_precision(tp, len(gts), interpolation)
        curves.append(PRCurve(t, prec, rec, ap))
        if t == 0.5:
            recall50 = matched / len(gts)
    return tuple(curves), recall50


def coco_map(predictions: Sequence[Detection], ground_truth: Sequence, iou_kind: str = "box",
             interpolation: str = "101") -> DetectionEvalResult:
    """Class-agnostic mAP over IoU thresholds 0.05..0.95 and recall at IoU 0.5.

    With ``iou_kind="mask"`` both box and mask mAP are reported; recall
    follows ``iou_kind``.
    """
    if len(ground_truth) == 0:
        raise ContractError("ground truth is empty")
    if iou_kind not in ("box", "mask"):
        raise ContractError(f"iou_kind must be 'box' or 'mask', got {iou_kind!r}")
    preds = sorted(predictions, key=_sort_key)
    box_curves, box_recall = _curves(preds, ground_truth, "box", interpolation)
    map_box = float(np.mean([c.ap for c in box_curves]))
    if iou_kind == "box":
        return DetectionEvalResult(map_box, None, box_recall, box_curves)
    mask_curves, mask_recall = _curves(preds, ground_truth, "mask", interpolation)
    map_mask = float(np.mean([c.ap for c in mask_curves]))
    return DetectionEvalResult(map_box, map_mask, mask_recall, box_curves, mask_curves)
