"""Per-track species labels from per-frame classifier scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

from .core import LEAVES, ClassScores, ContractError, Label, StageScores
from .tracker import Lifecycle, Track


class Method(str, Enum):
    FLAT = "flat"
    HIERARCHICAL = "hierarchical"

    def __str__(self) -> str:
        return self.value


class MissingScoresError(ContractError):
    def __init__(self, track_id, method):
        super().__init__(f"track {track_id} has no {'class' if method is Method.FLAT else 'stage'} "
                         f"scores required by {method} aggregation")
        self.track_id = track_id


@dataclass(frozen=True)
class TrackLabel:
    track_id: Optional[int]
    label: Label
    method: Method
    aggregated_scores: Union[ClassScores, StageScores]


def _mean(values: Sequence[float], weights: Optional[Sequence[float]]) -> float:
    # fsum keeps the mean independent of frame order.
    if weights is None:
        return math.fsum(values) / len(values)
    return math.fsum(v * w for v, w in zip(values, weights)) / math.fsum(weights)


def _check(history, weights):
    if len(history) == 0:
        raise ContractError("cannot aggregate an empty score history")
    if weights is not None:
        if len(weights) != len(history):
            raise ContractError("weights and history differ in length")
        if math.fsum(weights) <= 0:
            raise ContractError("weights must have a positive sum")


def aggregate_flat(
    history: Sequence[ClassScores],
    weights: Optional[Sequence[float]] = None,
    track_id: Optional[int] = None,
) -> TrackLabel:
    """Average leaf scores over frames and take the argmax.

    Ties go to the earliest leaf in BET, SKJ, YFT, NO_TARGET order.
    """
    _check(history, weights)
    means = {
        leaf: _mean([getattr(s, leaf.value) for s in history], weights) for leaf in LEAVES
    }
    best = LEAVES[0]
    for leaf in LEAVES[1:]:
        if means[leaf] > means[best]:
            best = leaf
    agg = ClassScores(**{leaf.value: min(1.0, means[leaf]) for leaf in LEAVES})
    return TrackLabel(track_id, best, Method.FLAT, agg)


def aggregate_hierarchical(
    history: Sequence[StageScores],
    weights: Optional[Sequence[float]] = None,
    track_id: Optional[int] = None,
    threshold: float = 0.5,
) -> TrackLabel:
    """Average each binary stage over frames, then walk the decision chain.

    A mean exactly at ``threshold`` continues down the first branch
    (target, then skipjack, then bigeye).
    """
    _check(history, weights)
    s1 = _mean([s.s1_target for s in history], weights)
    s2 = _mean([s.s2_skj for s in history], weights)
    s3 = _mean([s.s3_bet for s in history], weights)
    if s1 < threshold:
        label = Label.NO_TARGET
    elif s2 >= threshold:
        label = Label.SKJ
    elif s3 >= threshold:
        label = Label.BET
    else:
        label = Label.YFT
    agg = StageScores(min(1.0, s1), min(1.0, s2), min(1.0, s3))
    return TrackLabel(track_id, label, Method.HIERARCHICAL, agg)


def label_track(track: Track, method, confidence_weighted: bool = False,
                threshold: float = 0.5) -> TrackLabel:
    method = Method(method)
    obs = track.score_history
    if method is Method.FLAT:
        if not obs or any(o.class_scores is None for o in obs):
            raise MissingScoresError(track.track_id, method)
        weights = [o.confidence for o in obs] if confidence_weighted else None
        return aggregate_flat([o.class_scores for o in obs], weights, track.track_id)
    if not obs or any(o.stage_scores is None for o in obs):
        raise MissingScoresError(track.track_id, method)
    weights = [o.confidence for o in obs] if confidence_weighted else None
    return aggregate_hierarchical([o.stage_scores for o in obs], weights, track.track_id,
                                  threshold)


def label_all(
    tracks: Sequence[Track],
    method,
    min_hits: int = 2,
    confidence_weighted: bool = False,
    threshold: float = 0.5,
) -> list[TrackLabel]:
    """One label per finalized track with at least ``min_hits`` detections."""
    out = []
    for t in tracks:
        if t.lifecycle is not Lifecycle.FINALIZED:
            raise ContractError(f"track {t.track_id} is not finalized")
        if t.hits < min_hits:
            continue
        out.append(label_track(t, method, confidence_weighted, threshold))
    return out
