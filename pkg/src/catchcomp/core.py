"""Geometry primitives, the species taxonomy and detection record types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np


class CatchCompError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(CatchCompError, ValueError):
    """An input violates an operation's preconditions."""


class Label(str, Enum):
    BET = "BET"
    SKJ = "SKJ"
    YFT = "YFT"
    NO_TARGET = "NO_TARGET"
    TARGET = "TARGET"
    BET_OR_YFT = "BET_OR_YFT"
    FISH = "FISH"

    def __str__(self) -> str:
        return self.value

    @property
    def is_leaf(self) -> bool:
        return self in LEAVES


# Order doubles as the tie-break order for flat aggregation.
LEAVES: tuple[Label, ...] = (Label.BET, Label.SKJ, Label.YFT, Label.NO_TARGET)

_PARENT = {
    Label.BET: Label.BET_OR_YFT,
    Label.YFT: Label.BET_OR_YFT,
    Label.SKJ: Label.TARGET,
    Label.BET_OR_YFT: Label.TARGET,
}


def taxonomy_parent(label: Label) -> Optional[Label]:
    """Parent of ``label`` in the label hierarchy, ``None`` for roots and FISH."""
    return _PARENT.get(Label(label))


def taxonomy_leaves(label: Label) -> frozenset[Label]:
    """All leaf labels that roll up into ``label``."""
    label = Label(label)
    if label is Label.FISH:
        return frozenset()
    out = set()
    for leaf in LEAVES:
        node: Optional[Label] = leaf
        while node is not None:
            if node is label:
                out.add(leaf)
                break
            node = taxonomy_parent(node)
    return frozenset(out)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, top-left corner plus size, continuous pixel units."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ContractError(f"non-finite box coordinates {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ContractError(f"box width and height must be positive, got {self.w}x{self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2

    @property
    def cy(self) -> float:
        return self.y + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_xyah(self) -> np.ndarray:
        """Center x, center y, aspect ratio (w/h), height."""
        return np.array([self.cx, self.cy, self.w / self.h, self.h])

    @classmethod
    def from_xyah(cls, xyah) -> "BBox":
        cx, cy, a, h = (float(v) for v in xyah[:4])
        w = a * h
        return cls(cx - w / 2, cy - h / 2, w, h)

    def clip(self, width: float, height: float) -> Optional["BBox"]:
        """Intersection with the frame ``[0, width] x [0, height]``, or None."""
        x1, y1 = max(self.x, 0.0), max(self.y, 0.0)
        x2, y2 = min(self.x2, width), min(self.y2, height)
        if x2 <= x1 or y2 <= y1:
            return None
        return BBox(x1, y1, x2 - x1, y2 - y1)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou_box(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    # corner arithmetic can overshoot the stored sizes by an ulp
    return min(1.0, inter / (a.area + b.area - inter))


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise box IoU, shape ``(len(boxes_a), len(boxes_b))``."""
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for i, a in enumerate(boxes_a):
        for j, b in enumerate(boxes_b):
            out[i, j] = iou_box(a, b)
    return out


@dataclass(frozen=True, eq=False)
class BitMask:
    """Binary mask stored as a read-only ``(height, width)`` boolean array."""

    width: int
    height: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim == 1:
            if bits.size != self.width * self.height:
                raise ContractError(
                    f"mask has {bits.size} bits, expected {self.width}x{self.height}"
                )
            bits = bits.reshape(self.height, self.width)
        if bits.shape != (self.height, self.width):
            raise ContractError(f"mask shape {bits.shape} != ({self.height}, {self.width})")
        bits = bits.copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other):
        if not isinstance(other, BitMask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.bits, other.bits)
        )

    def __hash__(self):
        return hash((self.width, self.height, self.bits.tobytes()))

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def extent(self) -> Optional[BBox]:
        """Tight bounding box of the set pixels (pixel (r, c) spans [c, c+1])."""
        rows = np.flatnonzero(self.bits.any(axis=1))
        cols = np.flatnonzero(self.bits.any(axis=0))
        if rows.size == 0:
            return None
        return BBox(
            float(cols[0]), float(rows[0]),
            float(cols[-1] + 1 - cols[0]), float(rows[-1] + 1 - rows[0]),
        )

    def to_rle(self) -> list[int]:
        """Row-major run lengths, alternating unset/set, starting with unset."""
        flat = self.bits.ravel()
        if flat.size == 0:
            return []
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0]:
            runs = [0] + runs
        return runs

    @classmethod
    def from_rle(cls, width: int, height: int, counts) -> "BitMask":
        counts = [int(c) for c in counts]
        if any(c < 0 for c in counts):
            raise ContractError("negative run length in mask")
        if sum(counts) != width * height:
            raise ContractError(
                f"run lengths sum to {sum(counts)}, expected {width * height}"
            )
        values = np.arange(len(counts)) % 2 == 1
        flat = np.repeat(values, counts)
        return cls(width, height, flat)


def iou_mask(a: BitMask, b: BitMask) -> float:
    if (a.width, a.height) != (b.width, b.height):
        raise ContractError(
            f"mask size mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        raise ContractError("IoU undefined for two empty masks")
    return int(np.logical_and(a.bits, b.bits).sum()) / union


@dataclass(frozen=True)
class ClassScores:
    """Per-leaf scores for one observation, normalized to sum 1."""

    BET: float
    SKJ: float
    YFT: float
    NO_TARGET: float

    def __post_init__(self):
        for leaf in LEAVES:
            v = getattr(self, leaf.value)
            if not (0.0 <= v <= 1.0):
                raise ContractError(f"class score {leaf.value}={v} outside [0, 1]")

    @classmethod
    def from_mapping(cls, scores: Mapping, normalize: bool = True) -> "ClassScores":
        """Build from a leaf -> score mapping, renormalizing to sum 1 by default."""
        keys = {str(k.value if isinstance(k, Label) else k) for k in scores}
        expected = {leaf.value for leaf in LEAVES}
        if keys != expected:
            raise ContractError(f"class scores must have exactly the keys {sorted(expected)}")
        vals = {str(k.value if isinstance(k, Label) else k): float(v) for k, v in scores.items()}
        for k, v in vals.items():
            if not (0.0 <= v <= 1.0):
                raise ContractError(f"class score {k}={v} outside [0, 1]")
        if normalize:
            total = math.fsum(vals.values())
            if total <= 0:
                raise ContractError("all-zero class scores cannot be normalized")
            # already-normalized input is kept bit-for-bit (idempotent round trips)
            if abs(total - 1.0) > 1e-12:
                vals = {k: v / total for k, v in vals.items()}
        return cls(**vals)

    @classmethod
    def from_array(cls, arr, normalize: bool = True) -> "ClassScores":
        return cls.from_mapping(
            {leaf.value: float(v) for leaf, v in zip(LEAVES, arr)}, normalize=normalize
        )

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, leaf.value) for leaf in LEAVES])

    def as_dict(self) -> dict[str, float]:
        return {leaf.value: getattr(self, leaf.value) for leaf in LEAVES}

    def to_stage_scores(self) -> "StageScores":
        """Binary stage scores implied by these leaf scores.

        Undefined ratios (zero denominators) map to 0.5.
        """
        target = self.BET + self.SKJ + self.YFT
        s1 = min(1.0, target)
        s2 = self.SKJ / target if target > 0 else 0.5
        by = self.BET + self.YFT
        s3 = self.BET / by if by > 0 else 0.5
        return StageScores(s1, min(1.0, s2), min(1.0, s3))


@dataclass(frozen=True)
class StageScores:
    """Scores of the three binary decisions: target?, skipjack?, bigeye?"""

    s1_target: float
    s2_skj: float
    s3_bet: float

    def __post_init__(self):
        for name in ("s1_target", "s2_skj", "s3_bet"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ContractError(f"stage score {name}={v} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.s1_target, self.s2_skj, self.s3_bet])

    def as_dict(self) -> dict[str, float]:
        return {"s1_target": self.s1_target, "s2_skj": self.s2_skj, "s3_bet": self.s3_bet}


@dataclass(frozen=True)
class Detection:
    frame_index: int
    bbox: BBox
    confidence: float
    mask: Optional[BitMask] = None
    class_scores: Optional[ClassScores] = None
    stage_scores: Optional[StageScores] = None

    def __post_init__(self):
        if int(self.frame_index) != self.frame_index or self.frame_index < 0:
            raise ContractError(f"frame index must be a nonnegative integer, got {self.frame_index}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ContractError(f"confidence {self.confidence} outside [0, 1]")
        if self.mask is not None:
            ext = self.mask.extent()
            if ext is not None and intersection_area(ext, self.bbox) == 0.0:
                raise ContractError("mask extent does not intersect the detection box")


@dataclass(frozen=True)
class Annotation:
    """A ground-truth fish outline in one frame (class-agnostic for detection metrics)."""

    frame_index: int
    bbox: BBox
    mask: Optional[BitMask] = None
    label: Optional[Label] = None


@dataclass(frozen=True)
class GroundTruthOperation:
    """Known species counts for one fishing operation.

    ``percentages`` may be given explicitly when the source reports rounded
    percentages rather than counts; it then takes precedence over the counts.
    """

    afo_id: str
    counts: Mapping[Label, int]
    percentages: Optional[Mapping[Label, float]] = None

    def __post_init__(self):
        counts = {Label(k): int(v) for k, v in self.counts.items()}
        for leaf in LEAVES:
            counts.setdefault(leaf, 0)
        if any(v < 0 for v in counts.values()):
            raise ContractError(f"negative ground-truth count in {self.afo_id}")
        if set(counts) - set(LEAVES):
            raise ContractError("ground-truth counts must use leaf labels only")
        if sum(counts.values()) <= 0:
            raise ContractError(f"ground truth for {self.afo_id} has no fish")
        object.__setattr__(self, "counts", counts)
        if self.percentages is not None:
            pct = {Label(k): float(v) for k, v in self.percentages.items()}
            for leaf in LEAVES:
                pct.setdefault(leaf, 0.0)
            object.__setattr__(self, "percentages", pct)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def composition(self) -> dict[Label, float]:
        if self.percentages is not None:
            return dict(self.percentages)
        total = self.total
        return {leaf: 100.0 * self.counts[leaf] / total for leaf in LEAVES}
