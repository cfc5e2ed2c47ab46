"""Dominant belt motion from consecutive frames and belt-state classification.

Belt motion is estimated by exhaustive block matching (sum of absolute
differences) on a regular grid of blocks; the per-block displacements are
reduced with a median so that fish sliding over the belt do not bias the
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ContractError


@dataclass(frozen=True)
class FlowVector:
    dx: float
    dy: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ContractError(f"non-finite flow ({self.dx}, {self.dy})")


class BeltState(str, Enum):
    FORWARD = "Forward"
    STOPPED = "Stopped"
    REVERSED = "Reversed"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class MotionConfig:
    forward_axis: tuple[float, float] = (1.0, 0.0)
    stop_threshold: float = 1.0
    grid_step: int = 32
    block_size: int = 16
    search_radius: int = 24
    smoothing_window: int = 1

    def __post_init__(self):
        ax, ay = (float(v) for v in self.forward_axis)
        if not math.isclose(math.hypot(ax, ay), 1.0, rel_tol=1e-6):
            raise ContractError(f"forward_axis must be a unit vector, got {self.forward_axis}")
        object.__setattr__(self, "forward_axis", (ax, ay))
        if self.stop_threshold <= 0:
            raise ContractError("stop_threshold must be positive")
        if self.block_size < 1 or self.grid_step < 1 or self.search_radius < 0:
            raise ContractError("block_size and grid_step must be >= 1, search_radius >= 0")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ContractError("smoothing_window must be a positive odd integer")


def _as_gray(frame) -> np.ndarray:
    arr = np.asarray(frame)
    if arr.ndim != 2:
        raise ContractError(f"expected a 2-D grayscale frame, got shape {arr.shape}")
    return arr.astype(np.int32)


def _displacements(radius: int) -> np.ndarray:
    """All integer offsets within ``radius``, smallest magnitude first."""
    r = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    d = np.stack([dx.ravel(), dy.ravel()], axis=1)
    order = np.lexsort((d[:, 0], d[:, 1], (d ** 2).sum(axis=1)))
    return d[order]


def block_displacements(prev, curr, cfg: MotionConfig = MotionConfig()) -> np.ndarray:
    """Best-matching displacement ``(dx, dy)`` for every grid block.

    A block at ``p`` in ``prev`` is compared with the block at ``p + d`` in
    ``curr``. Blocks are placed so that their whole search window lies
    inside the frame. Ties in SAD resolve to the smallest displacement.
    """
    a, b = _as_gray(prev), _as_gray(curr)
    if a.shape != b.shape:
        raise ContractError(f"frame size mismatch {a.shape} vs {b.shape}")
    h, w = a.shape
    bs, r, step = cfg.block_size, cfg.search_radius, cfg.grid_step
    ys = np.arange(r, h - r - bs + 1, step)
    xs = np.arange(r, w - r - bs + 1, step)
    if ys.size == 0 or xs.size == 0:
        raise ContractError(
            f"frame {w}x{h} too small for one {bs}px block with search radius {r}px"
        )
    offsets = _displacements(r)
    # Summed-area tables over |a - shifted b| give every block SAD at once.
    sad = np.empty((len(offsets), ys.size, xs.size), dtype=np.int64)
    y0, y1 = ys[0], ys[-1] + bs
    x0, x1 = xs[0], xs[-1] + bs
    ref = a[y0:y1, x0:x1]
    by = ys - y0
    bx = xs - x0
    for k, (dx, dy) in enumerate(offsets):
        diff = np.abs(ref - b[y0 + dy:y1 + dy, x0 + dx:x1 + dx])
        sat = np.zeros((diff.shape[0] + 1, diff.shape[1] + 1), dtype=np.int64)
        sat[1:, 1:] = diff.cumsum(0).cumsum(1)
        sad[k] = (
            sat[np.ix_(by + bs, bx + bs)] - sat[np.ix_(by, bx + bs)]
            - sat[np.ix_(by + bs, bx)] + sat[np.ix_(by, bx)]
        )
    best = sad.reshape(len(offsets), -1).argmin(axis=0)
    return offsets[best].astype(float)


def estimate_flow(prev, curr, cfg: MotionConfig = MotionConfig()) -> FlowVector:
    """Median block-matching displacement between two grayscale frames."""
    d = block_displacements(prev, curr, cfg)
    return FlowVector(float(np.median(d[:, 0])), float(np.median(d[:, 1])))


def classify_belt_state(flow: FlowVector, cfg: MotionConfig = MotionConfig()) -> BeltState:
    ax, ay = cfg.forward_axis
    along = flow.dx * ax + flow.dy * ay
    if along > cfg.stop_threshold:
        return BeltState.FORWARD
    if along < -cfg.stop_threshold:
        return BeltState.REVERSED
    return BeltState.STOPPED


def majority_filter(states: Sequence[BeltState], window: int) -> list[BeltState]:
    """Sliding plurality vote with edge replication; ties keep the center state."""
    if window < 1 or window % 2 == 0:
        raise ContractError("smoothing window must be a positive odd integer")
    states = list(states)
    if window == 1 or len(states) == 0:
        return states
    half = window // 2
    padded = [states[0]] * half + states + [states[-1]] * half
    out = []
    for i, center in enumerate(states):
        win = padded[i:i + window]
        counts = {s: win.count(s) for s in BeltState}
        top = max(counts.values())
        winners = [s for s in BeltState if counts[s] == top]
        out.append(winners[0] if len(winners) == 1 else center)
    return out


def belt_state_sequence(frames, cfg: MotionConfig = MotionConfig()) -> list[BeltState]:
    """One belt state per consecutive frame pair, majority-smoothed per config."""
    frames = list(frames)
    if len(frames) < 2:
        raise ContractError("need at least two frames to estimate belt motion")
    raw = [
        classify_belt_state(estimate_flow(p, c, cfg), cfg)
        for p, c in zip(frames[:-1], frames[1:])
    ]
    return majority_filter(raw, cfg.smoothing_window)


def states_from_flows(flows: Sequence[FlowVector], cfg: MotionConfig = MotionConfig()) -> list[BeltState]:
    raw = [classify_belt_state(f, cfg) for f in flows]
    return majority_filter(raw, cfg.smoothing_window)


def read_pgm(path) -> np.ndarray:
    """Load an 8-bit grayscale PGM (P5) frame."""
    from PIL import Image

    with Image.open(Path(path)) as im:
        if im.format != "PPM" or im.mode != "L":
            raise ContractError(f"{path}: expected an 8-bit P5 grayscale PGM")
        return np.asarray(im, dtype=np.uint8).copy()


def write_pgm(path, frame) -> None:
    from PIL import Image

    arr = np.asarray(frame)
    if arr.ndim != 2:
        raise ContractError("PGM frames must be 2-D")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(Path(path), format="PPM")
