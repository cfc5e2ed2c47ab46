"""ByteTrack-style multi-object tracker with belt-motion gating.

Tracks are immutable values; every step returns new ``Track`` objects so
that a paused step can hand back its input untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .core import BBox, ClassScores, ContractError, Detection, StageScores, iou_matrix
from .motion import BeltState, FlowVector

_MIN_SHAPE = 1e-3


class Lifecycle(str, Enum):
    TENTATIVE = "Tentative"
    ACTIVE = "Active"
    LOST = "Lost"
    FINALIZED = "Finalized"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, eq=False)
class KalmanTrackState:
    """Mean over (cx, cy, aspect, height) and their velocities, with covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        for name in ("mean", "covariance"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, KalmanTrackState):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.covariance, other.covariance
        )

    def bbox(self) -> BBox:
        cx, cy, a, h = self.mean[:4]
        return BBox.from_xyah((cx, cy, max(a, _MIN_SHAPE), max(h, _MIN_SHAPE)))


class KalmanFilterXYAH:
    """Constant-velocity Kalman filter in (cx, cy, aspect, height) space.

    Process and measurement noise scale with the box height, the usual
    parameterization for box trackers.
    """

    std_weight_position = 1.0 / 20
    std_weight_velocity = 1.0 / 160

    def __init__(self):
        self.transition = np.eye(8)
        for i in range(4):
            self.transition[i, 4 + i] = 1.0
        self.observation = np.eye(4, 8)

    def initiate(self, measurement) -> KalmanTrackState:
        m = np.asarray(measurement, dtype=float)
        h = m[3]
        wp, wv = self.std_weight_position, self.std_weight_velocity
        std = [2 * wp * h, 2 * wp * h, 1e-2, 2 * wp * h,
               10 * wv * h, 10 * wv * h, 1e-5, 10 * wv * h]
        return KalmanTrackState(np.r_[m, np.zeros(4)], np.diag(np.square(std)))

    def predict(self, state: KalmanTrackState, freeze_shape: bool = False) -> KalmanTrackState:
        mean = state.mean.copy()
        if freeze_shape:
            mean[6:8] = 0.0
        h = mean[3]
        wp, wv = self.std_weight_position, self.std_weight_velocity
        q = np.diag(np.square([wp * h, wp * h, 1e-2, wp * h, wv * h, wv * h, 1e-5, wv * h]))
        mean = self.transition @ mean
        cov = self.transition @ state.covariance @ self.transition.T + q
        mean[2] = max(mean[2], _MIN_SHAPE)
        mean[3] = max(mean[3], _MIN_SHAPE)
        return KalmanTrackState(mean, cov)

    def update(self, state: KalmanTrackState, measurement) -> KalmanTrackState:
        z = np.asarray(measurement, dtype=float)
        h = state.mean[3]
        wp = self.std_weight_position
        r = np.diag(np.square([wp * h, wp * h, 1e-1, wp * h]))
        proj_mean = self.observation @ state.mean
        proj_cov = self.observation @ state.covariance @ self.observation.T + r
        chol = scipy.linalg.cho_factor(proj_cov, lower=True, check_finite=False)
        gain = scipy.linalg.cho_solve(
            chol, (state.covariance @ self.observation.T).T, check_finite=False
        ).T
        mean = state.mean + gain @ (z - proj_mean)
        cov = state.covariance - gain @ proj_cov @ gain.T
        cov = (cov + cov.T) / 2
        mean[2] = max(mean[2], _MIN_SHAPE)
        mean[3] = max(mean[3], _MIN_SHAPE)
        return KalmanTrackState(mean, cov)


KALMAN = KalmanFilterXYAH()


@dataclass(frozen=True)
class Observation:
    frame_index: int
    confidence: float
    class_scores: Optional[ClassScores] = None
    stage_scores: Optional[StageScores] = None


@dataclass(frozen=True)
class Track:
    track_id: int
    lifecycle: Lifecycle
    kalman: KalmanTrackState
    last_frame: int
    hits: int = 1
    frames_lost: int = 0
    score_history: tuple[Observation, ...] = ()
    last_bbox: Optional[BBox] = None
    finalize_reason: Optional[str] = None

    @property
    def bbox(self) -> BBox:
        return self.kalman.bbox()

    @property
    def first_frame(self) -> int:
        return self.score_history[0].frame_index if self.score_history else self.last_frame


@dataclass(frozen=True)
class TrackerConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    match_iou_min: float = 0.2
    tentative_min_hits: int = 2
    max_frames_lost: int = 30
    exit_margin: float = 10.0
    frame_size: Optional[tuple[int, int]] = None
    forward_axis: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not (0.0 <= self.tau_low < self.tau_high <= 1.0):
            raise ContractError("need 0 <= tau_low < tau_high <= 1")
        if not (0.0 <= self.match_iou_min <= 1.0):
            raise ContractError("match_iou_min must lie in [0, 1]")
        if self.tentative_min_hits < 1 or self.max_frames_lost < 1:
            raise ContractError("tentative_min_hits and max_frames_lost must be >= 1")
        ax, ay = (float(v) for v in self.forward_axis)
        if not math.isclose(math.hypot(ax, ay), 1.0, rel_tol=1e-6):
            raise ContractError("forward_axis must be a unit vector")
        object.__setattr__(self, "forward_axis", (ax, ay))
        if self.frame_size is not None:
            object.__setattr__(self, "frame_size", tuple(int(v) for v in self.frame_size))

    def exit_edge(self) -> Optional[float]:
        """Largest projection of any frame point on the belt axis."""
        if self.frame_size is None:
            return None
        w, h = self.frame_size
        ax, ay = self.forward_axis
        return max(0.0, w * ax) + max(0.0, h * ay)

    def project(self, x: float, y: float) -> float:
        ax, ay = self.forward_axis
        return x * ax + y * ay


def kalman_predict(track: Track) -> BBox:
    """Box the track is expected to occupy one frame later."""
    if track.lifecycle is Lifecycle.FINALIZED:
        raise ContractError(f"track {track.track_id} is finalized")
    return _predict(track).bbox()


def _predict(track: Track) -> KalmanTrackState:
    return KALMAN.predict(track.kalman, freeze_shape=track.lifecycle is Lifecycle.LOST)


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    unmatched_tracks: tuple[int, ...]
    unmatched_detections: tuple[int, ...]


def _box(item) -> BBox:
    return item.bbox if isinstance(item, Detection) else item


def assign(predicted: Sequence[BBox], detections: Sequence, min_iou: float) -> Matching:
    """Minimum total (1 - IoU) assignment between predicted boxes and detections.

    Pairs below ``min_iou`` are dropped after the optimal assignment is found.
    Indices refer to positions in the two input lists.
    """
    n, m = len(predicted), len(detections)
    if n == 0 or m == 0:
        return Matching((), tuple(range(n)), tuple(range(m)))
    iou = iou_matrix(list(predicted), [_box(d) for d in detections])
    rows, cols = linear_sum_assignment(1.0 - iou)
    pairs = tuple(
        (int(r), int(c)) for r, c in zip(rows, cols) if iou[r, c] >= min_iou and iou[r, c] > 0
    )
    used_t = {p[0] for p in pairs}
    used_d = {p[1] for p in pairs}
    return Matching(
        pairs,
        tuple(i for i in range(n) if i not in used_t),
        tuple(j for j in range(m) if j not in used_d),
    )


def _observe(det: Detection) -> Observation:
    return Observation(det.frame_index, det.confidence, det.class_scores, det.stage_scores)


def _exited(state: KalmanTrackState, cfg: TrackerConfig) -> bool:
    edge = cfg.exit_edge()
    if edge is None:
        return False
    b = state.bbox()
    trailing = min(cfg.project(x, y) for x in (b.x, b.x2) for y in (b.y, b.y2))
    return trailing > edge + cfg.exit_margin


def bytetrack_step(
    tracks: Sequence[Track],
    detections: Sequence[Detection],
    belt: BeltState,
    cfg: TrackerConfig,
    frame: int,
    next_id: Optional[int] = None,
) -> list[Track]:
    """Advance all tracks by one frame.

    Finalized tracks are passed through unchanged. New track IDs continue
    from ``next_id`` (default: one past the largest ID in ``tracks``).
    """
    for d in detections:
        if d.frame_index != frame:
            raise ContractError(
                f"detection from frame {d.frame_index} passed to step for frame {frame}"
            )
    tracks = list(tracks)
    if belt is not BeltState.FORWARD:
        return tracks
    if next_id is None:
        next_id = max((t.track_id for t in tracks), default=0) + 1

    live = [i for i, t in enumerate(tracks) if t.lifecycle is not Lifecycle.FINALIZED]
    predicted = {i: _predict(tracks[i]) for i in live}
    confirmed = sorted(
        (i for i in live if tracks[i].lifecycle in (Lifecycle.ACTIVE, Lifecycle.LOST)),
        key=lambda i: tracks[i].track_id,
    )
    tentative = sorted(
        (i for i in live if tracks[i].lifecycle is Lifecycle.TENTATIVE),
        key=lambda i: tracks[i].track_id,
    )
    high = [j for j, d in enumerate(detections) if d.confidence >= cfg.tau_high]
    low = [j for j, d in enumerate(detections) if cfg.tau_low <= d.confidence < cfg.tau_high]

    matches: dict[int, int] = {}

    def stage(track_idx, det_idx):
        m = assign(
            [predicted[i].bbox() for i in track_idx],
            [detections[j] for j in det_idx],
            cfg.match_iou_min,
        )
        for a, b in m.pairs:
            matches[track_idx[a]] = det_idx[b]
        return (
            [track_idx[a] for a in m.unmatched_tracks],
            [det_idx[b] for b in m.unmatched_detections],
        )

    rest_tracks, rest_high = stage(confirmed, high)
    stage(rest_tracks, low)
    _, rest_high = stage(tentative, rest_high)

    out = list(tracks)
    for i in live:
        t = tracks[i]
        if i in matches:
            det = detections[matches[i]]
            kal = KALMAN.update(predicted[i], det.bbox.to_xyah())
            hits = t.hits + 1
            if t.lifecycle is Lifecycle.TENTATIVE:
                life = Lifecycle.ACTIVE if hits >= cfg.tentative_min_hits else Lifecycle.TENTATIVE
            else:
                life = Lifecycle.ACTIVE
            out[i] = replace(
                t, lifecycle=life, kalman=kal, last_frame=frame, hits=hits, frames_lost=0,
                score_history=t.score_history + (_observe(det),), last_bbox=det.bbox,
            )
        elif t.lifecycle is Lifecycle.TENTATIVE:
            out[i] = replace(t, lifecycle=Lifecycle.FINALIZED, kalman=predicted[i],
                             finalize_reason="unconfirmed")
        else:
            lost = t.frames_lost + 1
            reason = None
            if lost > cfg.max_frames_lost:
                reason = "lost"
            elif _exited(predicted[i], cfg):
                reason = "exit"
            out[i] = replace(
                t,
                lifecycle=Lifecycle.FINALIZED if reason else Lifecycle.LOST,
                kalman=predicted[i], frames_lost=lost, finalize_reason=reason,
            )

    for j in sorted(rest_high):
        det = detections[j]
        out.append(Track(
            track_id=next_id,
            lifecycle=Lifecycle.ACTIVE if cfg.tentative_min_hits <= 1 else Lifecycle.TENTATIVE,
            kalman=KALMAN.initiate(det.bbox.to_xyah()),
            last_frame=frame,
            hits=1,
            score_history=(_observe(det),),
            last_bbox=det.bbox,
        ))
        next_id += 1
    return out


def finalize(track: Track, reason: str = "end") -> Track:
    if track.lifecycle is Lifecycle.FINALIZED:
        return track
    return replace(track, lifecycle=Lifecycle.FINALIZED, finalize_reason=reason)


def counted_tracks(tracks: Iterable[Track], cfg: TrackerConfig) -> list[Track]:
    """Finalized tracks long enough to count as one fish each."""
    return [
        t for t in tracks
        if t.lifecycle is Lifecycle.FINALIZED and t.hits >= cfg.tentative_min_hits
    ]


@dataclass
class ByteTracker:
    """Stateful driver around :func:`bytetrack_step` for one video stream.

    With ``gating`` on, frames where the belt is not moving forward are
    skipped entirely. After the belt has run in reverse, fish that already
    left the field of view can drift back in; their detections are
    suppressed until the belt has carried that region out again. The
    region is tracked in belt coordinates when per-frame flow is supplied;
    otherwise it is everything downstream of the furthest live track, for
    ``max_frames_lost`` frames. With flow supplied, live tracks are also
    carried by the belt displacement accumulated while paused, and Lost
    tracks coast at the belt velocity. Turning ``gating`` off ignores
    both belt state and flow.
    """

    cfg: TrackerConfig = field(default_factory=TrackerConfig)
    gating: bool = True
    tracks: list[Track] = field(default_factory=list)
    finalized: list[Track] = field(default_factory=list)
    next_id: int = 1
    last_frame: Optional[int] = None
    suppressed: int = 0
    _reverse_shift: float = 0.0
    _reversed: bool = False
    _boundary: Optional[float] = None
    _window: int = 0
    _any_exit: bool = False

    def update(self, frame: int, detections: Sequence[Detection],
               belt: BeltState = BeltState.FORWARD,
               flow: Optional[FlowVector] = None) -> None:
        if self.last_frame is not None and frame <= self.last_frame:
            raise ContractError(f"frames must strictly increase ({frame} after {self.last_frame})")
        self.last_frame = frame
        if not self.gating:
            # plain tracking: no belt state, no belt motion
            belt, flow = BeltState.FORWARD, None
        along = None if flow is None else self.cfg.project(flow.dx, flow.dy)

        if belt is not BeltState.FORWARD:
            if belt is BeltState.REVERSED:
                self._reversed = True
            if along is not None:
                self._reverse_shift += along
            return

        if self._reversed or self._reverse_shift:
            if self._reversed:
                self._start_suppression(along is not None)
            self._carry(self._reverse_shift)
            self._reversed = False
            self._reverse_shift = 0.0
        detections = self._filter(detections, along)
        if flow is not None:
            self._ride_belt(flow)

        stepped = bytetrack_step(self.tracks, detections, belt, self.cfg, frame, self.next_id)
        if stepped:
            self.next_id = max(self.next_id, max(t.track_id for t in stepped) + 1)
        self.tracks = []
        for t in stepped:
            if t.lifecycle is Lifecycle.FINALIZED:
                if t.finalize_reason == "exit":
                    self._any_exit = True
                self.finalized.append(t)
            else:
                self.tracks.append(t)

    def _ride_belt(self, flow: FlowVector) -> None:
        # an unseen fish moves with the belt, not with its last (possibly clipped) velocity
        moved = []
        for t in self.tracks:
            if t.lifecycle is Lifecycle.LOST:
                mean = t.kalman.mean.copy()
                mean[4:6] = (flow.dx, flow.dy)
                t = replace(t, kalman=KalmanTrackState(mean, t.kalman.covariance))
            moved.append(t)
        self.tracks = moved

    def _carry(self, shift: float) -> None:
        # live tracks rode the belt while tracking was paused
        if not shift:
            return
        ax, ay = self.cfg.forward_axis
        moved = []
        for t in self.tracks:
            mean = t.kalman.mean.copy()
            mean[0] += shift * ax
            mean[1] += shift * ay
            moved.append(replace(t, kalman=KalmanTrackState(mean, t.kalman.covariance)))
        self.tracks = moved

    def _start_suppression(self, have_flow: bool) -> None:
        edge = self.cfg.exit_edge()
        if not self.gating or not self._any_exit or edge is None:
            return
        if have_flow:
            if self._reverse_shift < 0:
                self._boundary = edge + self._reverse_shift
                self._window = -1
        else:
            positions = [
                self.cfg.project(t.bbox.cx, t.bbox.cy) for t in self.tracks
            ]
            self._boundary = max(positions) if positions else None
            self._window = self.cfg.max_frames_lost if positions else 0

    def _filter(self, detections, along):
        if self._boundary is None:
            return list(detections)
        if self._window == -1:
            if along is not None:
                self._boundary += along
            if self._boundary >= self.cfg.exit_edge():
                self._boundary = None
                return list(detections)
        else:
            if self._window <= 0:
                self._boundary = None
                return list(detections)
            self._window -= 1
        keep = []
        for d in detections:
            if self.cfg.project(d.bbox.cx, d.bbox.cy) > self._boundary:
                self.suppressed += 1
            else:
                keep.append(d)
        return keep

    def finish(self) -> list[Track]:
        """Finalize every live track and return all finalized tracks by ID."""
        self.finalized.extend(finalize(t) for t in self.tracks)
        self.tracks = []
        return sorted(self.finalized, key=lambda t: t.track_id)


BeltInput = Union[Mapping[int, BeltState], Sequence[BeltState], None]


def _lookup(source, frame, default):
    if source is None:
        return default
    if isinstance(source, Mapping):
        return source.get(frame, default)
    return source[frame] if 0 <= frame < len(source) else default


def run_tracker(
    stream: Iterable[tuple[int, Sequence[Detection]]],
    belt_states: BeltInput = None,
    cfg: TrackerConfig = TrackerConfig(),
    flows=None,
    gating: bool = True,
) -> list[Track]:
    """Track a whole frame-grouped detection stream; returns finalized tracks.

    ``belt_states`` and ``flows`` are indexed by frame (mapping or list).
    Frames that appear only there, with no detections, are still stepped.
    """
    grouped = list(stream)
    frames = [f for f, _ in grouped]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ContractError("detection stream frames must be strictly increasing")
    by_frame = dict(grouped)
    all_frames = set(frames)
    for src in (belt_states, flows):
        if isinstance(src, Mapping):
            all_frames.update(src)
        elif src is not None:
            all_frames.update(range(len(src)))
    tracker = ByteTracker(cfg, gating=gating)
    for f in sorted(all_frames):
        tracker.update(
            f, by_frame.get(f, ()),
            _lookup(belt_states, f, BeltState.FORWARD),
            _lookup(flows, f, None),
        )
    return tracker.finish()
