"""Seeded synthetic conveyor-belt scenarios with exact ground truth.

All randomness comes from numpy's PCG64 bit generator seeded with the
integer ``SimConfig.seed``; draws happen in a fixed order so a seed fully
determines the scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .core import (
    LEAVES,
    BBox,
    BitMask,
    ClassScores,
    ContractError,
    Detection,
    GroundTruthOperation,
    Label,
)
from .motion import BeltState, FlowVector, MotionConfig, classify_belt_state


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class StopEvent:
    start: int
    duration: int
    reverse: bool = False


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    belt_speed: float = 6.0
    frame_size: tuple[int, int] = (640, 360)
    fish_count: Mapping[Label, int] = field(
        default_factory=lambda: {Label.BET: 2, Label.SKJ: 6, Label.YFT: 3, Label.NO_TARGET: 1}
    )
    spawn_spacing: int = 30
    fish_length: tuple[float, float] = (60.0, 120.0)
    fish_aspect: tuple[float, float] = (0.3, 0.45)
    stop_events: tuple[StopEvent, ...] = ()
    miss_prob: float = 0.0
    false_positive_rate: float = 0.0
    confidence_floor: float = 0.6
    confidence_beta: tuple[float, float] = (5.0, 1.5)
    fp_confidence_max: float = 0.5
    classifier_confusion: tuple[tuple[float, ...], ...] = tuple(
        tuple(1.0 if i == j else 0.0 for j in range(4)) for i in range(4)
    )
    score_peak: tuple[float, float] = (0.6, 0.95)
    jitter_sd: float = 0.0
    box_noise_sd: float = 0.0
    min_visible: float = 0.5
    tail_frames: int = 5
    emit_masks: bool = False
    fps: float = 30.0
    afo_id: str = "sim"

    def __post_init__(self):
        counts = {Label(k): int(v) for k, v in self.fish_count.items()}
        if any(not Label(k).is_leaf for k in counts) or any(v < 0 for v in counts.values()):
            raise ContractError("fish_count must map leaf labels to nonnegative integers")
        object.__setattr__(self, "fish_count", {leaf: counts.get(leaf, 0) for leaf in LEAVES})
        events = tuple(e if isinstance(e, StopEvent) else StopEvent(*e) for e in self.stop_events)
        object.__setattr__(self, "stop_events", events)
        for name in ("miss_prob", "min_visible", "confidence_floor", "fp_confidence_max"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ContractError(f"{name}={v} must lie in [0, 1]")
        if self.false_positive_rate < 0 or self.jitter_sd < 0 or self.box_noise_sd < 0:
            raise ContractError("rates and noise levels must be nonnegative")
        conf = np.asarray(self.classifier_confusion, dtype=float)
        if conf.shape != (4, 4) or (conf < 0).any() or not np.allclose(conf.sum(axis=1), 1.0):
            raise ContractError("classifier_confusion must be a row-stochastic 4x4 matrix")
        object.__setattr__(
            self, "classifier_confusion", tuple(tuple(float(v) for v in row) for row in conf)
        )
        lo, hi = self.score_peak
        if not (0.5 < lo <= hi <= 1.0):
            raise ContractError("score_peak must satisfy 0.5 < low <= high <= 1")
        w, h = self.frame_size
        if self.fish_length[1] > w or self.fish_length[1] * self.fish_aspect[1] > h:
            raise ContractError("fish larger than the frame")
        if self.belt_speed <= 0:
            raise ContractError("belt_speed must be positive")


@dataclass
class FishTruth:
    fish_id: int
    species: Label
    perceived: Label
    length: float
    height: float
    boxes: dict[int, BBox] = field(default_factory=dict)

    @property
    def entry_frame(self) -> Optional[int]:
        return min(self.boxes) if self.boxes else None

    @property
    def exit_frame(self) -> Optional[int]:
        return max(self.boxes) if self.boxes else None


@dataclass
class SimTruth:
    fish: list[FishTruth]
    ground_truth: GroundTruthOperation
    belt_offsets: list[float]
    detection_owner: dict[tuple[int, int], Optional[int]]


@dataclass
class Scenario:
    config: SimConfig
    frames: list[tuple[int, list[Detection]]]
    flows: list[FlowVector]
    belt_states: list[BeltState]
    truth: SimTruth

    @property
    def header(self) -> dict:
        w, h = self.config.frame_size
        return {"frame_width": w, "frame_height": h, "fps": self.config.fps,
                "afo_id": self.config.afo_id}

    def detection_count(self) -> int:
        return sum(len(d) for _, d in self.frames)


def belt_velocity(cfg: SimConfig, frame: int) -> float:
    v = cfg.belt_speed
    for e in cfg.stop_events:
        if e.start <= frame < e.start + e.duration:
            return -cfg.belt_speed if e.reverse else 0.0
    return v


def _ellipse_mask(box: BBox, clip: BBox, width: int, height: int) -> BitMask:
    bits = np.zeros((height, width), dtype=bool)
    r0, r1 = int(math.floor(clip.y)), int(math.ceil(clip.y2))
    c0, c1 = int(math.floor(clip.x)), int(math.ceil(clip.x2))
    yy, xx = np.mgrid[r0:r1, c0:c1]
    inside = ((xx + 0.5 - box.cx) / (box.w / 2)) ** 2 + ((yy + 0.5 - box.cy) / (box.h / 2)) ** 2 <= 1
    bits[r0:r1, c0:c1] = inside
    if not bits.any():
        bits[min(int(clip.cy), height - 1), min(int(clip.cx), width - 1)] = True
    return BitMask(width, height, bits)


def _scores(rng, label: Label, cfg: SimConfig) -> ClassScores:
    peak = rng.uniform(*cfg.score_peak)
    rest = rng.dirichlet(np.ones(3)) * (1.0 - peak)
    vals = np.empty(4)
    k = LEAVES.index(label)
    vals[k] = peak
    vals[[i for i in range(4) if i != k]] = rest
    return ClassScores.from_array(vals)


def generate_scenario(cfg: SimConfig = SimConfig()) -> Scenario:
    """Simulate fish crossing the belt and the detector output for each frame."""
    rng = make_rng(cfg.seed)
    width, height = cfg.frame_size
    mcfg = MotionConfig()

    species = [leaf for leaf in LEAVES for _ in range(cfg.fish_count[leaf])]
    order = rng.permutation(len(species))
    species = [species[i] for i in order]
    conf = np.asarray(cfg.classifier_confusion)
    spacing = cfg.spawn_spacing * cfg.belt_speed

    fish: list[FishTruth] = []
    belt_pos = []
    lateral = []
    for i, sp in enumerate(species):
        length = rng.uniform(*cfg.fish_length)
        h = length * rng.uniform(*cfg.fish_aspect)
        y = rng.uniform(0.0, height - h)
        perceived = LEAVES[int(rng.choice(4, p=conf[LEAVES.index(sp)]))]
        fish.append(FishTruth(i, sp, perceived, length, h))
        belt_pos.append(-i * spacing - length)
        lateral.append(y)
    belt_pos = np.array(belt_pos)
    lateral = np.array(lateral)
    drift = np.zeros((len(fish), 2))

    frames: list[tuple[int, list[Detection]]] = []
    flows: list[FlowVector] = []
    offsets: list[float] = []
    owner: dict[tuple[int, int], Optional[int]] = {}
    offset = 0.0
    t = 0
    tail = 0
    # Hard cap guards against configurations where the belt never clears.
    limit = 50_000
    while t < limit:
        v = belt_velocity(cfg, t)
        if t > 0:
            offset += v
        flows.append(FlowVector(v, 0.0))
        offsets.append(offset)
        if cfg.jitter_sd > 0 and t > 0:
            drift += rng.normal(0.0, cfg.jitter_sd, size=drift.shape)
        dets: list[Detection] = []
        for f, x0, y0, (jx, jy) in zip(fish, belt_pos, lateral, drift):
            y = min(max(y0 + jy, 0.0), height - f.height)
            box = BBox(x0 + offset + jx, y, f.length, f.height)
            clip = box.clip(width, height)
            if clip is None or clip.area < cfg.min_visible * box.area:
                continue
            f.boxes[t] = clip
            if cfg.miss_prob > 0 and rng.random() < cfg.miss_prob:
                continue
            out = clip
            if cfg.box_noise_sd > 0:
                nx, ny, nw, nh = rng.normal(0.0, cfg.box_noise_sd, 4)
                out = BBox(clip.x + nx, clip.y + ny, max(clip.w + nw, 2.0), max(clip.h + nh, 2.0))
            c = cfg.confidence_floor + (1 - cfg.confidence_floor) * rng.beta(*cfg.confidence_beta)
            scores = _scores(rng, f.perceived, cfg)
            mask = _ellipse_mask(box, clip, width, height) if cfg.emit_masks else None
            owner[(t, len(dets))] = f.fish_id
            dets.append(Detection(t, out, float(c), mask, scores, scores.to_stage_scores()))
        n_fp = rng.poisson(cfg.false_positive_rate) if cfg.false_positive_rate > 0 else 0
        for _ in range(n_fp):
            w_, h_ = rng.uniform(20, 60), rng.uniform(10, 30)
            box = BBox(rng.uniform(0, width - w_), rng.uniform(0, height - h_), w_, h_)
            c = rng.uniform(0.01, cfg.fp_confidence_max)
            scores = ClassScores.from_array(rng.dirichlet(np.ones(4)))
            mask = _ellipse_mask(box, box, width, height) if cfg.emit_masks else None
            owner[(t, len(dets))] = None
            dets.append(Detection(t, box, float(c), mask, scores, scores.to_stage_scores()))
        frames.append((t, dets))

        trailing = belt_pos + offset + drift[:, 0]
        if len(fish) == 0 or trailing.min() > width:
            tail += 1
            if tail > cfg.tail_frames:
                break
        else:
            tail = 0
        t += 1
    else:
        raise ContractError("scenario did not finish; check stop events and belt speed")

    states = [classify_belt_state(f, mcfg) for f in flows]
    gt = GroundTruthOperation(cfg.afo_id, dict(cfg.fish_count)) if fish else None
    truth = SimTruth(fish, gt, offsets, owner)
    return Scenario(cfg, frames, flows, states, truth)


def belt_texture(seed: int, period: int = 128, height: int = 360) -> np.ndarray:
    """Random periodic belt texture, ``period`` pixels wide."""
    rng = make_rng(seed)
    return rng.integers(0, 256, size=(height, period)).astype(np.uint8)


def render_frame(scenario: Scenario, frame: int, texture: Optional[np.ndarray] = None) -> np.ndarray:
    """Grayscale image of the belt (shifted texture) with fish drawn as bright ellipses."""
    width, height = scenario.config.frame_size
    if texture is None:
        texture = belt_texture(scenario.config.seed, height=height)
    period = texture.shape[1]
    shift = int(round(scenario.truth.belt_offsets[frame]))
    cols = (np.arange(width) - shift) % period
    img = texture[:height][:, cols].copy()
    for f in scenario.truth.fish:
        box = f.boxes.get(frame)
        if box is None:
            continue
        m = _ellipse_mask(box, box, width, height)
        img[m.bits] = 230
    return img


def end_to_end_error(
    cfg: SimConfig = SimConfig(),
    tracker_cfg=None,
    method: str = "flat",
    gating: bool = True,
) -> dict[Label, float]:
    """Per-species absolute composition error (percentage points) of the full pipeline."""
    from .aggregate import label_all
    from .compose import estimate_composition
    from .tracker import TrackerConfig, run_tracker

    scenario = generate_scenario(cfg)
    tcfg = tracker_cfg or TrackerConfig(frame_size=cfg.frame_size)
    tracks = run_tracker(scenario.frames, scenario.belt_states, tcfg,
                         flows=scenario.flows, gating=gating)
    labels = label_all(tracks, method, min_hits=tcfg.tentative_min_hits)
    est = estimate_composition(labels, cfg.afo_id)
    truth = scenario.truth.ground_truth.composition()
    return {leaf: abs(est.percentages[leaf] - truth[leaf]) for leaf in LEAVES}


def expected_composition(cfg: SimConfig) -> dict[Label, float]:
    """Expected predicted composition when each fish is labeled through the confusion matrix."""
    counts = np.array([cfg.fish_count[leaf] for leaf in LEAVES], dtype=float)
    pred = counts @ np.asarray(cfg.classifier_confusion)
    return {leaf: 100.0 * p / counts.sum() for leaf, p in zip(LEAVES, pred)}
