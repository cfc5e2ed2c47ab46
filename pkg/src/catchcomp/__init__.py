"""Per-operation catch composition from per-frame fish detections."""

from .aggregate import Method, TrackLabel, aggregate_flat, aggregate_hierarchical, label_all
from .compose import CompositionEstimate, best_method_table, estimate_composition, species_mae
from .core import (
    LEAVES,
    Annotation,
    BBox,
    BitMask,
    CatchCompError,
    ClassScores,
    ContractError,
    Detection,
    GroundTruthOperation,
    Label,
    StageScores,
    iou_box,
    iou_mask,
)
from .motion import BeltState, FlowVector, MotionConfig, classify_belt_state, estimate_flow
from .sim import SimConfig, StopEvent, generate_scenario
from .tracker import ByteTracker, Lifecycle, Track, TrackerConfig, bytetrack_step, run_tracker

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "BBox",
    "BeltState",
    "BitMask",
    "ByteTracker",
    "CatchCompError",
    "ClassScores",
    "CompositionEstimate",
    "ContractError",
    "Detection",
    "FlowVector",
    "GroundTruthOperation",
    "LEAVES",
    "Label",
    "Lifecycle",
    "Method",
    "MotionConfig",
    "SimConfig",
    "StageScores",
    "StopEvent",
    "Track",
    "TrackLabel",
    "TrackerConfig",
    "aggregate_flat",
    "aggregate_hierarchical",
    "best_method_table",
    "bytetrack_step",
    "classify_belt_state",
    "estimate_composition",
    "estimate_flow",
    "generate_scenario",
    "iou_box",
    "iou_mask",
    "label_all",
    "run_tracker",
    "species_mae",
]
