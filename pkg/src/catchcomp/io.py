"""Detection files, run configuration, shipped fixtures and CSV reports.

Detection files are JSON Lines. The first line is a header object; every
following line is one record. See ``docs/detection_format.md``.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io as _io
import json
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .core import (
    LEAVES,
    BBox,
    BitMask,
    CatchCompError,
    ClassScores,
    ContractError,
    Detection,
    GroundTruthOperation,
    Label,
    StageScores,
)
from .motion import FlowVector, MotionConfig
from .sim import SimConfig, StopEvent
from .tracker import Lifecycle, Observation, TrackerConfig

FORMAT_NAME = "catchcomp-detections"
FORMAT_VERSION = 1
FIXTURE_ENV = "CATCHCOMP_FIXTURES"


class ParseError(CatchCompError):
    def __init__(self, message: str, line: Optional[int] = None, path=None):
        where = f"{path or '<input>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line


class ConfigError(CatchCompError):
    pass


# -- detection files ---------------------------------------------------------


@dataclass(frozen=True)
class DetectionHeader:
    frame_width: int
    frame_height: int
    fps: float = 30.0
    afo_id: str = ""
    version: int = FORMAT_VERSION


@dataclass
class DetectionStream:
    header: DetectionHeader
    frames: list[tuple[int, list[Detection]]] = field(default_factory=list)
    flows: dict[int, FlowVector] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, DetectionStream):
            return NotImplemented
        return (
            self.header == other.header
            and [(f, list(d)) for f, d in self.frames] == [(f, list(d)) for f, d in other.frames]
            and self.flows == other.flows
        )

    def detections(self) -> list[Detection]:
        return [d for _, dets in self.frames for d in dets]

    def frame_range(self) -> range:
        frames = [f for f, _ in self.frames] + list(self.flows)
        return range(0) if not frames else range(min(frames), max(frames) + 1)


_HEADER_KEYS = {"format", "version", "frame_width", "frame_height", "fps", "afo_id"}
_RECORD_KEYS = {"frame", "bbox", "confidence", "mask", "class_scores", "stage_scores", "flow"}


@contextmanager
def _open_text(path, mode: str):
    if path is None or str(path) == "-":
        stream = sys.stdin if "r" in mode else sys.stdout
        yield stream
        if "w" in mode:
            stream.flush()
    else:
        with open(path, mode, encoding="utf-8", newline="" if "w" in mode else None) as fh:
            yield fh


def _number(value, what, line, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what} must be a number", line, path)
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite", line, path)
    return float(value)


def _parse_header(obj, path) -> DetectionHeader:
    if not isinstance(obj, dict):
        raise ParseError("header must be a JSON object", 1, path)
    unknown = set(obj) - _HEADER_KEYS
    if unknown:
        raise ParseError(f"unknown header keys {sorted(unknown)}", 1, path)
    if obj.get("format") != FORMAT_NAME:
        raise ParseError(f"not a {FORMAT_NAME} file", 1, path)
    if obj.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported schema version {obj.get('version')!r}", 1, path)
    try:
        w, h = int(obj["frame_width"]), int(obj["frame_height"])
    except (KeyError, TypeError, ValueError):
        raise ParseError("header needs integer frame_width and frame_height", 1, path)
    if w <= 0 or h <= 0:
        raise ParseError("frame size must be positive", 1, path)
    fps = _number(obj.get("fps", 30.0), "fps", 1, path)
    return DetectionHeader(w, h, fps, str(obj.get("afo_id", "")))


def _parse_record(obj, header: DetectionHeader, line: int, path):
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", line, path)
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise ParseError(f"unknown record keys {sorted(unknown)}", line, path)
    frame = obj.get("frame")
    if isinstance(frame, bool) or not isinstance(frame, int) or frame < 0:
        raise ParseError("frame must be a nonnegative integer", line, path)
    flow = None
    if "flow" in obj:
        f = obj["flow"]
        if not isinstance(f, list) or len(f) != 2:
            raise ParseError("flow must be [dx, dy]", line, path)
        flow = FlowVector(_number(f[0], "flow dx", line, path), _number(f[1], "flow dy", line, path))
    if "bbox" not in obj:
        extra = set(obj) - {"frame", "flow"}
        if extra:
            raise ParseError(f"record without bbox cannot carry {sorted(extra)}", line, path)
        if flow is None:
            raise ParseError("record needs a bbox or a flow", line, path)
        return frame, None, flow
    b = obj["bbox"]
    if not isinstance(b, list) or len(b) != 4:
        raise ParseError("bbox must be [x, y, w, h]", line, path)
    try:
        bbox = BBox(*(_number(v, "bbox", line, path) for v in b))
    except ContractError as exc:
        raise ParseError(str(exc), line, path)
    if "confidence" not in obj:
        raise ParseError("detection record needs a confidence", line, path)
    conf = _number(obj["confidence"], "confidence", line, path)
    if not 0.0 <= conf <= 1.0:
        raise ParseError(f"confidence {conf} outside [0, 1]", line, path)
    try:
        mask = None
        if "mask" in obj:
            m = obj["mask"]
            if not isinstance(m, dict) or set(m) - {"size", "counts"} or "counts" not in m:
                raise ParseError("mask must be {\"size\": [w, h], \"counts\": [...]}", line, path)
            w, h = m.get("size", [header.frame_width, header.frame_height])
            mask = BitMask.from_rle(int(w), int(h), m["counts"])
        cs = None
        if "class_scores" in obj:
            raw = obj["class_scores"]
            if not isinstance(raw, dict):
                raise ParseError("class_scores must be an object", line, path)
            cs = ClassScores.from_mapping(
                {k: _number(v, f"class score {k}", line, path) for k, v in raw.items()}
            )
        ss = None
        if "stage_scores" in obj:
            raw = obj["stage_scores"]
            keys = {"s1_target", "s2_skj", "s3_bet"}
            if not isinstance(raw, dict) or set(raw) != keys:
                raise ParseError(f"stage_scores must have keys {sorted(keys)}", line, path)
            ss = StageScores(**{k: _number(v, k, line, path) for k, v in raw.items()})
        det = Detection(frame, bbox, conf, mask, cs, ss)
    except ContractError as exc:
        raise ParseError(str(exc), line, path)
    return frame, det, flow


def parse_detections_text(lines: Iterable[str], path=None) -> DetectionStream:
    it = iter(lines)
    header = None
    frames: dict[int, list[Detection]] = {}
    flows: dict[int, FlowVector] = {}
    last = -1
    for lineno, text in enumerate(it, start=1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno, path)
        if header is None:
            header = _parse_header(obj, path)
            continue
        frame, det, flow = _parse_record(obj, header, lineno, path)
        if frame < last:
            raise ParseError(f"frame {frame} after frame {last}; frames must not decrease", lineno, path)
        last = frame
        frames.setdefault(frame, [])
        if det is not None:
            frames[frame].append(det)
        if flow is not None:
            if frame in flows and flows[frame] != flow:
                raise ParseError(f"conflicting flow for frame {frame}", lineno, path)
            flows[frame] = flow
    if header is None:
        raise ParseError("missing header line", 1, path)
    return DetectionStream(header, sorted(frames.items()), flows)


def parse_detections(path) -> DetectionStream:
    """Read and validate a detection file (``-`` reads stdin)."""
    with _open_text(path, "r") as fh:
        return parse_detections_text(fh, None if path in (None, "-") else path)


def _detection_record(det: Detection, header: DetectionHeader) -> dict:
    rec = {"frame": det.frame_index, "bbox": det.bbox.as_list(), "confidence": det.confidence}
    if det.mask is not None:
        rec["mask"] = {"size": [det.mask.width, det.mask.height], "counts": det.mask.to_rle()}
    if det.class_scores is not None:
        rec["class_scores"] = det.class_scores.as_dict()
    if det.stage_scores is not None:
        rec["stage_scores"] = det.stage_scores.as_dict()
    return rec


def emit_detections_text(stream: DetectionStream) -> str:
    h = stream.header
    out = [json.dumps({
        "format": FORMAT_NAME, "version": FORMAT_VERSION, "frame_width": h.frame_width,
        "frame_height": h.frame_height, "fps": h.fps, "afo_id": h.afo_id,
    })]
    frames = dict(stream.frames)
    for f in sorted(set(frames) | set(stream.flows)):
        flow = stream.flows.get(f)
        dets = frames.get(f, [])
        if flow is not None or not dets:
            rec = {"frame": f}
            if flow is not None:
                rec["flow"] = [flow.dx, flow.dy]
            if flow is None:
                # empty frame with no flow: nothing to write
                continue
            out.append(json.dumps(rec))
        for d in dets:
            out.append(json.dumps(_detection_record(d, h)))
    return "\n".join(out) + "\n"


def write_detections(stream: DetectionStream, path) -> None:
    with _open_text(path, "w") as fh:
        fh.write(emit_detections_text(stream))


def scenario_stream(scenario) -> DetectionStream:
    """Detection stream (with per-frame flow) for a simulated scenario."""
    h = scenario.header
    header = DetectionHeader(h["frame_width"], h["frame_height"], float(h["fps"]), h["afo_id"])
    return DetectionStream(
        header,
        [(f, list(d)) for f, d in scenario.frames],
        {i: fl for i, fl in enumerate(scenario.flows)},
    )


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class AggregationConfig:
    method: str = "flat"
    confidence_weighted: bool = False
    threshold: float = 0.5

    def __post_init__(self):
        if self.method not in ("flat", "hierarchical"):
            raise ContractError(f"aggregation method must be flat or hierarchical, got {self.method!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ContractError("aggregation threshold must lie in [0, 1]")


@dataclass(frozen=True)
class RunConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    simulator: SimConfig = field(default_factory=SimConfig)


_SECTIONS = {
    "tracker": TrackerConfig,
    "motion": MotionConfig,
    "aggregation": AggregationConfig,
    "simulator": SimConfig,
}


def _parse_value(section: str, key: str, raw: str, default):
    raw = raw.strip()
    try:
        if key == "fish_count":
            out = {}
            for part in filter(None, (p.strip() for p in raw.split(","))):
                name, n = part.split(":")
                out[Label(name.strip())] = int(n)
            return out
        if key == "stop_events":
            events = []
            for part in filter(None, (p.strip() for p in raw.split(";"))):
                bits = [b.strip() for b in part.split(":")]
                rev = len(bits) > 2 and bits[2].lower() in ("1", "true", "yes", "reverse")
                events.append(StopEvent(int(bits[0]), int(bits[1]), rev))
            return tuple(events)
        if key == "classifier_confusion":
            return tuple(
                tuple(float(v) for v in row.split(",")) for row in raw.split(";") if row.strip()
            )
        if key == "frame_size":
            if raw.lower() in ("", "none"):
                return None
            return tuple(int(v) for v in raw.split(","))
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(","))
        return raw
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})")


def parse_config_text(text: str) -> RunConfig:
    """Parse an INI-style config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc))
    built = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        cls = _SECTIONS[section]
        defaults = cls()
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in parser.items(section):
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kwargs[key] = _parse_value(section, key, raw, getattr(defaults, key))
        try:
            built[section] = cls(**kwargs)
        except (ContractError, TypeError) as exc:
            raise ConfigError(f"[{section}] {exc}")
    return RunConfig(**built)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


# -- fixtures ----------------------------------------------------------------


def fixture_path(name: str) -> Path:
    """Path of a shipped fixture, honouring the ``CATCHCOMP_FIXTURES`` override."""
    override = os.environ.get(FIXTURE_ENV)
    if override:
        return Path(override) / name
    return Path(str(resources.files("catchcomp") / "fixtures" / name))


def _read_csv(path) -> list[dict]:
    with _open_text(path, "r") as fh:
        return list(csv.DictReader(fh))


@dataclass
class CompositionTable:
    """Per-operation ground truth and model percentages from a composition CSV."""

    truths: list[GroundTruthOperation]
    estimates: dict[str, list]
    segmented: dict[str, float]

    def trip(self, afo_id: str) -> str:
        return afo_id.split("_", 1)[0]


def load_composition_table(path) -> CompositionTable:
    from .compose import CompositionEstimate

    rows = _read_csv(path)
    truths, segmented = [], {}
    estimates = {"flat": [], "hierarchical": []}
    for lineno, row in enumerate(rows, start=2):
        try:
            afo = row["afo_id"]
            total = int(row["gt_total"])
            gt_pct = {leaf: float(row[f"{leaf.value}_gt"]) for leaf in LEAVES}
            counts = {leaf: int(round(total * gt_pct[leaf] / 100)) for leaf in LEAVES}
            truths.append(GroundTruthOperation(afo, counts, gt_pct))
            segmented[afo] = float(row["segmented_pct"])
            for method, suffix in (("flat", "flat"), ("hierarchical", "hier")):
                pct = {leaf: float(row[f"{leaf.value}_{suffix}"]) for leaf in LEAVES}
                estimates[method].append(CompositionEstimate(afo, None, pct, segmented[afo]))
        except (KeyError, ValueError, ContractError) as exc:
            raise ParseError(f"bad composition row ({exc})", lineno, path)
    return CompositionTable(truths, estimates, segmented)


def load_expert_matrix(path):
    from .stats.agreement import ExpertAnnotationMatrix

    with _open_text(path, "r") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns", lineno, path)
            for c in row[1:]:
                if c not in ("", "-", "BET", "YFT"):
                    raise ParseError(f"unexpected expert label {c!r}", lineno, path)
            rows[row[0]] = row[1:]
    try:
        return ExpertAnnotationMatrix.from_rows(rows, header[1:])
    except ContractError as exc:
        raise ParseError(str(exc), None, path)


def load_reference(name: str) -> list[dict]:
    return _read_csv(fixture_path(name))


# -- tracks and reports ------------------------------------------------------

TRACK_COLUMNS = ["afo_id", "track_id", "frame", "confidence"] + [l.value for l in LEAVES] + [
    "s1_target", "s2_skj", "s3_bet", "finalize_reason",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_tracks_csv(tracks, afo_id: str, path) -> None:
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for t in tracks:
            for o in t.score_history:
                cs = o.class_scores.as_dict() if o.class_scores else {}
                ss = o.stage_scores.as_dict() if o.stage_scores else {}
                w.writerow([afo_id, t.track_id, o.frame_index, _fmt(o.confidence)]
                           + [_fmt(cs.get(l.value)) for l in LEAVES]
                           + [_fmt(ss.get(k)) for k in ("s1_target", "s2_skj", "s3_bet")]
                           + [t.finalize_reason or ""])


@dataclass(frozen=True)
class TrackRecord:
    """A finalized track as read back from a tracks CSV."""

    track_id: int
    score_history: tuple[Observation, ...]
    finalize_reason: Optional[str] = None
    lifecycle: Lifecycle = Lifecycle.FINALIZED

    @property
    def hits(self) -> int:
        return len(self.score_history)


def read_tracks_csv(path) -> tuple[str, list[TrackRecord]]:
    rows = _read_csv(path)
    grouped: dict[int, list] = {}
    reasons = {}
    afo = ""
    for lineno, row in enumerate(rows, start=2):
        try:
            afo = row["afo_id"]
            tid = int(row["track_id"])
            cs = None
            if row["BET"] != "":
                cs = ClassScores.from_mapping({l.value: float(row[l.value]) for l in LEAVES})
            ss = None
            if row["s1_target"] != "":
                ss = StageScores(float(row["s1_target"]), float(row["s2_skj"]), float(row["s3_bet"]))
            grouped.setdefault(tid, []).append(
                Observation(int(row["frame"]), float(row["confidence"]), cs, ss))
            reasons[tid] = row.get("finalize_reason") or None
        except (KeyError, ValueError, ContractError) as exc:
            raise ParseError(f"bad track row ({exc})", lineno, path)
    return afo, [TrackRecord(t, tuple(obs), reasons[t]) for t, obs in sorted(grouped.items())]


COMPOSITION_COLUMNS = ["afo_id", "species", "count", "percentage", "segmented_fraction",
                       "over_segmented"]


def write_composition_csv(estimates, path, decimals: Optional[int] = None) -> None:
    def fmt(v):
        return _fmt(v if decimals is None or v is None else round(v, decimals))

    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPOSITION_COLUMNS)
        for est in estimates:
            for leaf in LEAVES:
                count = "" if est.counts is None else est.counts[leaf]
                w.writerow([est.afo_id, leaf.value, count, fmt(est.percentages[leaf]),
                            fmt(est.segmented_fraction), int(est.over_segmented)])


def read_composition_csv(path) -> list:
    from .compose import CompositionEstimate

    rows = _read_csv(path)
    by_afo: dict[str, dict] = {}
    for lineno, row in enumerate(rows, start=2):
        try:
            slot = by_afo.setdefault(row["afo_id"], {"counts": {}, "pct": {}, "frac": None})
            leaf = Label(row["species"])
            if row["count"] != "":
                slot["counts"][leaf] = int(row["count"])
            slot["pct"][leaf] = float(row["percentage"])
            slot["frac"] = float(row["segmented_fraction"]) if row["segmented_fraction"] else None
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad composition row ({exc})", lineno, path)
    return [
        CompositionEstimate(afo, s["counts"] or None, s["pct"], s["frac"])
        for afo, s in by_afo.items()
    ]


def write_rows_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> None:
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def rows_to_csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


TRUTH_COLUMNS = ["afo_id", "species", "count"]


def write_truth_csv(truths: Iterable[GroundTruthOperation], path) -> None:
    write_rows_csv(
        TRUTH_COLUMNS,
        ([gt.afo_id, leaf.value, gt.counts.get(leaf, 0)] for gt in truths for leaf in LEAVES),
        path,
    )


def read_truth_csv(path) -> list[GroundTruthOperation]:
    counts: dict[str, dict] = {}
    for lineno, row in enumerate(_read_csv(path), start=2):
        try:
            counts.setdefault(row["afo_id"], {})[Label(row["species"])] = int(row["count"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad truth row ({exc})", lineno, path)
    try:
        return [GroundTruthOperation(afo, c) for afo, c in counts.items()]
    except ContractError as exc:
        raise ParseError(str(exc), None, path)
