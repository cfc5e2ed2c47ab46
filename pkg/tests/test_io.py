import json

import pytest

from catchcomp.compose import estimate_composition
from catchcomp.core import LEAVES, BBox, Detection, Label
from catchcomp.io import (
    ConfigError,
    DetectionHeader,
    DetectionStream,
    ParseError,
    RunConfig,
    emit_detections_text,
    fixture_path,
    load_composition_table,
    load_expert_matrix,
    parse_config_text,
    parse_detections,
    parse_detections_text,
    read_composition_csv,
    read_tracks_csv,
    read_truth_csv,
    scenario_stream,
    write_composition_csv,
    write_tracks_csv,
    write_truth_csv,
)
from catchcomp.sim import SimConfig, StopEvent, generate_scenario
from catchcomp.tracker import TrackerConfig, run_tracker

HEADER = {"format": "catchcomp-detections", "version": 1, "frame_width": 64,
          "frame_height": 32, "fps": 30.0, "afo_id": "t"}


def lines(*records, header=HEADER):
    return [json.dumps(header)] + [json.dumps(r) for r in records]


def test_header_only_is_empty_stream():
    s = parse_detections_text(lines())
    assert s.header == DetectionHeader(64, 32, 30.0, "t")
    assert s.frames == [] and s.flows == {}


def test_bad_confidence_names_line():
    recs = [{"frame": 0, "bbox": [0, 0, 5, 5], "confidence": 0.5},
            {"frame": 1, "bbox": [0, 0, 5, 5], "confidence": 1.3}]
    with pytest.raises(ParseError) as err:
        parse_detections_text(lines(*recs))
    assert err.value.line == 3
    assert ":3:" in str(err.value)


@pytest.mark.parametrize("records,header", [
    ([{"frame": 2, "bbox": [0, 0, 5, 5], "confidence": .5},
      {"frame": 1, "bbox": [0, 0, 5, 5], "confidence": .5}], HEADER),
    ([], {**HEADER, "version": 2}),
    ([{"frame": 0, "bbox": [0, 0, 5, 5], "confidence": .5, "color": "red"}], HEADER),
    ([{"frame": 0, "bbox": [0, 0, 5, 5], "confidence": .5,
       "class_scores": {"BET": 1.5, "SKJ": 0, "YFT": 0, "NO_TARGET": 0}}], HEADER),
    ([{"frame": 0, "bbox": [0, 0, 5, 5], "confidence": .5, "mask": {"counts": [3]}}], HEADER),
    ([{"frame": 0, "flow": [1, 0]}, {"frame": 0, "flow": [2, 0]}], HEADER),
    ([{"frame": 0}], HEADER),
])
def test_schema_violations(records, header):
    with pytest.raises(ParseError):
        parse_detections_text(lines(*records, header=header))


def test_invalid_json_and_missing_header():
    with pytest.raises(ParseError):
        parse_detections_text([json.dumps(HEADER), "{not json"])
    with pytest.raises(ParseError):
        parse_detections_text([])


def test_class_scores_renormalized_on_ingest():
    rec = {"frame": 0, "bbox": [0, 0, 5, 5], "confidence": .5,
           "class_scores": {"BET": .2, "SKJ": .2, "YFT": .4, "NO_TARGET": 0}}
    d = parse_detections_text(lines(rec)).detections()[0]
    assert d.class_scores.YFT == 0.5


def test_simulator_dump_round_trip(tmp_path):
    cfg = SimConfig(seed=4, miss_prob=.2, false_positive_rate=.3, box_noise_sd=1.5,
                    emit_masks=True, fish_count={"BET": 1, "SKJ": 2},
                    stop_events=(StopEvent(40, 6, reverse=True),))
    original = scenario_stream(generate_scenario(cfg))
    path = tmp_path / "d.jsonl"
    path.write_text(emit_detections_text(original))
    back = parse_detections(path)
    assert back == original
    assert emit_detections_text(back) == path.read_text()


def test_manual_stream_round_trip():
    s = DetectionStream(DetectionHeader(10, 10, 25.0, "m"),
                        [(3, [Detection(3, BBox(0.1, 0.2, 3.3, 4.4), 0.123456789)])], {})
    assert parse_detections_text(emit_detections_text(s).splitlines()) == s


def test_config_parsing():
    cfg = parse_config_text("""
[tracker]
tau_high = 0.7
max_frames_lost = 12
frame_size = 320, 240
[aggregation]
method = hierarchical
confidence_weighted = yes
[simulator]
fish_count = BET:1, SKJ:2
stop_events = 10:5; 30:4:reverse
""")
    assert cfg.tracker.tau_high == 0.7 and cfg.tracker.max_frames_lost == 12
    assert cfg.tracker.frame_size == (320, 240)
    assert cfg.aggregation.method == "hierarchical" and cfg.aggregation.confidence_weighted
    assert cfg.simulator.fish_count[Label.SKJ] == 2
    assert cfg.simulator.stop_events == (StopEvent(10, 5), StopEvent(30, 4, True))
    assert cfg.motion == RunConfig().motion


@pytest.mark.parametrize("text", [
    "[tracker]\ntau_hgih = 0.7\n",
    "[trakcer]\ntau_high = 0.7\n",
    "[tracker]\ntau_high = abc\n",
    "[tracker]\ntau_high = 0.05\ntau_low = 0.1\n",
    "[aggregation]\nmethod = vote\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_fixture_override(tmp_path, monkeypatch):
    (tmp_path / "supp_table_d_experts.csv").write_text("fish_id,e1,e2\n001,BET,BET\n")
    monkeypatch.setenv("CATCHCOMP_FIXTURES", str(tmp_path))
    m = load_expert_matrix(fixture_path("supp_table_d_experts.csv"))
    assert m.fish_ids == ("001",)


def test_shipped_fixtures_load():
    c = load_composition_table(fixture_path("supp_table_c_yolov9_sam2.csv"))
    assert len(c.truths) == 21
    assert c.segmented["1_01"] == 67.0
    m = load_expert_matrix(fixture_path("supp_table_d_experts.csv"))
    assert len(m.fish_ids) == 257 and len(m.expert_ids) == 9


def test_tracks_csv_round_trip(tmp_path):
    sc = generate_scenario(SimConfig(seed=3))
    tracks = run_tracker(sc.frames, sc.belt_states, TrackerConfig(frame_size=(640, 360)))
    path = tmp_path / "t.csv"
    write_tracks_csv(tracks, "sim", path)
    afo, back = read_tracks_csv(path)
    assert afo == "sim"
    assert [t.track_id for t in back] == [t.track_id for t in tracks]
    for a, b in zip(tracks, back):
        assert a.score_history == b.score_history


def test_composition_and_truth_round_trip(tmp_path):
    est = estimate_composition([Label.SKJ] * 3 + [Label.BET], "x", gt_total=3)
    p = tmp_path / "c.csv"
    write_composition_csv([est], p)
    assert read_composition_csv(p) == [est]
    t = tmp_path / "t.csv"
    gt = generate_scenario(SimConfig(seed=0)).truth.ground_truth
    write_truth_csv([gt], t)
    assert read_truth_csv(t) == [gt]
    assert [leaf.value for leaf in LEAVES] == ["BET", "SKJ", "YFT", "NO_TARGET"]
