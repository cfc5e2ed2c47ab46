import csv
import io

import pytest

from catchcomp.cli import main
from catchcomp.io import read_composition_csv, read_truth_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_agreement_command(capsys):
    code, out, _ = run(capsys, "agreement", "--min-experts", "4", "--decimals", "1")
    assert code == 0
    got = {r["species"]: r for r in rows(out)}
    assert (got["BET"]["mean_pct"], got["BET"]["sd_pct"]) == ("42.9", "35.6")
    assert (got["YFT"]["mean_pct"], got["YFT"]["sd_pct"]) == ("57.1", "35.6")
    assert got["BET"]["unanimous"] == "104" and got["YFT"]["unanimous"] == "045"


def test_evaluate_composition_second_trip(capsys):
    code, out, _ = run(capsys, "evaluate-composition", "--method", "hierarchical",
                       "--group", "2", "--decimals", "1")
    assert code == 0
    bet = [r for r in rows(out) if r["species"] == "BET"][0]
    assert (bet["mae"], bet["sd"]) == ("2.1", "2.1")


def test_simulate_track_compose_pipeline(tmp_path, capsys):
    det, tracks, comp, truth = (tmp_path / n for n in ("d.jsonl", "t.csv", "c.csv", "gt.csv"))
    assert main(["simulate", "--seed", "7", "--output", str(det), "--truth", str(truth)]) == 0
    assert main(["track", "--input", str(det), "--output", str(tracks)]) == 0
    assert main(["compose", "--input", str(tracks), "--output", str(comp)]) == 0
    est = read_composition_csv(comp)[0]
    gt = read_truth_csv(truth)[0]
    assert est.counts == gt.counts
    assert est.percentages == gt.composition()
    capsys.readouterr()
    code, out, _ = run(capsys, "compose", "--input", str(tracks), "--decimals", "1")
    assert code == 0
    assert all(len(r["percentage"].split(".")[1]) == 1 for r in rows(out))


def test_cli_is_byte_deterministic(tmp_path):
    outs = []
    for k in range(2):
        det, tr = tmp_path / f"d{k}.jsonl", tmp_path / f"t{k}.csv"
        main(["simulate", "--seed", "3", "--output", str(det)])
        main(["track", "--input", str(det), "--output", str(tr)])
        outs.append((det.read_bytes(), tr.read_bytes()))
    assert outs[0] == outs[1]


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["compose", "--method", "vote"])
    assert err.value.code == 2
    assert main(["track"]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"format": "catchcomp-detections", "version": 9, "frame_width": 1, '
                   '"frame_height": 1}\n')
    assert main(["track", "--input", str(bad)]) == 3
    assert main(["agreement", "--min-experts", "10"]) == 4
    assert main(["agreement", "--config", str(tmp_path / "missing.ini")]) == 3
    capsys.readouterr()


def test_evaluate_detections_perfect(tmp_path, capsys):
    det = tmp_path / "d.jsonl"
    main(["simulate", "--seed", "2", "--output", str(det)])
    code, out, _ = run(capsys, "evaluate-detections", "--input", str(det),
                       "--ground-truth", str(det))
    assert code == 0
    summary = {(r["iou_kind"], r["iou_threshold"]): float(r["value"]) for r in rows(out)}
    assert summary[("box", "mean")] == 1.0
    assert summary[("box", "recall@0.5")] == 1.0


def test_segmentation_comparison(capsys):
    from catchcomp.io import fixture_path

    code, out, _ = run(capsys, "evaluate-composition", "--compare",
                       str(fixture_path("supp_table_b_maskrcnn.csv")))
    assert code == 0
    got = {r["group"]: r for r in rows(out)}
    assert float(got["all"]["p_value"]) < 0.01
    assert got["all"]["marker"] == "‡"


def test_kfold_command(tmp_path, capsys):
    src = tmp_path / "labels.csv"
    src.write_text("label\n" + "\n".join(["a"] * 5 + ["b"] * 5) + "\n")
    code, out, _ = run(capsys, "kfold", "--input", str(src), "--repeats", "2", "--seed", "1")
    assert code == 0
    got = rows(out)
    assert len(got) == 20
    for rep in ("0", "1"):
        assert sorted(int(r["index"]) for r in got if r["repeat"] == rep) == list(range(10))


def test_report_writes_deterministic_svgs(tmp_path, capsys):
    det = tmp_path / "d.jsonl"
    main(["simulate", "--seed", "2", "--output", str(det)])
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["report", "--output", str(out), "--predictions", str(det),
                     "--ground-truth", str(det)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert {"composition_mae.csv", "composition_bars_1.svg", "composition_bars_2.svg",
            "pr_curves_box.svg"} <= set(outs[0])
    capsys.readouterr()
