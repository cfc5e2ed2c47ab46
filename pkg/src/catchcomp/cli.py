"""Command-line entry point: ``catchcomp <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 unreadable or malformed input,
4 contract violation during a run.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import io as cio
from .aggregate import label_all
from .compose import (
    OVERALL,
    best_method_table,
    estimate_composition,
    segmentation_comparison,
    trip_of,
)
from .core import CatchCompError, ContractError
from .motion import states_from_flows
from .sim import generate_scenario
from .stats import coco_map, expert_agreement, repeated_stratified_kfold
from .tracker import counted_tracks, run_tracker

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONTRACT = 4


class UsageError(CatchCompError):
    pass


def _alpha_bands(text: str) -> tuple[float, ...]:
    try:
        bands = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if len(bands) != 3 or not all(0 < b < 1 for b in bands):
        raise argparse.ArgumentTypeError("need three alpha levels in (0, 1)")
    return bands


def _ddof(name: str) -> int:
    return {"population": 0, "sample": 1}[name]


def _r(v, decimals):
    return v if decimals is None or not isinstance(v, float) else round(v, decimals)


# -- commands ----------------------------------------------------------------


def cmd_simulate(args, cfg: cio.RunConfig) -> None:
    sim = cfg.simulator
    if args.seed is not None:
        sim = dataclasses.replace(sim, seed=args.seed)
    scenario = generate_scenario(sim)
    cio.write_detections(cio.scenario_stream(scenario), args.output)
    if args.truth:
        cio.write_truth_csv([scenario.truth.ground_truth], args.truth)


def _belt_states(stream: cio.DetectionStream, cfg: cio.RunConfig) -> dict:
    frames = sorted(stream.flows)
    states = states_from_flows([stream.flows[f] for f in frames], cfg.motion)
    return dict(zip(frames, states))


def cmd_track(args, cfg: cio.RunConfig) -> None:
    stream = cio.parse_detections(args.input)
    tcfg = cfg.tracker
    if tcfg.frame_size is None:
        tcfg = dataclasses.replace(
            tcfg, frame_size=(stream.header.frame_width, stream.header.frame_height))
    states = _belt_states(stream, cfg)
    tracks = run_tracker(stream.frames, states or None, tcfg, flows=stream.flows or None,
                         gating=not args.no_gating)
    cio.write_tracks_csv(counted_tracks(tracks, tcfg), stream.header.afo_id, args.output)


def cmd_compose(args, cfg: cio.RunConfig) -> None:
    afo, tracks = cio.read_tracks_csv(args.input)
    agg = cfg.aggregation
    method = args.method or agg.method
    labels = label_all(tracks, method, cfg.tracker.tentative_min_hits,
                       agg.confidence_weighted, agg.threshold)
    est = estimate_composition(labels, args.afo_id or afo, args.gt_total)
    cio.write_composition_csv([est], args.output, args.decimals)


def cmd_evaluate_detections(args, cfg: cio.RunConfig) -> None:
    if not args.ground_truth:
        raise UsageError("evaluate-detections needs --ground-truth")
    preds = cio.parse_detections(args.input).detections()
    gts = cio.parse_detections(args.ground_truth).detections()
    res = coco_map(preds, gts, iou_kind=args.iou, interpolation=args.interpolation)
    rows = [["box", c.iou_threshold, c.ap] for c in res.curves]
    rows += [["mask", c.iou_threshold, c.ap] for c in res.mask_curves]
    rows.append(["box", "mean", res.map_box])
    if res.map_mask is not None:
        rows.append(["mask", "mean", res.map_mask])
    rows.append([args.iou, "recall@0.5", res.recall])
    cio.write_rows_csv(["iou_kind", "iou_threshold", "value"],
                       [[k, t, _r(v, args.decimals)] for k, t, v in rows], args.output)


def _load_estimates(args):
    """Estimates by method and truths, from a composition table or compose output."""
    if args.truth:
        estimates = cio.read_composition_csv(args.input)
        return {"given": estimates}, cio.read_truth_csv(args.truth)
    path = args.input or cio.fixture_path("supp_table_c_yolov9_sam2.csv")
    table = cio.load_composition_table(path)
    return table.estimates, table.truths


def cmd_evaluate_composition(args, cfg: cio.RunConfig) -> None:
    if args.compare:
        a = cio.load_composition_table(args.compare)
        b = cio.load_composition_table(args.input or cio.fixture_path("supp_table_c_yolov9_sam2.csv"))
        rows = segmentation_comparison(a.segmented, b.segmented, trip_of, _ddof(args.sd),
                                       args.alpha_bands, args.alternative)
        cio.write_rows_csv(
            ["group", "n", "mean_compare", "sd_compare", "mean_input", "sd_input", "p_value",
             "marker"],
            [[r.group, r.n, _r(r.mean_a, args.decimals), _r(r.sd_a, args.decimals),
              _r(r.mean_b, args.decimals), _r(r.sd_b, args.decimals), r.p_value, r.marker]
             for r in rows if args.group is None or r.group == args.group],
            args.output,
        )
        return
    by_method, truths = _load_estimates(args)
    method = args.method or "best"
    if method != "best" and method not in by_method:
        if "given" in by_method:
            method = "given"
        else:
            raise UsageError(f"method {method!r} not available")
    rows = best_method_table(by_method, truths, trip_of, _ddof(args.sd), args.alpha_bands,
                             None if method == "best" else method)
    cio.write_rows_csv(
        ["group", "species", "method", "mae", "sd", "n", "p_value", "marker"],
        [[r.group, r.species.value, r.method, _r(r.mae, args.decimals), _r(r.sd, args.decimals),
          r.n, r.p_value, r.marker]
         for r in rows if args.group is None or r.group == args.group],
        args.output,
    )


def cmd_agreement(args, cfg: cio.RunConfig) -> None:
    path = args.input or cio.fixture_path("supp_table_d_experts.csv")
    matrix = cio.load_expert_matrix(path)
    res = expert_agreement(matrix, args.min_experts, _ddof(args.sd or "sample"))
    cio.write_rows_csv(
        ["species", "mean_pct", "sd_pct", "n_retained", "unanimous"],
        [[lab.value, _r(100 * s.mean, args.decimals), _r(100 * s.sd, args.decimals),
          len(res.retained), ";".join(s.unanimous)] for lab, s in res.species.items()],
        args.output,
    )


def cmd_kfold(args, cfg: cio.RunConfig) -> None:
    rows = cio._read_csv(args.input)
    if not rows or args.label_column not in rows[0]:
        raise cio.ParseError(f"input needs a {args.label_column!r} column", 1, args.input)
    labels = [r[args.label_column] for r in rows]
    seed = 0 if args.seed is None else args.seed
    splits = repeated_stratified_kfold(labels, args.k, args.repeats, seed)
    out = []
    for i, (_, val) in enumerate(splits):
        rep, fold = divmod(i, args.k)
        out.extend([rep, fold, int(j), labels[j]] for j in val)
    cio.write_rows_csv(["repeat", "fold", "index", "label"], out, args.output)


def cmd_report(args, cfg: cio.RunConfig) -> None:
    from . import plots

    if args.output in (None, "-"):
        raise UsageError("report needs --output DIR")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    by_method, truths = _load_estimates(args)
    rows = best_method_table(by_method, truths, trip_of, _ddof(args.sd), args.alpha_bands,
                             args.method if args.method in by_method else None)
    cio.write_rows_csv(
        ["group", "species", "method", "mae", "sd", "n", "p_value", "marker"],
        [[r.group, r.species.value, r.method, r.mae, r.sd, r.n, r.p_value, r.marker]
         for r in rows],
        out / "composition_mae.csv",
    )
    chosen = {r.group: r.method for r in rows}
    figures = []
    for grp in sorted(chosen, key=lambda g: (g == OVERALL, g)):
        if grp == OVERALL:
            continue
        ests = [e for e in by_method[chosen[grp]] if trip_of(e.afo_id) == grp]
        name = f"composition_bars_{grp}.svg"
        plots.composition_bars(ests, truths, out / name)
        figures.append(name)
    if not figures:
        ests = by_method[chosen[OVERALL]]
        plots.composition_bars(ests, truths, out / "composition_bars.svg")
    if args.predictions:
        if not args.ground_truth:
            raise UsageError("--predictions needs --ground-truth")
        preds = cio.parse_detections(args.predictions).detections()
        gts = cio.parse_detections(args.ground_truth).detections()
        res = coco_map(preds, gts, iou_kind=args.iou)
        plots.pr_curves(res.curves, out / "pr_curves_box.svg", f"box mAP {res.map_box:.3f}")
        if res.map_mask is not None:
            plots.pr_curves(res.mask_curves, out / "pr_curves_mask.svg",
                            f"mask mAP {res.map_mask:.3f}")


COMMANDS = {
    "simulate": cmd_simulate,
    "track": cmd_track,
    "compose": cmd_compose,
    "evaluate-detections": cmd_evaluate_detections,
    "evaluate-composition": cmd_evaluate_composition,
    "agreement": cmd_agreement,
    "kfold": cmd_kfold,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catchcomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--input", help="input file ('-' for stdin)")
        p.add_argument("--output", default="-", help="output file ('-' for stdout)")
        p.add_argument("--decimals", type=int, help="round reported values")
        return p

    p = add("simulate", "write a synthetic detection file")
    p.add_argument("--seed", type=int)
    p.add_argument("--truth", help="also write ground-truth counts CSV here")

    p = add("track", "track detections and write per-observation track rows")
    p.add_argument("--no-gating", action="store_true", help="ignore belt state")

    p = add("compose", "label tracks and write the composition estimate")
    p.add_argument("--method", choices=["flat", "hierarchical"])
    p.add_argument("--gt-total", type=int, help="true fish count, for the segmented fraction")
    p.add_argument("--afo-id")

    p = add("evaluate-detections", "COCO-style mAP and recall against annotations")
    p.add_argument("--ground-truth", help="annotation file in detection format")
    p.add_argument("--iou", choices=["box", "mask"], default="box")
    p.add_argument("--interpolation", choices=["101", "all"], default="101")

    for name, help_ in (("evaluate-composition", "per-species composition MAE"),
                        ("report", "CSV summary and SVG figures")):
        p = add(name, help_)
        p.add_argument("--method", choices=["flat", "hierarchical", "best"])
        p.add_argument("--truth", help="truth CSV; --input is then a compose output CSV")
        p.add_argument("--sd", choices=["population", "sample"], default="population")
        p.add_argument("--alpha-bands", type=_alpha_bands, default=(0.10, 0.05, 0.01))
        if name == "evaluate-composition":
            p.add_argument("--group", help="only report this trip (or 'all')")
            p.add_argument("--compare", help="second composition table: compare segmented fractions")
            p.add_argument("--alternative", choices=["two-sided", "less", "greater"],
                           default="two-sided")
        else:
            p.add_argument("--predictions", help="detections for PR curves")
            p.add_argument("--ground-truth", help="annotations for PR curves")
            p.add_argument("--iou", choices=["box", "mask"], default="box")

    p = add("agreement", "expert agreement on bigeye vs yellowfin")
    p.add_argument("--min-experts", type=int, default=4)
    p.add_argument("--sd", choices=["population", "sample"], default="sample")

    p = add("kfold", "repeated stratified k-fold validation membership")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--label-column", default="label")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cio.load_config(args.config)
        if args.command in ("track", "compose", "kfold") and args.input is None:
            raise UsageError(f"{args.command} needs --input")
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"catchcomp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return 0
    except (cio.ParseError, cio.ConfigError, OSError) as exc:
        print(f"catchcomp: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ContractError, CatchCompError) as exc:
        print(f"catchcomp: contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    return 0


if __name__ == "__main__":
    sys.exit(main())
