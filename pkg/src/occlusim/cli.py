"""Command-line entry point: ``occlusim <subcommand> ...``.

Exit codes: 0 success, 1 partial failure (some clips failed), 2 bad configuration.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .annotations import SCHEMAS, read_annotations, write_annotations
from .car_math import CE_MODES, DEFAULT_ALPHAS, LossConfig, alpha_sweep, car_loss_gradient, car_loss_terms
from .compositor import DEFAULT_DEGREES, RESAMPLE
from .counterfactual import FillPolicy, erase_actor, load_masks
from .errors import ConfigError, OcclusimError
from .frameio import atomic_write_text, dump_json, read_frames, write_frame
from .occluders import CATEGORIES, DEFAULT_MIN_OPAQUE_PIXELS, load_catalog
from .pipeline import (
    JobConfig,
    annotations_from_outputs,
    default_generation_time,
    default_workers,
    recompute_metrics,
    run_synthesize,
    synthesized_clip_dirs,
)
from .report import (
    accuracy_drop_by_factor,
    load_parent_map,
    load_predictions,
    parent_class_aggregate,
    rows_to_csv,
    top_k_accuracy,
)
from .tracks import DEFAULT_MAX_GAP

logger = logging.getLogger("occlusim")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


# synthesize


def cmd_synthesize(args):
    config = JobConfig(
        subcommand="synthesize",
        out_dir=Path(args.out),
        clips_dir=args.clips,
        tracks_dir=args.tracks,
        manifest=args.manifest,
        occluders_dir=args.occluders,
        seed=args.seed,
        degrees=(args.degree,) if args.degree is not None else args.degrees,
        workers=args.workers,
        max_gap=args.max_gap,
        min_opaque_pixels=args.min_opaque_pixels,
        category=args.category,
        resample=args.resample,
        generation_time=args.generation_time,
    )
    code, summary = run_synthesize(config)
    c = summary["counts"]
    logger.info(
        "synthesized %d clip(s) from %d source clip(s); %d failed",
        c["output_clips"], c["source_clips"], c["failed_clips"],
    )
    for f in summary["failures"]:
        logger.warning("skipped %s: %s", f["clip_id"], f["error"])
    return code


# metrics


def cmd_metrics(args):
    catalog = load_catalog(args.occluders, args.min_opaque_pixels)
    rows, failed = [], 0
    for d in synthesized_clip_dirs(args.synth):
        try:
            meta, m = recompute_metrics(d, catalog)
        except (OcclusimError, KeyError, ValueError) as exc:
            logger.error("%s: %s", d.name, exc)
            failed += 1
            continue
        rows.append({
            "name": meta["name"],
            "degree": m["degree"],
            "mean_area_ratio": m["mean_area_ratio"],
            "duration_ratio": m["duration_ratio"],
        })
    _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), args.out)
    return 1 if failed else 0


# counterfactual


def cmd_counterfactual(args):
    files, frames = read_frames(args.frames)
    if not frames:
        raise ConfigError(f"no frames in {args.frames}")
    masks = load_masks(args.masks, frame_count=len(frames), allow_missing=args.allow_missing_masks)
    policy = FillPolicy.parse(args.fill)
    erased, missing = erase_actor(frames, masks, policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f, frame in zip(files, erased):
        write_frame(out / f.name, frame)
    summary = {
        "frames": len(frames),
        "fill": {"mode": policy.mode, "constant_value": list(policy.constant_value)},
        "missing_masks": missing,
    }
    atomic_write_text(out / "counterfactual.json", dump_json(summary))
    if missing:
        logger.warning("%d frame(s) had no mask and were left unchanged", len(missing))
    return 1 if missing else 0


# annotate


def cmd_annotate(args):
    if args.check is not None:
        records = read_annotations(args.check, args.schema)
        print(f"{args.check}: {len(records)} valid record(s)")
        return 0
    if args.synth is None or args.out is None:
        raise ConfigError("annotate needs --synth and --out (or --check)")
    records = annotations_from_outputs(args.synth, args.generation_time)
    write_annotations(records, args.out, args.schema or "D")
    logger.info("wrote %d annotation(s) to %s", len(records), args.out)
    return 0


# car-loss


def _read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _label_of(d):
    if "label" in d:
        return int(d["label"])
    if "q" in d:
        return [float(v) for v in d["q"]]
    raise ValueError(f"record has neither 'label' nor 'q': {d!r}")


def cmd_car_loss(args):
    pairs = _read_jsonl(args.pairs)
    if args.labels is not None:
        label_rows = _read_jsonl(args.labels)
        if len(label_rows) != len(pairs):
            raise ConfigError(f"{len(pairs)} pairs but {len(label_rows)} labels")
    else:
        label_rows = pairs
    labels = [_label_of(d) for d in label_rows]
    ps = [d["p"] for d in pairs]
    cs = [d["c"] for d in pairs]

    if args.sweep is not None:
        rows = alpha_sweep(ps, cs, labels, args.sweep or DEFAULT_ALPHAS, args.epsilon, args.mode)
        _emit(rows_to_csv(rows, ["alpha", "ce", "kl", "loss"]), args.out)
        return 0

    cfg = LossConfig(args.alpha, args.epsilon, args.mode)
    lines = []
    for i, (d, p, c, label) in enumerate(zip(pairs, ps, cs, labels)):
        ce, kl, loss = car_loss_terms(p, c, label, cfg)
        gp, gc = car_loss_gradient(p, c, label, cfg)
        lines.append(json.dumps({
            "index": i,
            "id": d.get("id"),
            "ce": ce,
            "kl": kl,
            "loss": loss,
            "grad_p": gp.tolist(),
            "grad_c": gc.tolist(),
        }))
    _emit("".join(line + "\n" for line in lines), args.out)
    return 0


# report


def _load_factor(path, name):
    path = Path(path)
    if path.is_dir():
        out = {}
        for d in synthesized_clip_dirs(path):
            m = json.loads((d / "metrics.json").read_text(encoding="utf-8"))
            out[m["name"]] = float(m[name])
        return out
    if path.suffix == ".json":
        return {str(k): float(v) for k, v in json.loads(path.read_text(encoding="utf-8")).items()}
    with open(path, encoding="utf-8", newline="") as f:
        return {row["clip_id"]: float(row[name if name in row else "value"]) for row in csv.DictReader(f)}


def cmd_report(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = load_predictions(args.predictions)
    topk = {f"top{k}": top_k_accuracy(records, k) for k in args.k}
    topk["n"] = len(records)
    atomic_write_text(out / "topk.json", dump_json(topk))
    k0 = args.k[0]

    if args.baseline is not None:
        baseline = load_predictions(args.baseline)
        if args.factor is None:
            raise ConfigError("--baseline needs --factor")
        factor = _load_factor(args.factor, args.factor_name)
        rows = accuracy_drop_by_factor(baseline, records, factor, args.bins, k=k0)
        cols = ["lo", "hi", "n", "baseline_accuracy", "occluded_accuracy", "drop"]
        atomic_write_text(out / "factor_drops.csv", rows_to_csv(rows, cols))

    if args.parents is not None:
        pmap = load_parent_map(None if args.parents == "kinetics400" else args.parents)
        rows = parent_class_aggregate(records, pmap, k=k0, multi=args.multi_parent)
        atomic_write_text(out / "parents.csv", rows_to_csv(rows, ["parent", "n", "correct", "accuracy"]))
    logger.info("report written to %s", out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="occlusim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="overlay tracked occluders on source clips")
    p.add_argument("--clips", type=Path, help="directory of per-clip frame directories")
    p.add_argument("--tracks", type=Path, help="directory of <clip_id>.csv|.json track files")
    p.add_argument("--manifest", type=Path, help="manifest.json listing clips (alternative to --clips/--tracks)")
    p.add_argument("--occluders", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degrees", type=_floats, default=DEFAULT_DEGREES)
    p.add_argument("--degree", type=float, help="single-degree mode")
    p.add_argument("--category", choices=CATEGORIES)
    p.add_argument("--max-gap", type=int, default=DEFAULT_MAX_GAP)
    p.add_argument("--min-opaque-pixels", type=int, default=DEFAULT_MIN_OPAQUE_PIXELS)
    p.add_argument("--resample", choices=sorted(RESAMPLE), default="bilinear")
    p.add_argument("--workers", type=int, default=default_workers(),
                   help="worker processes (default from OCCLUSIM_WORKERS, else 1)")
    p.add_argument("--generation-time", default=default_generation_time(),
                   help="ISO-8601 stamp for annotations (default SOURCE_DATE_EPOCH or the Unix epoch)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("metrics", help="recompute occlusion metrics for synthesized clips")
    p.add_argument("--synth", type=Path, required=True)
    p.add_argument("--occluders", type=Path, required=True)
    p.add_argument("--min-opaque-pixels", type=int, default=DEFAULT_MIN_OPAQUE_PIXELS)
    p.add_argument("--out", type=Path, help="JSON-lines output (default stdout)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("counterfactual", help="erase the actor under segmentation masks")
    p.add_argument("--frames", type=Path, required=True)
    p.add_argument("--masks", type=Path, required=True)
    p.add_argument("--fill", default="constant:114,114,114",
                   help="constant:R,G,B | frame_mean | horizontal_inpaint")
    p.add_argument("--allow-missing-masks", action="store_true",
                   help="align masks by frame number; frames without one pass through")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_counterfactual)

    p = sub.add_parser("annotate", help="write or validate annotation CSVs")
    p.add_argument("--synth", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--schema", choices=sorted(SCHEMAS))
    p.add_argument("--generation-time")
    p.add_argument("--check", type=Path, help="validate an existing CSV instead")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("car-loss", help="per-record CAR loss and gradients, or an alpha sweep")
    p.add_argument("--pairs", type=Path, required=True, help='JSON lines {"p": [...], "c": [...]}')
    p.add_argument("--labels", type=Path, help='JSON lines {"label": i} or {"q": [...]}')
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0, help="label smoothing")
    p.add_argument("--mode", choices=CE_MODES, default="standard")
    p.add_argument("--sweep", type=_floats, nargs="?", const=(),
                   help="emit a loss table over alphas (default 0,0.5,1,2)")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_car_loss)

    p = sub.add_parser("report", help="top-k, factor-binned drops and parent-class accuracy")
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--baseline", type=Path)
    p.add_argument("--factor", type=Path, help="synthesis output dir, CSV (clip_id,value) or JSON map")
    p.add_argument("--factor-name", default="mean_area_ratio",
                   choices=["mean_area_ratio", "duration_ratio", "degree"])
    p.add_argument("--bins", type=_floats, default=(0.0, 0.25, 0.5, 0.75, 1.0))
    p.add_argument("--parents", help="class,parent CSV or 'kinetics400' for the bundled map")
    p.add_argument("--multi-parent", choices=["all", "first"], default="all")
    p.add_argument("--k", type=_ints, default=(1, 5))
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 2
    except (OcclusimError, OSError, ValueError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
