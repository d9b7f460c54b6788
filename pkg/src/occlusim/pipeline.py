"""Batch jobs behind the command-line interface.

Every random choice flows from the single job seed: each source clip gets
``derive_seed(seed, clip_id)``, so its output does not depend on which other
clips are in the batch or how workers are scheduled.
"""
import json
import logging
import os
import platform
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import PIL

from . import __version__
from .annotations import ClipAnnotation, load_manifest, write_annotations
from .compositor import DEFAULT_DEGREES, OcclusionSpec, Placement, check_degree, scale_occluder, synthesize_clip
from .errors import ConfigError, OcclusimError
from .frameio import atomic_write_text, dump_json, read_clip_meta, read_frames, write_frame
from .metrics import clip_metrics
from .occluders import CATEGORIES, DEFAULT_MIN_OPAQUE_PIXELS, load_catalog, sample_occluder
from .rng import derive_seed
from .tracks import DEFAULT_MAX_GAP, ActorTrack, BoundingBox, interpolate_track, parse_track

logger = logging.getLogger(__name__)

WORKERS_ENV = "OCCLUSIM_WORKERS"
EPOCH = "1970-01-01T00:00:00+00:00"


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def default_generation_time():
    """ISO timestamp stamped into annotations: SOURCE_DATE_EPOCH if set, else the Unix epoch.

    Never the wall clock, so reruns produce identical annotation files.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return EPOCH


@dataclass
class JobConfig:
    subcommand: str
    out_dir: Path
    clips_dir: Path = None
    tracks_dir: Path = None
    manifest: Path = None
    occluders_dir: Path = None
    seed: int = 0
    degrees: tuple = DEFAULT_DEGREES
    workers: int = field(default_factory=default_workers)
    max_gap: int = DEFAULT_MAX_GAP
    min_opaque_pixels: int = DEFAULT_MIN_OPAQUE_PIXELS
    category: str = None
    resample: str = "bilinear"
    generation_time: str = field(default_factory=default_generation_time)

    def validate(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.degrees:
            raise ConfigError("at least one degree is required")
        for d in self.degrees:
            try:
                check_degree(d)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if len(set(self.degrees)) != len(self.degrees):
            raise ConfigError("degrees must be distinct")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_gap < 0:
            raise ConfigError("max-gap must be >= 0")
        if self.category is not None and self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")
        if self.occluders_dir is None or not Path(self.occluders_dir).is_dir():
            raise ConfigError(f"occluder directory not found: {self.occluders_dir}")
        if self.manifest is None and (self.clips_dir is None or self.tracks_dir is None):
            raise ConfigError("give --manifest, or both --clips and --tracks")


def output_name(clip_id, degree):
    return f"{clip_id}_d{degree:g}"


def discover_clips(config):
    """clip_id -> {"frames", "track", "action_class"}; track is None when missing."""
    if config.manifest is not None:
        return dict(sorted(load_manifest(config.manifest).items()))
    clips_dir, tracks_dir = Path(config.clips_dir), Path(config.tracks_dir)
    if not clips_dir.is_dir():
        raise ConfigError(f"clip directory not found: {clips_dir}")
    out = {}
    for d in sorted(p for p in clips_dir.iterdir() if p.is_dir()):
        track = next((tracks_dir / f"{d.name}{ext}" for ext in (".csv", ".txt", ".json")
                      if (tracks_dir / f"{d.name}{ext}").exists()), None)
        out[d.name] = {"frames": str(d), "track": str(track) if track else None}
    return out


def _replace_dir(tmp, final):
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def annotation_for(meta, metrics):
    fps = meta["fps"]
    occluded_frames = round(metrics["duration_ratio"] * meta["frame_count"])
    return ClipAnnotation(
        action_class=meta.get("action_class") or "",
        file_name=meta["name"],
        occluder_type=meta["occluder_category"],
        occluder_file_name=meta["occluder_file_name"],
        occluder_pixel_ratio=metrics["mean_area_ratio"],
        occluder_size_ratio=meta["degree"],
        occlusion_duration=occluded_frames / fps,
        video_duration=meta["frame_count"] / fps,
        fps=fps,
        clip_generation_time=meta["generation_time"],
    )


def synthesize_source_clip(clip_id, entry, catalog, config):
    """All degree variants of one source clip. Returns list of (meta, metrics)."""
    if not entry.get("track"):
        raise OcclusimError(f"no track file for clip {clip_id!r}")
    track = interpolate_track(parse_track(entry["track"]), config.max_gap)
    files, frames = read_frames(entry["frames"])
    if not frames:
        raise OcclusimError(f"no frames in {entry['frames']}")
    clip_meta = read_clip_meta(entry["frames"])
    if "fps" in clip_meta and abs(float(clip_meta["fps"]) - track.fps) > 1e-6:
        logger.warning("%s: clip.json fps %s differs from track fps %s; using track",
                       clip_id, clip_meta["fps"], track.fps)
    action = entry.get("action_class") or clip_meta.get("action_class") or ""
    clip_seed = derive_seed(config.seed, clip_id)
    asset = sample_occluder(catalog, clip_seed, config.category)

    out_dir = Path(config.out_dir)
    results = []
    for degree in config.degrees:
        spec = OcclusionSpec(degree, asset.id, clip_seed)
        synth = synthesize_clip(frames, track, spec, catalog, config.resample)
        metrics = clip_metrics(track, synth.placements, degree).to_json()
        name = output_name(clip_id, degree)
        meta = {
            "name": name,
            "source_clip": clip_id,
            "action_class": action,
            "degree": degree,
            "seed": clip_seed,
            "occluder_id": asset.id,
            "occluder_category": asset.category,
            "occluder_file_name": asset.file_name,
            "fps": track.fps,
            "frame_count": track.frame_count,
            "resample": config.resample,
            "generation_time": config.generation_time,
        }
        tmp = Path(tempfile.mkdtemp(dir=out_dir, prefix=f".tmp-{name}-"))
        try:
            for f, frame in zip(files, synth.frames):
                write_frame(tmp / f.name, frame)
            sidecar = {"fps": track.fps, "action_class": action}
            (tmp / "clip.json").write_text(dump_json(sidecar), encoding="utf-8")
            placements = dict(meta, placements=[p.to_json() for p in synth.placements])
            (tmp / "placements.json").write_text(dump_json(placements), encoding="utf-8")
            (tmp / "metrics.json").write_text(dump_json(dict(metrics, name=name)), encoding="utf-8")
            _replace_dir(tmp, out_dir / name)
        finally:
            if tmp.exists():
                shutil.rmtree(tmp)
        results.append((meta, metrics))
    return results


def _job(args):
    clip_id, entry, catalog, config = args
    try:
        return clip_id, synthesize_source_clip(clip_id, entry, catalog, config), None
    except (OcclusimError, OSError, ValueError) as exc:
        logger.error("clip %s failed: %s", clip_id, exc)
        return clip_id, None, f"{type(exc).__name__}: {exc}"


def environment_info():
    return {
        "occlusim": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pillow": PIL.__version__,
    }


def run_synthesize(config):
    """Run a synthesis batch. Returns (exit_code, summary dict)."""
    config.validate()
    started = time.perf_counter()
    started_at = datetime.now(timezone.utc).isoformat()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog = load_catalog(config.occluders_dir, config.min_opaque_pixels)
    if len(catalog) == 0:
        raise ConfigError(f"no usable occluders under {config.occluders_dir}")
    clips = discover_clips(config)

    jobs = [(cid, entry, catalog, config) for cid, entry in clips.items()]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = [_job(j) for j in jobs]

    annotations, outputs, failures = [], [], []
    for clip_id, results, error in outcomes:
        if error is not None:
            failures.append({"clip_id": clip_id, "error": error})
            continue
        for meta, metrics in results:
            outputs.append(meta["name"])
            annotations.append(annotation_for(meta, metrics))
    annotations.sort(key=lambda a: a.file_name)
    write_annotations(annotations, out_dir / "annotations.csv")

    summary = {
        "subcommand": "synthesize",
        "versions": environment_info(),
        "seed": config.seed,
        "degrees": list(config.degrees),
        "occluders": {"loaded": len(catalog), "rejected": len(catalog.rejected), "by_category": catalog.counts()},
        "counts": {
            "source_clips": len(clips),
            "succeeded_clips": len(clips) - len(failures),
            "failed_clips": len(failures),
            "output_clips": len(outputs),
            "annotations": len(annotations),
        },
        "outputs": sorted(outputs),
        "failures": failures,
        "started_at": started_at,
        "wall_time_s": time.perf_counter() - started,
    }
    atomic_write_text(out_dir / "run_summary.json", dump_json(summary))
    return (1 if failures else 0), summary


def synthesized_clip_dirs(root):
    return sorted(p.parent for p in Path(root).glob("*/placements.json"))


def recompute_metrics(clip_dir, catalog):
    """Rebuild occluder masks from placements.json and recompute metrics.json."""
    clip_dir = Path(clip_dir)
    meta = json.loads((clip_dir / "placements.json").read_text(encoding="utf-8"))
    asset = catalog.get(meta["occluder_id"])
    boxes = [None] * meta["frame_count"]
    placements = []
    for d in meta["placements"]:
        p = Placement.from_json(d)
        box = BoundingBox(*p.bbox)
        boxes[p.frame_index] = box
        p.mask = scale_occluder(asset, box, meta["degree"], meta.get("resample", "bilinear")).mask
        placements.append(p)
    if not placements:
        raise OcclusimError(f"{clip_dir}: no placements recorded")
    track = ActorTrack(meta["source_clip"], meta["fps"], meta["frame_count"], tuple(boxes))
    metrics = clip_metrics(track, placements, meta["degree"]).to_json()
    atomic_write_text(clip_dir / "metrics.json", dump_json(dict(metrics, name=meta["name"])))
    return meta, metrics


def annotations_from_outputs(root, generation_time=None):
    records = []
    for d in synthesized_clip_dirs(root):
        meta = json.loads((d / "placements.json").read_text(encoding="utf-8"))
        metrics = json.loads((d / "metrics.json").read_text(encoding="utf-8"))
        if generation_time is not None:
            meta["generation_time"] = generation_time
        records.append(annotation_for(meta, metrics))
    return sorted(records, key=lambda a: a.file_name)
