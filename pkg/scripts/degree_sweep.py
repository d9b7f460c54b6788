"""Synthesize one clip at a range of degrees and tabulate the occlusion factors.

Runs on the fixture dataset unless --clip/--track/--occluders point elsewhere.
"""
import argparse
import tempfile
from pathlib import Path

from occlusim.compositor import OcclusionSpec, synthesize_clip
from occlusim.fixtures import make_fixture
from occlusim.frameio import read_frames
from occlusim.metrics import clip_metrics
from occlusim.occluders import load_catalog, sample_occluder
from occlusim.rng import derive_seed
from occlusim.tracks import interpolate_track, parse_track


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--clip", type=Path)
    ap.add_argument("--track", type=Path)
    ap.add_argument("--occluders", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--degrees", default="0.1,0.25,0.4,0.5,0.6,0.75,0.9,1.0")
    args = ap.parse_args()

    if args.clip is None:
        root = Path(tempfile.mkdtemp(prefix="occlusim-fixture-"))
        make_fixture(root)
        args.clip, args.track = root / "clips" / "clip_a", root / "tracks" / "clip_a.csv"
        args.occluders = root / "occluders"

    catalog = load_catalog(args.occluders)
    _, frames = read_frames(args.clip)
    track = interpolate_track(parse_track(args.track))
    asset = sample_occluder(catalog, derive_seed(args.seed, track.clip_id))
    print(f"clip {track.clip_id}, occluder {asset.id}")
    print(f"{'degree':>7} {'mean area':>10} {'duration':>9} {'measured':>9}")
    for degree in (float(d) for d in args.degrees.split(",")):
        synth = synthesize_clip(frames, track, OcclusionSpec(degree, asset.id), catalog)
        m = clip_metrics(track, synth.placements, degree)
        measured = sum(m.measured_degree_per_frame) / len(m.measured_degree_per_frame)
        print(f"{degree:>7.2f} {m.mean_area_ratio:>10.4f} {m.duration_ratio:>9.3f} {measured:>9.3f}")


if __name__ == "__main__":
    main()
