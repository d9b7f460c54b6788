"""Acceptance gate: one test per criterion, summarized at the end of the run."""
import csv
import math
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import area_ratio_oracle, central_difference, composite_oracle, scale_oracle
from occlusim.annotations import D_FIELDS, ClipAnnotation, read_annotations, write_annotations
from occlusim.car_math import (
    DEFAULT_ALPHAS,
    LossConfig,
    alpha_sweep,
    car_loss,
    car_loss_gradient,
    car_loss_terms,
    corrected_prediction,
    cross_entropy,
    softmax,
)
from occlusim.compositor import OcclusionSpec, ScaledOccluder, composite_frame, scale_occluder, synthesize_clip
from occlusim.errors import EmptyBox
from occlusim.fixtures import FIXTURE_OCCLUDERS, make_occluder
from occlusim.frameio import read_frames
from occlusim.metrics import clip_metrics, measured_occlusion_degree, occlusion_area_ratio, occlusion_duration_ratio
from occlusim.occluders import OccluderAsset, load_catalog
from occlusim.report import PredictionRecord, load_parent_map, parent_class_aggregate, top_k_accuracy
from occlusim.tracks import ActorTrack, BoundingBox, interpolate_track, parse_track

criterion = pytest.mark.criterion


def _random_rgba(rng, h, w):
    rgba = rng.integers(0, 256, (h, w, 4), dtype=np.uint8)
    # plenty of exact 0 and 255 alphas alongside the partial ones
    rgba[..., 3] = rng.choice([0, 255, rng.integers(1, 255)], size=(h, w))
    return rgba


def _random_box(rng, W, H):
    w, h = rng.uniform(1, W), rng.uniform(1, H)
    return BoundingBox(rng.uniform(-w / 2, W - w / 2), rng.uniform(-h / 2, H - h / 2), w, h)


@criterion(1, "compositor matches per-pixel oracle bit-exactly (200 cases, < 5 s)")
def test_compositor_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(200):
        H, W = rng.integers(1, 33, 2)
        frame = rng.integers(0, 256, (H, W, 3), dtype=np.uint8)
        occ = _random_rgba(rng, *rng.integers(1, 33, 2))
        center = _random_box(rng, W, H).center
        out, placement = composite_frame(frame, ScaledOccluder(occ, 1.0), center)
        expected, visible = composite_oracle(frame, occ, center)
        assert np.array_equal(out, expected)
        assert placement.visible_opaque_pixels == visible
    elapsed = time.perf_counter() - start
    print(f"criterion 1 runtime {elapsed:.2f} s")
    assert elapsed < 5


@criterion(2, "measured degree within 1/min(w, h) of requested (100 shapes x 3 degrees)")
def test_scale_law_round_trip():
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(100):
        aw, ah = (int(v) for v in rng.integers(8, 400, 2))
        asset = OccluderAsset(f"a{i}", "custom", np.full((ah, aw, 4), 255, dtype=np.uint8))
        box = BoundingBox(*rng.uniform(0, 50, 2), *rng.uniform(8, 300, 2))
        for degree in (0.25, 0.5, 0.75):
            scaled = scale_occluder(asset, box, degree)
            _, placement = composite_frame(np.zeros((8, 8, 3), np.uint8), scaled, box.center)
            s, tw, th = scale_oracle(aw, ah, box.w, box.h, degree)
            assert (placement.target_rect[2:], placement.scale_factor) == ((tw, th), pytest.approx(s, rel=1e-12))
            err = abs(measured_occlusion_degree(box, placement) - degree)
            worst = max(worst, err * min(box.w, box.h))
            assert err <= 1 / min(box.w, box.h)
    print(f"criterion 2 worst error {worst:.3f} / min(w, h)")


@criterion(3, "area ratio equals brute-force count (500 cases); duration matches loop oracle")
def test_metric_oracles():
    rng = np.random.default_rng(303)
    checked = 0
    for _ in range(500):
        H, W = (int(v) for v in rng.integers(1, 25, 2))
        occ = _random_rgba(rng, *rng.integers(1, 20, 2))
        bbox = _random_box(rng, W, H)
        center = (rng.uniform(-5, W + 5), rng.uniform(-5, H + 5))
        _, p = composite_frame(np.zeros((H, W, 3), np.uint8), ScaledOccluder(occ, 1.0), center)
        covered, area = area_ratio_oracle(W, H, bbox.as_tuple(), p.target_rect, occ[..., 3] > 0)
        if area == 0:
            with pytest.raises(EmptyBox):
                occlusion_area_ratio(bbox, p)
            continue
        assert occlusion_area_ratio(bbox, p) == covered / area
        checked += 1
    assert checked > 400

    for _ in range(50):
        W, H, n = 24, 18, int(rng.integers(1, 30))
        boxes = tuple(None if rng.random() < 0.2 else _random_box(rng, W, H) for _ in range(n))
        if all(b is None for b in boxes):
            continue
        track = ActorTrack("t", 25.0, n, boxes)
        placements, masks = [], {}
        for i, box in enumerate(boxes):
            if box is None:
                continue
            occ = _random_rgba(rng, *rng.integers(1, 12, 2))
            _, p = composite_frame(np.zeros((H, W, 3), np.uint8), ScaledOccluder(occ, 1.0),
                                   (rng.uniform(-6, W + 6), rng.uniform(-6, H + 6)), frame_index=i)
            p.bbox = box.as_tuple()
            placements.append(p)
            masks[i] = (p, occ[..., 3] > 0)
        count = 0
        for i in range(n):
            if i not in masks:
                continue
            p, mask = masks[i]
            covered, _ = area_ratio_oracle(W, H, boxes[i].as_tuple(), p.target_rect, mask)
            if covered > 0:
                count += 1
        assert occlusion_duration_ratio(track, placements) == count / n


@criterion(4, "fixture clip: mean area ratio strictly increases over degrees 0.25/0.5/0.75")
def test_monotonic_severity(fixture_root):
    catalog = load_catalog(fixture_root / "occluders")
    _, frames = read_frames(fixture_root / "clips" / "clip_a")
    track = interpolate_track(parse_track(fixture_root / "tracks" / "clip_a.csv"))
    for asset in catalog.assets:
        means = []
        for degree in (0.25, 0.5, 0.75):
            synth = synthesize_clip(frames, track, OcclusionSpec(degree, asset.id), catalog)
            assert all(p.dest_rect == p.target_rect for p in synth.placements), "fixture clips at border"
            means.append(clip_metrics(track, synth.placements, degree).mean_area_ratio)
        print(f"criterion 4 {asset.id}: {[round(m, 4) for m in means]}")
        assert means[0] < means[1] < means[2]


@criterion(5, "CAR math identities, KL >= 0 and finite-difference gradients (< 10 s)")
def test_car_math_properties():
    rng = np.random.default_rng(505)
    start = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(1, 17))
        p, c = rng.normal(0, 3, n), rng.normal(0, 3, n)
        label = int(rng.integers(n))
        assert abs(softmax(p).sum() - 1) <= 1e-12
        assert np.max(np.abs(corrected_prediction(p, p) - 1 / n)) <= 1e-12
        assert abs(car_loss(p, c, label, LossConfig(alpha=0.0)) - cross_entropy(p, np.eye(n)[label])) <= 1e-12
        _, kl, _ = car_loss_terms(p, c, label, LossConfig(alpha=float(rng.uniform(0, 3))))
        assert kl >= 0

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 17))
        p, c = rng.normal(0, 2, n), rng.normal(0, 2, n)
        label = int(rng.integers(n))
        cfg = LossConfig(alpha=float(rng.uniform(0, 2)))
        gp, gc = car_loss_gradient(p, c, label, cfg)
        fd_p = np.array(central_difference(lambda v: car_loss(v, c, label, cfg), list(p), step=1e-5))
        fd_c = np.array(central_difference(lambda v: car_loss(p, v, label, cfg), list(c), step=1e-5))
        for analytic, numeric in ((gp, fd_p), (gc, fd_c)):
            scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
            if scale == 0:
                continue
            rel = np.linalg.norm(analytic - numeric) / scale
            worst = max(worst, rel)
            assert rel <= 1e-5
    elapsed = time.perf_counter() - start
    print(f"criterion 5 worst gradient rel err {worst:.2e}, runtime {elapsed:.2f} s")
    assert elapsed < 10


@criterion(6, "alpha sweep over {0, 0.5, 1, 2} gives a well-formed table; alpha=0 loss equals CE")
def test_alpha_sweep_table():
    rng = np.random.default_rng(606)
    p, c = rng.normal(0, 2, (64, 10)), rng.normal(0, 2, (64, 10))
    labels = [int(v) for v in rng.integers(0, 10, 64)]
    rows = alpha_sweep(p, c, labels, DEFAULT_ALPHAS)
    assert [r["alpha"] for r in rows] == [0.0, 0.5, 1.0, 2.0]
    assert all(set(r) == {"alpha", "ce", "kl", "loss"} for r in rows)
    assert all(math.isfinite(v) for r in rows for v in r.values())
    assert len({r["ce"] for r in rows}) == 1 and len({r["kl"] for r in rows}) == 1
    assert rows[0]["loss"] == rows[0]["ce"]
    for r in rows:
        assert r["kl"] >= 0
        assert r["loss"] == pytest.approx(r["ce"] + r["alpha"] * r["kl"], rel=1e-12)
    mean_ce = math.fsum(cross_entropy(pi, np.eye(10)[li]) for pi, li in zip(p, labels)) / 64
    assert rows[0]["ce"] == pytest.approx(mean_ce, abs=1e-12)


@criterion(7, "annotation CSV header is the ten D fields in order; 1,000 records round-trip")
def test_annotation_fidelity(tmp_path):
    rng = random.Random(707)
    alphabet = "abcdefghij ,\"'-_./\né中"
    records = []
    for i in range(1000):
        fps = rng.choice([24.0, 25.0, 29.97, 30.0, 60.0])
        frames = rng.randint(1, 600)
        video = frames / fps
        records.append(ClipAnnotation(
            action_class="".join(rng.choice(alphabet) for _ in range(rng.randint(0, 15))),
            file_name=f"clip_{i:04d}_d{rng.choice([0.25, 0.5, 0.75]):g}",
            occluder_type=rng.choice(["backpack", "dog", "handbag", "suitcase", "custom"]),
            occluder_file_name=f"{rng.randint(0, 999):03d}.png",
            occluder_pixel_ratio=rng.random(),
            occluder_size_ratio=rng.choice([0.25, 0.5, 0.75, rng.random()]),
            occlusion_duration=rng.randint(0, frames) / fps,
            video_duration=video,
            fps=fps,
            clip_generation_time=f"2024-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}T12:00:00+00:00",
        ))
    path = tmp_path / "annotations.csv"
    write_annotations(records, path)
    with open(path, newline="", encoding="utf-8") as f:
        header = next(csv.reader(f))
    assert header == list(D_FIELDS)
    assert [h.replace("_", " ") for h in header] == [
        "action class", "file name", "occluder type", "occluder file name", "occluder pixel ratio",
        "occluder size ratio", "occlusion duration", "video duration", "fps", "clip generation time",
    ]
    assert read_annotations(path) == records


def _rank_oracle(scores, true):
    """Position of the true label: strictly better scores, then equal scores with a smaller label."""
    t = scores[true]
    return sum(1 for lab, s in scores.items() if s > t or (s == t and lab < true))


@criterion(8, "top-1/top-5 match counting oracle; parent-weighted mean equals global; top-1 <= top-5")
def test_report_correctness():
    rng = random.Random(808)
    pmap = load_parent_map()
    labels = sorted(pmap)
    records = []
    for i in range(1000):
        true = rng.choice(labels)
        pool = rng.sample(labels, 20)
        # coarse scores so that ties actually occur
        scores = {lab: rng.randint(0, 10) / 10 for lab in set(pool) | {true}}
        records.append(PredictionRecord(f"v{i}", true, scores=scores))
    for k in (1, 5):
        hits = 0
        for r in records:
            if _rank_oracle(r.scores, r.true_label) < k:
                hits += 1
        assert top_k_accuracy(records, k, label_set=labels) == hits / 1000
    top1, top5 = top_k_accuracy(records, 1), top_k_accuracy(records, 5)
    assert top1 <= top5

    rows = parent_class_aggregate(records, pmap, k=1, multi="first")
    weighted = math.fsum(r.n * r.accuracy for r in rows) / sum(r.n for r in rows)
    assert abs(weighted - top1) <= 1e-12
    assert sum(r.n for r in rows) == 1000
    for r in parent_class_aggregate(records, pmap, k=5, multi="all"):
        assert 0 <= r.accuracy <= 1
    print(f"criterion 8 top1={top1:.3f} top5={top5:.3f} parents={len(rows)}")


def _run_cli(fixture_root, out):
    proc = subprocess.run(
        [sys.executable, "-m", "occlusim", "synthesize", "--clips", str(fixture_root / "clips"),
         "--tracks", str(fixture_root / "tracks"), "--occluders", str(fixture_root / "occluders"),
         "--out", str(out), "--seed", "0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != "run_summary.json"}


@criterion(9, "two seed-0 synthesize runs are byte-identical")
def test_determinism(fixture_root, tmp_path):
    first = _run_cli(fixture_root, tmp_path / "run1")
    second = _run_cli(fixture_root, tmp_path / "run2")
    assert first == second
    assert "annotations.csv" in first
    assert sum(name.endswith("metrics.json") for name in first) == 6
    assert sum(name.endswith(".png") for name in first) == 3 * (12 + 10)


@criterion(10, "100-frame 640x480 clip synthesized at one degree in < 2 s")
def test_throughput():
    rng = np.random.default_rng(1010)
    yy, xx = np.mgrid[0:480, 0:640]
    base = np.stack([xx * 200 // 640, yy * 200 // 480, (xx + yy) * 100 // 1120], axis=-1)
    frames = [(base + rng.integers(0, 24, (480, 640, 3))).astype(np.uint8) for _ in range(100)]
    boxes = tuple(BoundingBox(150 + 2 * i, 80 + 0.5 * i, 180 + 0.3 * i, 300) for i in range(100))
    track = ActorTrack("big", 30.0, 100, boxes)
    category, kind, size = FIXTURE_OCCLUDERS[1]
    asset = OccluderAsset(f"{category}/{category}_000.png", category, make_occluder(kind, size))

    class _Catalog:
        def get(self, _):
            return asset

    start = time.perf_counter()
    synth = synthesize_clip(frames, track, OcclusionSpec(0.5, asset.id), _Catalog())
    metrics = clip_metrics(track, synth.placements, 0.5)
    elapsed = time.perf_counter() - start
    print(f"criterion 10 synthesis of 100 frames: {elapsed:.3f} s")
    assert len(synth.frames) == 100 and metrics.duration_ratio == 1.0
    assert elapsed < 2
