"""Small procedural dataset for tests and demos.

Layout written under ``root``::

    clips/<clip_id>/000000.png ... + clip.json
    tracks/<clip_id>.csv
    masks/<clip_id>/000000.png ...
    occluders/<category>/<name>.png
    manifest.json
"""
import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .tracks import ActorTrack, BoundingBox, write_track

FRAME_SIZE = (160, 120)

# (clip_id, action_class, fps, frame_count, start box, per-frame motion, frames without a detection)
FIXTURE_CLIPS = (
    ("clip_a", "playing drums", 25.0, 12, (40.0, 30.0, 40.0, 60.0), (3.0, 0.5, 0.0, 0.0), (5, 6)),
    ("clip_b", "juggling balls", 30.0, 10, (70.0, 25.0, 36.0, 64.0), (-2.0, 1.0, 0.5, 0.0), ()),
)

FIXTURE_OCCLUDERS = (
    ("backpack", "rounded", (200, 240)),
    ("dog", "blob", (260, 200)),
    ("handbag", "ellipse", (240, 200)),
    ("suitcase", "triangle", (300, 240)),
)


def make_occluder(kind, size=(240, 200)):
    """RGBA cut-out; every shape in FIXTURE_OCCLUDERS clears 30,000 opaque pixels."""
    w, h = size
    alpha = Image.new("L", size, 0)
    draw = ImageDraw.Draw(alpha)
    if kind == "ellipse":
        draw.ellipse((0, 0, w - 1, h - 1), fill=255, outline=128)
    elif kind == "rounded":
        draw.rounded_rectangle((0, 0, w - 1, h - 1), radius=min(w, h) // 4, fill=255, outline=128)
    elif kind == "blob":
        draw.ellipse((0, h // 4, w // 2, h - 1), fill=255)
        draw.ellipse((w // 3, 0, w - 1, (3 * h) // 4), fill=255)
        draw.rectangle((w // 4, h // 3, (3 * w) // 4, (2 * h) // 3), fill=255)
    else:
        draw.polygon([(w // 2, 0), (w - 1, h - 1), (0, h - 1)], fill=255)
    yy, xx = np.mgrid[0:h, 0:w]
    rgb = np.stack(
        [
            (xx * 255 // max(w - 1, 1)),
            (yy * 255 // max(h - 1, 1)),
            np.full_like(xx, {"ellipse": 40, "rounded": 200, "blob": 120}.get(kind, 90)),
        ],
        axis=-1,
    ).astype(np.uint8)
    return np.dstack([rgb, np.asarray(alpha)])


def _background(rng, size):
    w, h = size
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.stack([xx * 200 // w, yy * 200 // h, (xx + yy) * 100 // (w + h)], axis=-1)
    noise = rng.integers(0, 24, size=(h, w, 3))
    return (base + noise).astype(np.uint8)


def make_fixture(root, seed=0):
    """Write the fixture dataset; returns the manifest dict."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    for category, kind, size in FIXTURE_OCCLUDERS:
        d = root / "occluders" / category
        d.mkdir(parents=True, exist_ok=True)
        Image.fromarray(make_occluder(kind, size), "RGBA").save(d / f"{category}_000.png")

    manifest = {}
    for clip_id, action, fps, n, box0, motion, misses in FIXTURE_CLIPS:
        frames_dir = root / "clips" / clip_id
        masks_dir = root / "masks" / clip_id
        frames_dir.mkdir(parents=True, exist_ok=True)
        masks_dir.mkdir(parents=True, exist_ok=True)
        bg = _background(rng, FRAME_SIZE)
        boxes = []
        for i in range(n):
            x, y, w, h = (b + m * i for b, m in zip(box0, motion))
            frame = bg.copy()
            mask = np.zeros(bg.shape[:2], dtype=np.uint8)
            x0, y0 = int(round(x)), int(round(y))
            x1, y1 = int(round(x + w)), int(round(y + h))
            frame[y0:y1, x0:x1] = (200, 60 + 10 * i, 60)
            mask[y0:y1, x0:x1] = 255
            Image.fromarray(frame).save(frames_dir / f"{i:06d}.png")
            Image.fromarray(mask, "L").save(masks_dir / f"{i:06d}.png")
            boxes.append(None if i in misses else BoundingBox(x, y, w, h))
        (frames_dir / "clip.json").write_text(
            json.dumps({"fps": fps, "action_class": action}, indent=2) + "\n", encoding="utf-8"
        )
        tracks_dir = root / "tracks"
        tracks_dir.mkdir(parents=True, exist_ok=True)
        write_track(ActorTrack(clip_id, fps, n, tuple(boxes)), tracks_dir / f"{clip_id}.csv")
        manifest[clip_id] = {
            "frames": f"clips/{clip_id}",
            "track": f"tracks/{clip_id}.csv",
            "masks": f"masks/{clip_id}",
            "action_class": action,
        }
    (root / "manifest.json").write_text(json.dumps({"clips": manifest}, indent=2) + "\n", encoding="utf-8")
    return manifest
