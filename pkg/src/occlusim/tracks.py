"""Actor bounding-box tracks from an external detector, plus gap repair.

Text format::

    clip_id,fps,frame_count
    frame_index,x,y,w,h
    ...

The JSON form carries the same names:
``{"clip_id": ..., "fps": ..., "frame_count": ..., "detections": [{"frame_index", "x", "y", "w", "h"}]}``.
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyTrack, InconsistentHeader, ParseError

DEFAULT_MAX_GAP = 15


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"bounding box {name} must be finite, got {v}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bounding box needs w > 0 and h > 0, got w={self.w} h={self.h}")

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class ActorTrack:
    clip_id: str
    fps: float
    frame_count: int
    boxes: tuple  # length frame_count, entries BoundingBox or None

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if len(self.boxes) != self.frame_count:
            raise ValueError(f"{len(self.boxes)} box slots for frame_count={self.frame_count}")
        if all(b is None for b in self.boxes):
            raise EmptyTrack(f"track {self.clip_id!r} has no detections")

    @property
    def present_frames(self):
        return [i for i, b in enumerate(self.boxes) if b is not None]

    def to_json(self):
        return {
            "clip_id": self.clip_id,
            "fps": self.fps,
            "frame_count": self.frame_count,
            "detections": [
                {"frame_index": i, "x": b.x, "y": b.y, "w": b.w, "h": b.h}
                for i, b in enumerate(self.boxes)
                if b is not None
            ],
        }


def _build(clip_id, fps, frame_count, detections, path):
    """detections: iterable of (line_no, frame_index, x, y, w, h)."""
    boxes = [None] * frame_count
    for line_no, fi, x, y, w, h in detections:
        if fi != int(fi):
            raise ParseError(f"frame_index {fi} is not an integer", line_no, path)
        fi = int(fi)
        if not 0 <= fi < frame_count:
            raise ParseError(f"frame_index {fi} outside [0, {frame_count})", line_no, path)
        if boxes[fi] is not None:
            raise ParseError(f"duplicate detection for frame {fi}", line_no, path)
        try:
            boxes[fi] = BoundingBox(x, y, w, h)
        except ValueError as exc:
            raise ParseError(str(exc), line_no, path) from None
    if all(b is None for b in boxes):
        raise EmptyTrack(f"{path}: no detections")
    return ActorTrack(clip_id, fps, frame_count, tuple(boxes))


def _header(clip_id, fps, frame_count, path):
    if clip_id in (None, "") or fps in (None, "") or frame_count in (None, ""):
        raise InconsistentHeader(f"{path}: header needs clip_id, fps and frame_count")
    try:
        fps = float(fps)
        frame_count_f = float(frame_count)
    except (TypeError, ValueError):
        raise InconsistentHeader(f"{path}: non-numeric fps/frame_count") from None
    if not (math.isfinite(fps) and fps > 0):
        raise InconsistentHeader(f"{path}: fps must be positive, got {fps}")
    if frame_count_f != int(frame_count_f) or frame_count_f < 1:
        raise InconsistentHeader(f"{path}: frame_count must be a positive integer")
    return str(clip_id), fps, int(frame_count_f)


def _parse_text(text, path):
    lines = [(n, ln.strip()) for n, ln in enumerate(text.splitlines(), start=1)]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InconsistentHeader(f"{path}: empty track file")
    n0, head = lines[0]
    parts = [p.strip() for p in head.split(",")]
    if len(parts) != 3:
        raise InconsistentHeader(f"{path}:{n0}: header must be clip_id,fps,frame_count")
    # a literal column-name header line is tolerated before the values
    if parts == ["clip_id", "fps", "frame_count"]:
        if len(lines) < 2:
            raise InconsistentHeader(f"{path}: header values missing")
        n0, head = lines[1]
        parts = [p.strip() for p in head.split(",")]
        lines = lines[1:]
        if len(parts) != 3:
            raise InconsistentHeader(f"{path}:{n0}: header must be clip_id,fps,frame_count")
    clip_id, fps, frame_count = _header(*parts, path)

    detections = []
    for n, ln in lines[1:]:
        fields = [f.strip() for f in ln.split(",")]
        if fields == ["frame_index", "x", "y", "w", "h"]:
            continue
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", n, path)
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric field in {ln!r}", n, path) from None
        detections.append((n, *values))
    return _build(clip_id, fps, frame_count, detections, path)


def _parse_json(text, path):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    if not isinstance(data, dict):
        raise ParseError("top-level JSON must be an object", 1, path)
    clip_id, fps, frame_count = _header(
        data.get("clip_id"), data.get("fps"), data.get("frame_count"), path
    )
    detections = []
    for i, d in enumerate(data.get("detections", [])):
        try:
            values = [float(d[k]) for k in ("frame_index", "x", "y", "w", "h")]
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"detection #{i} malformed: {d!r}", None, path) from None
        # detection number stands in for a line number in JSON input
        detections.append((i, *values))
    return _build(clip_id, fps, frame_count, detections, path)


def parse_track(path):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return _parse_json(text, path)
    return _parse_text(text, path)


def write_track(track, path):
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(track.to_json(), indent=2) + "\n", encoding="utf-8")
        return
    rows = [f"{track.clip_id},{track.fps!r},{track.frame_count}"]
    for i, b in enumerate(track.boxes):
        if b is not None:
            rows.append(f"{i},{b.x!r},{b.y!r},{b.w!r},{b.h!r}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def interpolate_track(track, max_gap=DEFAULT_MAX_GAP):
    """Fill interior detector misses of at most ``max_gap`` frames.

    Each of x, y, w, h is interpolated linearly between the flanking boxes.
    Leading and trailing misses are left empty.
    """
    if max_gap < 0:
        raise ValueError("max_gap must be >= 0")
    boxes = list(track.boxes)
    present = track.present_frames
    for left, right in zip(present, present[1:]):
        gap = right - left - 1
        if gap == 0 or gap > max_gap:
            continue
        a, b = boxes[left].as_tuple(), boxes[right].as_tuple()
        span = right - left
        for f in range(left + 1, right):
            t = (f - left) / span
            boxes[f] = BoundingBox(*(va + (vb - va) * t for va, vb in zip(a, b)))
    return ActorTrack(track.clip_id, track.fps, track.frame_count, tuple(boxes))
