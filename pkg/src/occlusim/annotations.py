"""Per-clip annotation CSVs and the clip manifest.

Three schema tiers are supported:

* ``D`` (tracking occlusion): all ten fields of :class:`ClipAnnotation`.
* ``S`` (static scene): action_class, file_name, fps, video_duration.
* ``I`` / ``M`` (interactive): action_class, file_name.

Writing uses the canonical column order; reading is keyed by header name.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, fields
from datetime import datetime
from pathlib import Path

from .errors import RowError, SchemaError
from .frameio import atomic_write_text

D_FIELDS = (
    "action_class",
    "file_name",
    "occluder_type",
    "occluder_file_name",
    "occluder_pixel_ratio",
    "occluder_size_ratio",
    "occlusion_duration",
    "video_duration",
    "fps",
    "clip_generation_time",
)
SCHEMAS = {
    "D": D_FIELDS,
    "S": ("action_class", "file_name", "fps", "video_duration"),
    "I": ("action_class", "file_name"),
    "M": ("action_class", "file_name"),
}
FLOAT_FIELDS = {
    "occluder_pixel_ratio",
    "occluder_size_ratio",
    "occlusion_duration",
    "video_duration",
    "fps",
}


@dataclass(frozen=True)
class ClipAnnotation:
    action_class: str
    file_name: str
    occluder_type: str = None
    occluder_file_name: str = None
    occluder_pixel_ratio: float = None
    occluder_size_ratio: float = None
    occlusion_duration: float = None  # seconds
    video_duration: float = None  # seconds
    fps: float = None
    clip_generation_time: str = None  # ISO-8601


def validate(record, schema="D"):
    """List of problems with ``record`` under ``schema`` (empty when valid)."""
    problems = []
    for name in SCHEMAS[schema]:
        v = getattr(record, name)
        if v is None:
            problems.append(f"{name} missing")
        elif name in FLOAT_FIELDS and not math.isfinite(v):
            problems.append(f"{name} not finite")
        elif isinstance(v, str) and "\0" in v:
            problems.append(f"{name} contains a NUL character")
    if problems:
        return problems
    for name in ("occluder_pixel_ratio", "occluder_size_ratio"):
        v = getattr(record, name)
        if v is not None and not 0 <= v <= 1:
            problems.append(f"{name}={v} outside [0, 1]")
    if record.fps is not None and record.fps <= 0:
        problems.append(f"fps={record.fps} must be positive")
    if record.video_duration is not None and record.video_duration < 0:
        problems.append(f"video_duration={record.video_duration} is negative")
    if record.occlusion_duration is not None:
        if record.occlusion_duration < 0:
            problems.append(f"occlusion_duration={record.occlusion_duration} is negative")
        elif record.video_duration is not None and record.occlusion_duration > record.video_duration:
            problems.append("occlusion_duration exceeds video_duration")
    if record.clip_generation_time is not None:
        try:
            datetime.fromisoformat(record.clip_generation_time.replace("Z", "+00:00"))
        except ValueError:
            problems.append(f"clip_generation_time {record.clip_generation_time!r} is not ISO-8601")
    return problems


def _format(name, value):
    return repr(float(value)) if name in FLOAT_FIELDS else value


def format_annotations(records, schema="D"):
    if schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}")
    columns = SCHEMAS[schema]
    bad = [(i, "; ".join(p)) for i, r in enumerate(records, start=2) if (p := validate(r, schema))]
    if bad:
        raise RowError(bad)
    lines = [",".join(columns)]
    lines += [",".join(_quote(_format(name, getattr(r, name))) for name in columns) for r in records]
    return "\n".join(lines) + "\n"


def _quote(field):
    # csv.writer with an LF terminator leaves a bare CR unquoted, which its own reader then splits on
    if any(ch in field for ch in ',"\r\n'):
        return '"' + field.replace('"', '""') + '"'
    return field


def write_annotations(records, path, schema="D"):
    """Write records as UTF-8 CSV, canonical column order, LF line endings."""
    atomic_write_text(path, format_annotations(list(records), schema))


def infer_schema(header):
    cols = set(header)
    for name in ("D", "S", "I"):
        if set(SCHEMAS[name]) <= cols:
            return name
    missing = sorted(set(SCHEMAS["I"]) - cols)
    raise SchemaError(f"header lacks required columns: {', '.join(missing)}")


def parse_annotations(text, schema=None):
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("annotation file is empty") from None
    if schema is None:
        schema = infer_schema(header)
    elif schema not in SCHEMAS:
        raise SchemaError(f"unknown schema {schema!r}")
    missing = [c for c in SCHEMAS[schema] if c not in header]
    if missing:
        raise SchemaError(f"missing column(s) for schema {schema}: {', '.join(missing)}")
    index = {name: header.index(name) for name in SCHEMAS[schema]}

    records, errors = [], []
    for row_no, row in enumerate(reader, start=2):
        if len(row) != len(header):
            errors.append((row_no, f"expected {len(header)} fields, got {len(row)}"))
            continue
        values = {}
        try:
            for name, i in index.items():
                values[name] = float(row[i]) if name in FLOAT_FIELDS else row[i]
        except ValueError:
            errors.append((row_no, f"{name}={row[i]!r} is not a number"))
            continue
        record = ClipAnnotation(**values)
        problems = validate(record, schema)
        if problems:
            errors.append((row_no, "; ".join(problems)))
        else:
            records.append(record)
    if errors:
        raise RowError(errors)
    return records


def read_annotations(path, schema=None):
    with open(path, encoding="utf-8", newline="") as f:
        return parse_annotations(f.read(), schema)


# clip manifest: {"clips": {clip_id: {"frames": ..., "track": ..., "masks": ..., "action_class": ...}}}

MANIFEST_KEYS = ("frames", "track", "masks", "action_class")


def load_manifest(path):
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    clips = data.get("clips")
    if not isinstance(clips, dict):
        raise SchemaError(f"{path}: manifest needs a 'clips' object")
    out = {}
    for clip_id, entry in clips.items():
        unknown = set(entry) - set(MANIFEST_KEYS)
        if unknown:
            raise SchemaError(f"{path}: clip {clip_id!r} has unknown keys {sorted(unknown)}")
        resolved = dict(entry)
        for key in ("frames", "track", "masks"):
            if resolved.get(key) is not None:
                resolved[key] = str((path.parent / resolved[key]).resolve())
        out[clip_id] = resolved
    return out


def write_manifest(clips, path):
    atomic_write_text(path, json.dumps({"clips": clips}, indent=2, sort_keys=True) + "\n")


def annotation_fields():
    return [f.name for f in fields(ClipAnnotation)]
