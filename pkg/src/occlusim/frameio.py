"""Numbered frame directories (``000000.png``, ``000001.png``, ...)."""
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError

FRAME_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"}


def list_frame_files(directory):
    directory = Path(directory)
    files = [
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES and p.stem.isdigit()
    ]
    return sorted(files, key=lambda p: (int(p.stem), p.name))


def read_frame(path):
    try:
        with Image.open(path) as im:
            mode = "RGBA" if im.mode in ("RGBA", "LA", "PA") else "RGB"
            return np.array(im.convert(mode), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def read_frames(directory):
    files = list_frame_files(directory)
    return files, [read_frame(f) for f in files]


def write_frame(path, frame):
    path = Path(path)
    im = Image.fromarray(np.ascontiguousarray(frame))
    if path.suffix.lower() in (".jpg", ".jpeg"):
        im.convert("RGB").save(path, quality=95)
    else:
        im.save(path)


def read_clip_meta(directory):
    """Sidecar ``clip.json`` (fps, optional action_class); empty dict when absent."""
    p = Path(directory) / "clip.json"
    if not p.exists():
        return {}
    return json.loads(p.read_text(encoding="utf-8"))


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
