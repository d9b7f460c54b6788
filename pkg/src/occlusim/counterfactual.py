"""Actor erasure under externally computed segmentation masks.

Replacing the actor's pixels while leaving everything else (occluders
included) untouched yields the counterfactual clip fed to a model next to
the factual one.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, FrameCountMismatch
from .frameio import list_frame_files

logger = logging.getLogger(__name__)

FILL_MODES = ("constant", "frame_mean", "horizontal_inpaint")
DEFAULT_FILL_VALUE = (114, 114, 114)
MASK_THRESHOLD = 128


@dataclass(frozen=True)
class FillPolicy:
    mode: str = "constant"
    constant_value: tuple = DEFAULT_FILL_VALUE

    def __post_init__(self):
        if self.mode not in FILL_MODES:
            raise ValueError(f"unknown fill mode {self.mode!r}; choose from {FILL_MODES}")
        value = tuple(int(v) for v in self.constant_value)
        if len(value) != 3 or any(not 0 <= v <= 255 for v in value):
            raise ValueError(f"constant_value must be three ints in [0, 255], got {self.constant_value}")
        object.__setattr__(self, "constant_value", value)

    @classmethod
    def parse(cls, text):
        """Parse ``constant:R,G,B``, ``constant``, ``frame_mean`` or ``horizontal_inpaint``."""
        mode, _, arg = text.partition(":")
        if mode == "constant" and arg:
            try:
                return cls("constant", tuple(int(v) for v in arg.split(",")))
            except ValueError:
                raise ValueError(f"bad constant fill {text!r}") from None
        if arg:
            raise ValueError(f"fill mode {mode!r} takes no argument")
        return cls(mode)


@dataclass
class MaskSequence:
    clip_id: str
    masks: list  # per frame: (h, w) bool array, or None when missing


def binarize(gray):
    return np.asarray(gray) >= MASK_THRESHOLD


def _read_mask(path):
    try:
        with Image.open(path) as im:
            return binarize(np.array(im.convert("L")))
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def load_masks(directory, frame_count=None, clip_id=None, allow_missing=False):
    """Read numbered single-channel masks, binarized at 128.

    By default the number of mask files must equal ``frame_count``. With
    ``allow_missing`` masks are aligned by the number in their file name and
    frames without one get ``None``.
    """
    directory = Path(directory)
    files = list_frame_files(directory)
    clip_id = clip_id if clip_id is not None else directory.name
    if allow_missing:
        if frame_count is None:
            raise ValueError("allow_missing needs frame_count")
        masks = [None] * frame_count
        for f in files:
            i = int(f.stem)
            if i >= frame_count:
                raise FrameCountMismatch(f"{f}: mask number {i} beyond {frame_count} frames")
            masks[i] = _read_mask(f)
        return MaskSequence(clip_id, masks)
    if frame_count is not None and len(files) != frame_count:
        raise FrameCountMismatch(f"{directory}: {len(files)} masks for {frame_count} frames")
    return MaskSequence(clip_id, [_read_mask(f) for f in files])


def _round_mean(values):
    """Per-channel mean of an (n, c) integer array, rounded half up."""
    n = values.shape[0]
    sums = values.astype(np.int64).sum(axis=0)
    return ((2 * sums + n) // (2 * n)).astype(np.uint8)


def _fill_horizontal(frame, mask, fallback):
    """Linear fill along each row between the nearest unmasked neighbours.

    Runs touching a row end copy the single available neighbour; fully
    masked rows take ``fallback``.
    """
    out = frame.copy()
    xs = np.arange(frame.shape[1])
    for r in np.flatnonzero(mask.any(axis=1)):
        row_mask = mask[r]
        known = xs[~row_mask]
        if known.size == 0:
            out[r, :, :3] = fallback
            continue
        holes = xs[row_mask]
        for ch in range(3):
            vals = frame[r, known, ch].astype(np.float64)
            # np.interp clamps outside the known range, giving the copy behaviour
            filled = np.interp(holes, known, vals)
            out[r, holes, ch] = np.floor(filled + 0.5).astype(np.uint8)
    return out


def erase_frame(frame, mask, policy):
    frame = np.asarray(frame)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frame.shape[:2]:
        raise DimensionMismatch(f"mask {mask.shape} vs frame {frame.shape[:2]}")
    if not mask.any():
        return frame.copy()
    if policy.mode == "constant":
        out = frame.copy()
        out[mask, :3] = policy.constant_value
        return out
    unmasked = frame[~mask][:, :3]
    fallback = np.array(policy.constant_value, dtype=np.uint8) if unmasked.size == 0 else _round_mean(unmasked)
    if policy.mode == "frame_mean":
        out = frame.copy()
        out[mask, :3] = fallback
        return out
    return _fill_horizontal(frame, mask, fallback)


def erase_actor(frames, masks, policy=FillPolicy()):
    """Return (erased frames, indices of frames that had no mask).

    Frames without a mask pass through unchanged.
    """
    mask_list = masks.masks if isinstance(masks, MaskSequence) else list(masks)
    if len(mask_list) != len(frames):
        raise DimensionMismatch(f"{len(mask_list)} masks for {len(frames)} frames")
    out, missing = [], []
    for i, (frame, mask) in enumerate(zip(frames, mask_list)):
        if mask is None:
            logger.warning("frame %d has no actor mask; left unchanged", i)
            missing.append(i)
            out.append(np.asarray(frame).copy())
            continue
        try:
            out.append(erase_frame(frame, mask, policy))
        except DimensionMismatch as exc:
            raise DimensionMismatch(f"frame {i}: {exc}") from None
    return out, missing
