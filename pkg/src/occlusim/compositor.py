"""Per-frame occluder scaling and alpha-over compositing.

Frames are ``(height, width, 3)`` or ``(height, width, 4)`` uint8 arrays.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DegenerateScale, SynthesisError

DEFAULT_DEGREES = (0.25, 0.50, 0.75)
ANCHORS = ("bbox_center",)
RESAMPLE = {"bilinear": Image.Resampling.BILINEAR, "nearest": Image.Resampling.NEAREST}


def round_half_up(v):
    return int(math.floor(v + 0.5))


def check_degree(degree):
    if not (0 < degree <= 1) or not math.isfinite(degree):
        raise ValueError(f"occlusion degree must lie in (0, 1], got {degree}")


@dataclass(frozen=True)
class OcclusionSpec:
    degree: float
    occluder_id: str
    seed: int = 0
    anchor: str = "bbox_center"

    def __post_init__(self):
        check_degree(self.degree)
        if self.anchor not in ANCHORS:
            raise ValueError(f"unsupported anchor {self.anchor!r}")


@dataclass(frozen=True, eq=False)
class ScaledOccluder:
    rgba: np.ndarray  # (height, width, 4) uint8
    scale: float

    @property
    def width(self):
        return self.rgba.shape[1]

    @property
    def height(self):
        return self.rgba.shape[0]

    @property
    def mask(self):
        return self.rgba[..., 3] > 0


@dataclass
class Placement:
    frame_index: int
    dest_rect: tuple  # (x, y, w, h) after clipping to the frame
    target_rect: tuple  # (x, y, w, h) before clipping
    scale_factor: float
    visible_opaque_pixels: int
    frame_size: tuple  # (width, height)
    bbox: tuple = None  # (x, y, w, h) of the actor box used for this frame
    mask: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def fully_clipped(self):
        return self.dest_rect[2] == 0 or self.dest_rect[3] == 0

    def to_json(self):
        return {
            "frame_index": self.frame_index,
            "dest_rect": list(self.dest_rect),
            "target_rect": list(self.target_rect),
            "scale_factor": self.scale_factor,
            "visible_opaque_pixels": self.visible_opaque_pixels,
            "frame_size": list(self.frame_size),
            "bbox": list(self.bbox) if self.bbox is not None else None,
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            frame_index=int(d["frame_index"]),
            dest_rect=tuple(d["dest_rect"]),
            target_rect=tuple(d["target_rect"]),
            scale_factor=float(d["scale_factor"]),
            visible_opaque_pixels=int(d["visible_opaque_pixels"]),
            frame_size=tuple(d["frame_size"]),
            bbox=tuple(d["bbox"]) if d.get("bbox") is not None else None,
        )


def target_size(asset_w, asset_h, bbox, degree):
    """Uniform scale putting the binding dimension at ``degree`` of the box.

    Returns (scale, target_w, target_h) with targets rounded half-up.
    """
    s = degree * min(bbox.w / asset_w, bbox.h / asset_h)
    return s, round_half_up(s * asset_w), round_half_up(s * asset_h)


def resize_rgba(pixels, size, resample="bilinear"):
    """Resize color with ``resample`` and alpha with nearest neighbour.

    Pillow premultiplies RGBA for non-nearest filters, so transparent
    neighbours do not bleed into edge colors.
    """
    tw, th = size
    if (tw, th) == (pixels.shape[1], pixels.shape[0]):
        return np.array(pixels, dtype=np.uint8, copy=True)
    color = Image.fromarray(np.ascontiguousarray(pixels), "RGBA").resize((tw, th), RESAMPLE[resample])
    alpha = Image.fromarray(np.ascontiguousarray(pixels[..., 3]), "L").resize(
        (tw, th), Image.Resampling.NEAREST
    )
    out = np.array(color, dtype=np.uint8)
    out[..., 3] = np.asarray(alpha)
    return out


def scale_occluder(asset, bbox, degree, resample="bilinear"):
    check_degree(degree)
    s, tw, th = target_size(asset.width, asset.height, bbox, degree)
    if tw < 1 or th < 1:
        raise DegenerateScale(
            f"occluder {asset.width}x{asset.height} at degree {degree} in box "
            f"{bbox.w:g}x{bbox.h:g} rounds to {tw}x{th}"
        )
    return ScaledOccluder(resize_rgba(asset.pixels, (tw, th), resample), s)


def alpha_over(src, occ_rgb, alpha):
    """Integer alpha-over: out = (a*occ + (255-a)*src + 127) // 255.

    Exact at a=0 (returns src) and a=255 (returns occ).
    """
    a = alpha.astype(np.uint32)[..., None]
    out = (a * occ_rgb.astype(np.uint32) + (255 - a) * src.astype(np.uint32) + 127) // 255
    return out.astype(np.uint8)


def composite_frame(frame, scaled, center, frame_index=0):
    """Paste ``scaled`` onto a copy of ``frame`` centered at ``center``.

    The occluder is clipped at the frame borders. If nothing lands inside
    the frame the copy is unchanged and the placement is fully clipped.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] not in (3, 4) or frame.dtype != np.uint8:
        raise ValueError(f"frame must be (h, w, 3|4) uint8, got {frame.shape} {frame.dtype}")
    H, W = frame.shape[:2]
    tw, th = scaled.width, scaled.height
    x0 = round_half_up(center[0] - tw / 2.0)
    y0 = round_half_up(center[1] - th / 2.0)

    cx0, cy0 = min(max(x0, 0), W), min(max(y0, 0), H)
    cx1, cy1 = max(min(x0 + tw, W), cx0), max(min(y0 + th, H), cy0)
    out = frame.copy()
    visible = 0
    if cx1 > cx0 and cy1 > cy0:
        occ = scaled.rgba[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
        a = occ[..., 3]
        region = out[cy0:cy1, cx0:cx1]
        region[..., :3] = alpha_over(region[..., :3], occ[..., :3], a)
        if frame.shape[2] == 4:
            full = np.full(a.shape + (1,), 255, dtype=np.uint8)
            region[..., 3:] = alpha_over(region[..., 3:], full, a)
        visible = int(np.count_nonzero(a))

    placement = Placement(
        frame_index=frame_index,
        dest_rect=(cx0, cy0, cx1 - cx0, cy1 - cy0),
        target_rect=(x0, y0, tw, th),
        scale_factor=scaled.scale,
        visible_opaque_pixels=visible,
        frame_size=(W, H),
        mask=scaled.mask,
    )
    return out, placement


@dataclass
class ClipSynthesis:
    frames: list
    placements: list


def synthesize_clip(frames, track, spec, catalog, resample="bilinear"):
    """Occlude every frame that has an actor box; pass the rest through.

    The same occluder (``spec.occluder_id``) is used for the whole clip and
    rescaled per frame to the current box.
    """
    if len(frames) != track.frame_count:
        raise SynthesisError(f"{len(frames)} frames but track declares {track.frame_count}")
    asset = catalog.get(spec.occluder_id)
    cache = {}
    out_frames, placements = [], []
    for i, (frame, box) in enumerate(zip(frames, track.boxes)):
        if box is None:
            out_frames.append(np.asarray(frame).copy())
            continue
        s, tw, th = target_size(asset.width, asset.height, box, spec.degree)
        key = (tw, th)
        if key not in cache:
            try:
                cache[key] = scale_occluder(asset, box, spec.degree, resample)
            except DegenerateScale as exc:
                raise DegenerateScale(str(exc), frame_index=i) from None
        scaled = ScaledOccluder(cache[key].rgba, s)
        try:
            out, placement = composite_frame(frame, scaled, box.center, frame_index=i)
        except ValueError as exc:
            raise SynthesisError(str(exc), frame_index=i) from None
        placement.bbox = box.as_tuple()
        out_frames.append(out)
        placements.append(placement)
    return ClipSynthesis(out_frames, placements)
