"""Occlusion factors: degree, area ratio and duration ratio.

A pixel belongs to a box when its center lies inside it, i.e. column ``i``
is covered when ``x <= i + 0.5 < x + w``.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyBox


@dataclass
class OcclusionMetrics:
    degree: float
    area_ratio_per_frame: list
    mean_area_ratio: float
    duration_ratio: float
    measured_degree_per_frame: list = None

    def to_json(self):
        return asdict(self)


def bbox_pixel_rect(bbox, frame_w, frame_h):
    """Integer pixel span (x0, y0, x1, y1) of ``bbox`` clipped to the frame."""
    x, y, w, h = bbox
    x0 = min(max(math.ceil(x - 0.5), 0), frame_w)
    x1 = min(max(math.ceil(x + w - 0.5), 0), frame_w)
    y0 = min(max(math.ceil(y - 0.5), 0), frame_h)
    y1 = min(max(math.ceil(y + h - 0.5), 0), frame_h)
    return x0, y0, max(x1, x0), max(y1, y0)


def _as_tuple(bbox):
    return bbox.as_tuple() if hasattr(bbox, "as_tuple") else tuple(bbox)


def occluded_actor_pixels(bbox, placement, occluder_alpha=None):
    """(opaque occluder pixels inside bbox ∩ frame, area of bbox ∩ frame)."""
    W, H = placement.frame_size
    bx0, by0, bx1, by1 = bbox_pixel_rect(_as_tuple(bbox), W, H)
    area = (bx1 - bx0) * (by1 - by0)
    mask = placement.mask if occluder_alpha is None else np.asarray(occluder_alpha) > 0
    if mask is None:
        raise ValueError("placement carries no occluder mask; pass occluder_alpha")
    tx, ty, tw, th = placement.target_rect
    if mask.shape != (th, tw):
        raise ValueError(f"occluder mask {mask.shape} does not match target {th}x{tw}")
    # overlap of the occluder's unclipped rect with the clipped box span
    ox0, oy0 = max(bx0, tx), max(by0, ty)
    ox1, oy1 = min(bx1, tx + tw), min(by1, ty + th)
    if ox1 <= ox0 or oy1 <= oy0:
        return 0, area
    covered = int(np.count_nonzero(mask[oy0 - ty:oy1 - ty, ox0 - tx:ox1 - tx]))
    return covered, area


def occlusion_area_ratio(bbox, placement, occluder_alpha=None):
    covered, area = occluded_actor_pixels(bbox, placement, occluder_alpha)
    if area == 0:
        raise EmptyBox(f"box {_as_tuple(bbox)} has no pixels inside the frame")
    return covered / area


def occlusion_duration_ratio(track, placements, occluder_alphas=None):
    """Fraction of all clip frames in which opaque occluder pixels cover the actor.

    A placement counts when it has visible opaque pixels that fall inside its
    frame's actor box. Without masks, overlap of the clipped occluder rect with
    the box is used instead.
    """
    if len(placements) > track.frame_count:
        raise ValueError("more placements than frames")
    occluded = set()
    for j, p in enumerate(placements):
        if p.visible_opaque_pixels <= 0:
            continue
        box = track.boxes[p.frame_index]
        if box is None and p.bbox is None:
            continue
        box = p.bbox if p.bbox is not None else box
        alpha = occluder_alphas[j] if occluder_alphas is not None else None
        if alpha is None and p.mask is None:
            hit = _rects_overlap(box, p)
        else:
            hit = occluded_actor_pixels(box, p, alpha)[0] > 0
        if hit:
            occluded.add(p.frame_index)
    return len(occluded) / track.frame_count


def _rects_overlap(bbox, placement):
    W, H = placement.frame_size
    bx0, by0, bx1, by1 = bbox_pixel_rect(_as_tuple(bbox), W, H)
    dx, dy, dw, dh = placement.dest_rect
    return min(bx1, dx + dw) > max(bx0, dx) and min(by1, dy + dh) > max(by0, dy)


def measured_occlusion_degree(bbox, placement):
    """max(target_w / box_w, target_h / box_h) using the pre-clip target size."""
    _, _, bw, bh = _as_tuple(bbox)
    _, _, tw, th = placement.target_rect
    if bw <= 0 or bh <= 0:
        raise EmptyBox(f"degenerate box {_as_tuple(bbox)}")
    if tw <= 0 or th <= 0:
        raise EmptyBox("placement has an empty target rect")
    return max(tw / bw, th / bh)


def clip_metrics(track, placements, degree):
    """Per-clip summary over frames that received a placement."""
    ratios, measured = [], []
    for p in placements:
        box = p.bbox if p.bbox is not None else track.boxes[p.frame_index]
        ratios.append(occlusion_area_ratio(box, p))
        measured.append(measured_occlusion_degree(box, p))
    mean = math.fsum(ratios) / len(ratios) if ratios else 0.0
    return OcclusionMetrics(
        degree=degree,
        area_ratio_per_frame=ratios,
        mean_area_ratio=mean,
        duration_ratio=occlusion_duration_ratio(track, placements),
        measured_degree_per_frame=measured,
    )
