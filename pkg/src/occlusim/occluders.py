"""Occluder assets: RGBA cut-outs pasted over the actor."""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, EmptyCatalog, NoAlphaChannel, TooSmall
from .rng import SplitMix64

logger = logging.getLogger(__name__)

CATEGORIES = ("backpack", "handbag", "suitcase", "dog", "custom")
DEFAULT_MIN_OPAQUE_PIXELS = 30_000
IMAGE_SUFFIXES = {".png", ".webp", ".tif", ".tiff", ".gif"}

# directory names seen in the wild that map onto a canonical category
_CATEGORY_ALIASES = {
    "backpacks": "backpack",
    "handbags": "handbag",
    "suitcases": "suitcase",
    "dogs": "dog",
}


def infer_category(directory_name):
    name = directory_name.lower()
    name = _CATEGORY_ALIASES.get(name, name)
    return name if name in CATEGORIES else "custom"


@dataclass(frozen=True, eq=False)
class OccluderAsset:
    id: str
    category: str
    pixels: np.ndarray  # (height, width, 4) uint8, read-only
    file_name: str = ""
    opaque_pixel_count: int = field(init=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 4 or px.dtype != np.uint8:
            raise ValueError(f"pixels must be (h, w, 4) uint8, got {px.shape} {px.dtype}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise ValueError("occluder must have positive width and height")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "opaque_pixel_count", int(np.count_nonzero(px[..., 3])))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def alpha(self):
        return self.pixels[..., 3]

    def __eq__(self, other):
        if not isinstance(other, OccluderAsset):
            return NotImplemented
        return (
            self.id == other.id
            and self.category == other.category
            and self.file_name == other.file_name
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


def _has_alpha(im):
    return im.mode in ("RGBA", "LA", "PA", "RGBa", "La") or (
        im.mode == "P" and "transparency" in im.info
    )


def load_occluder(path, min_opaque_pixels=DEFAULT_MIN_OPAQUE_PIXELS, asset_id=None):
    """Read one cut-out; reject it if it has too few opaque pixels."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if not _has_alpha(im):
                raise NoAlphaChannel(f"{path}: image mode {im.mode} carries no alpha")
            rgba = np.array(im.convert("RGBA"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc

    asset = OccluderAsset(
        id=asset_id if asset_id is not None else f"{path.parent.name}/{path.name}",
        category=infer_category(path.parent.name),
        pixels=rgba,
        file_name=path.name,
    )
    if asset.opaque_pixel_count < min_opaque_pixels:
        raise TooSmall(
            f"{path}: {asset.opaque_pixel_count} opaque pixels < {min_opaque_pixels}"
        )
    return asset


@dataclass(frozen=True)
class OccluderCatalog:
    assets: tuple
    rejected: tuple = ()  # (relative path, reason) for quality-control rejects

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        ids = [a.id for a in self.assets]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate occluder ids in catalog")

    @property
    def category_index(self):
        index = {}
        for i, asset in enumerate(self.assets):
            index.setdefault(asset.category, []).append(i)
        return {k: tuple(v) for k, v in index.items()}

    def counts(self):
        return {k: len(v) for k, v in self.category_index.items()}

    def get(self, asset_id):
        for asset in self.assets:
            if asset.id == asset_id:
                return asset
        raise KeyError(asset_id)

    def __len__(self):
        return len(self.assets)


def load_catalog(root, min_opaque_pixels=DEFAULT_MIN_OPAQUE_PIXELS):
    """Load every image under ``root`` (``<root>/<category>/<file>``).

    Files failing decode or quality control are skipped and listed in
    ``catalog.rejected``. Order is lexicographic by path relative to ``root``.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"occluder directory not found: {root}")
    files = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    assets, rejected = [], []
    for p in files:
        rel = p.relative_to(root).as_posix()
        try:
            assets.append(load_occluder(p, min_opaque_pixels, asset_id=rel))
        except (DecodeError, NoAlphaChannel, TooSmall) as exc:
            logger.info("rejecting occluder %s: %s", rel, exc)
            rejected.append((rel, type(exc).__name__))
    return OccluderCatalog(tuple(assets), tuple(rejected))


def sample_occluder(catalog, seed, category_filter=None):
    """Pick one asset uniformly over eligible assets.

    The index is ``SplitMix64(seed).below(n_eligible)``, taken over the
    catalog's stable ordering, so the result is a pure function of
    (catalog order, seed, filter).
    """
    if category_filter is None:
        eligible = range(len(catalog.assets))
    else:
        eligible = catalog.category_index.get(category_filter, ())
    if len(eligible) == 0:
        raise EmptyCatalog(
            "no occluders available" + (f" in category {category_filter!r}" if category_filter else "")
        )
    return catalog.assets[eligible[SplitMix64(seed).below(len(eligible))]]
