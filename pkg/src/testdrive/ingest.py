"""Dataset manifest / detections / ground-truth loading and patch extraction."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BoundingBox, Detection, sort_detections
from .errors import DataError

log = logging.getLogger(__name__)

# ITU-R 601 luma weights for RGB -> grayscale.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: Path
    width: int
    height: int


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate image_id in manifest")

    def entry(self, image_id: str) -> ManifestEntry:
        e = self._by_id().get(image_id)
        if e is None:
            raise DataError(f"unknown image_id {image_id!r}")
        return e

    def _by_id(self) -> dict[str, ManifestEntry]:
        return {e.image_id: e for e in self.entries}

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id()


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: str
    box: BoundingBox


@dataclass(frozen=True)
class Patch:
    """Grayscale patch at a fixed resolution, with its provenance."""

    pixels: np.ndarray  # (h, w) float in [0, 1]
    image_id: str
    source_box: BoundingBox


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a manifest.csv (header: image_id,path,width,height)."""
    path = Path(path)
    root = path.parent
    entries: list[ManifestEntry] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or set(reader.fieldnames) < {"image_id", "path", "width", "height"}:
            raise DataError(f"{path}: manifest header must be image_id,path,width,height")
        for lineno, row in enumerate(reader, start=2):
            try:
                entry = ManifestEntry(row["image_id"], root / row["path"],
                                      int(row["width"]), int(row["height"]))
            except (KeyError, TypeError, ValueError) as e:
                raise DataError(f"{path}:{lineno}: malformed manifest row ({e})") from e
            if not entry.path.is_file():
                raise DataError(f"{path}:{lineno}: image file not found: {entry.path}")
            entries.append(entry)
    if not entries:
        raise DataError(f"{path}: empty dataset")
    return DatasetManifest(root, tuple(entries))


def _parse_box_row(row: list[str], lineno: int, path: Path,
                   manifest: DatasetManifest, with_score: bool):
    want = 6 if with_score else 5
    if len(row) != want:
        raise DataError(f"{path}:{lineno}: expected {want} fields, got {len(row)}")
    image_id = row[0].strip()
    if image_id not in manifest:
        raise DataError(f"{path}:{lineno}: unknown image_id {image_id!r}")
    try:
        nums = [float(v) for v in row[1:]]
    except ValueError as e:
        raise DataError(f"{path}:{lineno}: malformed number ({e})") from e
    if any(not math.isfinite(v) for v in nums):
        raise DataError(f"{path}:{lineno}: non-finite value")
    entry = manifest.entry(image_id)
    box = BoundingBox(*nums[:4])
    clamped = box.clamped(entry.width, entry.height)
    if clamped != box:
        log.warning("%s:%d: box clamped to image bounds (%s -> %s)", path, lineno, box, clamped)
    score = nums[4] if with_score else None
    return image_id, clamped, score


def load_detections(path: str | Path, manifest: DatasetManifest) -> list[Detection]:
    """Load detections.csv (header: image_id,x,y,w,h,score), clamping boxes."""
    path = Path(path)
    dets: list[Detection] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["image_id", "x", "y", "w", "h", "score"]:
            raise DataError(f"{path}: header must be image_id,x,y,w,h,score")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            image_id, box, score = _parse_box_row(row, lineno, path, manifest, with_score=True)
            dets.append(Detection(image_id, box, score))
    return sort_detections(dets)


def load_groundtruth(path: str | Path, manifest: DatasetManifest) -> list[GroundTruthBox]:
    """Load groundtruth.csv (header: image_id,x,y,w,h)."""
    path = Path(path)
    boxes: list[GroundTruthBox] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["image_id", "x", "y", "w", "h"]:
            raise DataError(f"{path}: header must be image_id,x,y,w,h")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            image_id, box, _ = _parse_box_row(row, lineno, path, manifest, with_score=False)
            boxes.append(GroundTruthBox(image_id, box))
    return boxes


def load_image(entry: ManifestEntry) -> np.ndarray:
    """Decode an image to a grayscale float array in [0, 1]."""
    with Image.open(entry.path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3:
        arr = arr[:, :, :3] @ _LUMA
    return np.clip(arr, 0.0, 1.0)


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Deterministic bilinear resampling with pixel-center alignment."""
    in_h, in_w = img.shape
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    ys = np.clip(ys, 0, in_h - 1)
    xs = np.clip(xs, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def extract_patch(image: np.ndarray, box: BoundingBox, target_w: int, target_h: int,
                  image_id: str = "") -> Patch:
    """Crop `box` from a grayscale image and resample to (target_h, target_w)."""
    if target_w <= 0 or target_h <= 0:
        raise DataError("target dimensions must be positive")
    h, w = image.shape
    b = box.clamped(w, h)
    y1, y2 = int(math.floor(b.y)), int(math.ceil(b.y2))
    x1, x2 = int(math.floor(b.x)), int(math.ceil(b.x2))
    crop = image[y1:y2, x1:x2]
    if crop.size == 0:
        raise DataError(f"zero-area crop for box {box}")
    pixels = np.clip(bilinear_resize(crop, target_h, target_w), 0.0, 1.0)
    return Patch(pixels, image_id, box)
