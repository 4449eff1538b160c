"""Build the detection complement: object-scale tiles over image regions the
detector did not flag."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BoundingBox, Detection, intersection_area
from .errors import DataError
from .ingest import DatasetManifest

log = logging.getLogger(__name__)

MIN_TILE = 8  # px floor for the averaged box


def average_box(detections: list[Detection]) -> tuple[int, int]:
    """Mean detection width/height, rounded to the nearest pixel, floored at 8."""
    if not detections:
        raise DataError("no detections to average; supply an explicit tile size")
    w = float(np.mean([d.box.w for d in detections]))
    h = float(np.mean([d.box.h for d in detections]))
    return max(MIN_TILE, int(np.floor(w + 0.5))), max(MIN_TILE, int(np.floor(h + 0.5)))


@dataclass(frozen=True)
class ComplementSet:
    patches: tuple[tuple[str, BoundingBox], ...]
    tile: tuple[int, int]  # (w, h)
    exclusion_threshold: float

    def __len__(self) -> int:
        return len(self.patches)


def _tile_edges(extent: int, tile: int) -> list[tuple[int, int]]:
    """Full tiles at stride = tile; a final remainder strip is kept only when
    it is at least half a tile wide."""
    edges = [(i * tile, (i + 1) * tile) for i in range(extent // tile)]
    rem = extent - (extent // tile) * tile
    if rem * 2 >= tile:
        edges.append(((extent // tile) * tile, extent))
    return edges


def build_complement(manifest: DatasetManifest, detections: list[Detection],
                     tile: tuple[int, int], exclusion_threshold: float = 0.2) -> ComplementSet:
    """Grid of tile-sized boxes per image, dropping every tile whose overlap
    with any detection exceeds `exclusion_threshold` of the tile's own area."""
    tw, th = tile
    if tw < 1 or th < 1:
        raise DataError("tile dimensions must be positive")
    by_image: dict[str, list[BoundingBox]] = {}
    for d in detections:
        by_image.setdefault(d.image_id, []).append(d.box)

    patches: list[tuple[str, BoundingBox]] = []
    for entry in manifest.entries:
        if entry.width < tw or entry.height < th:
            log.warning("image %s (%dx%d) smaller than tile %dx%d; skipped",
                        entry.image_id, entry.width, entry.height, tw, th)
            continue
        boxes = by_image.get(entry.image_id, [])
        for y1, y2 in _tile_edges(entry.height, th):
            for x1, x2 in _tile_edges(entry.width, tw):
                patch = BoundingBox(x1, y1, x2 - x1, y2 - y1)
                limit = exclusion_threshold * patch.area
                if any(intersection_area(patch, b) > limit for b in boxes):
                    continue
                patches.append((entry.image_id, patch))
    return ComplementSet(tuple(patches), (tw, th), exclusion_threshold)


def save_complement(cset: ComplementSet, path: str | Path):
    """Audit dump in the detections CSV format, score column omitted."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["image_id", "x", "y", "w", "h"])
        for image_id, b in cset.patches:
            w.writerow([image_id, f"{b.x:g}", f"{b.y:g}", f"{b.w:g}", f"{b.h:g}"])
