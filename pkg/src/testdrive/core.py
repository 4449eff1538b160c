"""Shared domain types and detection-threshold bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left corner at (x, y), in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DataError(f"box must have positive size, got w={self.w} h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def clamped(self, img_w: float, img_h: float) -> "BoundingBox":
        """Clip the box to [0, img_w] x [0, img_h]."""
        x1 = min(max(self.x, 0.0), img_w)
        y1 = min(max(self.y, 0.0), img_h)
        x2 = min(max(self.x2, 0.0), img_w)
        y2 = min(max(self.y2, 0.0), img_h)
        if x2 - x1 <= 0 or y2 - y1 <= 0:
            raise DataError(f"box {self} lies outside the {img_w}x{img_h} image")
        return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise DataError(f"detection score must be finite, got {self.score}")


@dataclass(frozen=True)
class Label:
    """A binary object/non-object answer."""

    value: int
    source: str = "human"  # "human" | "simulated"

    def __post_init__(self):
        if self.value not in (0, 1):
            raise DataError(f"label value must be 0 or 1, got {self.value}")
        if self.source not in ("human", "simulated"):
            raise DataError(f"unknown label source {self.source!r}")


def sort_detections(detections: list[Detection]) -> list[Detection]:
    """Canonical deterministic ordering: image_id, score desc, then x, y."""
    return sorted(detections, key=lambda d: (d.image_id, -d.score, d.box.x, d.box.y))


def filter_detections(detections: list[Detection], gamma: float) -> list[int]:
    """Indices of detections with score >= gamma (closed threshold).

    The result is ordered by (image_id, score desc, x, y) for reproducibility.
    """
    idx = [i for i, d in enumerate(detections) if d.score >= gamma]
    idx.sort(key=lambda i: (detections[i].image_id, -detections[i].score,
                            detections[i].box.x, detections[i].box.y))
    return idx


@dataclass(frozen=True)
class ThresholdSweep:
    """Ordered thresholds with the (nested) detection index set at each one."""

    gammas: tuple[float, ...]
    index_sets: tuple[tuple[int, ...], ...] = field(repr=False)

    def __post_init__(self):
        if len(self.gammas) != len(self.index_sets):
            raise ConfigError("gammas and index sets must align")
        if any(b <= a for a, b in zip(self.gammas, self.gammas[1:])):
            raise ConfigError("gammas must be strictly increasing")

    def indices_at(self, gamma: float) -> tuple[int, ...]:
        for g, idx in zip(self.gammas, self.index_sets):
            if g == gamma:
                return idx
        raise ConfigError(f"gamma {gamma} is not part of this sweep")


def build_sweep(detections: list[Detection],
                gammas: list[float] | None = None,
                quantile_count: int | None = None) -> ThresholdSweep:
    """Build a threshold sweep from an explicit gamma list or score quantiles.

    The quantile strategy places `quantile_count` thresholds at evenly spaced
    score quantiles (midpoints: 10/30/50/70/90th percentiles for count 5).
    Duplicate effective thresholds are collapsed.
    """
    if not detections:
        raise DataError("no detections")
    if gammas is None:
        if quantile_count is None or quantile_count < 1:
            raise ConfigError("need an explicit gamma list or a quantile count >= 1")
        scores = np.array([d.score for d in detections], dtype=float)
        qs = (np.arange(quantile_count) + 0.5) / quantile_count
        gammas = [float(np.quantile(scores, q)) for q in qs]
    gl = sorted(set(float(g) for g in gammas))
    if not gl:
        raise ConfigError("empty gamma list")
    # Collapse gammas that select identical detection sets (degenerate scores).
    sets: list[tuple[int, ...]] = []
    kept: list[float] = []
    for g in gl:
        idx = tuple(filter_detections(detections, g))
        if sets and idx == sets[-1]:
            continue
        kept.append(g)
        sets.append(idx)
    return ThresholdSweep(tuple(kept), tuple(sets))
