"""Histogram-of-oriented-gradients descriptors for patches."""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .ingest import Patch

# Standard descriptor geometry: 64x128 patches, 8px cells, 2x2-cell blocks,
# 9 unsigned bins, block clip 0.2 (Dalal-Triggs defaults).
PATCH_W = 64
PATCH_H = 128


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 8
    block_size: int = 2  # in cells, square
    bins: int = 9
    signed: bool = False
    clip: float = 0.2

    def __post_init__(self):
        if self.cell_size < 1:
            raise ConfigError("cell_size must be positive")
        if self.bins < 2:
            raise ConfigError("need at least 2 orientation bins")
        if not (0 < self.clip <= 1):
            raise ConfigError("clip must be in (0, 1]")

    def descriptor_dim(self, patch_w: int, patch_h: int) -> int:
        ncx = patch_w // self.cell_size
        ncy = patch_h // self.cell_size
        nbx = ncx - self.block_size + 1
        nby = ncy - self.block_size + 1
        return nbx * nby * self.block_size * self.block_size * self.bins

    def key(self) -> bytes:
        return repr((self.cell_size, self.block_size, self.bins, self.signed, self.clip)).encode()


def _cell_histograms(pixels: np.ndarray, cfg: HogConfig) -> np.ndarray:
    """Orientation histograms per cell with trilinear (bin + spatial) voting."""
    h, w = pixels.shape
    cs = cfg.cell_size
    ncy, ncx = h // cs, w // cs
    gy, gx = np.gradient(pixels)
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)  # [-pi, pi]
    period = 2 * np.pi if cfg.signed else np.pi
    ang = np.mod(ang, period)

    # Orientation vote split between the two nearest bin centers.
    binw = period / cfg.bins
    fb = ang / binw - 0.5
    b0 = np.floor(fb).astype(int)
    wb1 = fb - b0
    b0 = np.mod(b0, cfg.bins)
    b1 = np.mod(b0 + 1, cfg.bins)

    # Spatial vote split bilinearly between the four nearest cell centers.
    yy, xx = np.mgrid[0:h, 0:w]
    fy = (yy + 0.5) / cs - 0.5
    fx = (xx + 0.5) / cs - 0.5
    cy0 = np.floor(fy).astype(int)
    cx0 = np.floor(fx).astype(int)
    wy1 = fy - cy0
    wx1 = fx - cx0

    hist = np.zeros((ncy, ncx, cfg.bins))
    for dy, wy in ((0, 1 - wy1), (1, wy1)):
        cy = cy0 + dy
        ok_y = (cy >= 0) & (cy < ncy)
        for dx, wx in ((0, 1 - wx1), (1, wx1)):
            cx = cx0 + dx
            ok = ok_y & (cx >= 0) & (cx < ncx)
            wsp = wy * wx * mag
            for b, wob in ((b0, 1 - wb1), (b1, wb1)):
                np.add.at(hist, (cy[ok], cx[ok], b[ok]), (wsp * wob)[ok])
    return hist


def hog(pixels: np.ndarray, config: HogConfig = HogConfig()) -> np.ndarray:
    """Compute the HOG descriptor of a grayscale patch.

    Blocks are L2-normalized, clipped at `config.clip`, and renormalized;
    zero-energy blocks stay zero.
    """
    h, w = pixels.shape
    cs, bs = config.cell_size, config.block_size
    if h % cs or w % cs:
        raise DataError(f"patch dims {w}x{h} not divisible by cell size {cs}")
    ncy, ncx = h // cs, w // cs
    if ncy < bs or ncx < bs:
        raise DataError("patch too small for one block")
    hist = _cell_histograms(pixels, config)

    nby, nbx = ncy - bs + 1, ncx - bs + 1
    out = np.empty((nby, nbx, bs * bs * config.bins))
    for by in range(nby):
        for bx in range(nbx):
            v = hist[by:by + bs, bx:bx + bs].ravel()
            n = np.linalg.norm(v)
            if n > 0:
                v = np.minimum(v / n, config.clip)
                n2 = np.linalg.norm(v)
                if n2 > 0:
                    v = v / n2
            out[by, bx] = v
    return out.ravel()


@dataclass
class FeatureMatrix:
    """Row-per-patch descriptor matrix with provenance."""

    X: np.ndarray  # (n, d)
    provenance: list[tuple[str, object]] = field(default_factory=list)

    def __post_init__(self):
        if self.X.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        if not np.all(np.isfinite(self.X)):
            raise DataError("feature matrix contains non-finite entries")

    def __len__(self) -> int:
        return self.X.shape[0]


def featurize(patches: list[Patch], config: HogConfig = HogConfig(),
              cache: "DescriptorCache | None" = None) -> FeatureMatrix:
    """Descriptor rows for a list of patches, in order."""
    if not patches:
        raise DataError("no patches to featurize")
    rows = []
    for p in patches:
        try:
            if cache is not None:
                rows.append(cache.get_or_compute(p.pixels, config))
            else:
                rows.append(hog(p.pixels, config))
        except DataError as e:
            raise DataError(f"patch from {p.image_id!r} {p.source_box}: {e}") from e
    prov = [(p.image_id, p.source_box) for p in patches]
    return FeatureMatrix(np.asarray(rows), prov)


class DescriptorCache:
    """File-backed descriptor cache keyed by (patch content, config) hashes.

    On-disk layout: magic, dimension, count header followed by fixed-size
    records of 20-byte key + float64 row.
    """

    MAGIC = b"TDHOGC1\0"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._store: dict[bytes, np.ndarray] = {}
        self._dim: int | None = None
        if self.path.exists():
            self._load()

    @staticmethod
    def _key(pixels: np.ndarray, config: HogConfig) -> bytes:
        hsh = hashlib.sha1()
        hsh.update(config.key())
        hsh.update(str(pixels.shape).encode())
        hsh.update(np.ascontiguousarray(pixels, dtype=np.float64).tobytes())
        return hsh.digest()

    def get_or_compute(self, pixels: np.ndarray, config: HogConfig) -> np.ndarray:
        k = self._key(pixels, config)
        row = self._store.get(k)
        if row is None:
            row = hog(pixels, config)
            if self._dim is None:
                self._dim = row.size
            elif row.size != self._dim:
                raise DataError("descriptor dimension mismatch in cache")
            self._store[k] = row
        return row

    def _load(self):
        with open(self.path, "rb") as f:
            magic = f.read(8)
            if magic != self.MAGIC:
                raise DataError(f"{self.path}: not a descriptor cache file")
            dim, count = struct.unpack("<qq", f.read(16))
            self._dim = dim
            for _ in range(count):
                key = f.read(20)
                row = np.frombuffer(f.read(8 * dim), dtype="<f8")
                self._store[key] = row.copy()

    def save(self):
        with open(self.path, "wb") as f:
            f.write(self.MAGIC)
            f.write(struct.pack("<qq", self._dim or 0, len(self._store)))
            for key, row in self._store.items():
                f.write(key)
                f.write(row.astype("<f8").tobytes())
