"""Combine complement patches into a single image for one yes/no question."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class PooledImage:
    pixels: np.ndarray          # (h, w) in [0, 1]
    members: tuple              # provenance refs of the pooled patches
    method: str                 # "average" | "gradient"


def _check_stack(patches: list[np.ndarray]) -> np.ndarray:
    if len(patches) < 2:
        raise DataError("pooling needs at least 2 patches")
    shape = patches[0].shape
    if any(p.shape != shape for p in patches):
        raise DataError("pooled patches must share dimensions")
    return np.stack([np.asarray(p, dtype=float) for p in patches])


def pool_average(patches: list[np.ndarray], members: tuple = ()) -> PooledImage:
    """Pixelwise arithmetic mean."""
    stack = _check_stack(patches)
    return PooledImage(stack.mean(axis=0), members or tuple(range(len(patches))), "average")


def periodic_gradient(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient with periodic (wrap-around) boundaries.

    Returns (gx, gy) = (d/dx, d/dy).
    """
    gx = (np.roll(z, -1, axis=1) - np.roll(z, 1, axis=1)) / 2.0
    gy = (np.roll(z, -1, axis=0) - np.roll(z, 1, axis=0)) / 2.0
    return gx, gy


def frankot_chellappa(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Least-squares integration of a gradient field in the Fourier domain.

    The frequency response matches the periodic central-difference operator,
    so integrate(periodic_gradient(z)) returns z - mean(z) exactly for any
    periodic surface. The DC coefficient (and any other frequency the
    difference operator cannot see) is set to zero.
    """
    if gx.shape != gy.shape:
        raise DataError("gradient fields must share dimensions")
    h, w = gx.shape
    # Effective angular frequency of the central difference: sin(2*pi*k/N).
    u = np.sin(2.0 * np.pi * np.fft.fftfreq(w))[None, :]
    v = np.sin(2.0 * np.pi * np.fft.fftfreq(h))[:, None]
    # sin(pi) is only ~1e-16 in floating point; snap Nyquist responses to an
    # exact zero so the invisible-frequency guard below catches them.
    u[np.abs(u) < 1e-12] = 0.0
    v[np.abs(v) < 1e-12] = 0.0
    Gx = np.fft.fft2(gx)
    Gy = np.fft.fft2(gy)
    denom = u * u + v * v
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = (-1j * u * Gx - 1j * v * Gy) / denom
    Z[denom == 0] = 0.0
    return np.real(np.fft.ifft2(Z))


def pool_gradient(patches: list[np.ndarray], members: tuple = ()) -> PooledImage:
    """Average the patches' gradient fields, reconstruct a surface from the
    mean field, then affinely rescale it to [0, 1]."""
    stack = _check_stack(patches)
    gx = np.zeros(stack.shape[1:])
    gy = np.zeros(stack.shape[1:])
    for p in stack:
        px, py = periodic_gradient(p)
        gx += px
        gy += py
    gx /= len(stack)
    gy /= len(stack)
    surf = frankot_chellappa(gx, gy)
    lo, hi = surf.min(), surf.max()
    if hi - lo < 1e-12:
        out = np.full_like(surf, 0.5)
    else:
        out = (surf - lo) / (hi - lo)
    return PooledImage(out, members or tuple(range(len(patches))), "gradient")
