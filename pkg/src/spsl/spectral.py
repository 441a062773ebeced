"""Discrete Fourier transforms, polar decomposition and the RGBP phase channel.

Conventions:
- Forward transforms carry the 1/N factor, inverse transforms carry none.
  Under this scaling zero-insertion up-sampling by 2 halves every coefficient
  and duplicates the spectrum: ``Xup[u] = X[u % N] / 2``.
- Images are ``(H, W)`` for a single channel or ``(H, W, C)`` with values in [0, 1].
- Phase of a (numerically) zero coefficient is defined as 0.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from spsl.exceptions import InvalidInputError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
PHASE_MODES = ("abs-phase", "unit-amplitude")

# coefficients below this fraction of the largest modulus are treated as exact zeros
ZERO_TOL = 1e-12


@lru_cache(maxsize=64)
def _twiddle(n: int, inverse: bool) -> np.ndarray:
    # reduce u*k modulo n in integers first so large indices do not lose precision
    idx = np.arange(n)
    k = np.outer(idx, idx) % n
    sign = 1.0 if inverse else -1.0
    w = np.exp(sign * 2j * np.pi * k / n)
    if not inverse:
        w /= n
    w.setflags(write=False)
    return w


def _transform(x: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[axis]
    w = _twiddle(n, inverse)
    moved = np.moveaxis(x, axis, -1)
    out = moved.astype(complex) @ w.T
    return np.moveaxis(out, -1, axis)


def dft(x, axis: int = -1) -> np.ndarray:
    """Forward DFT along one axis with the 1/N scale."""
    return _transform(x, axis, inverse=False)


def idft(X, axis: int = -1) -> np.ndarray:
    """Inverse DFT along one axis (no scale)."""
    return _transform(X, axis, inverse=True)


def _check_signal(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError(f"expected a non-empty 1D signal, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("signal contains non-finite values")
    return x


def dft1(signal) -> np.ndarray:
    """``X[u] = (1/N) sum_n x[n] exp(-2j pi u n / N)``."""
    return dft(_check_signal(signal))


def idft1(spectrum) -> np.ndarray:
    """``x[n] = sum_u X[u] exp(+2j pi u n / N)``. Returns complex samples."""
    return idft(_check_signal(spectrum))


def _check_plane(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[-1] == 1:
        image = image[..., 0]
    if image.ndim != 2:
        raise InvalidInputError(
            f"expected a single-channel (H, W) image, got shape {image.shape}"
        )
    if image.size == 0:
        raise InvalidInputError("empty image")
    return image


def dft2(image) -> np.ndarray:
    """Separable 2D forward DFT (rows, then columns), scaled by 1/(H*W)."""
    return dft(dft(_check_plane(image), axis=1), axis=0)


def idft2(grid) -> np.ndarray:
    """Separable 2D inverse DFT. Returns the complex grid; take ``.real`` for an image."""
    return idft(idft(_check_plane(grid), axis=1), axis=0)


def dft2_batch(images: np.ndarray) -> np.ndarray:
    """2D DFT over the last two axes of a stack of planes."""
    return dft(dft(images, axis=-1), axis=-2)


def idft2_batch(grids: np.ndarray) -> np.ndarray:
    return idft(idft(grids, axis=-1), axis=-2)


def to_polar(grid, tol: float = ZERO_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Split complex coefficients into (amplitude, phase).

    Phase lies in (-pi, pi]. Coefficients whose modulus is at most ``tol`` times
    the largest modulus get phase 0, so round-off never produces a random angle.
    """
    grid = np.asarray(grid, dtype=complex)
    amplitude = np.abs(grid)
    phase = np.angle(grid)
    # np.angle returns -pi for (-x, -0.0); fold onto the closed end of the interval
    phase = np.where(phase <= -np.pi, np.pi, phase)
    if amplitude.size:
        scale = amplitude.max(axis=(-2, -1), keepdims=True) if grid.ndim >= 2 else amplitude.max()
        phase = np.where(amplitude <= tol * scale, 0.0, phase)
    return amplitude, phase


def from_polar(amplitude, phase) -> np.ndarray:
    amplitude = np.asarray(amplitude, dtype=float)
    phase = np.asarray(phase, dtype=float)
    if amplitude.shape != phase.shape:
        raise InvalidInputError("amplitude and phase shapes differ")
    if np.any(amplitude < 0):
        raise InvalidInputError("amplitude must be non-negative")
    return amplitude * np.exp(1j * phase)


def luminance(image) -> np.ndarray:
    """Rec. 601 luma of an RGB image; single-channel input is passed through."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        return image
    if image.shape[-1] == 1:
        return image[..., 0]
    if image.shape[-1] != 3:
        raise InvalidInputError(f"expected 1 or 3 channels, got {image.shape[-1]}")
    return image @ LUMA_WEIGHTS


def minmax_normalize(maps: np.ndarray) -> np.ndarray:
    """Per-plane min-max scaling to [0, 1] over the last two axes; constant planes map to 0."""
    maps = np.asarray(maps, dtype=float)
    lo = maps.min(axis=(-2, -1), keepdims=True)
    span = maps.max(axis=(-2, -1), keepdims=True) - lo
    # spans at round-off level are constant maps
    flat = span <= 1e-12 * np.maximum(1.0, np.abs(lo))
    return np.where(flat, 0.0, (maps - lo) / np.where(flat, 1.0, span))


def _phase_maps(planes: np.ndarray, mode: str, normalize: bool) -> np.ndarray:
    if mode not in PHASE_MODES:
        raise InvalidInputError(f"unknown phase mode {mode!r}; choose from {PHASE_MODES}")
    _, phase = to_polar(dft2_batch(planes))
    if mode == "unit-amplitude":
        spectrum = np.exp(1j * phase)
    else:
        spectrum = np.abs(phase).astype(complex)
    maps = idft2_batch(spectrum).real
    return minmax_normalize(maps) if normalize else maps


def phase_only_image(image, mode: str = "abs-phase", normalize: bool = True) -> np.ndarray:
    """Spatial-domain representation of the phase spectrum.

    ``abs-phase`` inverse-transforms ``|P(u)|``; ``unit-amplitude`` inverse-transforms
    ``exp(j P(u))``. RGB input is reduced to luminance first.
    """
    plane = _check_plane(luminance(image))
    return _phase_maps(plane, mode, normalize)


def amplitude_only_image(image, normalize: bool = True) -> np.ndarray:
    """Inverse transform of the amplitude spectrum with all phases set to zero."""
    plane = _check_plane(luminance(image))
    maps = idft2_batch(np.abs(dft2_batch(plane)).astype(complex)).real
    return minmax_normalize(maps) if normalize else maps


def phase_only_batch(images: np.ndarray, mode: str = "abs-phase") -> np.ndarray:
    """Normalized phase maps for a ``(n, H, W[, 3])`` stack."""
    images = np.asarray(images, dtype=float)
    planes = luminance(images) if images.ndim == 4 else images
    return _phase_maps(planes, mode, normalize=True)


def make_rgbp(image, mode: str = "abs-phase") -> np.ndarray:
    """Append the normalized phase-only map of the luminance as a 4th channel."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) RGB image, got shape {image.shape}")
    p = phase_only_image(image, mode=mode)
    return np.concatenate([image, p[..., None]], axis=-1)


def make_rgbp_batch(images: np.ndarray, mode: str = "abs-phase") -> np.ndarray:
    images = np.asarray(images, dtype=float)
    if images.ndim != 4 or images.shape[-1] != 3:
        raise InvalidInputError(f"expected (n, H, W, 3) RGB images, got shape {images.shape}")
    return np.concatenate([images, phase_only_batch(images, mode)[..., None]], axis=-1)


def spectrum_rows(grid) -> list[tuple[int, int, float, float]]:
    """Flatten a complex grid to ``(row, col, re, im)`` records for CSV export."""
    grid = np.atleast_2d(np.asarray(grid, dtype=complex))
    rows, cols = np.indices(grid.shape)
    return [
        (int(r), int(c), float(v.real), float(v.imag))
        for r, c, v in zip(rows.ravel(), cols.ravel(), grid.ravel())
    ]
