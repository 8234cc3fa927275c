"""Log-chroma features: linear images, edge images, and toroidal histograms.

A pixel's chroma is summarized by u = log(g/r), v = log(g/b), which is
invariant to intensity scaling.  Histograms are built on an n x n torus of
bin width h: coordinates wrap modulo the period n*h, so one bin stands for
an infinite family of chroma values (the aliasing the rest of the pipeline
has to undo).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_SATURATION = 0.98


@dataclass(frozen=True)
class HistogramGeometry:
    """Torus geometry: n bins per axis of width h starting at (u_lo, v_lo)."""

    n: int = 64
    h: float = 1.0 / 32.0
    u_lo: float = -1.0
    v_lo: float = -1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.h <= 0:
            raise ValueError(f"h must be > 0, got {self.h}")

    @property
    def period(self) -> float:
        return self.n * self.h

    def bin_of(self, u, v):
        """Torus bin indices (i, j) for chroma coordinates, vectorized."""
        i = np.mod(np.floor((np.asarray(u) - self.u_lo) / self.h).astype(np.int64), self.n)
        j = np.mod(np.floor((np.asarray(v) - self.v_lo) / self.h).astype(np.int64), self.n)
        return i, j


@dataclass(frozen=True)
class LinearImage:
    """Photometrically linear RGB raster with a per-pixel validity mask.

    Every valid pixel has all three channels strictly positive, so its
    log-chroma is defined.
    """

    rgb: np.ndarray  # (H, W, 3) float
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (H, W, 3), got {self.rgb.shape}")
        if self.valid.shape != self.rgb.shape[:2]:
            raise ValueError("valid mask shape does not match image")
        if self.rgb.shape[0] * self.rgb.shape[1] == 0:
            raise ValueError("empty image")

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


def linear_image(
    rgb: np.ndarray,
    exclude: np.ndarray | None = None,
    saturation: float = DEFAULT_SATURATION,
) -> LinearImage:
    """Wrap a linear RGB array, masking saturated/non-positive/excluded pixels.

    ``rgb`` is expected scaled so the sensor white level is 1.0; pixels with
    any channel >= ``saturation`` or <= 0 are invalid, as are pixels where
    ``exclude`` is nonzero.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    valid = np.all(rgb > 0.0, axis=2) & np.all(rgb < saturation, axis=2)
    if exclude is not None:
        valid &= np.asarray(exclude) == 0
    return LinearImage(rgb=rgb, valid=valid)


@dataclass(frozen=True)
class HistogramStack:
    """K toroidal n x n histograms (pixel channel, edge channel)."""

    geometry: HistogramGeometry
    channels: np.ndarray = field(repr=False)  # (K, n, n)

    def __post_init__(self):
        if self.channels.ndim != 3:
            raise ValueError("channels must be (K, n, n)")
        n = self.geometry.n
        if self.channels.shape[1:] != (n, n):
            raise ValueError("channel shape does not match geometry")


def compute_uv(rgb):
    """Log-chroma (u, v) = (log(g/r), log(g/b)) of one or many RGB triples."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if np.any(rgb <= 0.0):
        raise ValueError("log-chroma requires strictly positive channels")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return np.log(g / r), np.log(g / b)


def edge_image(img: LinearImage) -> LinearImage:
    """Local absolute deviation: mean |I - neighbor| over the 8-neighborhood.

    The 1-pixel border is marked invalid rather than padded; interior pixels
    are valid only where the pixel and all 8 neighbors are valid and the
    deviation is strictly positive in every channel.
    """
    rgb = img.rgb
    h, w = rgb.shape[:2]
    E = np.zeros_like(rgb)
    ok = np.zeros((h, w), dtype=bool)
    if h < 3 or w < 3:
        return LinearImage(rgb=E, valid=ok)

    core = rgb[1:-1, 1:-1]
    acc = np.zeros_like(core)
    neighbor_valid = np.ones((h - 2, w - 2), dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = rgb[1 + di : h - 1 + di, 1 + dj : w - 1 + dj]
            acc += np.abs(core - shifted)
            neighbor_valid &= img.valid[1 + di : h - 1 + di, 1 + dj : w - 1 + dj]
    E[1:-1, 1:-1] = acc / 8.0
    ok[1:-1, 1:-1] = (
        neighbor_valid
        & img.valid[1:-1, 1:-1]
        & np.all(E[1:-1, 1:-1] > 0.0, axis=2)
    )
    return LinearImage(rgb=E, valid=ok)


def build_histogram(img: LinearImage, geom: HistogramGeometry) -> np.ndarray:
    """Toroidal chroma histogram of the valid pixels, normalized to unit mass.

    Each valid pixel lands in exactly one bin via floor + modulus.  The grid
    is normalized so the downstream softmax response does not depend on the
    pixel count; an all-invalid image yields an all-zero grid.
    """
    grid = np.zeros((geom.n, geom.n), dtype=np.float64)
    mask = img.valid
    if not np.any(mask):
        return grid
    u, v = compute_uv(img.rgb[mask])
    i, j = geom.bin_of(u, v)
    np.add.at(grid, (i, j), 1.0)
    return grid / grid.sum()


def build_stack(img: LinearImage, geom: HistogramGeometry) -> HistogramStack:
    """Two-channel stack: pixel-chroma histogram plus edge-chroma histogram."""
    channels = np.stack(
        [build_histogram(img, geom), build_histogram(edge_image(img), geom)]
    )
    return HistogramStack(geometry=geom, channels=channels)


def mean_uv(img: LinearImage):
    """Arithmetic mean of per-pixel (u, v) over valid pixels.

    Used by gray-world de-aliasing as the neutral-world reference chroma.
    """
    if not np.any(img.valid):
        raise ValueError("image has no valid pixels")
    u, v = compute_uv(img.rgb[img.valid])
    return float(np.mean(u)), float(np.mean(v))
