"""Dataset ingestion, model serialization, and sRGB rendering.

The model file is a versioned, self-describing text format.  Grid values
are written as C99 hex floats, so save -> load -> save is byte-identical
and load(save(m)) reproduces every array bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .chroma import DEFAULT_SATURATION, HistogramGeometry, LinearImage, linear_image
from .model import DEALIAS_MODES, ModelParams
from .training import LabeledImage

MODEL_MAGIC = "ffcc-model-v1"
POSTERIOR_FIELDS = ("frame", "mu_u", "mu_v", "s_uu", "s_uv", "s_vv", "entropy")


class DatasetError(Exception):
    """Raised with a per-row listing of everything wrong in a dataset."""


@dataclass(frozen=True)
class DatasetSample:
    """One dataset row: image path, unit ground-truth illuminant, optional
    exclusion mask (nonzero mask pixels are dropped)."""

    image_path: Path
    label_rgb: np.ndarray
    mask_path: Path | None = None

    @property
    def name(self) -> str:
        return self.image_path.name


@dataclass(frozen=True)
class ModelFile:
    params: ModelParams
    dealias_mode: str
    config: dict


def load_dataset(root) -> list[DatasetSample]:
    """Read ``labels.csv`` (filename,L_r,L_g,L_b) under ``root``.

    Samples are returned ordered by filename.  A mask is attached when
    ``masks/<filename>`` exists.  All malformed rows are reported at once.
    """
    root = Path(root)
    labels_path = root / "labels.csv"
    if not labels_path.is_file():
        raise DatasetError(f"no labels.csv in {root}")
    samples = []
    problems = []
    for lineno, raw in enumerate(labels_path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            problems.append(f"line {lineno}: expected 4 fields, got {len(parts)}")
            continue
        name = parts[0]
        try:
            label = np.array([float(x) for x in parts[1:]])
        except ValueError:
            problems.append(f"line {lineno}: non-numeric label for {name!r}")
            continue
        if np.any(label <= 0.0):
            problems.append(f"line {lineno}: non-positive label for {name!r}")
            continue
        image_path = root / name
        if not image_path.is_file():
            problems.append(f"line {lineno}: missing image {name!r}")
            continue
        mask_path = root / "masks" / name
        samples.append(
            DatasetSample(
                image_path=image_path,
                label_rgb=label / np.linalg.norm(label),
                mask_path=mask_path if mask_path.is_file() else None,
            )
        )
    if problems:
        raise DatasetError("bad dataset rows:\n  " + "\n  ".join(problems))
    return sorted(samples, key=lambda s: s.name)


def _srgb_to_linear(x: np.ndarray) -> np.ndarray:
    lo = x <= 0.04045
    return np.where(lo, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def load_image(path, assume_srgb: bool = False) -> np.ndarray:
    """Decode an 8/16-bit PNG or PPM as linear RGB scaled to [0, 1]."""
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            if arr.ndim == 2:
                arr = np.stack([arr] * 3, axis=-1)
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    if assume_srgb:
        arr = _srgb_to_linear(arr)
    return arr


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"))


def materialize(
    samples: list[DatasetSample],
    saturation: float = DEFAULT_SATURATION,
    assume_srgb: bool = False,
) -> list[LabeledImage]:
    """Decode dataset samples into in-memory training records."""
    out = []
    for s in samples:
        exclude = load_mask(s.mask_path) if s.mask_path is not None else None
        img = linear_image(
            load_image(s.image_path, assume_srgb=assume_srgb),
            exclude=exclude,
            saturation=saturation,
        )
        out.append(LabeledImage(name=s.name, image=img, label_rgb=s.label_rgb))
    return out


# ------------------------------------------------------- model file format


def _format_grid(grid: np.ndarray) -> list[str]:
    return [" ".join(float(x).hex() for x in row) for row in grid]


def save_model(path, params: ModelParams, dealias_mode: str, config: dict | None = None) -> None:
    if dealias_mode not in DEALIAS_MODES:
        raise ValueError(f"unknown de-alias mode {dealias_mode!r}")
    geom = params.geometry
    lines = [
        MODEL_MAGIC,
        f"n: {geom.n}",
        f"h: {float(geom.h).hex()}",
        f"u_lo: {float(geom.u_lo).hex()}",
        f"v_lo: {float(geom.v_lo).hex()}",
        f"channels: {params.num_channels}",
        f"dealias: {dealias_mode}",
        f"config: {json.dumps(config or {}, sort_keys=True)}",
    ]
    for k in range(params.num_channels):
        lines.append(f"grid: filter{k}")
        lines.extend(_format_grid(params.filters[k]))
    lines.append("grid: gain_log")
    lines.extend(_format_grid(params.gain_log))
    lines.append("grid: bias")
    lines.extend(_format_grid(params.bias))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> ModelFile:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a {MODEL_MAGIC} file")
    header: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("grid: "):
        key, _, value = lines[pos].partition(": ")
        header[key] = value
        pos += 1
    try:
        n = int(header["n"])
        geom = HistogramGeometry(
            n=n,
            h=float.fromhex(header["h"]),
            u_lo=float.fromhex(header["u_lo"]),
            v_lo=float.fromhex(header["v_lo"]),
        )
        channels = int(header["channels"])
        dealias_mode = header["dealias"]
        config = json.loads(header.get("config", "{}"))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header ({exc})") from exc
    if dealias_mode not in DEALIAS_MODES:
        raise ValueError(f"{path}: unknown de-alias mode {dealias_mode!r}")

    grids: dict[str, np.ndarray] = {}
    expected = [f"filter{k}" for k in range(channels)] + ["gain_log", "bias"]
    for name in expected:
        if pos >= len(lines) or lines[pos] != f"grid: {name}":
            raise ValueError(f"{path}: expected 'grid: {name}' at line {pos + 1}")
        pos += 1
        if pos + n > len(lines):
            raise ValueError(f"{path}: truncated grid {name!r}")
        rows = []
        for r in range(n):
            vals = lines[pos + r].split()
            if len(vals) != n:
                raise ValueError(
                    f"{path}: grid {name!r} row {r} has {len(vals)} values, want {n}"
                )
            rows.append([float.fromhex(v) for v in vals])
        grids[name] = np.array(rows)
        pos += n

    params = ModelParams(
        geometry=geom,
        filters=np.stack([grids[f"filter{k}"] for k in range(channels)]),
        gain_log=grids["gain_log"],
        bias=grids["bias"],
    )
    return ModelFile(params=params, dealias_mode=dealias_mode, config=config)


# ------------------------------------------------------------- rendering


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Standard piecewise sRGB transfer curve on [0, 1] values."""
    linear = np.clip(linear, 0.0, 1.0)
    lo = linear <= 0.0031308
    return np.where(lo, 12.92 * linear, 1.055 * linear ** (1.0 / 2.4) - 0.055)


def render_srgb(img: LinearImage, illum_rgb, ccm: np.ndarray | None = None) -> np.ndarray:
    """White-balance by the illuminant, apply a CCM, gamma-encode to 8 bits."""
    illum = np.asarray(illum_rgb, dtype=np.float64)
    if np.any(illum <= 0.0):
        raise ValueError("illuminant channels must be positive")
    balanced = img.rgb / illum
    if ccm is not None:
        balanced = balanced @ np.asarray(ccm, dtype=np.float64).T
    encoded = srgb_encode(np.clip(balanced, 0.0, 1.0))
    return np.round(encoded * 255.0).astype(np.uint8)


def render_model_maps(params: ModelParams) -> dict[str, np.ndarray]:
    """Grayscale maps of the learned grids, origin centered via fftshift.

    Each grid is min-max normalized to 8 bits; a constant grid renders as
    mid-gray.
    """
    grids = {
        "pixel_filter": params.filters[0],
        "edge_filter": params.filters[1] if params.num_channels > 1 else None,
        "gain": np.exp(params.gain_log),
        "bias": params.bias,
    }
    out = {}
    for name, grid in grids.items():
        if grid is None:
            continue
        shifted = np.fft.fftshift(grid)
        span = shifted.max() - shifted.min()
        if span <= 0.0:
            image = np.full(shifted.shape, 128, dtype=np.uint8)
        else:
            image = np.round((shifted - shifted.min()) / span * 255.0).astype(np.uint8)
        out[name] = image
    return out


# ---------------------------------------------- per-camera CCM constants

CCM_TABLE = {
    "gehler_shi_canon1d": np.array(
        [
            [2.2310, -1.5926, 0.3616],
            [-0.1494, 1.4544, -0.3050],
            [0.1641, -0.6588, 1.4947],
        ]
    ),
    "gehler_shi_canon5d": np.array(
        [
            [1.7494, -0.8470, 0.0976],
            [-0.1565, 1.4380, -0.2815],
            [0.0786, -0.5070, 1.4284],
        ]
    ),
    "cheng_canon1dsmkiii": np.array(
        [
            [1.7247, -0.7791, 0.0544],
            [-0.1436, 1.4632, -0.3195],
            [0.0589, -0.4625, 1.4037],
        ]
    ),
    "cheng_canon600d": np.array(
        [
            [1.8988, -0.9897, 0.0909],
            [-0.2058, 1.6396, -0.4338],
            [0.0749, -0.7030, 1.6281],
        ]
    ),
    "cheng_fujifilmxm1": np.array(
        [
            [1.4183, -0.2497, -0.1686],
            [-0.2230, 1.6449, -0.4219],
            [0.0785, -0.5980, 1.5195],
        ]
    ),
    "cheng_nikond5200": np.array(
        [
            [1.3792, -0.3134, -0.0659],
            [-0.0826, 1.3759, -0.2932],
            [0.0483, -0.4553, 1.4070],
        ]
    ),
    "cheng_olympusepl6": np.array(
        [
            [1.6565, -0.4971, -0.1595],
            [-0.3335, 1.7772, -0.4437],
            [0.0895, -0.7023, 1.6128],
        ]
    ),
    "cheng_panasonicgx1": np.array(
        [
            [1.5629, -0.5117, -0.0512],
            [-0.2472, 1.7590, -0.5117],
            [0.1395, -0.8945, 1.7550],
        ]
    ),
    "cheng_samsungnx2000": np.array(
        [
            [1.5770, -0.4351, -0.1419],
            [-0.1747, 1.5225, -0.3477],
            [0.0573, -0.6397, 1.5825],
        ]
    ),
    "cheng_sonya57": np.array(
        [
            [1.5963, -0.5545, -0.0418],
            [-0.1343, 1.5331, -0.3988],
            [0.0563, -0.4026, 1.3463],
        ]
    ),
}


# -------------------------------------------------- posterior CSV schema


def write_posterior_csv(path, rows) -> None:
    """Rows of (frame, mu_u, mu_v, s_uu, s_uv, s_vv, entropy)."""
    lines = [",".join(POSTERIOR_FIELDS)]
    for row in rows:
        frame, *vals = row
        lines.append(str(frame) + "," + ",".join(f"{v:.12g}" for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_posterior_csv(path):
    lines = Path(path).read_text().splitlines()
    if not lines or [f.strip() for f in lines[0].split(",")] != list(POSTERIOR_FIELDS):
        raise ValueError(f"{path}: expected header {','.join(POSTERIOR_FIELDS)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(POSTERIOR_FIELDS):
            raise ValueError(f"{path}: line {lineno} has {len(parts)} fields")
        rows.append((parts[0], *[float(x) for x in parts[1:]]))
    return rows
