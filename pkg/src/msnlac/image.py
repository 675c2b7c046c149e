"""Image container, raster I/O, smoothing, resampling and pyramid construction.

Two on-disk formats are supported: binary PGM (P5, 8 or 16 bit, 16-bit values
big-endian) and raw little-endian float32 rows with a JSON sidecar
``{"width": W, "height": H}`` stored at ``<path>.json``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve1d

from .errors import InputError

__all__ = [
    "Image",
    "Pyramid",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "gaussian_smooth",
    "downsample2",
    "upsample2_field",
    "build_pyramid",
]


@dataclass(frozen=True)
class Image:
    """A 2-D grid of non-negative intensities, immutable after construction."""

    pixels: np.ndarray  # (height, width) float64

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise InputError("image must be a non-empty 2-D array")
        if not np.all(np.isfinite(px)):
            raise InputError("image intensities must be finite")
        if px.min() < 0:
            raise InputError("image intensities must be >= 0")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class Pyramid:
    """Coarse-to-fine stack: levels[0] is the original image, each next level
    is a smooth-then-decimate of the previous one."""

    levels: list[Image]
    smoothing_scale: float

    def __len__(self) -> int:
        return len(self.levels)


# ---------------------------------------------------------------------------
# raster I/O
# ---------------------------------------------------------------------------

_PGM_HEADER = re.compile(rb"^P5\s")


def _read_pgm(raw: bytes, path: str) -> np.ndarray:
    # P5 header: magic, width, height, maxval, separated by whitespace and
    # optional '#' comment lines, then a single whitespace byte before data.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError(f"truncated PGM header: {path}")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise InputError(f"malformed PGM header: {path}") from None
    if width <= 0 or height <= 0:
        raise InputError(f"zero-area image: {path}")
    if not 0 < maxval < 65536:
        raise InputError(f"unsupported PGM maxval {maxval}: {path}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    data = raw[pos : pos + width * height * dtype.itemsize]
    if len(data) != width * height * dtype.itemsize:
        raise InputError(f"truncated PGM pixel data: {path}")
    return np.frombuffer(data, dtype=dtype).reshape(height, width).astype(np.float64)


def _read_raw_float(path: Path) -> np.ndarray:
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise InputError(f"unsupported format (no PGM magic, no sidecar): {path}")
    try:
        meta = json.loads(sidecar.read_text())
        width, height = int(meta["width"]), int(meta["height"])
    except (ValueError, KeyError, json.JSONDecodeError):
        raise InputError(f"malformed sidecar: {sidecar}") from None
    if width <= 0 or height <= 0:
        raise InputError(f"zero-area image: {path}")
    data = np.fromfile(path, dtype="<f4")
    if data.size != width * height:
        raise InputError(
            f"raw float size mismatch: {path} has {data.size} values, "
            f"sidecar says {width}x{height}"
        )
    return data.reshape(height, width).astype(np.float64)


def load_image(path) -> Image:
    """Load a PGM (P5) or raw-float32-with-sidecar image.

    Intensities are used as stored; 8/16-bit integer values are not rescaled.
    """
    p = Path(path)
    if not p.exists():
        raise InputError(f"file not found: {path}")
    raw = p.read_bytes()
    if _PGM_HEADER.match(raw):
        return Image(_read_pgm(raw, str(path)))
    return Image(_read_raw_float(p))


def save_image(img: Image, path) -> None:
    """Write an image: '.pgm' as 16-bit PGM (rounded, clipped), anything else
    as raw float32 with a JSON sidecar."""
    p = Path(path)
    try:
        if p.suffix.lower() == ".pgm":
            vals = np.clip(np.rint(img.pixels), 0, 65535).astype(">u2")
            header = f"P5\n{img.width} {img.height}\n65535\n".encode()
            p.write_bytes(header + vals.tobytes())
        else:
            img.pixels.astype("<f4").tofile(p)
            Path(str(p) + ".json").write_text(
                json.dumps({"width": img.width, "height": img.height})
            )
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def save_mask(mask: np.ndarray, path) -> None:
    """Write a binary mask as 8-bit PGM, foreground=255, background=0."""
    m = np.asarray(mask)
    if m.ndim != 2 or m.size == 0:
        raise InputError("mask must be a non-empty 2-D array")
    h, w = m.shape
    payload = np.where(m.astype(bool), 255, 0).astype("u1")
    try:
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + payload.tobytes())
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def load_mask(path) -> np.ndarray:
    """Load a mask image; any value above half range counts as foreground."""
    img = load_image(path)
    return img.pixels > 127


def write_field(field: np.ndarray, path) -> None:
    """Write a real-valued 2-D field (signs allowed, unlike images) as raw
    float32 with a JSON sidecar."""
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 2 or f.size == 0:
        raise InputError("field must be a non-empty 2-D array")
    try:
        f.astype("<f4").tofile(path)
        Path(str(path) + ".json").write_text(
            json.dumps({"width": f.shape[1], "height": f.shape[0]})
        )
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# smoothing / resampling
# ---------------------------------------------------------------------------


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian truncated at radius ceil(3*sigma)."""
    if sigma <= 0:
        raise InputError("sigma must be > 0")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(img: Image, sigma: float) -> Image:
    """Separable Gaussian smoothing with mirror reflection at the borders."""
    k = gaussian_kernel_1d(sigma)
    out = convolve1d(img.pixels, k, axis=0, mode="mirror")
    out = convolve1d(out, k, axis=1, mode="mirror")
    # mirror-convolving a non-negative image stays non-negative up to rounding
    return Image(np.maximum(out, 0.0))


def decimate2(field: np.ndarray) -> np.ndarray:
    """Even-index samples with floor-halved dims: out(x, y) = in(2x, 2y)."""
    h, w = field.shape
    return field[0 : 2 * (h // 2) : 2, 0 : 2 * (w // 2) : 2].copy()


def downsample2(img: Image) -> Image:
    """Decimate by 2, keeping even-index samples; odd trailing row/column is
    dropped so the output dims are exactly floor(dims/2)."""
    if img.width < 2 or img.height < 2:
        raise InputError("image too small to downsample")
    return Image(decimate2(img.pixels))


def upsample2_field(field: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    """Bilinear x2 upsampling of a real field under the sample-aligned mapping
    src = tgt/2, so that target pixel (2x, 2y) carries exactly source (x, y).

    Target dims must be 2n or 2n+1 of the source dims (pyramid halving rule).
    """
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 2:
        raise InputError("field must be 2-D")
    sh, sw = f.shape
    if target_width not in (2 * sw, 2 * sw + 1) or target_height not in (2 * sh, 2 * sh + 1):
        raise InputError(
            f"target dims {target_width}x{target_height} not a x2 match of {sw}x{sh}"
        )
    ys = np.minimum(np.arange(target_height) / 2.0, sh - 1.0)
    xs = np.minimum(np.arange(target_width) / 2.0, sw - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, sh - 1)
    x1 = np.minimum(x0 + 1, sw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    return (
        f[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + f[np.ix_(y1, x0)] * fy * (1 - fx)
        + f[np.ix_(y0, x1)] * (1 - fy) * fx
        + f[np.ix_(y1, x1)] * fy * fx
    )


def max_pyramid_levels(width: int, height: int) -> int:
    return int(math.floor(math.log2(min(width, height))))


def build_pyramid(img: Image, levels: int, sigma0: float = 0.8) -> Pyramid:
    """Smooth-then-decimate pyramid; level 0 is the input, untouched."""
    if levels < 1 or levels > max_pyramid_levels(img.width, img.height):
        raise InputError(
            f"level count {levels} outside [1, log2(min dim)] for "
            f"{img.width}x{img.height}"
        )
    if sigma0 <= 0:
        raise InputError("sigma0 must be > 0")
    out = [img]
    for _ in range(levels - 1):
        out.append(downsample2(gaussian_smooth(out[-1], sigma0)))
    return Pyramid(levels=out, smoothing_scale=sigma0)
