"""Quantitative evaluation, boundary overlays, and trace export.

The region fitting error of a mask R against ground truth Rg is
(|R union Rg| - |R intersect Rg|) / |Rg|: zero for a perfect match, 1 for an
empty mask, unbounded above for gross over-segmentation.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import EvaluationError, InputError
from .image import Image

__all__ = ["rfe", "boundary_mask", "overlay", "write_rgb", "export_trace"]


def _as_mask(m, name: str) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 2-D mask")
    return arr.astype(bool)


def rfe(mask, gt) -> float:
    """Region fitting error by exact pixel counting; division happens last."""
    m = _as_mask(mask, "mask")
    g = _as_mask(gt, "gt")
    if m.shape != g.shape:
        raise EvaluationError(f"mask dims {m.shape} != gt dims {g.shape}")
    n_gt = int(np.count_nonzero(g))
    if n_gt == 0:
        raise EvaluationError("ground truth is empty")
    union = int(np.count_nonzero(m | g))
    inter = int(np.count_nonzero(m & g))
    return (union - inter) / n_gt


def boundary_mask(mask) -> np.ndarray:
    """Mask pixels with at least one 4-neighbor outside the mask, or sitting
    on the image border."""
    m = _as_mask(mask, "mask")
    inner = np.zeros_like(m)
    if m.shape[0] > 2 and m.shape[1] > 2:
        inner[1:-1, 1:-1] = (
            m[1:-1, 1:-1]
            & m[:-2, 1:-1]
            & m[2:, 1:-1]
            & m[1:-1, :-2]
            & m[1:-1, 2:]
        )
    return m & ~inner


def overlay(img: Image, mask, color=(255, 0, 0)) -> np.ndarray:
    """Grayscale-stretched rendering of img with the mask boundary colored.

    Returns an (h, w, 3) uint8 array; write it with write_rgb.
    """
    m = _as_mask(mask, "mask")
    if m.shape != img.shape:
        raise InputError(f"mask dims {m.shape} != image dims {img.shape}")
    px = img.pixels
    lo, hi = float(px.min()), float(px.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    gray = ((px - lo) * scale).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    rgb[boundary_mask(m)] = np.asarray(color, dtype=np.uint8)
    return rgb


def write_rgb(rgb: np.ndarray, path) -> None:
    """Write an RGB uint8 array as binary PPM (.ppm) or PNG (anything else)."""
    arr = np.ascontiguousarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InputError("expected an (h, w, 3) array")
    p = Path(path)
    try:
        if p.suffix.lower() == ".ppm":
            h, w = arr.shape[:2]
            p.write_bytes(f"P6\n{w} {h}\n255\n".encode() + arr.tobytes())
        else:
            import matplotlib.image

            matplotlib.image.imsave(str(p), arr)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def export_trace(traces, path) -> list[Path]:
    """Write per-iteration CSVs, one file per trace, suffixed _L<level>.

    Schema: iter,energy,data,reg,rfe,ms. Floats carry 17 significant digits
    so a parse round-trip is lossless; rfe is empty when no ground truth was
    supplied.
    """
    traces = list(traces)
    if not traces:
        raise InputError("no traces to export")
    base = Path(path)
    stem = base.with_suffix("")
    suffix = base.suffix or ".csv"
    written = []
    for tr in traces:
        out = Path(f"{stem}_L{tr.level}{suffix}")
        lines = ["iter,energy,data,reg,rfe,ms"]
        for r in tr.records:
            rfe_s = "" if r.rfe is None else f"{r.rfe:.17g}"
            lines.append(
                f"{r.iteration},{r.energy:.17g},{r.data:.17g},{r.reg:.17g},"
                f"{rfe_s},{r.ms:.17g}"
            )
        try:
            out.write_text("\n".join(lines) + "\n")
        except OSError as exc:
            raise InputError(f"cannot write {out}: {exc}") from exc
        written.append(out)
    return written
