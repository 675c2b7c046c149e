"""Synthetic speckled test images: piecewise-constant phantoms plus
unit-mean multiplicative gamma noise.

The simulator draws each pixel independently as Gamma(shape=a, scale=mean/a),
so the expected value equals the clean reflectivity and the multiplier has
variance 1/a. Sampling uses numpy's Philox generator (counter-based) in a
single row-major draw, which is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .image import Image

__all__ = ["Phantom", "make_shapes", "simulate"]


@dataclass(frozen=True)
class Phantom:
    clean: Image
    gt_mask: np.ndarray  # bool, True on object pixels

    def __post_init__(self):
        m = np.asarray(self.gt_mask, dtype=bool)
        if m.shape != self.clean.shape:
            raise InputError("gt_mask dims must equal clean dims")
        if self.clean.pixels.min() <= 0:
            raise InputError("clean reflectivities must be > 0")
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "gt_mask", m)


def _shape_predicates(width: int, height: int):
    """Analytic inside-tests for the three objects, on pixel-center coords.

    Layout is proportional to the canvas: an annulus top-left, a triangle
    top-right, and an open ring (horseshoe) bottom-center. Returns
    (annulus, triangle, horseshoe, horseshoe_arc_position) boolean/float grids.
    """
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    sy, sx = height / 128.0, width / 128.0
    s = min(sy, sx)

    r1 = np.hypot(yy - 34 * sy, xx - 34 * sx)
    annulus = (r1 <= 26 * s) & (r1 >= 10 * s)

    # triangle via signed edge functions, vertices in (y, x)
    v = ((18 * sy, 72 * sx), (18 * sy, 116 * sx), (52 * sy, 94 * sx))

    def edge(a, b):
        return (xx - a[1]) * (b[0] - a[0]) - (yy - a[0]) * (b[1] - a[1])

    e1, e2, e3 = edge(v[0], v[1]), edge(v[1], v[2]), edge(v[2], v[0])
    triangle = ((e1 <= 0) & (e2 <= 0) & (e3 <= 0)) | ((e1 >= 0) & (e2 >= 0) & (e3 >= 0))

    r2 = np.hypot(yy - 86 * sy, xx - 64 * sx)
    theta = np.arctan2(yy - 86 * sy, xx - 64 * sx)
    gap = (theta > -0.80 * np.pi) & (theta < -0.20 * np.pi)  # opening at the top
    horseshoe = (r2 <= 30 * s) & (r2 >= 15 * s) & ~gap
    # position along the arc in [0, 1], used for the intensity ramp
    arc_pos = np.clip(np.mod(theta + 0.20 * np.pi, 2 * np.pi) / (1.4 * np.pi), 0.0, 1.0)
    return annulus, triangle, horseshoe, arc_pos


def make_shapes(
    width: int,
    height: int,
    fg_level: float = 4.0,
    bg_level: float = 1.0,
    gradient_span: float = 0.0,
) -> Phantom:
    """Render the three-object phantom: annulus, triangle, and a horseshoe
    whose reflectivity ramps linearly from fg_level to fg_level+gradient_span
    along its arc."""
    if width < 64 or height < 64:
        raise InputError("canvas must be at least 64x64 for the shapes to fit")
    if not (fg_level > bg_level > 0):
        raise InputError("levels must satisfy fg_level > bg_level > 0")
    if gradient_span < 0:
        raise InputError("gradient_span must be >= 0")
    annulus, triangle, horseshoe, arc_pos = _shape_predicates(width, height)
    clean = np.full((height, width), float(bg_level))
    clean[annulus] = fg_level
    clean[triangle] = fg_level
    clean[horseshoe] = fg_level + gradient_span * arc_pos[horseshoe]
    return Phantom(clean=Image(clean), gt_mask=annulus | triangle | horseshoe)


def simulate(clean: Image, shape_alpha: float, seed: int) -> Image:
    """Speckle a clean image: per-pixel Gamma(shape_alpha, clean/shape_alpha)."""
    if shape_alpha <= 0:
        raise InputError("shape_alpha must be > 0")
    if clean.pixels.min() <= 0:
        raise InputError("clean image must be strictly positive")
    rng = np.random.Generator(np.random.Philox(seed))
    out = rng.gamma(shape=float(shape_alpha), scale=clean.pixels / shape_alpha)
    # gamma draws are strictly positive; guard against float underflow anyway
    return Image(np.maximum(out, np.finfo(np.float64).tiny))
