"""Coarse-to-fine driver: solve on a decimation pyramid, propagating the
level set upward as the next level's initialization.

Model parameters (patch size, window, weights) are held fixed across levels,
so the same window covers proportionally more scene at coarse levels. Patch
PMF fields and bin edges are recomputed per level from that level's image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .image import Image, build_pyramid, decimate2, max_pyramid_levels, upsample2_field
from .levelset import LevelSet, NlacParams, RunTrace, nlac_run, random_init
from .similarity import fit_field, make_window

__all__ = ["MsConfig", "msnlac_run"]


@dataclass(frozen=True)
class MsConfig:
    """Configuration of a multi-scale run.

    iters_per_level optionally caps iterations per level, ordered coarse to
    fine; model parameters themselves are identical at every level.
    """

    levels: int = 3
    seed: int = 0
    nlac: NlacParams = field(default_factory=NlacParams)
    patch_half: int = 7
    nl_radius: int = 30
    window_sigma: float | None = None  # None: nl_radius / 2
    model: str = "gamma"
    bins: int = 64
    looks: int = 1
    sigma0: float = 0.8
    iters_per_level: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.levels < 1:
            raise InputError("levels must be >= 1")
        if self.iters_per_level is not None and len(self.iters_per_level) != self.levels:
            raise InputError("iters_per_level must have one entry per level")


def _decimate_mask(mask: np.ndarray, times: int) -> np.ndarray:
    out = mask
    for _ in range(times):
        out = decimate2(out)
    return out


def msnlac_run(
    img: Image,
    cfg: MsConfig,
    gt: np.ndarray | None = None,
    snapshot_every: int = 0,
    snapshot_dir=None,
) -> tuple[np.ndarray, list[RunTrace]]:
    """Run the contour evolution coarse-to-fine; returns the final mask at
    the original scale and one trace per level (coarsest first)."""
    if cfg.levels > max_pyramid_levels(img.width, img.height):
        raise InputError(
            f"{cfg.levels} levels exceed the pyramid bound for {img.width}x{img.height}"
        )
    if gt is not None:
        gt = np.asarray(gt).astype(bool)
        if gt.shape != img.shape:
            raise InputError("gt dims do not match the image")
    pyramid = build_pyramid(img, cfg.levels, cfg.sigma0)
    window = make_window(cfg.nl_radius, cfg.window_sigma)

    ls = random_init(
        pyramid.levels[-1].width,
        pyramid.levels[-1].height,
        cfg.seed,
        epsilon=cfg.nlac.epsilon,
    )
    traces: list[RunTrace] = []
    for pos, level in enumerate(range(cfg.levels - 1, -1, -1)):
        level_img = pyramid.levels[level]
        fld = fit_field(
            level_img,
            cfg.patch_half,
            model=cfg.model,
            looks=cfg.looks,
            bins=cfg.bins,
        )
        params = cfg.nlac
        if cfg.iters_per_level is not None:
            params = NlacParams(
                reg_weight=params.reg_weight,
                step_size=params.step_size,
                stop_tol=params.stop_tol,
                max_iters=cfg.iters_per_level[pos],
                epsilon=params.epsilon,
                distance=params.distance,
                js_mode=params.js_mode,
            )
        level_gt = _decimate_mask(gt, level) if gt is not None else None
        prefix = None
        if snapshot_every > 0 and snapshot_dir is not None:
            prefix = str(Path(snapshot_dir) / f"phi_L{level}")
        ls, trace = nlac_run(level_img, ls, fld, window, params, gt=level_gt,
                             snapshot_every=snapshot_every, snapshot_prefix=prefix)
        trace.level = level
        traces.append(trace)
        if level > 0:
            target = pyramid.levels[level - 1]
            ls = LevelSet(
                phi=upsample2_field(ls.phi, target.width, target.height),
                epsilon=ls.epsilon,
            )
    return ls.mask, traces
