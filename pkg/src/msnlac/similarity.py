"""Per-pixel patch statistics and pairwise patch dissimilarities.

Every pixel gets a PMF fitted to its mirrored (2*tau+1)^2 neighborhood:
sliding-window moments (separable mean filters, O(w*h) per channel) feed the
moment estimators, whose parameters are discretized onto bin edges shared by
the whole image. Pair distances are then PMF divergences, weighted spatially
by a truncated Gaussian window when accumulated into the contour energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .distributions import MODELS, Pmf, _estimate_grid, _pmf_grid, default_bin_edges
from .divergences import DIVERGENCES, _batch
from .errors import InputError
from .image import Image

__all__ = ["PatchPmfField", "NlWindow", "fit_field", "pair_distance", "make_window"]


@dataclass(frozen=True)
class PatchPmfField:
    """Per-pixel PMFs (shared bin edges) of the local patch model."""

    masses: np.ndarray      # (height, width, bins)
    bin_edges: np.ndarray   # (bins+1,)
    patch_half: int
    model: str
    degenerate: np.ndarray  # (height, width) bool, patches with floored variance

    def __post_init__(self):
        for name in ("masses", "bin_edges", "degenerate"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def width(self) -> int:
        return self.masses.shape[1]

    @property
    def height(self) -> int:
        return self.masses.shape[0]

    def pmf_at(self, x: int, y: int) -> Pmf:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise InputError(f"coordinate ({x}, {y}) outside {self.width}x{self.height}")
        return Pmf(bin_edges=self.bin_edges, mass=self.masses[y, x])


@dataclass(frozen=True)
class NlWindow:
    """Truncated spatial Gaussian: raw kernel values on a (2r+1)^2 grid.

    Weights are not normalized here (center weight is exactly 1); the energy
    divides by weight_sum so the regularization weight keeps one meaning
    across window sizes.
    """

    radius: int
    sigma: float
    weights: np.ndarray  # (2*radius+1, 2*radius+1)

    @property
    def weight_sum(self) -> float:
        return float(self.weights.sum())

    def weight_at(self, dy: int, dx: int) -> float:
        return float(self.weights[dy + self.radius, dx + self.radius])


def make_window(radius: int, sigma: float | None = None) -> NlWindow:
    """Gaussian interaction window; sigma defaults to radius/2."""
    if radius < 1:
        raise InputError("radius must be >= 1")
    if sigma is None:
        sigma = radius / 2.0
    if sigma <= 0:
        raise InputError("sigma must be > 0")
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    sq = d[:, None] ** 2 + d[None, :] ** 2
    w = np.exp(-sq / (2.0 * sigma * sigma))
    w.setflags(write=False)
    return NlWindow(radius=radius, sigma=float(sigma), weights=w)


def sliding_moments(img: Image, patch_half: int):
    """Mean, population variance and mean-sqrt over mirrored square patches.

    Separable box sums, one pass per moment channel; equals direct per-patch
    recomputation up to float addition order.
    """
    tau = int(patch_half)
    if tau < 1:
        raise InputError("patch_half must be >= 1")
    if 2 * tau + 1 > min(img.width, img.height):
        raise InputError("patch larger than image")
    size = 2 * tau + 1
    z = img.pixels
    mean = uniform_filter(z, size, mode="mirror")
    mean2 = uniform_filter(z * z, size, mode="mirror")
    m_half = uniform_filter(np.sqrt(z), size, mode="mirror")
    var = np.maximum(mean2 - mean * mean, 0.0)
    return mean, var, m_half


def fit_field(
    img: Image,
    patch_half: int,
    model: str = "gamma",
    edges: np.ndarray | None = None,
    looks: int = 1,
    bins: int = 64,
) -> PatchPmfField:
    """Fit the patch model at every pixel and discretize to PMFs."""
    if model not in MODELS:
        raise InputError(f"unknown model {model!r}")
    mean, var, m_half = sliding_moments(img, patch_half)
    if edges is None:
        edges = default_bin_edges(img.pixels, bins)
    else:
        edges = np.asarray(edges, dtype=np.float64)
    p1, p2, degen = _estimate_grid(model, mean, var, m_half, looks=looks)
    masses = _pmf_grid(model, p1.ravel(), p2.ravel(), looks, edges)
    return PatchPmfField(
        masses=masses.reshape(img.height, img.width, edges.size - 1),
        bin_edges=edges,
        patch_half=int(patch_half),
        model=model,
        degenerate=degen,
    )


def pair_distance(
    field: PatchPmfField,
    s: tuple[int, int],
    t: tuple[int, int],
    kind: str = "kl",
    js_mode: str = "standard",
) -> float:
    """Divergence between the patch PMFs at pixels s and t, given as (x, y)."""
    if kind not in DIVERGENCES:
        raise InputError(f"unknown divergence {kind!r}")
    sx, sy = s
    tx, ty = t
    for (x, y) in ((sx, sy), (tx, ty)):
        if not (0 <= x < field.width and 0 <= y < field.height):
            raise InputError(f"coordinate ({x}, {y}) outside {field.width}x{field.height}")
    return float(_batch(kind, field.masses[sy, sx], field.masses[ty, tx], js_mode))
