"""Multi-scale non-local active contour segmentation for speckled images."""

__version__ = "0.1.0"

from .distributions import (  # noqa: F401
    DistParams,
    Moments,
    Pmf,
    default_bin_edges,
    discretize,
    estimate,
    moments,
    pdf,
    solve_ga0_alpha,
    solve_weibull_shape,
)
from .divergences import DIVERGENCES, divergence  # noqa: F401
from .errors import EvaluationError, InputError, MsnlacError, NumericalError  # noqa: F401
from .image import (  # noqa: F401
    Image,
    Pyramid,
    build_pyramid,
    downsample2,
    gaussian_smooth,
    load_image,
    load_mask,
    save_image,
    save_mask,
    upsample2_field,
)
from .levelset import (  # noqa: F401
    LevelSet,
    NlacParams,
    RunTrace,
    TraceRecord,
    classic_ac_run,
    data_gradient,
    energy,
    heaviside,
    heaviside_prime,
    nlac_run,
    random_init,
    reg_gradient,
)
from .metrics import export_trace, overlay, rfe  # noqa: F401
from .multiscale import MsConfig, msnlac_run  # noqa: F401
from .similarity import NlWindow, PatchPmfField, fit_field, make_window, pair_distance  # noqa: F401
from .speckle import Phantom, make_shapes, simulate  # noqa: F401
