"""Parametric models of patch intensities: moment computation, moment-based
parameter estimation, density evaluation, and discretization to PMFs.

Five families are supported, each identified by a short tag:

  lognormal  mu, sigma
  rayleigh   sigma
  gamma      shape, rate
  weibull    shape, scale
  ga0        alpha (< -1), gamma (> 0), plus an integer looks count

Estimation inverts the first two moments (plus E[sqrt(z)] for ga0). The
Weibull shape and ga0 alpha require root-finding; both use bisection on
gammaln-based residuals. All estimators also run vectorized over whole
images (the *_grid helpers), which the per-pixel patch fitting relies on.

Degenerate patches (variance ~ 0, e.g. constant synthetic backgrounds) are
not an error: the squared coefficient of variation is floored at 1e-6, which
caps the gamma shape at 1e6, and the result carries degenerate=True.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InputError, NumericalError

__all__ = [
    "MODELS",
    "Moments",
    "DistParams",
    "Pmf",
    "moments",
    "estimate",
    "solve_weibull_shape",
    "solve_ga0_alpha",
    "pdf",
    "discretize",
    "default_bin_edges",
]

MODELS = ("lognormal", "rayleigh", "gamma", "weibull", "ga0")

CV2_FLOOR = 1e-6          # variance floor, as a fraction of mean^2
MASS_FLOOR = 1e-12        # PMF clamp before renormalization
WEIBULL_BRACKET = (0.05, 50.0)
GA0_BRACKET = (-25.0, -1.05)
_SUBSAMPLES = 8           # midpoint-rule points per PMF bin


@dataclass(frozen=True)
class Moments:
    mean: float
    var: float       # population variance (divide by count)
    m_half: float    # mean of sqrt(z)
    count: int


@dataclass(frozen=True)
class DistParams:
    model: str
    params: dict[str, float] = field(default_factory=dict)
    looks: int = 1
    degenerate: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise InputError(f"unknown model {self.model!r}")


@dataclass(frozen=True)
class Pmf:
    bin_edges: np.ndarray  # (B+1,), strictly increasing
    mass: np.ndarray       # (B,), positive, sums to 1

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.bin_edges, dtype=np.float64))
        mass = np.ascontiguousarray(np.asarray(self.mass, dtype=np.float64))
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise InputError("bin edges must be >= 2 strictly increasing values")
        if mass.shape != (edges.size - 1,):
            raise InputError("mass length must match bin count")
        if mass.min() < 0:
            raise InputError("PMF masses must be >= 0")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise InputError("PMF masses must sum to 1")
        edges.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "mass", mass)


def moments(samples) -> Moments:
    """Mean, population variance and mean square root of a sample batch."""
    z = np.asarray(samples, dtype=np.float64).ravel()
    if z.size < 2:
        raise InputError("need at least 2 samples")
    if not np.all(np.isfinite(z)):
        raise InputError("samples must be finite")
    if z.min() < 0:
        raise InputError("samples must be >= 0")
    return Moments(
        mean=float(z.mean()),
        var=float(z.var()),
        m_half=float(np.sqrt(z).mean()),
        count=int(z.size),
    )


# ---------------------------------------------------------------------------
# root finders (array-valued; scalars wrap them)
# ---------------------------------------------------------------------------


def _weibull_cv2(beta):
    """Squared coefficient of variation of a Weibull with shape beta."""
    beta = np.asarray(beta, dtype=np.float64)
    return np.expm1(gammaln(1.0 + 2.0 / beta) - 2.0 * gammaln(1.0 + 1.0 / beta))


def _solve_weibull_shape_arr(cv2: np.ndarray) -> np.ndarray:
    lo, hi = WEIBULL_BRACKET
    cv2 = np.asarray(cv2, dtype=np.float64)
    if np.any(cv2 <= 0):
        raise InputError("cv2 must be > 0")
    cv2_hi = _weibull_cv2(lo)   # map is decreasing: largest cv2 at smallest beta
    cv2_lo = _weibull_cv2(hi)
    if np.any(cv2 > cv2_hi):
        raise NumericalError(
            f"cv2 above {cv2_hi:.3e}, not attainable on shape bracket {WEIBULL_BRACKET}"
        )
    a = np.full(cv2.shape, lo)
    b = np.full(cv2.shape, hi)
    # below the bracket's reachable range: essentially zero variance, cap shape
    capped = cv2 <= cv2_lo
    for _ in range(90):
        mid = 0.5 * (a + b)
        high = _weibull_cv2(mid) > cv2  # residual positive: move left end up
        a = np.where(high, mid, a)
        b = np.where(high, b, mid)
    beta = 0.5 * (a + b)
    beta = np.where(capped, hi, beta)
    resid = np.abs(_weibull_cv2(beta) - cv2)
    if np.any(~capped & (resid > 1e-10)):
        raise NumericalError("weibull shape bisection did not reach 1e-10 residual")
    return beta


def solve_weibull_shape(cv2: float) -> float:
    """Invert Var/E^2 = Gamma(1+2/b)/Gamma^2(1+1/b) - 1 for the shape b.

    Bisection on [0.05, 50]; cv2 below the value reachable at b=50 returns
    the bracket cap (a near-constant sample wants an arbitrarily large shape).
    """
    return float(_solve_weibull_shape_arr(np.asarray([cv2]))[0])


def _ga0_lhs(alpha):
    """Gamma^2(-a-1/4) / (Gamma(-a) Gamma(-a-1/2)), increasing toward 1 as a -> -inf."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return np.exp(
        2.0 * gammaln(-alpha - 0.25) - gammaln(-alpha) - gammaln(-alpha - 0.5)
    )


def _ga0_rhs(m_half, m1, looks):
    return (
        (m_half * m_half) / m1
        * np.exp(gammaln(looks) + gammaln(looks + 0.5) - 2.0 * gammaln(looks + 0.25))
    )


def _solve_ga0_alpha_arr(c: np.ndarray, clamp: bool) -> tuple[np.ndarray, np.ndarray]:
    """Bisection for alpha with LHS(alpha) = c. Returns (alpha, clamped_mask).

    With clamp=False a c outside [LHS(hi), LHS(lo)] raises; with clamp=True it
    sticks to the nearer bracket end (needed for whole-image fitting, where a
    single freak patch must not abort the run).
    """
    lo, hi = GA0_BRACKET
    c = np.asarray(c, dtype=np.float64)
    f_lo = _ga0_lhs(lo)   # close to 1
    f_hi = _ga0_lhs(hi)   # smallest value on the bracket
    too_homog = c >= f_lo
    too_heter = c <= f_hi
    if not clamp and (np.any(too_homog) | np.any(too_heter)):
        raise NumericalError(
            "no sign change on alpha bracket "
            f"[{lo}, {hi}]: residuals {float(np.max(f_lo - c)):.3e} at {lo}, "
            f"{float(np.min(f_hi - c)):.3e} at {hi}"
        )
    a = np.full(c.shape, lo)
    b = np.full(c.shape, hi)
    for _ in range(90):
        mid = 0.5 * (a + b)
        high = _ga0_lhs(mid) > c  # LHS too big: root lies at larger alpha
        a = np.where(high, mid, a)
        b = np.where(high, b, mid)
    alpha = 0.5 * (a + b)
    alpha = np.where(too_homog, lo, alpha)
    alpha = np.where(too_heter, hi, alpha)
    clamped = too_homog | too_heter
    if not clamp:
        resid = np.abs(_ga0_lhs(alpha) - c)
        if np.any(resid > 1e-8):
            raise NumericalError("ga0 alpha bisection did not reach 1e-8 residual")
    return alpha, clamped


def solve_ga0_alpha(m_half: float, m1: float, looks: int = 1) -> float:
    """Solve the fractional-moment equation for the ga0 alpha parameter."""
    if m1 <= 0 or m_half <= 0:
        raise InputError("moments must be > 0")
    if looks < 1:
        raise InputError("looks must be >= 1")
    c = _ga0_rhs(np.float64(m_half), np.float64(m1), np.float64(looks))
    alpha, _ = _solve_ga0_alpha_arr(np.asarray([c]), clamp=False)
    return float(alpha[0])


def _ga0_gamma_from_mean(mean, alpha, looks):
    """Scale parameter making the ga0 first moment equal mean."""
    return (
        mean * mean * looks
        * np.exp(2.0 * (gammaln(-alpha) + gammaln(looks)
                        - gammaln(-alpha - 0.5) - gammaln(looks + 0.5)))
    )


# ---------------------------------------------------------------------------
# estimation (vectorized core + scalar facade)
# ---------------------------------------------------------------------------


def _estimate_grid(model, mean, var, m_half, looks=1):
    """Moment inversion over arrays. Returns (p1, p2, degenerate)."""
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    mean_eff = np.maximum(mean, np.finfo(np.float64).tiny)
    cv2 = var / (mean_eff * mean_eff)
    degenerate = ~(cv2 >= CV2_FLOOR)  # catches var<=0 and NaN
    cv2 = np.maximum(cv2, CV2_FLOOR)
    var_eff = cv2 * mean_eff * mean_eff

    if model == "gamma":
        p1 = 1.0 / cv2                 # shape = E^2/Var
        p2 = p1 / mean_eff             # rate = E/Var
    elif model == "lognormal":
        p2 = np.sqrt(np.log1p(cv2))    # sigma
        p1 = np.log(mean_eff) - 0.5 * np.log1p(cv2)  # mu = ln(E^2/sqrt(Var+E^2))
    elif model == "rayleigh":
        p1 = np.sqrt(2.0 * var_eff / (4.0 - np.pi))
        p2 = np.zeros_like(p1)
    elif model == "weibull":
        p1 = _solve_weibull_shape_arr(cv2)
        p2 = mean_eff * np.exp(-gammaln(1.0 + 1.0 / p1))  # scale = E/Gamma(1+1/b)
    elif model == "ga0":
        m_half = np.asarray(m_half, dtype=np.float64)
        m_half_eff = np.where(degenerate, np.sqrt(mean_eff) * (1.0 - 0.25 * CV2_FLOOR),
                              np.maximum(m_half, np.finfo(np.float64).tiny))
        c = _ga0_rhs(m_half_eff, mean_eff, np.float64(looks))
        p1, clamped = _solve_ga0_alpha_arr(c, clamp=True)
        degenerate = degenerate | clamped
        p2 = _ga0_gamma_from_mean(mean_eff, p1, np.float64(looks))
    else:
        raise InputError(f"unknown model {model!r}")
    return p1, p2, degenerate


_PARAM_NAMES = {
    "lognormal": ("mu", "sigma"),
    "rayleigh": ("sigma",),
    "gamma": ("shape", "rate"),
    "weibull": ("shape", "scale"),
    "ga0": ("alpha", "gamma"),
}


def estimate(model: str, m: Moments, looks: int = 1) -> DistParams:
    """Fit one model to patch moments using the moment-inversion formulas."""
    if model not in MODELS:
        raise InputError(f"unknown model {model!r}")
    if model != "rayleigh" and m.mean <= 0:
        raise InputError("estimation needs mean > 0")
    if m.var < 0:
        raise InputError("variance must be >= 0")
    if model == "ga0" and looks < 1:
        raise InputError("looks must be >= 1")
    p1, p2, degen = _estimate_grid(
        model,
        np.asarray([m.mean]),
        np.asarray([m.var]),
        np.asarray([m.m_half]),
        looks=looks,
    )
    names = _PARAM_NAMES[model]
    vals = (float(p1[0]), float(p2[0]))
    return DistParams(
        model=model,
        params=dict(zip(names, vals[: len(names)])),
        looks=int(looks),
        degenerate=bool(degen[0]),
    )


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def _log_pdf_grid(model, p1, p2, looks, z):
    """log density, broadcasting params (..., 1) against z (1, K). z > 0."""
    logz = np.log(z)
    if model == "gamma":
        return p1 * np.log(p2) - gammaln(p1) + (p1 - 1.0) * logz - p2 * z
    if model == "lognormal":
        return (
            -np.log(np.sqrt(2.0 * np.pi) * p2 * z)
            - (logz - p1) ** 2 / (2.0 * p2 * p2)
        )
    if model == "rayleigh":
        return logz - 2.0 * np.log(p1) - z * z / (2.0 * p1 * p1)
    if model == "weibull":
        t = (p1 - 1.0) * (logz - np.log(p2))
        return np.log(p1 / p2) + t - np.exp(p1 * (logz - np.log(p2)))
    if model == "ga0":
        n = np.float64(looks)
        logc = (
            np.log(2.0) + n * np.log(n) + gammaln(n - p1)
            - p1 * np.log(p2) - gammaln(-p1) - gammaln(n)
        )
        return logc + (2.0 * n - 1.0) * logz - (n - p1) * np.log(p2 + n * z * z)
    raise InputError(f"unknown model {model!r}")


def _pdf_at_zero(model, p1, p2) -> float:
    """Continuation at z = 0: the density limit (0, finite, or +inf)."""
    if model == "gamma":
        return float(p2) if p1 == 1.0 else (np.inf if p1 < 1.0 else 0.0)
    if model == "weibull":
        return float(1.0 / p2) if p1 == 1.0 else (np.inf if p1 < 1.0 else 0.0)
    return 0.0  # lognormal, rayleigh, ga0 (looks >= 1) all vanish at 0


def pdf(params: DistParams, z) -> float | np.ndarray:
    """Evaluate the closed-form density at intensity z (scalar or array).

    At z = 0 the density limit is returned (0 for most models; the gamma and
    Weibull families are finite or unbounded there for shape <= 1).
    """
    z_arr = np.asarray(z, dtype=np.float64)
    if np.any(z_arr < 0):
        raise InputError("z must be >= 0")
    names = _PARAM_NAMES[params.model]
    p1 = np.float64(params.params[names[0]])
    p2 = np.float64(params.params[names[1]]) if len(names) > 1 else np.float64(0)
    _validate_params(params.model, p1, p2)
    pos = z_arr > 0
    out = np.full(z_arr.shape, _pdf_at_zero(params.model, p1, p2))
    if np.any(pos):
        with np.errstate(over="ignore"):
            out[pos] = np.exp(_log_pdf_grid(params.model, p1, p2, params.looks, z_arr[pos]))
    return float(out) if z_arr.ndim == 0 else out


def _validate_params(model, p1, p2):
    ok = {
        "lognormal": p2 > 0,
        "rayleigh": p1 > 0,
        "gamma": p1 > 0 and p2 > 0,
        "weibull": p1 > 0 and p2 > 0,
        "ga0": p1 < -1 and p2 > 0,
    }[model]
    if not ok:
        raise InputError(f"invalid {model} parameters ({p1}, {p2})")


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


def default_bin_edges(values, bins: int = 64) -> np.ndarray:
    """Uniform bins on [0, mean + 6*std] of the given intensities.

    Computed once per image (or pyramid level) so every patch PMF shares the
    same support and the PMF distances are comparable.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if bins < 1:
        raise InputError("bins must be >= 1")
    hi = float(v.mean() + 6.0 * v.std())
    if hi <= 0:
        hi = 1.0
    return np.linspace(0.0, hi, bins + 1)


def _midpoint_grid(edges: np.ndarray) -> np.ndarray:
    """(B * SUBSAMPLES,) midpoint-rule abscissae, 8 per bin."""
    widths = np.diff(edges)
    offs = (np.arange(_SUBSAMPLES) + 0.5) / _SUBSAMPLES
    return (edges[:-1][:, None] + widths[:, None] * offs[None, :]).ravel()


def _pmf_grid(model, p1, p2, looks, edges):
    """Discretized PMFs for parameter arrays p1, p2 of shape (N,).

    Returns (N, B) masses: midpoint-rule bin integrals, clamped at MASS_FLOOR
    and renormalized to sum 1.
    """
    p1 = np.asarray(p1, dtype=np.float64).ravel()
    p2 = np.asarray(p2, dtype=np.float64).ravel()
    nbins = edges.size - 1
    zs = _midpoint_grid(edges)
    widths = np.diff(edges)
    out = np.empty((p1.size, nbins))
    chunk = max(1, 4_000_000 // max(zs.size, 1))
    for i in range(0, p1.size, chunk):
        sl = slice(i, min(i + chunk, p1.size))
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            lp = _log_pdf_grid(model, p1[sl][:, None], p2[sl][:, None], looks, zs[None, :])
            dens = np.exp(lp)
        dens[~np.isfinite(dens)] = 0.0
        mass = dens.reshape(-1, nbins, _SUBSAMPLES).mean(axis=2) * widths[None, :]
        np.maximum(mass, MASS_FLOOR, out=mass)
        mass /= mass.sum(axis=1, keepdims=True)
        out[sl] = mass
    return out


def discretize(params: DistParams, edges) -> Pmf:
    """Bin a density into a PMF by the midpoint rule (8 points per bin)."""
    e = np.asarray(edges, dtype=np.float64)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
        raise InputError("edges must be >= 2 strictly increasing values")
    names = _PARAM_NAMES[params.model]
    p1 = params.params[names[0]]
    p2 = params.params[names[1]] if len(names) > 1 else 0.0
    _validate_params(params.model, np.float64(p1), np.float64(p2))
    mass = _pmf_grid(params.model, [p1], [p2], params.looks, e)[0]
    return Pmf(bin_edges=e, mass=mass)
