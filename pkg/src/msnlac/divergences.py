"""Dissimilarity measures between discretized PMFs.

Five measures over a common binning: symmetrized Kullback-Leibler,
Hellinger, total variation, Jensen-Shannon, and the 1-D earth mover
distance (sum of absolute cumulative differences).

Jensen-Shannon comes in two modes. "standard" is the usual
0.5*sum(P ln(2P/(P+Q)) + Q ln(2Q/(P+Q))), bounded by ln 2. "verbatim" drops
the halving and the factor 2 inside the logs, which makes it an affine shift:
verbatim = 2*standard - 2 ln 2, non-positive, identical argmin behavior.

All formulas assume strictly positive masses; discretization clamps masses
at a positive floor, so 0*ln 0 never arises.
"""

from __future__ import annotations

import numpy as np

from .distributions import Pmf
from .errors import InputError

__all__ = ["DIVERGENCES", "JS_MODES", "divergence"]

DIVERGENCES = ("kl", "hellinger", "tv", "js", "em")
JS_MODES = ("standard", "verbatim")


def _kl_sym(P, Q):
    # sum P ln(P/Q) + Q ln(Q/P) == sum (P-Q)(lnP - lnQ)
    return ((P - Q) * (np.log(P) - np.log(Q))).sum(axis=-1)


def _hellinger(P, Q):
    d = np.sqrt(P) - np.sqrt(Q)
    return np.sqrt((d * d).sum(axis=-1)) / np.sqrt(2.0)


def _tv(P, Q):
    return 0.5 * np.abs(P - Q).sum(axis=-1)


def _js(P, Q, mode):
    M = P + Q
    if mode == "standard":
        s = (P * np.log(2.0 * P / M) + Q * np.log(2.0 * Q / M)).sum(axis=-1)
        return 0.5 * s
    return (P * np.log(P / M) + Q * np.log(Q / M)).sum(axis=-1)


def _em(P, Q):
    return np.abs(np.cumsum(P, axis=-1) - np.cumsum(Q, axis=-1)).sum(axis=-1)


def _batch(kind: str, P: np.ndarray, Q: np.ndarray, js_mode: str = "standard"):
    """Divergence along the last axis of broadcast-compatible mass arrays."""
    if kind == "kl":
        return _kl_sym(P, Q)
    if kind == "hellinger":
        return _hellinger(P, Q)
    if kind == "tv":
        return _tv(P, Q)
    if kind == "js":
        if js_mode not in JS_MODES:
            raise InputError(f"unknown js mode {js_mode!r}")
        return _js(P, Q, js_mode)
    if kind == "em":
        return _em(P, Q)
    raise InputError(f"unknown divergence {kind!r}")


def divergence(kind: str, p: Pmf, q: Pmf, js_mode: str = "standard") -> float:
    """Dissimilarity between two PMFs sharing identical bin edges."""
    if kind not in DIVERGENCES:
        raise InputError(f"unknown divergence {kind!r}")
    if not np.array_equal(p.bin_edges, q.bin_edges):
        raise InputError("PMFs must share identical bin edges")
    if p.mass.min() <= 0 or q.mass.min() <= 0:
        raise InputError("masses must be strictly positive")
    return float(_batch(kind, p.mass, q.mass, js_mode))
