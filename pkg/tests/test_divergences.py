import math

import numpy as np
import pytest

from msnlac import DistParams, InputError, discretize, divergence
from msnlac.distributions import Pmf


def _pmf(mass, edges=None):
    mass = np.asarray(mass, dtype=float)
    if edges is None:
        edges = np.arange(mass.size + 1, dtype=float)
    return Pmf(bin_edges=np.asarray(edges, float), mass=mass)


def _rand_pmf(rng, bins=64):
    m = rng.uniform(0.01, 1.0, bins)
    return _pmf(m / m.sum(), np.arange(bins + 1, dtype=float))


def test_identity_values():
    p = _rand_pmf(np.random.default_rng(0))
    for kind in ("kl", "hellinger", "tv", "em"):
        assert divergence(kind, p, p) == 0.0
    assert divergence("js", p, p) == pytest.approx(0.0, abs=1e-15)
    assert divergence("js", p, p, js_mode="verbatim") == pytest.approx(
        -2 * math.log(2), abs=1e-12
    )


def test_disjoint_support_extremes():
    eps = 1e-12
    p = _pmf([1.0 - eps, eps])
    q = _pmf([eps, 1.0 - eps])
    assert divergence("tv", p, q) == pytest.approx(1.0, abs=1e-9)
    # the mass floor shifts sqrt terms by sqrt(eps)
    assert divergence("hellinger", p, q) == pytest.approx(1.0, abs=3e-6)


def test_em_cumulative_example():
    eps = 1e-12
    p = _pmf([1.0 - 2 * eps, eps, eps])
    q = _pmf([eps, eps, 1.0 - 2 * eps])
    # cumsums (1,1,1) vs (0,0,1)
    assert divergence("em", p, q) == pytest.approx(2.0, abs=1e-9)


def _kl_oracle(pm, qm):
    total = 0.0
    for pj, qj in zip(pm, qm):
        total += pj * math.log(pj / qj) + qj * math.log(qj / pj)
    return total


def test_kl_between_gamma_pmfs_matches_summation_oracle():
    edges = np.linspace(0.0, 16.0, 65)
    p = discretize(DistParams("gamma", {"shape": 4.0, "rate": 1.0}), edges)
    q = discretize(DistParams("gamma", {"shape": 5.0, "rate": 1.0}), edges)
    assert divergence("kl", p, q) == pytest.approx(_kl_oracle(p.mass, q.mass), abs=1e-9)


def test_property_suite_small():
    rng = np.random.default_rng(42)
    ln2 = math.log(2)
    for _ in range(50):
        p, q = _rand_pmf(rng), _rand_pmf(rng)
        for kind in ("kl", "hellinger", "tv", "js", "em"):
            d_pq = divergence(kind, p, q)
            d_qp = divergence(kind, q, p)
            assert d_pq == pytest.approx(d_qp, abs=1e-9)
            assert d_pq > 0  # random pairs differ
        assert divergence("tv", p, q) <= 1 + 1e-12
        assert divergence("hellinger", p, q) <= 1 + 1e-12
        js = divergence("js", p, q)
        assert js <= ln2 + 1e-12
        verb = divergence("js", p, q, js_mode="verbatim")
        assert verb == pytest.approx(2 * js - 2 * ln2, abs=1e-9)


def test_rejects_mismatched_edges():
    p = _pmf([0.5, 0.5], [0.0, 1.0, 2.0])
    q = _pmf([0.5, 0.5], [0.0, 1.0, 3.0])
    with pytest.raises(InputError, match="bin edges"):
        divergence("kl", p, q)


def test_rejects_nonpositive_mass():
    p = Pmf(bin_edges=np.array([0.0, 1.0, 2.0]), mass=np.array([1.0, 0.0]))
    q = _pmf([0.5, 0.5], [0.0, 1.0, 2.0])
    with pytest.raises(InputError, match="positive"):
        divergence("kl", p, q)


def test_rejects_unknown_kind():
    p = _rand_pmf(np.random.default_rng(1), 8)
    with pytest.raises(InputError):
        divergence("chi2", p, p)
