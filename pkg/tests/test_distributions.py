import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from msnlac import (
    DistParams,
    InputError,
    NumericalError,
    discretize,
    estimate,
    moments,
    pdf,
    solve_ga0_alpha,
    solve_weibull_shape,
)
from msnlac.distributions import default_bin_edges


# --- moments -----------------------------------------------------------------


def test_moments_constant():
    m = moments([4, 4, 4, 4])
    assert (m.mean, m.var, m.m_half, m.count) == (4.0, 0.0, 2.0, 4)


def test_moments_two_point():
    m = moments([1.0, 3.0])
    assert m.mean == 2.0
    assert m.var == 1.0  # population variance
    assert m.m_half == pytest.approx((1 + math.sqrt(3)) / 2, abs=1e-15)


def test_moments_gamma_monte_carlo(rng):
    z = rng.gamma(4.0, 1.0, size=100_000)
    m = moments(z)
    assert m.mean == pytest.approx(4.0, rel=0.02)
    assert m.var == pytest.approx(4.0, rel=0.05)


def test_moments_rejects_bad_samples():
    with pytest.raises(InputError):
        moments([])
    with pytest.raises(InputError):
        moments([1.0])
    with pytest.raises(InputError):
        moments([1.0, -0.5])


# --- estimation --------------------------------------------------------------


class MomentsLike:
    """Hand-set moments for spot-checking the inversion formulas."""

    def __init__(self, mean, var, m_half=None, count=100):
        self.mean = mean
        self.var = var
        self.m_half = math.sqrt(mean) if m_half is None else m_half
        self.count = count


def test_estimate_gamma_exact_inversion():
    p = estimate("gamma", MomentsLike(4.0, 4.0))
    assert p.params["shape"] == pytest.approx(4.0, rel=1e-12)
    assert p.params["rate"] == pytest.approx(1.0, rel=1e-12)
    assert not p.degenerate


def test_estimate_rayleigh_spot():
    p = estimate("rayleigh", MomentsLike(1.2533, (4 - math.pi) / 2))
    assert p.params["sigma"] == pytest.approx(1.0, rel=1e-9)


def test_estimate_lognormal_monte_carlo(rng):
    z = rng.lognormal(0.0, 1.0, size=100_000)
    p = estimate("lognormal", moments(z))
    assert p.params["mu"] == pytest.approx(0.0, abs=0.05)
    assert p.params["sigma"] ** 2 == pytest.approx(1.0, abs=0.1)


def test_estimate_degenerate_flag():
    p = estimate("gamma", MomentsLike(4.0, 0.0))
    assert p.degenerate
    assert p.params["shape"] == pytest.approx(1e6)
    # mean is preserved by the capped parameters
    assert p.params["shape"] / p.params["rate"] == pytest.approx(4.0)


# --- weibull root ------------------------------------------------------------


def test_weibull_shape_spot_value():
    # Gamma(2)/Gamma^2(1.5) - 1 = 4/pi - 1
    assert solve_weibull_shape(4 / math.pi - 1) == pytest.approx(2.0, abs=1e-6)


def test_weibull_shape_exponential_case():
    # Gamma(3)/Gamma^2(2) - 1 = 1 at shape 1
    assert solve_weibull_shape(1.0) == pytest.approx(1.0, abs=1e-8)


def test_weibull_shape_converges_at_cap():
    assert solve_weibull_shape(1e-9) == pytest.approx(50.0)


def test_weibull_shape_inverts_moment_map():
    def cv2_of(beta):
        return gamma_fn(1 + 2 / beta) / gamma_fn(1 + 1 / beta) ** 2 - 1

    for beta in np.linspace(0.2, 20.0, 23):
        assert solve_weibull_shape(cv2_of(beta)) == pytest.approx(beta, abs=1e-8)


def test_weibull_estimate_round_trip(rng):
    shape, scale = 1.7, 3.0
    z = scale * rng.weibull(shape, size=100_000)
    p = estimate("weibull", moments(z))
    assert p.params["shape"] == pytest.approx(shape, rel=0.05)
    assert p.params["scale"] == pytest.approx(scale, rel=0.05)


# --- ga0 root ----------------------------------------------------------------


def _ga0_pdf_oracle(z, alpha, gam, n):
    # density formula transcribed independently, direct special-function calls
    return (
        2.0 * n**n * gamma_fn(n - alpha) * z ** (2 * n - 1)
        / (gam**alpha * gamma_fn(-alpha) * gamma_fn(n) * (gam + z * z * n) ** (n - alpha))
    )


def test_ga0_alpha_residual_postcondition():
    alpha = solve_ga0_alpha(0.9, 1.0, 1)
    from msnlac.distributions import _ga0_lhs, _ga0_rhs

    resid = float(_ga0_lhs(alpha) - _ga0_rhs(0.9, 1.0, 1.0))
    assert abs(resid) < 1e-8


def test_ga0_alpha_recovers_from_quadrature_moments():
    alpha_true, n = -3.0, 1
    # choose gamma for unit mean via the first-moment formula
    gam = (gamma_fn(-alpha_true) * gamma_fn(n)
           / (gamma_fn(-alpha_true - 0.5) * gamma_fn(n + 0.5))) ** 2 * n
    m1, _ = quad(lambda z: z * _ga0_pdf_oracle(z, alpha_true, gam, n), 0, np.inf)
    m_half, _ = quad(lambda z: math.sqrt(z) * _ga0_pdf_oracle(z, alpha_true, gam, n), 0, np.inf)
    assert m1 == pytest.approx(1.0, abs=1e-6)
    alpha = solve_ga0_alpha(m_half, m1, n)
    assert alpha == pytest.approx(-3.0, abs=0.05)


def test_ga0_alpha_bracket_error():
    # constant samples: m_half^2/m1 = 1 pushes c beyond the bracket
    with pytest.raises(NumericalError, match="residual"):
        solve_ga0_alpha(1.0, 1.0, 1)


def test_ga0_estimate_round_trip():
    rng = np.random.default_rng(77)
    alpha_true, n = -3.0, 1
    gam_true = 2.0
    # z = sqrt(V * T), V ~ InvGamma(-alpha, gam), T ~ Gamma(n, 1/n)
    size = 200_000
    v = gam_true / rng.gamma(-alpha_true, 1.0, size)
    t = rng.gamma(n, 1.0 / n, size)
    z = np.sqrt(v * t)
    p = estimate("ga0", moments(z), looks=n)
    assert p.params["alpha"] == pytest.approx(alpha_true, rel=0.10)
    assert p.params["gamma"] == pytest.approx(gam_true, rel=0.10)


# --- densities ---------------------------------------------------------------


def test_pdf_gamma_exponential_at_zero():
    p = DistParams("gamma", {"shape": 1.0, "rate": 1.0})
    assert pdf(p, 0.0) == pytest.approx(1.0)


def test_pdf_rayleigh_spot():
    p = DistParams("rayleigh", {"sigma": 1.0})
    assert pdf(p, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)


@pytest.mark.parametrize(
    "params",
    [
        DistParams("lognormal", {"mu": 0.3, "sigma": 0.8}),
        DistParams("rayleigh", {"sigma": 1.4}),
        DistParams("gamma", {"shape": 4.0, "rate": 1.0}),
        DistParams("weibull", {"shape": 1.6, "scale": 2.0}),
        DistParams("ga0", {"alpha": -3.0, "gamma": 2.0}, looks=1),
    ],
)
def test_pdf_integrates_to_one(params):
    total, err = quad(lambda z: pdf(params, z), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_ga0_pdf_matches_oracle():
    p = DistParams("ga0", {"alpha": -2.5, "gamma": 1.5}, looks=2)
    for z in (0.1, 0.7, 1.3, 4.0):
        assert pdf(p, z) == pytest.approx(_ga0_pdf_oracle(z, -2.5, 1.5, 2), rel=1e-10)


# --- discretization ----------------------------------------------------------


def test_discretize_single_bin():
    p = DistParams("gamma", {"shape": 4.0, "rate": 1.0})
    pmf = discretize(p, [0.0, 60.0])
    assert pmf.mass.tolist() == [1.0]


def test_discretize_scale_equivariance():
    # scaling the distribution and the bin edges together leaves masses fixed
    c = 2.5
    pa = DistParams("gamma", {"shape": 4.0, "rate": 1.0})
    pb = DistParams("gamma", {"shape": 4.0, "rate": 1.0 / c})
    edges = np.linspace(0.0, 16.0, 33)
    np.testing.assert_allclose(
        discretize(pa, edges).mass, discretize(pb, edges * c).mass, rtol=1e-12
    )


def test_discretize_matches_quadrature():
    p = DistParams("gamma", {"shape": 4.0, "rate": 1.0})
    edges = np.linspace(0.0, 16.0, 65)
    got = discretize(p, edges).mass
    exact = np.array([
        quad(lambda z: pdf(p, z), a, b, limit=100)[0] for a, b in zip(edges[:-1], edges[1:])
    ])
    exact = np.maximum(exact, 1e-12)
    exact /= exact.sum()
    np.testing.assert_allclose(got, exact, atol=1e-3)


def test_discretize_positive_and_normalized(rng):
    p = DistParams("lognormal", {"mu": 0.0, "sigma": 0.25})
    pmf = discretize(p, default_bin_edges(rng.random(1000) * 4))
    assert pmf.mass.min() > 0
    assert pmf.mass.sum() == pytest.approx(1.0, abs=1e-12)
