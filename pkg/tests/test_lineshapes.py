"""Lineshape evaluation against direct numerical convolution.

The exGaussian closed form is checked against adaptive quadrature of its
defining integral

    f(t) = a * int_0^inf exp(-Gamma u) exp(-(t - mu - u)^2 / (2 sigma^2)) du + b

evaluated on a finite interval centered on the integrand's bump (the
semi-infinite form hides a narrow Gaussian far from the origin at large t,
which adaptive quadrature will miss without the hint).
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erfc, erfcx

from cavqed.lineshapes import (
    exgaussian_area,
    exgaussian_eval,
    lorentzian_area,
    lorentzian_eval,
)

A, MU, SIGMA, GAMMA, B = 1000.0, 2.0, 0.228, 0.5147, 5.0


def _oracle_point(t, a, mu, sigma, gamma_rate, b):
    def integrand(u):
        return math.exp(-gamma_rate * u - (t - mu - u) ** 2 / (2.0 * sigma**2))

    c = (t - mu) - sigma**2 * gamma_rate  # integrand maximum
    upper = max(c, 0.0) + 60.0 * sigma
    pts = [c] if 0.0 < c < upper else None
    val, err = quad(integrand, 0.0, upper, points=pts, epsabs=1e-14, epsrel=1e-12, limit=200)
    return a * val + b


def test_exgaussian_matches_quadrature():
    ts = np.linspace(MU - 10.0 * SIGMA, MU + 10.0 / GAMMA, 200)
    model = exgaussian_eval(ts, A, MU, SIGMA, GAMMA, B)
    oracle = np.array([_oracle_point(t, A, MU, SIGMA, GAMMA, B) for t in ts])
    peak = float(np.max(oracle - B))
    assert np.max(np.abs(model - oracle)) <= 1e-8 * peak


def test_exgaussian_quadrature_far_tail():
    # many lifetimes past the peak, where the naive semi-infinite quadrature
    # loses the bump entirely
    for t in (MU + 20.0 / GAMMA, MU + 40.0 / GAMMA):
        model = exgaussian_eval(t, A, MU, SIGMA, GAMMA, B)
        oracle = _oracle_point(t, A, MU, SIGMA, GAMMA, B)
        assert model == pytest.approx(oracle, rel=1e-8, abs=1e-12)


def test_exgaussian_area_against_quadrature():
    lo = MU - 40.0 * SIGMA
    hi = MU + 80.0 / GAMMA
    val, _ = quad(
        lambda t: exgaussian_eval(t, A, MU, SIGMA, GAMMA, 0.0),
        lo,
        hi,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=400,
    )
    assert val == pytest.approx(exgaussian_area(A, SIGMA, GAMMA), rel=1e-6)


def test_exgaussian_extreme_arguments_stay_finite():
    # sigma*gamma = 50: exp(sigma^2 gamma^2 / 2) alone would overflow
    sigma, gamma = 5.0, 10.0
    ts = np.array([MU - 50.0 * sigma, MU - 1e6, MU + 50.0 / gamma, MU + 1e6])
    vals = exgaussian_eval(ts, A, MU, sigma, gamma, B)
    assert np.all(np.isfinite(vals))
    assert np.all(vals >= B - 1e-9)
    # both far tails relax to the baseline
    assert vals[1] == pytest.approx(B, abs=1e-9)
    assert vals[3] == pytest.approx(B, abs=1e-9)


def test_exgaussian_branch_continuity():
    # the erfcx/erfc split happens at t = mu + sigma^2*gamma; the two
    # branches are the same function, so the seam must be invisible
    seam = MU + SIGMA**2 * GAMMA
    eps = 1e-12  # small against the function's own slope
    left = exgaussian_eval(seam - eps, A, MU, SIGMA, GAMMA, B)
    right = exgaussian_eval(seam + eps, A, MU, SIGMA, GAMMA, B)
    at = exgaussian_eval(seam, A, MU, SIGMA, GAMMA, B)
    assert left == pytest.approx(at, rel=1e-10)
    assert right == pytest.approx(at, rel=1e-10)


def test_exgaussian_scalar_and_array_forms():
    v = exgaussian_eval(MU, A, MU, SIGMA, GAMMA, B)
    assert isinstance(v, float)
    arr = exgaussian_eval([MU, MU + 1.0], A, MU, SIGMA, GAMMA, B)
    assert arr.shape == (2,)
    assert arr[0] == pytest.approx(v)


def test_exgaussian_domain():
    with pytest.raises(ValueError):
        exgaussian_eval(0.0, A, MU, 0.0, GAMMA, B)
    with pytest.raises(ValueError):
        exgaussian_eval(0.0, A, MU, SIGMA, -1.0, B)
    with pytest.raises(ValueError):
        exgaussian_area(A, SIGMA, 0.0)


def test_erfc_reference_table():
    rows = np.loadtxt("tests/fixtures/erfc_reference.csv", delimiter=",", skiprows=1)
    for x, expected in rows:
        got = float(erfc(x))
        assert abs(got - expected) <= 1e-12
        if expected > 1e-300:
            assert got == pytest.approx(expected, rel=1e-13)
        # erfcx agrees with the scaled form wherever exp(x^2) is representable
        if x * x < 700.0:
            assert float(erfcx(x)) == pytest.approx(
                math.exp(x * x) * expected, rel=1e-11
            )


# ------------------------------------------------------------------ Lorentzian


def test_lorentzian_peak_and_half_maximum():
    amp, nu0, fwhm, b = 100.0, 1.5, 0.25, 7.0
    assert lorentzian_eval(nu0, amp, nu0, fwhm, b) == amp + b
    for sign in (-1.0, +1.0):
        half = lorentzian_eval(nu0 + sign * fwhm / 2.0, amp, nu0, fwhm, b)
        assert half == pytest.approx(amp / 2.0 + b, rel=1e-14)


def test_lorentzian_area_against_quadrature():
    amp, nu0, fwhm = 100.0, 1.5, 0.25
    f = lambda nu: lorentzian_eval(nu, amp, nu0, fwhm, 0.0)
    left, _ = quad(f, -np.inf, nu0, epsabs=1e-12, epsrel=1e-12)
    right, _ = quad(f, nu0, np.inf, epsabs=1e-12, epsrel=1e-12)
    assert left + right == pytest.approx(lorentzian_area(amp, fwhm), rel=1e-9)


def test_lorentzian_domain():
    with pytest.raises(ValueError):
        lorentzian_eval(0.0, 1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        lorentzian_area(1.0, -0.1)
