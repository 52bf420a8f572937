"""Photon-counting lineshapes: exponentially modified Gaussian and Lorentzian.

The exGaussian is the exponential decay (rate Gamma, onset mu) convolved
with the Gaussian instrument response (width sigma). Evaluation is split at
z = (sigma^2*Gamma - (t - mu)) / (sqrt(2)*sigma):

    z >= 0:  a*sigma*sqrt(pi/2) * exp(-(t-mu)^2/(2 sigma^2)) * erfcx(z) + b
    z <  0:  a*sigma*sqrt(pi/2) * exp(sigma^2 Gamma^2/2 - Gamma (t-mu)) * erfc(z) + b

The two branches are algebraically identical; the split keeps every
intermediate bounded (the z < 0 exponent is below -sigma^2*Gamma^2/2), where
the naive single formula overflows as soon as sigma*Gamma is large or t sits
many lifetimes past the peak.

Units are whatever the caller uses, as long as t, mu, sigma and 1/Gamma
agree; the fitting layer works in ns.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcx

_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
_SQRT2 = math.sqrt(2.0)


def exgaussian_eval(t, a, mu, sigma, gamma_rate, b):
    """Exponentially modified Gaussian with baseline.

    Parameters
    ----------
    t : array_like
        Evaluation times.
    a : float
        Amplitude of the underlying (pre-convolution) exponential.
    mu : float
        Decay onset.
    sigma : float
        Gaussian instrument-response standard deviation (> 0).
    gamma_rate : float
        Exponential decay rate (> 0), 1/lifetime.
    b : float
        Constant baseline.

    The background-subtracted area is a*sigma*sqrt(2*pi)/gamma_rate.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if gamma_rate <= 0:
        raise ValueError("gamma_rate must be positive")
    t = np.asarray(t, dtype=float)
    u = t - mu
    z = (sigma * sigma * gamma_rate - u) / (_SQRT2 * sigma)
    prefactor = a * sigma * _SQRT_HALF_PI

    out = np.empty_like(u)
    pos = z >= 0
    if np.any(pos):
        up = u[pos]
        out[pos] = np.exp(-(up * up) / (2.0 * sigma * sigma)) * erfcx(z[pos])
    neg = ~pos
    if np.any(neg):
        # exponent < -sigma^2*gamma^2/2 on this branch, so no overflow
        expo = gamma_rate * (0.5 * sigma * sigma * gamma_rate - u[neg])
        out[neg] = np.exp(expo) * erfc(z[neg])
    result = prefactor * out + b
    return result if result.ndim else float(result)


def exgaussian_area(a, sigma, gamma_rate):
    """Integral of the background-subtracted exGaussian over the real line."""
    if sigma <= 0 or gamma_rate <= 0:
        raise ValueError("sigma and gamma_rate must be positive")
    return a * sigma * math.sqrt(2.0 * math.pi) / gamma_rate


def lorentzian_eval(nu, amp, nu0, fwhm, b):
    """Lorentzian with baseline: amp*(fwhm/2)^2 / ((nu-nu0)^2 + (fwhm/2)^2) + b.

    amp is the peak height above the baseline; the background-subtracted
    area is amp*pi*fwhm/2.
    """
    if fwhm <= 0:
        raise ValueError("fwhm must be positive")
    nu = np.asarray(nu, dtype=float)
    half = 0.5 * fwhm
    result = amp * half * half / ((nu - nu0) ** 2 + half * half) + b
    return result if result.ndim else float(result)


def lorentzian_area(amp, fwhm):
    """Integral of the background-subtracted Lorentzian over the real line."""
    if fwhm <= 0:
        raise ValueError("fwhm must be positive")
    return amp * math.pi * fwhm / 2.0
