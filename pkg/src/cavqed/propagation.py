"""First-order (Gaussian) error propagation for the derived quantities.

Each function returns (value, sigma). The algebra is the standard
independent-variable quadrature rule; forms are arranged so that a zero
input uncertainty contributes exactly zero without dividing by the value
it belongs to.
"""

from __future__ import annotations

import math

from .constants import TWO_PI


def propagate_reciprocal(gamma_rate: float, sigma_gamma: float) -> tuple:
    """tau = 1/gamma with sigma_tau = |sigma_gamma|/gamma^2."""
    if gamma_rate <= 0:
        raise ValueError("gamma_rate must be positive")
    tau = 1.0 / gamma_rate
    return tau, abs(sigma_gamma) / gamma_rate**2


def propagate_ratio(tau1: float, sigma1: float, tau2: float, sigma2: float) -> tuple:
    """r = tau1/tau2 with sigma_r = |r|*sqrt((s1/tau1)^2 + (s2/tau2)^2).

    Evaluated as sqrt((s1/tau2)^2 + (tau1*s2/tau2^2)^2), which is the same
    expression but stays defined when tau1 = 0.
    """
    if tau2 <= 0:
        raise ValueError("tau2 must be positive")
    r = tau1 / tau2
    return r, math.hypot(sigma1 / tau2, tau1 * sigma2 / tau2**2)


def propagate_product(a: float, sigma_a: float, b: float, sigma_b: float) -> tuple:
    """p = a*b with sigma_p = sqrt((b*sigma_a)^2 + (a*sigma_b)^2)."""
    return a * b, math.hypot(b * sigma_a, a * sigma_b)


def propagate_cooperativity(
    gamma: float,
    sigma_gamma: float,
    gamma_tot: float,
    sigma_tot: float,
    cmax: float,
    sigma_cmax: float,
) -> tuple:
    """C = (gamma/gamma_tot) * C_max with both factors' errors combined.

    gamma and gamma_tot are the lifetime-limited and total linewidths in
    any common unit; C_max is the resonant cooperativity bound (typically
    lifetime ratio minus one). All three values must be positive except
    that cmax = 0 degenerates cleanly to C = 0.
    """
    if gamma <= 0 or gamma_tot <= 0:
        raise ValueError("linewidths must be positive")
    if cmax < 0:
        raise ValueError("cmax must be nonnegative")
    rho, sigma_rho = propagate_ratio(gamma, sigma_gamma, gamma_tot, sigma_tot)
    return propagate_product(rho, sigma_rho, cmax, sigma_cmax)


def linewidth_from_lifetime(tau_ns: float, sigma_tau_ns: float = 0.0) -> tuple:
    """Lifetime-limited FWHM in MHz from a lifetime in ns.

    nu = 1/(2 pi tau); sigma_nu = sigma_tau/(2 pi tau^2). The 1e3 factor
    converts 1/ns (GHz) to MHz.
    """
    if tau_ns <= 0:
        raise ValueError("tau must be positive")
    value = 1e3 / (TWO_PI * tau_ns)
    sigma = 1e3 * abs(sigma_tau_ns) / (TWO_PI * tau_ns**2)
    return value, sigma
