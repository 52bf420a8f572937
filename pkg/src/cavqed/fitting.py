"""Weighted Levenberg-Marquardt fitting for photon-counting data.

The engine is a plain damped-normal-equations LM loop: small parameter
counts, central-difference Jacobians, covariance from the weighted normal
matrix scaled by the reduced chi-square. Everything is double precision
numpy with a fixed iteration order, so a fit is bitwise reproducible for
identical inputs.

The fit-layer unit convention is ns for times (rates in 1/ns), GHz for
laser-frequency offsets, and rad/ns for angular detunings; keeping fit
parameters within a few orders of magnitude of unity is what lets the
plain normal equations stay well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Histogram, Scan
from .lineshapes import exgaussian_eval, lorentzian_eval
from .propagation import linewidth_from_lifetime, propagate_reciprocal

DEFAULT_SIGMA_IRF_NS = 0.228

MAX_ITERATIONS = 500
PARAM_TOL = 1e-8
COST_TOL = 1e-10
_LAMBDA_INIT = 1e-3
_LAMBDA_GROW = 10.0
_LAMBDA_SHRINK = 3.0
_LAMBDA_CEILING = 1e14
_COND_TOL = 1e-12
_FD_REL_STEP = 1e-6


class FitError(RuntimeError):
    """Raised when a fit cannot be set up or its normal matrix is degenerate."""


@dataclass(frozen=True)
class FitResult:
    """Converged (or abandoned) least-squares estimate.

    params maps parameter names to fitted values in the order of names;
    derived maps quantity names to (value, sigma) pairs, sigma None meaning
    the value is exact arithmetic on the parameters, not an estimate.
    """

    names: tuple
    params: dict
    covariance: np.ndarray
    reduced_chi2: float
    derived: dict
    converged: bool
    n_iter: int
    cost: float
    warnings: tuple = ()

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        k = len(self.names)
        if cov.shape != (k, k):
            raise ValueError("covariance shape must match the parameter count")
        if np.max(np.abs(cov - cov.T)) > 1e-12 * (np.max(np.abs(cov)) + 1e-300):
            raise ValueError("covariance must be symmetric")
        scale = float(np.max(np.abs(cov))) if cov.size else 0.0
        if scale > 0:
            min_eig = float(np.min(np.linalg.eigvalsh(cov)))
            if min_eig < -1e-10 * scale:
                raise ValueError(f"covariance not positive semidefinite (min eig {min_eig:.3e})")
        object.__setattr__(self, "covariance", cov)

    def param_vector(self) -> np.ndarray:
        return np.array([self.params[n] for n in self.names], dtype=float)

    def sigma(self, name: str) -> float:
        i = self.names.index(name)
        return math.sqrt(max(self.covariance[i, i], 0.0))


def _degenerate_combination(a: np.ndarray, names) -> str:
    eigvals, eigvecs = np.linalg.eigh(a)
    v = eigvecs[:, 0]
    terms = [
        f"{v[i]:+.3f}*{names[i]}"
        for i in range(len(names))
        if abs(v[i]) > 0.15
    ]
    return " ".join(terms) if terms else "unidentified combination"


def _check_conditioning(a: np.ndarray, names) -> None:
    eigvals = np.linalg.eigvalsh(a)
    if eigvals[-1] <= 0 or eigvals[0] <= _COND_TOL * eigvals[-1]:
        raise FitError(
            "normal matrix J'WJ is singular; the data do not constrain the "
            f"parameter combination {_degenerate_combination(a, names)}"
        )


def lm_minimize(model, data, weights, init, bounds=None, names=None) -> FitResult:
    """Levenberg-Marquardt minimization of sum_i w_i (y_i - f(x_i; p))^2.

    Parameters
    ----------
    model : callable(x, p) -> array
        Vectorized model; p is the parameter vector.
    data : (x, y) pair of equal-length arrays
    weights : array of nonnegative weights, one per point
    init : starting parameter vector (must lie within bounds)
    bounds : optional (lo, hi) arrays; steps are clipped to the box
    names : parameter names for error messages and the result map

    Convergence: relative parameter change < 1e-8 or relative cost change
    < 1e-10 on an accepted step, at most 500 iterations. A damping stall
    (no downhill step found at any damping) also counts as converged: the
    fit is at a minimum to within numerical resolution.

    Covariance is (J'WJ)^-1 times the reduced chi-square at the solution.
    """
    x, y = data
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    p = np.asarray(init, dtype=float).copy()
    k = p.size
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(k))
    if len(names) != k:
        raise ValueError("names length must match the parameter count")
    n = y.size
    if x.shape[0] != n or w.shape[0] != n:
        raise ValueError("x, y, weights must have equal length")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if n < k + 3:
        raise FitError(f"need at least {k + 3} points to fit {k} parameters, got {n}")

    if bounds is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        if np.any(p < lo) or np.any(p > hi):
            raise ValueError("init must lie within bounds")
    else:
        lo = np.full(k, -np.inf)
        hi = np.full(k, np.inf)

    def cost_of(params):
        r = y - model(x, params)
        return float(np.dot(w * r, r)), r

    def jacobian(params):
        j = np.empty((n, k))
        for i in range(k):
            h = _FD_REL_STEP * max(abs(params[i]), 1.0)
            up = params.copy()
            dn = params.copy()
            up[i] = min(params[i] + h, hi[i])
            dn[i] = max(params[i] - h, lo[i])
            span = up[i] - dn[i]
            if span <= 0:
                j[:, i] = 0.0
                continue
            j[:, i] = (model(x, up) - model(x, dn)) / span
        return j

    cost, resid = cost_of(p)
    lam = _LAMBDA_INIT
    converged = False
    n_iter = 0
    for n_iter in range(1, MAX_ITERATIONS + 1):
        j = jacobian(p)
        jw = j * w[:, None]
        a = j.T @ jw
        grad = jw.T @ resid

        accepted = False
        while lam <= _LAMBDA_CEILING:
            damped = a + lam * np.diag(np.diag(a))
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                _check_conditioning(a, names)
                lam *= _LAMBDA_GROW
                continue
            if not np.all(np.isfinite(step)):
                _check_conditioning(a, names)
                lam *= _LAMBDA_GROW
                continue
            p_try = np.clip(p + step, lo, hi)
            c_try, r_try = cost_of(p_try)
            if math.isfinite(c_try) and c_try <= cost:
                accepted = True
                break
            lam *= _LAMBDA_GROW
        if not accepted:
            # no downhill direction at any damping: at a minimum
            converged = True
            break

        rel_dp = float(np.linalg.norm(p_try - p)) / (float(np.linalg.norm(p)) + 1e-300)
        rel_dc = (cost - c_try) / max(cost, 1e-300)
        p, cost, resid = p_try, c_try, r_try
        lam = max(lam / _LAMBDA_SHRINK, 1e-12)
        if rel_dp < PARAM_TOL or rel_dc < COST_TOL:
            converged = True
            break

    j = jacobian(p)
    jw = j * w[:, None]
    a = j.T @ jw
    _check_conditioning(a, names)
    eigvals, eigvecs = np.linalg.eigh(a)
    inv_a = (eigvecs / eigvals) @ eigvecs.T
    reduced_chi2 = cost / (n - k)
    cov = inv_a * reduced_chi2
    cov = 0.5 * (cov + cov.T)

    return FitResult(
        names=names,
        params={names[i]: float(p[i]) for i in range(k)},
        covariance=cov,
        reduced_chi2=float(reduced_chi2),
        derived={},
        converged=converged,
        n_iter=n_iter,
        cost=float(cost),
    )


def _with_derived(result: FitResult, derived: dict, warnings: tuple) -> FitResult:
    return FitResult(
        names=result.names,
        params=result.params,
        covariance=result.covariance,
        reduced_chi2=result.reduced_chi2,
        derived=derived,
        converged=result.converged,
        n_iter=result.n_iter,
        cost=result.cost,
        warnings=result.warnings + warnings,
    )


def poisson_weights(counts) -> np.ndarray:
    """1/max(counts, 1): Poisson variance with a floor of one count."""
    return 1.0 / np.maximum(np.asarray(counts, dtype=float), 1.0)


LIFETIME_PARAM_NAMES = ("a", "mu_ns", "gamma_per_ns", "b")


def lifetime_fit_init(hist: Histogram, sigma_irf: float) -> np.ndarray:
    """Heuristic (a, mu, gamma, b) start for a single-exponential histogram.

    mu from the peak bin, b from the pre-trigger baseline (first 5% of
    bins), gamma from a log-slope over the count decade below 10% of the
    peak, a from the peak height over baseline.
    """
    t = hist.bin_centers
    y = hist.counts.astype(float)
    m = int(np.argmax(y))
    b0 = float(np.median(y[: max(1, y.size // 20)]))
    net = y - b0
    peak = net[m]
    if peak <= 0:
        raise FitError("histogram peak does not rise above the baseline estimate")

    tail = np.nonzero(
        (np.arange(y.size) > m) & (net > 0.01 * peak) & (net < 0.1 * peak)
    )[0]
    if tail.size >= 3:
        slope = np.polyfit(t[tail], np.log(net[tail]), 1)[0]
        gamma0 = max(-float(slope), 1e-6)
    else:
        gamma0 = 2.0 / max(t[-1] - t[m], hist.bin_width)
    a0 = peak / (sigma_irf * math.sqrt(math.pi / 2.0))
    return np.array([a0, float(t[m]), gamma0, b0])


def fit_lifetime(hist: Histogram, sigma_irf: float = DEFAULT_SIGMA_IRF_NS, init=None) -> FitResult:
    """Fit a lifetime histogram with the exGaussian model, IRF width held fixed.

    sigma_irf is the instrument-response standard deviation in ns; it is a
    known detector property, never a fit parameter. The derived map carries
    tau_ns = 1/gamma and the lifetime-limited linewidth in MHz, both with
    propagated sigmas.
    """
    if sigma_irf <= 0:
        raise ValueError("sigma_irf must be positive")
    y = hist.counts.astype(float)
    if float(np.max(y)) <= 3.0 * float(np.median(y)):
        raise FitError(
            "no detectable peak: maximum count is not above 3x the median; "
            "this histogram has no rising edge to fit"
        )

    p0 = lifetime_fit_init(hist, sigma_irf) if init is None else _merge_init(
        lifetime_fit_init(hist, sigma_irf), init, LIFETIME_PARAM_NAMES
    )
    lo = np.array([1e-12, -np.inf, 1e-9, -np.inf])
    hi = np.full(4, np.inf)
    p0 = np.clip(p0, lo, hi)

    def model(t, p):
        return exgaussian_eval(t, p[0], p[1], sigma_irf, p[2], p[3])

    result = lm_minimize(
        model,
        (hist.bin_centers, y),
        poisson_weights(y),
        p0,
        bounds=(lo, hi),
        names=LIFETIME_PARAM_NAMES,
    )
    gamma = result.params["gamma_per_ns"]
    sigma_gamma = result.sigma("gamma_per_ns")
    tau, sigma_tau = propagate_reciprocal(gamma, sigma_gamma)
    lw, sigma_lw = linewidth_from_lifetime(tau, sigma_tau)
    derived = {
        "tau_ns": (tau, sigma_tau),
        "linewidth_mhz": (lw, sigma_lw),
    }
    return _with_derived(result, derived, ())


PLE_PARAM_NAMES = ("amp", "nu0_ghz", "fwhm_ghz", "b")


def ple_fit_init(scan: Scan) -> np.ndarray:
    x = scan.frequency_offsets
    y = scan.counts.astype(float)
    b0 = float(np.percentile(y, 10))
    m = int(np.argmax(y))
    amp0 = max(float(y[m]) - b0, 1e-12)
    above = np.nonzero(y > b0 + 0.5 * amp0)[0]
    span = float(x[-1] - x[0])
    if above.size >= 2:
        fwhm0 = float(x[above[-1]] - x[above[0]])
    else:
        fwhm0 = span / 4.0
    min_step = float(np.min(np.diff(x)))
    fwhm0 = min(max(fwhm0, min_step), 2.0 * span)
    return np.array([amp0, float(x[m]), fwhm0, b0])


def fit_ple(scan: Scan, init=None) -> FitResult:
    """Fit a single-peak PLE scan with a Lorentzian.

    The scan must be pre-windowed to one peak; this function never chooses
    among peaks. The derived map carries the FWHM in MHz. A fitted width
    wider than half the scan span is flagged unreliable rather than raised:
    the numbers are still reported for inspection.
    """
    x = scan.frequency_offsets
    y = scan.counts.astype(float)
    p0 = ple_fit_init(scan) if init is None else _merge_init(
        ple_fit_init(scan), init, PLE_PARAM_NAMES
    )
    min_step = float(np.min(np.diff(x)))
    lo = np.array([0.0, -np.inf, 0.01 * min_step, -np.inf])
    hi = np.full(4, np.inf)
    p0 = np.clip(p0, lo, hi)

    def model(nu, p):
        return lorentzian_eval(nu, p[0], p[1], p[2], p[3])

    result = lm_minimize(
        model, (x, y), poisson_weights(y), p0, bounds=(lo, hi), names=PLE_PARAM_NAMES
    )
    fwhm = result.params["fwhm_ghz"]
    sigma_fwhm = result.sigma("fwhm_ghz")
    warnings = ()
    span = float(x[-1] - x[0])
    if fwhm > 0.5 * span:
        warnings = (
            "unreliable: fitted linewidth exceeds half the scan span; widen "
            "the scan window or check that it contains a peak",
        )
    derived = {"fwhm_mhz": (1e3 * fwhm, 1e3 * sigma_fwhm)}
    return _with_derived(result, derived, warnings)


DETUNING_PARAM_NAMES = ("gamma", "amp", "width")


def _merge_init(heuristic: np.ndarray, init, names) -> np.ndarray:
    if isinstance(init, dict):
        p = heuristic.copy()
        for key, val in init.items():
            if key not in names:
                raise ValueError(f"unknown init parameter {key!r}; expected {names}")
            p[names.index(key)] = float(val)
        return p
    p = np.asarray(init, dtype=float)
    if p.shape != heuristic.shape:
        raise ValueError(f"init must have {heuristic.size} entries for {names}")
    return p.copy()


def _flat_detuning_result(deltas, rates, weights, kappa) -> FitResult:
    gamma = float(np.sum(weights * rates) / np.sum(weights))
    sigma_gamma2 = 1.0 / float(np.sum(weights))
    width = max(float(np.max(np.abs(deltas))), 1.0)
    cov = np.zeros((3, 3))
    cov[0, 0] = sigma_gamma2
    warnings = (
        "series is flat: no detuning dependence, amplitude fixed at zero and "
        "the width is unconstrained (nominal value reported)",
    )
    derived = {
        "ratio": (1.0, 0.0),
        "width": (width, 0.0),
    }
    if kappa is not None:
        derived["width_over_kappa"] = (width / kappa, 0.0)
    return FitResult(
        names=DETUNING_PARAM_NAMES,
        params={"gamma": gamma, "amp": 0.0, "width": width},
        covariance=cov,
        reduced_chi2=0.0,
        derived=derived,
        converged=True,
        n_iter=0,
        cost=0.0,
        warnings=warnings,
    )


def fit_detuning_series(points, kappa: float | None = None, exclude=None, init=None) -> FitResult:
    """Fit 1/tau(delta) = gamma + A*(w/2)^2 / (delta^2 + (w/2)^2).

    Parameters
    ----------
    points : sequence of (delta, tau, sigma_tau)
        Any consistent unit pair (e.g. rad/ns with ns); sigma_tau > 0.
    kappa : optional cavity linewidth in the delta unit
        When given, the derived map gains width_over_kappa and a width
        larger than kappa is flagged (the signature of two unresolved
        transitions sharing the cavity).
    exclude : optional boolean mask or index list
        Points to drop from the fit; they stay out of the result entirely,
        but the mask is the caller's record of what was excluded.

    Weights are 1/sigma^2 of the rate 1/tau. The derived map carries the
    lifetime ratio (gamma + A)/gamma with a covariance-propagated sigma,
    except when the fit pins gamma at its floor (a baseline consistent
    with zero, typical of strongly broadened series); then the ratio is
    omitted and a warning says so.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be (delta, tau, sigma_tau) triples")
    if exclude is not None:
        excl = np.asarray(exclude)
        if excl.dtype == bool:
            if excl.shape[0] != pts.shape[0]:
                raise ValueError("boolean exclude mask must match the point count")
            mask = excl
        else:
            mask = np.isin(np.arange(pts.shape[0]), excl)
        pts = pts[~mask]
    if pts.shape[0] < 6:
        raise FitError(
            f"insufficient points: {pts.shape[0]} after exclusion, need at least 6 "
            "to constrain (gamma, amplitude, width)"
        )
    deltas, taus, sigma_taus = pts.T
    if np.any(taus <= 0):
        raise ValueError("lifetimes must be positive")
    if np.any(sigma_taus <= 0):
        raise ValueError("sigma_tau must be positive for weighting")

    rates = 1.0 / taus
    sigma_rates = sigma_taus / taus**2
    weights = 1.0 / sigma_rates**2

    if float(np.ptp(rates)) <= 1e-12 * float(np.max(np.abs(rates))):
        return _flat_detuning_result(deltas, rates, weights, kappa)

    gamma0 = float(np.min(rates))
    amp0 = float(np.max(rates)) - gamma0
    above = np.nonzero(rates > gamma0 + 0.5 * amp0)[0]
    if above.size >= 2:
        width0 = float(np.max(deltas[above]) - np.min(deltas[above]))
    else:
        width0 = float(np.ptp(deltas)) / 2.0
    width0 = max(width0, 1e-6 * float(np.max(np.abs(deltas))) + 1e-30)
    p0 = np.array([gamma0, amp0, width0])
    if init is not None:
        p0 = _merge_init(p0, init, DETUNING_PARAM_NAMES)
    # the gamma floor is data-relative so gamma**2 cannot underflow below
    gamma_floor = 1e-12 * float(np.max(rates))
    lo = np.array([gamma_floor, 0.0, 1e-30])
    hi = np.full(3, np.inf)
    p0 = np.clip(p0, lo, hi)

    def model(d, p):
        half2 = (0.5 * p[2]) ** 2
        return p[0] + p[1] * half2 / (d * d + half2)

    result = lm_minimize(
        model, (deltas, rates), weights, p0, bounds=(lo, hi), names=DETUNING_PARAM_NAMES
    )
    gamma = result.params["gamma"]
    amp = result.params["amp"]
    width = result.params["width"]
    cov = result.covariance
    derived = {"width": (width, result.sigma("width"))}
    warnings = ()
    if gamma <= gamma_floor * (1.0 + 1e-9):
        warnings += (
            "fitted baseline rate is consistent with zero; the lifetime ratio "
            "(gamma + A)/gamma is unbounded and is not reported",
        )
    else:
        # ratio r = (gamma + A)/gamma; grad wrt (gamma, A, w)
        grad = np.array([-amp / gamma**2, 1.0 / gamma, 0.0])
        sigma_ratio = math.sqrt(max(float(grad @ cov @ grad), 0.0))
        derived["ratio"] = ((gamma + amp) / gamma, sigma_ratio)
    if kappa is not None:
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        derived["width_over_kappa"] = (width / kappa, result.sigma("width") / kappa)
        if width > kappa:
            warnings += (
                "fitted width exceeds the cavity linewidth; consistent with two "
                "unresolved transitions coupled to the same mode",
            )
    return _with_derived(result, derived, warnings)
