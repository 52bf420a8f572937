"""Seeded synthetic measurement data.

Every generator draws from numpy's Philox counter-based bit generator
(recorded as "philox4x64" in output metadata): identical specs produce
bitwise-identical data on any platform, and independent seeds are
trivially parallel.

The forward models are exactly the lineshapes the fitting layer uses, so
fit-recovery tests close the loop without any shared shortcuts: the synth
side multiplies the exGaussian by the bin width to get expected counts,
the fit side infers the parameters back from the sampled counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Histogram, Scan
from .lineshapes import exgaussian_area, exgaussian_eval, lorentzian_eval
from .model import CoupledSystem, effective_decay_rate

GENERATOR_ID = "philox4x64"

NOISE_KINDS = ("poisson", "gaussian", "none")

LIFETIME_TRUTH_KEYS = ("a", "mu_ns", "sigma_irf_ns", "gamma_per_ns", "b")
PLE_TRUTH_KEYS = ("amp", "nu0_ghz", "fwhm_ghz", "b")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic dataset.

    truth holds the model parameters (see LIFETIME_TRUTH_KEYS /
    PLE_TRUTH_KEYS); axis is (start, stop, n_bins) in the model's x unit.
    At most one of total_events / peak_counts rescales the model's
    amplitude and baseline to that count level; with neither, the truth
    amplitudes are used as-is. jitter_mhz is the per-scan center-frequency
    diffusion for PLE scans.
    """

    truth: dict
    axis: tuple
    seed: int
    noise: str = "poisson"
    noise_sigma: float | None = None
    total_events: float | None = None
    peak_counts: float | None = None
    jitter_mhz: float = 0.0

    def __post_init__(self):
        start, stop, n_bins = self.axis
        if not stop > start:
            raise ValueError("axis stop must exceed start")
        if int(n_bins) < 8:
            raise ValueError("n_bins must be at least 8")
        object.__setattr__(self, "axis", (float(start), float(stop), int(n_bins)))
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"noise must be one of {NOISE_KINDS}")
        if self.noise == "gaussian":
            if self.noise_sigma is None or self.noise_sigma < 0:
                raise ValueError("gaussian noise requires noise_sigma >= 0")
        if self.total_events is not None and self.peak_counts is not None:
            raise ValueError("give at most one of total_events / peak_counts")
        for name in ("total_events", "peak_counts"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.jitter_mhz < 0:
            raise ValueError("jitter_mhz must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed))

    def base_meta(self) -> dict:
        return {
            "generator": GENERATOR_ID,
            "seed": self.seed,
            "noise": self.noise,
        }


def _require_truth(spec: SynthSpec, keys) -> dict:
    missing = sorted(set(keys) - set(spec.truth))
    if missing:
        raise ValueError(f"truth map missing {missing}")
    unknown = sorted(set(spec.truth) - set(keys))
    if unknown:
        raise ValueError(f"truth map has unexpected keys {unknown}")
    return {k: float(spec.truth[k]) for k in keys}


def _apply_noise(expected: np.ndarray, spec: SynthSpec, rng) -> np.ndarray:
    if spec.noise == "poisson":
        return rng.poisson(expected).astype(float)
    if spec.noise == "gaussian":
        # clipped at zero to honor the nonnegative-counts carrier
        return np.maximum(expected + spec.noise_sigma * rng.standard_normal(expected.size), 0.0)
    return expected.copy()


def synth_lifetime_histogram(spec: SynthSpec) -> Histogram:
    """Histogram with expected counts = exGaussian(bin center) * bin width.

    total_events / peak_counts rescale amplitude and baseline together;
    the effective post-scale truth is recorded in meta["truth"], which is
    what recovery tests must compare against. An axis that misses
    [mu - 3*sigma, mu + 5/gamma] gets a coverage warning in meta.
    """
    truth = _require_truth(spec, LIFETIME_TRUTH_KEYS)
    start, stop, n_bins = spec.axis
    width = (stop - start) / n_bins
    centers = start + width * (np.arange(n_bins) + 0.5)

    expected = width * exgaussian_eval(
        centers, truth["a"], truth["mu_ns"], truth["sigma_irf_ns"],
        truth["gamma_per_ns"], truth["b"],
    )
    scale = 1.0
    if spec.total_events is not None:
        total = float(np.sum(expected))
        if total <= 0:
            raise ValueError("model integrates to zero; cannot scale to total_events")
        scale = spec.total_events / total
    elif spec.peak_counts is not None:
        peak = float(np.max(expected))
        if peak <= 0:
            raise ValueError("model peak is zero; cannot scale to peak_counts")
        scale = spec.peak_counts / peak
    expected = expected * scale
    # record the truth in the convention a fit on this histogram recovers:
    # counts per bin, so amplitude and baseline absorb scale and bin width
    truth_eff = dict(truth)
    truth_eff["a"] *= scale * width
    truth_eff["b"] *= scale * width

    warnings = []
    lo_needed = truth["mu_ns"] - 3.0 * truth["sigma_irf_ns"]
    hi_needed = truth["mu_ns"] + 5.0 / truth["gamma_per_ns"]
    if start > lo_needed or stop < hi_needed:
        warnings.append(
            f"axis [{start:g}, {stop:g}] ns does not cover the model support "
            f"[{lo_needed:g}, {hi_needed:g}] ns; scale and tail estimates will be biased"
        )

    counts = _apply_noise(expected, spec, spec.rng())
    meta = spec.base_meta()
    meta.update(truth=truth_eff, warnings=tuple(warnings), bin_width_ns=width, kind="lifetime")
    return Histogram(centers, counts, meta)


def expected_lifetime_total(spec: SynthSpec) -> float:
    """Analytic expected event total: a*sigma*sqrt(2 pi)/gamma + b*span.

    With total_events set the rescale makes that the expectation by
    construction; with peak_counts the scale has no closed form and the
    pre-scale value is returned.
    """
    truth = _require_truth(spec, LIFETIME_TRUTH_KEYS)
    if spec.total_events is not None:
        return float(spec.total_events)
    start, stop, _ = spec.axis
    return exgaussian_area(truth["a"], truth["sigma_irf_ns"], truth["gamma_per_ns"]) + truth[
        "b"
    ] * (stop - start)


def synth_ple_scan(spec: SynthSpec, n_scans: int):
    """List of jittered Lorentzian scans plus their integrated sum.

    Each scan's center is nu0 plus an independent Gaussian jitter draw
    (sigma = jitter_mhz); counts are then Poisson-sampled per point. All
    jitter draws happen before any count sampling, so the draw order (and
    with it determinism) does not depend on how counts are consumed.

    Returns (scans, integrated) where integrated sums counts over scans.
    """
    if n_scans < 1:
        raise ValueError("n_scans must be at least 1")
    truth = _require_truth(spec, PLE_TRUTH_KEYS)
    start, stop, n_points = spec.axis
    x = np.linspace(start, stop, n_points)

    scale = 1.0
    if spec.peak_counts is not None:
        peak = truth["amp"] + truth["b"]
        if peak <= 0:
            raise ValueError("model peak is zero; cannot scale to peak_counts")
        scale = spec.peak_counts / peak
    elif spec.total_events is not None:
        per_scan = float(
            np.sum(lorentzian_eval(x, truth["amp"], truth["nu0_ghz"], truth["fwhm_ghz"], truth["b"]))
        )
        if per_scan <= 0:
            raise ValueError("model integrates to zero; cannot scale to total_events")
        scale = spec.total_events / per_scan
    amp = truth["amp"] * scale
    base = truth["b"] * scale

    rng = spec.rng()
    jitter_ghz = 1e-3 * spec.jitter_mhz
    centers = truth["nu0_ghz"] + jitter_ghz * rng.standard_normal(n_scans)

    scans = []
    total = np.zeros(n_points)
    for i in range(n_scans):
        expected = lorentzian_eval(x, amp, centers[i], truth["fwhm_ghz"], base)
        counts = _apply_noise(expected, spec, rng)
        total += counts
        meta = spec.base_meta()
        meta.update(
            truth={**truth, "amp": amp, "b": base},
            scan_index=i,
            center_ghz=float(centers[i]),
            kind="ple",
        )
        scans.append(Scan(x, counts, meta))

    meta = spec.base_meta()
    meta.update(truth={**truth, "amp": amp, "b": base}, n_scans=n_scans, integrated=True, kind="ple")
    integrated = Scan(x, total, meta)
    return scans, integrated


def synth_detuning_series(
    system: CoupledSystem,
    n_transitions: int,
    splitting: float,
    deltas,
    relative_sigma: float = 0.05,
    weights=None,
) -> np.ndarray:
    """Lifetime-vs-detuning series from the adiabatic closed form.

    For two transitions the decay rate at cavity detuning delta is the
    population-weighted sum of the single-transition rates at
    delta -/+ splitting/2; tau = 1/rate and sigma_tau = relative_sigma*tau
    (error bars assigned, not sampled: the series itself is deterministic).

    Returns an (n, 3) array of (delta, tau, sigma_tau) rows in the
    system's angular-rate units (rad/s and s).
    """
    if n_transitions not in (1, 2):
        raise ValueError("n_transitions must be 1 or 2")
    if relative_sigma <= 0:
        raise ValueError("relative_sigma must be positive")
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if n_transitions == 1:
        offsets = (0.0,)
        p = (1.0,)
    else:
        offsets = (-0.5 * splitting, +0.5 * splitting)
        if weights is None:
            p = (0.5, 0.5)
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (2,) or np.any(w <= 0):
                raise ValueError("weights must be two positive numbers")
            p = tuple(w / w.sum())

    rows = np.empty((deltas.size, 3))
    for i, d in enumerate(deltas):
        rate = sum(
            pk * effective_decay_rate(system.detuned(d + off)) for pk, off in zip(p, offsets)
        )
        tau = 1.0 / rate
        rows[i] = (d, tau, relative_sigma * tau)
    return rows
