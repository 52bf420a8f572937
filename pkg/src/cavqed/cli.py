"""Command-line front end.

Subcommands cover the two fit paths (lifetime histograms, PLE scans), the
detuning-series analysis, the closed-form cooperativity and Purcell
arithmetic, the master-equation oracle, and synthetic-data generation.

Exit codes are a stable contract: 0 success, 2 input error (malformed
files, bad units, inconsistent flags), 3 numerical failure (fit or
validation did not converge; a partial report is still written).

The CAVQED_OUTDIR environment variable sets the directory used for
outputs when --out is not given.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ._version import __version__
from .constants import TWO_PI
from .data import (
    DataFormatError,
    parse_float,
    parse_float_list,
    parse_int,
    parse_key_value,
    read_detuning_csv,
    read_histogram_csv,
    read_scan_csv,
    require_keys,
    write_detuning_csv,
    write_histogram_csv,
    write_scan_csv,
)
from .fitting import (
    DEFAULT_SIGMA_IRF_NS,
    FitError,
    fit_detuning_series,
    fit_lifetime,
    fit_ple,
)
from .lindblad import (
    DissipatorSpec,
    IntegrationError,
    TruncatedState,
    ValidationError,
    evolve_master_equation,
    extract_decay_rate,
    validate_adiabatic_elimination,
)
from .model import (
    FORMULA_NOTES,
    CoupledSystem,
    branching_fraction,
    effective_decay_rate,
    purcell_from_ratio,
)
from .propagation import propagate_product, propagate_ratio
from .report import Report, file_sha256, fmt17
from .synth import SynthSpec, synth_detuning_series, synth_lifetime_histogram, synth_ple_scan
from .units import detuning_from_wavelength_offset, rad_per_s_to_mhz

OUT_ENV = "CAVQED_OUTDIR"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _resolve_out(out, default_name: str) -> Path:
    if out:
        return Path(out)
    return Path(os.environ.get(OUT_ENV, ".")) / default_name


def _err(message: str) -> None:
    print(f"cavqed: error: {message}", file=sys.stderr)


def _emit(report: Report, path: Path, fmt: str = "json") -> None:
    written = report.write(path, fmt)
    for name in sorted(report.results):
        print(f"{name} = {report.results[name]['display']} {report.results[name]['unit']}".rstrip())
    for warning in report.warnings:
        print(f"warning: {warning}")
    print(f"report written to {written}")


def _fit_param_results(report: Report, fit, units: dict, decimals: int = 4) -> None:
    for name in fit.names:
        report.add_result(
            name, fit.params[name], fit.sigma(name), unit=units.get(name, ""), decimals=decimals
        )
    report.add_result("reduced_chi2", fit.reduced_chi2, None, unit="", decimals=4)
    report.extra.setdefault("fit", {})
    report.extra["fit"] = {"converged": fit.converged, "n_iter": fit.n_iter, "cost": fit.cost}


# ---------------------------------------------------------------- fit-lifetime


def _fit_one_lifetime(path: str, sigma_irf: float):
    hist = read_histogram_csv(path)
    fit = fit_lifetime(hist, sigma_irf=sigma_irf)
    report = Report(command="fit-lifetime")
    report.inputs = {
        "histogram_csv": str(path),
        "histogram_sha256": file_sha256(path),
        "sigma_irf_ns": {"value": sigma_irf, "value_str": fmt17(sigma_irf), "fixed": True},
    }
    _fit_param_results(
        report, fit, {"a": "counts/ns", "mu_ns": "ns", "gamma_per_ns": "1/ns", "b": "counts"}
    )
    tau, sigma_tau = fit.derived["tau_ns"]
    lw, sigma_lw = fit.derived["linewidth_mhz"]
    report.add_result("tau_ns", tau, sigma_tau, unit="ns", decimals=2)
    report.add_result("linewidth_mhz", lw, sigma_lw, unit="MHz", decimals=2)
    report.provenance = [
        "exgaussian-lifetime-fit",
        "reciprocal-lifetime",
        "lifetime-limited-linewidth",
    ]
    for w in fit.warnings:
        report.add_warning(w)
    code = EXIT_OK
    if not fit.converged:
        report.add_warning("fit did not converge within the iteration budget; report is partial")
        code = EXIT_NUMERICAL
    return report, code


def cmd_fit_lifetime(args) -> int:
    paths = args.histogram_csv
    multi = len(paths) > 1
    if multi:
        outdir = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "."))
        if outdir.suffix:
            _err("--out must be a directory when fitting multiple histograms")
            return EXIT_INPUT
        outs = [outdir / f"{Path(p).stem}_report.json" for p in paths]
    else:
        outs = [_resolve_out(args.out, f"{Path(paths[0]).stem}_report.json")]

    def work(path):
        return _fit_one_lifetime(path, args.sigma_irf_ns)

    results = [None] * len(paths)
    if args.jobs > 1 and multi:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(work, p) for p in paths]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except (DataFormatError, FitError, ValueError, OSError) as exc:
                    results[i] = exc
    else:
        for i, p in enumerate(paths):
            try:
                results[i] = work(p)
            except (DataFormatError, FitError, ValueError, OSError) as exc:
                results[i] = exc

    code = EXIT_OK
    for i, res in enumerate(results):
        if isinstance(res, Exception):
            _err(f"{paths[i]}: {res}")
            code = max(code, EXIT_INPUT)
            continue
        report, one_code = res
        _emit(report, outs[i], args.format)
        code = max(code, one_code)
    return code


# --------------------------------------------------------------------- fit-ple


def cmd_fit_ple(args) -> int:
    scan = read_scan_csv(args.scan_csv)
    if args.window_ghz:
        scan = scan.windowed(*args.window_ghz)
    fit = fit_ple(scan)

    report = Report(command="fit-ple")
    report.inputs = {
        "scan_csv": str(args.scan_csv),
        "scan_sha256": file_sha256(args.scan_csv),
    }
    if args.window_ghz:
        report.inputs["window_ghz"] = list(args.window_ghz)
    _fit_param_results(
        report, fit, {"amp": "counts", "nu0_ghz": "GHz", "fwhm_ghz": "GHz", "b": "counts"}
    )
    fwhm_mhz, sigma_fwhm_mhz = fit.derived["fwhm_mhz"]
    report.add_result("fwhm_mhz", fwhm_mhz, sigma_fwhm_mhz, unit="MHz", decimals=2)
    report.provenance = ["lorentzian-ple-fit"]
    for w in fit.warnings:
        report.add_warning(w)
    code = EXIT_OK if fit.converged else EXIT_NUMERICAL
    if not fit.converged:
        report.add_warning("fit did not converge within the iteration budget; report is partial")

    if args.compare:
        other = read_scan_csv(args.compare)
        if args.window_ghz:
            other = other.windowed(*args.window_ghz)
        fit2 = fit_ple(other)
        report.inputs["compare_csv"] = str(args.compare)
        report.inputs["compare_sha256"] = file_sha256(args.compare)
        f2, s2 = fit2.derived["fwhm_mhz"]
        report.add_result("compare_fwhm_mhz", f2, s2, unit="MHz", decimals=2)
        report.add_result(
            "broadening_mhz",
            f2 - fwhm_mhz,
            math.hypot(sigma_fwhm_mhz, s2),
            unit="MHz",
            decimals=2,
        )
        report.provenance.append("linewidth-difference")
        for w in fit2.warnings:
            report.add_warning(f"compare scan: {w}")
        if not fit2.converged:
            report.add_warning("compare-scan fit did not converge; report is partial")
            code = EXIT_NUMERICAL

    _emit(report, _resolve_out(args.out, "ple_report.json"), args.format)
    return code


# ------------------------------------------------------------- detuning-series


def cmd_detuning_series(args) -> int:
    deltas, unit, taus, sigma_taus = read_detuning_csv(args.points_csv)
    if unit == "delta_nm":
        lam = args.wavelength_nm * 1e-9
        delta_ghz = np.array(
            [detuning_from_wavelength_offset(d * 1e-9, lam) for d in deltas]
        ) / (TWO_PI * 1e9)
    else:
        delta_ghz = np.asarray(deltas, dtype=float)

    report = Report(command="detuning-series")
    report.inputs = {
        "points_csv": str(args.points_csv),
        "points_sha256": file_sha256(args.points_csv),
        "detuning_unit": unit,
        "wavelength_nm": args.wavelength_nm,
    }
    if args.kappa_mhz is not None:
        report.inputs["kappa_mhz"] = args.kappa_mhz
    exclude = None
    if args.exclude:
        exclude = sorted(int(tok) for tok in args.exclude.split(",") if tok.strip())
        report.inputs["excluded_points"] = exclude

    keep = np.ones(delta_ghz.size, dtype=bool)
    if exclude is not None:
        bad = [i for i in exclude if i < 0 or i >= delta_ghz.size]
        if bad:
            raise DataFormatError(f"exclusion indices {bad} out of range")
        keep[exclude] = False
    d_keep, tau_keep, sig_keep = delta_ghz[keep], taus[keep], sigma_taus[keep]
    if d_keep.size < 2:
        raise DataFormatError("need at least two points after exclusion")

    i_on = int(np.argmin(np.abs(d_keep)))
    i_off = int(np.argmax(np.abs(d_keep)))
    ratio, sigma_ratio = propagate_ratio(
        tau_keep[i_off], sig_keep[i_off], tau_keep[i_on], sig_keep[i_on]
    )
    report.add_result("tau_off_ns", tau_keep[i_off], sig_keep[i_off], unit="ns", decimals=2)
    report.add_result("tau_on_ns", tau_keep[i_on], sig_keep[i_on], unit="ns", decimals=2)
    report.add_result("lifetime_ratio", ratio, sigma_ratio, unit="", decimals=2)
    report.provenance = ["lifetime-ratio"]

    code = EXIT_OK
    if d_keep.size >= 6:
        delta_rad_ns = TWO_PI * d_keep
        kappa_rad_ns = TWO_PI * 1e-3 * args.kappa_mhz if args.kappa_mhz is not None else None
        points = np.column_stack([delta_rad_ns, tau_keep, sig_keep])
        fit = fit_detuning_series(points, kappa=kappa_rad_ns)
        _fit_param_results(
            report, fit, {"gamma": "1/ns", "amp": "1/ns", "width": "rad/ns"}
        )
        if "ratio" in fit.derived:
            fit_ratio, fit_sigma_ratio = fit.derived["ratio"]
            report.add_result(
                "fit_lifetime_ratio", fit_ratio, fit_sigma_ratio, unit="", decimals=2
            )
        width, sigma_width = fit.derived["width"]
        report.add_result(
            "width_mhz", 1e3 * width / TWO_PI, 1e3 * sigma_width / TWO_PI, unit="MHz", decimals=2
        )
        if "width_over_kappa" in fit.derived:
            w_over_k, s_over_k = fit.derived["width_over_kappa"]
            report.add_result("width_over_kappa", w_over_k, s_over_k, unit="", decimals=3)
        report.provenance += ["detuning-lorentzian-fit", "effective-decay-adiabatic"]
        for w in fit.warnings:
            report.add_warning(w)
        if not fit.converged:
            report.add_warning("lineshape fit did not converge; report is partial")
            code = EXIT_NUMERICAL
    else:
        report.add_warning(
            "too few points for the detuning lineshape fit (need 6); "
            "endpoint lifetime ratio only"
        )

    _emit(report, _resolve_out(args.out, "detuning_report.json"), args.format)
    return code


# --------------------------------------------------------------- cooperativity


def cmd_cooperativity(args) -> int:
    gamma = args.gamma_mhz
    if gamma <= 0:
        _err("linewidths must be positive")
        return EXIT_INPUT
    if args.ratio < 1.0:
        _err("lifetime ratio below 1 is outside this model")
        return EXIT_INPUT

    report = Report(command="cooperativity")
    report.inputs = {
        "gamma_mhz": gamma,
        "sigma_gamma_mhz": args.sigma_gamma_mhz,
        "ratio": args.ratio,
        "sigma_ratio": args.sigma_ratio,
    }
    cmax, sigma_cmax = args.ratio - 1.0, args.sigma_ratio
    report.add_result("c_max", cmax, sigma_cmax, unit="", decimals=2)
    report.provenance = ["lifetime-ratio-excess"]

    if args.gamma_tot_mhz is not None:
        gamma_tot = args.gamma_tot_mhz
        if gamma_tot <= 0:
            _err("linewidths must be positive")
            return EXIT_INPUT
        if gamma_tot < gamma:
            _err(
                f"total linewidth {gamma_tot} MHz is below the lifetime limit {gamma} MHz; "
                "the fraction gamma/gamma_tot would exceed one"
            )
            return EXIT_INPUT
        report.inputs["gamma_tot_mhz"] = gamma_tot
        report.inputs["sigma_tot_mhz"] = args.sigma_tot_mhz
        rho, sigma_rho = propagate_ratio(
            gamma, args.sigma_gamma_mhz, gamma_tot, args.sigma_tot_mhz
        )
        coop, sigma_coop = propagate_product(rho, sigma_rho, cmax, sigma_cmax)
        report.add_result("linewidth_fraction", rho, sigma_rho, unit="", decimals=3)
        report.add_result("cooperativity", coop, sigma_coop, unit="", decimals=2)
        report.provenance.append("linewidth-fraction-cooperativity")

    if args.gamma_tot_projected_mhz is not None:
        proj = args.gamma_tot_projected_mhz
        sigma_proj = args.sigma_tot_projected_mhz
        if proj < gamma:
            _err("projected total linewidth is below the lifetime limit")
            return EXIT_INPUT
        report.inputs["gamma_tot_projected_mhz"] = proj
        report.inputs["sigma_tot_projected_mhz"] = sigma_proj
        rho_p, sigma_rho_p = propagate_ratio(gamma, args.sigma_gamma_mhz, proj, sigma_proj)
        coop_p, sigma_coop_p = propagate_product(rho_p, sigma_rho_p, cmax, sigma_cmax)
        report.add_result("projected_linewidth_fraction", rho_p, sigma_rho_p, unit="", decimals=3)
        report.add_result("projected_cooperativity", coop_p, sigma_coop_p, unit="", decimals=2)

    _emit(report, _resolve_out(args.out, "cooperativity_report.json"), args.format)
    return EXIT_OK


# --------------------------------------------------------------------- purcell


def cmd_purcell(args) -> int:
    measurement = [args.ratio, args.eta, args.dw, args.xi]
    model = [args.fp, args.overlap, args.q, args.detuning_ghz]
    measurement_given = any(v is not None for v in measurement)
    model_given = any(v is not None for v in model)
    if measurement_given and model_given:
        _err(
            "mixed input modes: give either measurement flags "
            "(--ratio --eta --dw --xi) or model flags (--fp --overlap --q --detuning-ghz)"
        )
        return EXIT_INPUT
    if not measurement_given and not model_given:
        _err("no inputs: choose the measurement mode or the model mode")
        return EXIT_INPUT

    report = Report(command="purcell")
    if measurement_given:
        if any(v is None for v in measurement):
            _err("measurement mode needs all of --ratio --eta --dw --xi")
            return EXIT_INPUT
        if args.ratio < 1.0:
            _err("lifetime ratio below 1 is outside this model")
            return EXIT_INPUT
        branching = branching_fraction(args.eta, args.dw, args.xi)
        if branching.value <= 0:
            _err("branching fraction is zero; the bound 1 + (ratio-1)/branching diverges")
            return EXIT_INPUT
        f_min = purcell_from_ratio(args.ratio, branching)
        report.inputs = {
            "ratio": args.ratio,
            "sigma_ratio": args.sigma_ratio,
            "eta": args.eta,
            "dw": args.dw,
            "xi": args.xi,
        }
        report.add_result("branching_fraction", branching.value, None, unit="", decimals=5)
        sigma_f = None if args.sigma_ratio is None else args.sigma_ratio / branching.value
        report.add_result("f_min", f_min, sigma_f, unit="", decimals=1)
        report.provenance = ["branching-fraction", "purcell-from-lifetime-ratio"]
    else:
        if any(v is None for v in (args.fp, args.overlap, args.q)):
            _err("model mode needs --fp --overlap --q (and optionally --detuning-ghz)")
            return EXIT_INPUT
        detuning_ghz = args.detuning_ghz if args.detuning_ghz is not None else 0.0
        if args.q <= 0:
            _err("--q must be positive")
            return EXIT_INPUT
        if not -1.0 <= args.overlap <= 1.0:
            _err("--overlap must lie in [-1, 1]")
            return EXIT_INPUT
        if not 0.0 < args.open_fraction <= 1.0:
            _err("--open-fraction must lie in (0, 1]")
            return EXIT_INPUT
        from .constants import C
        from .model import cavity_lorentzian

        omega_c = TWO_PI * C / (args.wavelength_nm * 1e-9)
        kappa = omega_c / args.q
        delta = TWO_PI * 1e9 * detuning_ghz
        f = args.open_fraction + args.fp * args.overlap**2 * cavity_lorentzian(delta, kappa)
        report.inputs = {
            "fp": args.fp,
            "overlap": args.overlap,
            "q": args.q,
            "detuning_ghz": detuning_ghz,
            "wavelength_nm": args.wavelength_nm,
            "open_fraction": args.open_fraction,
        }
        report.add_result("kappa_mhz", rad_per_s_to_mhz(kappa), None, unit="MHz", decimals=2)
        report.add_result("purcell_enhancement", f, None, unit="", decimals=2)
        report.provenance = ["purcell-enhancement-detuning"]
        report.extra["formula_notes"] = dict(FORMULA_NOTES)

    _emit(report, _resolve_out(args.out, "purcell_report.json"), args.format)
    return EXIT_OK


# -------------------------------------------------------------------- simulate


_SIMULATE_REQUIRED = {"gamma_mhz", "kappa_mhz", "g_mhz"}
_SIMULATE_OPTIONAL = {
    "delta_mhz",
    "gamma_d_mhz",
    "t_end_ns",
    "n_points",
    "delta_sweep_mhz",
    "rk4_check",
}


def cmd_simulate(args) -> int:
    cfg = parse_key_value(args.config)
    require_keys(cfg, _SIMULATE_REQUIRED, _SIMULATE_OPTIONAL, "simulate config")

    to_rad = lambda mhz: TWO_PI * 1e6 * mhz
    gamma = to_rad(parse_float(cfg, "gamma_mhz"))
    kappa = to_rad(parse_float(cfg, "kappa_mhz"))
    g = to_rad(parse_float(cfg, "g_mhz"))
    delta = to_rad(parse_float(cfg, "delta_mhz", 0.0))
    gamma_d = to_rad(parse_float(cfg, "gamma_d_mhz", 0.0))
    if kappa <= 0:
        raise DataFormatError("kappa_mhz must be positive")
    system = CoupledSystem.from_rates(gamma=gamma, kappa=kappa, g=g, delta=delta, gamma_d=gamma_d)
    dissipators = DissipatorSpec.from_system(system)

    n_points = parse_int(cfg, "n_points", 2001)
    if "t_end_ns" in cfg:
        t_end = 1e-9 * parse_float(cfg, "t_end_ns")
    else:
        rate = effective_decay_rate(system)
        if rate <= 0:
            raise DataFormatError("system does not decay; set t_end_ns explicitly")
        t_end = 8.0 / rate
    rk4_check = cfg.get("rk4_check", "true").strip().lower()
    if rk4_check not in ("true", "false"):
        raise DataFormatError("rk4_check must be true or false")
    rk4_check = rk4_check == "true"

    outdir = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "."))
    outdir.mkdir(parents=True, exist_ok=True)

    report = Report(command="simulate")
    report.inputs = {
        "config": str(args.config),
        "config_sha256": file_sha256(args.config),
        "gamma_mhz": parse_float(cfg, "gamma_mhz"),
        "kappa_mhz": parse_float(cfg, "kappa_mhz"),
        "g_mhz": parse_float(cfg, "g_mhz"),
        "delta_mhz": parse_float(cfg, "delta_mhz", 0.0),
        "gamma_d_mhz": parse_float(cfg, "gamma_d_mhz", 0.0),
        "t_end_ns": t_end * 1e9,
        "n_points": n_points,
        "rk4_check": rk4_check,
    }
    report.provenance = ["lindblad-master-equation", "effective-decay-adiabatic"]
    report.extra["formula_notes"] = dict(FORMULA_NOTES)
    code = EXIT_OK
    try:
        trajectory = evolve_master_equation(
            system, dissipators, TruncatedState.excited(3), (t_end, n_points)
        )
        traj_path = outdir / "trajectory.csv"
        trajectory.write_csv(traj_path)
        report.extra["trajectory_csv"] = str(traj_path)

        est = extract_decay_rate(trajectory)
        closed = effective_decay_rate(system)
        report.add_result(
            "closed_rate_mhz", rad_per_s_to_mhz(closed), None, unit="MHz", decimals=3
        )
        report.add_result(
            "oracle_rate_mhz",
            rad_per_s_to_mhz(est.rate),
            rad_per_s_to_mhz(est.sigma),
            unit="MHz",
            decimals=3,
        )
        if est.non_exponential:
            report.add_warning(
                "trajectory decay is not single-exponential over the fit window "
                f"(log residual RMS {est.residual_rms:.2e})"
            )
        if not system.bad_cavity_check():
            report.add_warning(
                "system is outside the bad-cavity regime (kappa < 10*g or kappa < 10*gamma); "
                "the closed-form rate is not expected to be accurate"
            )
        if gamma_d > 0:
            report.add_warning(
                "pure dephasing is included in the trajectory but excluded from the "
                "adiabatic-elimination comparison (the closed form does not model it)"
            )

        if "delta_sweep_mhz" in cfg:
            sweep = np.array([to_rad(v) for v in parse_float_list(cfg, "delta_sweep_mhz")])
        else:
            sweep = kappa * np.array([-2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0])
        compare_diss = DissipatorSpec(
            ((system.emitter.gamma, "emitter-decay"), (system.kappa, "cavity-loss"))
        )
        comparison = validate_adiabatic_elimination(
            system, sweep, dissipators=compare_diss, rk4_check=rk4_check
        )
        for w in comparison.warnings:
            report.add_warning(w)
        report.add_result(
            "max_relative_error", comparison.max_relative_error, None, unit="", decimals=4
        )
        if comparison.rk4_error_ratio is not None:
            report.add_result(
                "rk4_error_ratio", comparison.rk4_error_ratio, None, unit="", decimals=2
            )
        report.extra["detuning_table"] = [
            {
                "delta_mhz": rad_per_s_to_mhz(row[0]),
                "closed_mhz": rad_per_s_to_mhz(row[1]),
                "oracle_mhz": rad_per_s_to_mhz(row[2]),
                "relative_error": row[3],
            }
            for row in comparison.rows
        ]
        report.extra["comparison"] = {
            "regime_ok": comparison.regime_ok,
            "tolerance": comparison.tolerance,
            "asserted": comparison.asserted,
        }
    except (ValidationError, IntegrationError) as exc:
        report.add_warning(f"numerical failure: {exc}")
        code = EXIT_NUMERICAL

    _emit(report, outdir / "simulate_report.json", args.format)
    return code


# ----------------------------------------------------------------------- synth


_SYNTH_LIFETIME_REQUIRED = {
    "kind", "a", "mu_ns", "gamma_per_ns", "b",
    "axis_start_ns", "axis_stop_ns", "n_bins", "seed",
}
_SYNTH_LIFETIME_OPTIONAL = {"sigma_irf_ns", "noise", "noise_sigma", "total_events", "peak_counts"}
_SYNTH_PLE_REQUIRED = {
    "kind", "amp", "nu0_ghz", "fwhm_ghz", "b",
    "axis_start_ghz", "axis_stop_ghz", "n_points", "seed",
}
_SYNTH_PLE_OPTIONAL = {
    "n_scans", "jitter_mhz", "noise", "noise_sigma", "total_events", "peak_counts",
}
_SYNTH_DETUNING_REQUIRED = {"kind", "gamma_mhz", "kappa_mhz", "g_mhz", "deltas_mhz"}
_SYNTH_DETUNING_OPTIONAL = {"n_transitions", "splitting_mhz", "relative_sigma"}


def _synth_scale_kwargs(cfg: dict) -> dict:
    kwargs = {}
    if "total_events" in cfg:
        kwargs["total_events"] = parse_float(cfg, "total_events")
    if "peak_counts" in cfg:
        kwargs["peak_counts"] = parse_float(cfg, "peak_counts")
    return kwargs


def cmd_synth(args) -> int:
    cfg = parse_key_value(args.spec)
    kind = cfg.get("kind")
    if kind not in ("lifetime", "ple", "detuning"):
        raise DataFormatError("spec must set kind = lifetime | ple | detuning")

    out = _resolve_out(args.out, f"synth_{kind}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    sidecar = {
        "schema_version": 1,
        "kind": kind,
        "spec_sha256": file_sha256(args.spec),
    }

    if kind == "lifetime":
        require_keys(cfg, _SYNTH_LIFETIME_REQUIRED, _SYNTH_LIFETIME_OPTIONAL, "synth spec")
        spec = SynthSpec(
            truth={
                "a": parse_float(cfg, "a"),
                "mu_ns": parse_float(cfg, "mu_ns"),
                "sigma_irf_ns": parse_float(cfg, "sigma_irf_ns", DEFAULT_SIGMA_IRF_NS),
                "gamma_per_ns": parse_float(cfg, "gamma_per_ns"),
                "b": parse_float(cfg, "b"),
            },
            axis=(
                parse_float(cfg, "axis_start_ns"),
                parse_float(cfg, "axis_stop_ns"),
                parse_int(cfg, "n_bins"),
            ),
            seed=parse_int(cfg, "seed"),
            noise=cfg.get("noise", "poisson"),
            noise_sigma=parse_float(cfg, "noise_sigma") if "noise_sigma" in cfg else None,
            **_synth_scale_kwargs(cfg),
        )
        hist = synth_lifetime_histogram(spec)
        write_histogram_csv(out, hist)
        sidecar["generator"] = hist.meta["generator"]
        sidecar["seed"] = spec.seed
        for w in hist.meta["warnings"]:
            print(f"warning: {w}")
    elif kind == "ple":
        require_keys(cfg, _SYNTH_PLE_REQUIRED, _SYNTH_PLE_OPTIONAL, "synth spec")
        spec = SynthSpec(
            truth={
                "amp": parse_float(cfg, "amp"),
                "nu0_ghz": parse_float(cfg, "nu0_ghz"),
                "fwhm_ghz": parse_float(cfg, "fwhm_ghz"),
                "b": parse_float(cfg, "b"),
            },
            axis=(
                parse_float(cfg, "axis_start_ghz"),
                parse_float(cfg, "axis_stop_ghz"),
                parse_int(cfg, "n_points"),
            ),
            seed=parse_int(cfg, "seed"),
            noise=cfg.get("noise", "poisson"),
            noise_sigma=parse_float(cfg, "noise_sigma") if "noise_sigma" in cfg else None,
            jitter_mhz=parse_float(cfg, "jitter_mhz", 0.0),
            **_synth_scale_kwargs(cfg),
        )
        _, integrated = synth_ple_scan(spec, parse_int(cfg, "n_scans", 1))
        write_scan_csv(out, integrated)
        sidecar["generator"] = integrated.meta["generator"]
        sidecar["seed"] = spec.seed
        sidecar["n_scans"] = integrated.meta["n_scans"]
    else:
        require_keys(cfg, _SYNTH_DETUNING_REQUIRED, _SYNTH_DETUNING_OPTIONAL, "synth spec")
        to_rad = lambda mhz: TWO_PI * 1e6 * mhz
        system = CoupledSystem.from_rates(
            gamma=to_rad(parse_float(cfg, "gamma_mhz")),
            kappa=to_rad(parse_float(cfg, "kappa_mhz")),
            g=to_rad(parse_float(cfg, "g_mhz")),
        )
        rows = synth_detuning_series(
            system,
            parse_int(cfg, "n_transitions", 1),
            to_rad(parse_float(cfg, "splitting_mhz", 0.0)),
            [to_rad(v) for v in parse_float_list(cfg, "deltas_mhz")],
            relative_sigma=parse_float(cfg, "relative_sigma", 0.05),
        )
        write_detuning_csv(
            out,
            rows[:, 0] / (TWO_PI * 1e9),
            "delta_ghz",
            rows[:, 1] * 1e9,
            rows[:, 2] * 1e9,
            meta={"kind": "detuning", "n_transitions": parse_int(cfg, "n_transitions", 1)},
        )

    meta_path = Path(str(out) + ".meta.json")
    meta_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"data written to {out}")
    print(f"metadata written to {meta_path}")
    return EXIT_OK


# ---------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavqed",
        description=(
            "Cavity QED lifetime analysis: fits, closed-form Purcell and "
            "cooperativity arithmetic, a master-equation oracle, and synthetic data."
        ),
    )
    parser.add_argument("--version", action="version", version=f"cavqed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help="output path (default: $CAVQED_OUTDIR or cwd)")
        p.add_argument("--format", choices=("json", "csv"), default="json",
                       help="report format (default json)")

    p = sub.add_parser("fit-lifetime", help="fit lifetime histograms with the exGaussian model")
    p.add_argument("histogram_csv", nargs="+", help="CSV with t_ns,counts columns")
    p.add_argument("--sigma-irf-ns", type=float, default=DEFAULT_SIGMA_IRF_NS,
                   help="fixed instrument-response sigma in ns (default 0.228)")
    p.add_argument("--jobs", type=int, default=1, help="worker pool size for multiple inputs")
    add_common(p)
    p.set_defaults(func=cmd_fit_lifetime)

    p = sub.add_parser("fit-ple", help="fit a PLE scan with a Lorentzian")
    p.add_argument("scan_csv", help="CSV with freq_ghz,counts columns")
    p.add_argument("--window-ghz", nargs=2, type=float, metavar=("LO", "HI"),
                   help="restrict the fit to one peak")
    p.add_argument("--compare", help="second scan; report emits the width difference")
    add_common(p)
    p.set_defaults(func=cmd_fit_ple)

    p = sub.add_parser("detuning-series", help="lifetime-vs-detuning analysis")
    p.add_argument("points_csv", help="CSV with (delta_nm|delta_ghz),tau_ns,sigma_tau_ns")
    p.add_argument("--kappa-mhz", type=float, help="cavity linewidth for the width comparison")
    p.add_argument("--wavelength-nm", type=float, default=737.0,
                   help="carrier wavelength for delta_nm conversion (default 737)")
    p.add_argument("--exclude", help="comma-separated point indices to exclude from the fit")
    add_common(p)
    p.set_defaults(func=cmd_detuning_series)

    p = sub.add_parser("cooperativity", help="cooperativity from linewidths and lifetime ratio")
    p.add_argument("--gamma-mhz", type=float, required=True,
                   help="lifetime-limited linewidth gamma/2pi")
    p.add_argument("--sigma-gamma-mhz", type=float, default=0.0)
    p.add_argument("--gamma-tot-mhz", type=float,
                   help="total linewidth; omit to report C_max only")
    p.add_argument("--sigma-tot-mhz", type=float, default=0.0)
    p.add_argument("--ratio", type=float, required=True, help="off/on lifetime ratio")
    p.add_argument("--sigma-ratio", type=float, default=0.0)
    p.add_argument("--gamma-tot-projected-mhz", type=float,
                   help="recompute C for a projected (e.g. low-temperature) total linewidth")
    p.add_argument("--sigma-tot-projected-mhz", type=float, default=0.0)
    add_common(p)
    p.set_defaults(func=cmd_cooperativity)

    p = sub.add_parser("purcell", help="Purcell enhancement, from measurement or model")
    p.add_argument("--ratio", type=float, help="measurement mode: off/on lifetime ratio")
    p.add_argument("--sigma-ratio", type=float)
    p.add_argument("--eta", type=float, help="quantum efficiency")
    p.add_argument("--dw", type=float, help="Debye-Waller factor")
    p.add_argument("--xi", type=float, help="ZPL branching ratio")
    p.add_argument("--fp", type=float, help="model mode: ideal Purcell factor")
    p.add_argument("--overlap", type=float)
    p.add_argument("--q", type=float, help="cavity quality factor")
    p.add_argument("--detuning-ghz", type=float)
    p.add_argument("--wavelength-nm", type=float, default=737.0)
    p.add_argument("--open-fraction", type=float, default=1.0)
    add_common(p)
    p.set_defaults(func=cmd_purcell)

    p = sub.add_parser("simulate", help="master-equation oracle and closed-form comparison")
    p.add_argument("--config", required=True, help="key = value file, rates in *_mhz keys")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate synthetic data from a spec file")
    p.add_argument("--spec", required=True, help="key = value spec, kind = lifetime|ple|detuning")
    add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except FitError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except (ValidationError, IntegrationError) as exc:
        _err(str(exc))
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
