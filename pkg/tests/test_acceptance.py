"""Release gate: the ten contract criteria, one test per criterion.

Run with `python3 -m pytest tests/test_acceptance.py -v -rA` to get one
printed pass/fail line per criterion (the PASS lines carry the measured
margins). Three additional strict-xfail tests encode literal readings of
the source tables that the tables themselves cannot satisfy; the defect
arithmetic is frozen in tests/_tables.py and explained there.

Criteria and budgets:
  1  lifetime-table regression (reciprocal propagation)        < 1 s
  2  ratio-table regression                                    < 1 s
  3  cooperativity-table regression through the CLI            < 1 s
  4  headline derived quantities (closed forms)                < 1 s
  5  adiabatic-elimination oracle equivalence (>= 20 sets)     < 60 s
  6  master-equation invariants on every criterion-5 run
  7  exGaussian stable form vs direct convolution              < 5 s
  8  fit-recovery Monte Carlo, 100 + 100 seeded trials         < 5 min
  9  two-transition broadening property                        < 10 s
  10 byte/bitwise determinism of synth, fits, and reports
"""

import hashlib
import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from _tables import (
    COOPERATIVITY_P1,
    COOPERATIVITY_P2,
    DEFECT_ROWS,
    EXACT_DEFECT_VALUES,
    LIFETIME_TABLE,
    RATIO_TABLE_PRINTED,
    RATIO_TABLE_RATE_CHAIN,
)
from cavqed.cli import EXIT_OK, main
from cavqed.constants import HBAR, TWO_PI
from cavqed.fitting import fit_detuning_series, fit_lifetime, fit_ple
from cavqed.lindblad import (
    DissipatorSpec,
    TruncatedState,
    _rk4_error_ratio,
    build_hamiltonian,
    evolve_master_equation,
    liouvillian,
    validate_adiabatic_elimination,
)
from cavqed.lineshapes import exgaussian_area, exgaussian_eval
from cavqed.model import (
    CoupledSystem,
    branching_fraction,
    cooperativity_from_measurements,
    purcell_from_ratio,
)
from cavqed.propagation import (
    linewidth_from_lifetime,
    propagate_ratio,
    propagate_reciprocal,
)
from cavqed.synth import (
    SynthSpec,
    synth_detuning_series,
    synth_lifetime_histogram,
    synth_ple_scan,
)


def _pass(n, detail):
    print(f"criterion {n}: PASS ({detail})")


# --------------------------------------------------- 1: lifetime-table rows


def test_criterion_01_lifetime_table_regression():
    t0 = time.perf_counter()
    mismatched = set()
    for series, index, rate, sigma_rate, tau, sigma_tau in LIFETIME_TABLE:
        got_tau, got_sigma = propagate_reciprocal(rate, sigma_rate)
        # every row must land within one final printed digit
        assert abs(got_tau - tau) < 0.011, (series, index)
        assert abs(got_sigma - sigma_tau) < 0.011, (series, index)
        if (f"{got_tau:.2f}", f"{got_sigma:.2f}") != (f"{tau:.2f}", f"{sigma_tau:.2f}"):
            mismatched.add((series, index))
    # the two known source-table defects, and only those
    assert mismatched == DEFECT_ROWS
    for key, (exact_tau, exact_sigma) in EXACT_DEFECT_VALUES.items():
        row = next(r for r in LIFETIME_TABLE if (r[0], r[1]) == key)
        got_tau, got_sigma = propagate_reciprocal(row[2], row[3])
        assert got_tau == pytest.approx(exact_tau, rel=1e-12)
        assert got_sigma == pytest.approx(exact_sigma, rel=1e-12)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _pass(1, f"21/23 rows exact at printed precision, all 23 within one "
             f"printed ULP, defect arithmetic frozen; {elapsed:.3f} s")


@pytest.mark.xfail(
    strict=True,
    reason="literal reading: all 23 rows exact at printed precision. The "
    "source table is internally inconsistent for P-1 rows 9 and 14 "
    "(0.011/0.661^2 = 0.02518 prints 0.03, table says 0.02; 1/0.517 = "
    "1.93424 prints 1.93, table says 1.94): it was generated from "
    "unrounded fit outputs, so printed inputs cannot reproduce it.",
)
def test_criterion_01_literal_all_rows():
    for series, index, rate, sigma_rate, tau, sigma_tau in LIFETIME_TABLE:
        got_tau, got_sigma = propagate_reciprocal(rate, sigma_rate)
        assert (f"{got_tau:.2f}", f"{got_sigma:.2f}") == (
            f"{tau:.2f}",
            f"{sigma_tau:.2f}",
        ), (series, index)


# ------------------------------------------------------ 2: ratio-table rows


def test_criterion_02_ratio_table_regression():
    t0 = time.perf_counter()
    # the unrounded rate chain reproduces the printed table exactly
    for (r_off, s_off, r_on, s_on), (want_r, want_s) in RATIO_TABLE_RATE_CHAIN:
        tau_off = propagate_reciprocal(r_off, s_off)
        tau_on = propagate_reciprocal(r_on, s_on)
        ratio, sigma = propagate_ratio(*tau_off, *tau_on)
        assert (f"{ratio:.2f}", f"{sigma:.2f}") == (f"{want_r:.2f}", f"{want_s:.2f}")
    # the rounded printed lifetimes land within one final printed digit
    for (tau_off, s_off, tau_on, s_on), (want_r, want_s) in RATIO_TABLE_PRINTED:
        ratio, sigma = propagate_ratio(tau_off, s_off, tau_on, s_on)
        assert abs(ratio - want_r) <= 0.021
        assert abs(sigma - want_s) <= 0.011
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _pass(2, f"rate-chain reproduction exact at printed precision, "
             f"printed-lifetime inputs within one printed ULP; {elapsed:.3f} s")


@pytest.mark.xfail(
    strict=True,
    reason="literal reading: printed lifetimes (1.94, 0.06, 1.13, 0.01) give "
    "1.7168 +- 0.0552 which prints 1.72 +- 0.06, not the table's 0.05; "
    "(1.48, 0.05, 0.50, 0.01) give 2.96 +- 0.12, not 2.98 +- 0.11. The "
    "table was computed from unrounded rates (see the rate-chain test).",
)
def test_criterion_02_literal_printed_inputs():
    for (tau_off, s_off, tau_on, s_on), (want_r, want_s) in RATIO_TABLE_PRINTED:
        ratio, sigma = propagate_ratio(tau_off, s_off, tau_on, s_on)
        assert (f"{ratio:.2f}", f"{sigma:.2f}") == (f"{want_r:.2f}", f"{want_s:.2f}")


# --------------------------------------- 3: cooperativity table via the CLI


def _run_cooperativity_p1(tmp_path, capsys):
    out = tmp_path / "p1.json"
    code = main(
        ["cooperativity",
         "--gamma-mhz", str(COOPERATIVITY_P1["gamma_mhz"]),
         "--sigma-gamma-mhz", str(COOPERATIVITY_P1["sigma_gamma_mhz"]),
         "--gamma-tot-mhz", str(COOPERATIVITY_P1["gamma_tot_mhz"]),
         "--sigma-tot-mhz", str(COOPERATIVITY_P1["sigma_tot_mhz"]),
         "--ratio", str(COOPERATIVITY_P1["ratio"]),
         "--sigma-ratio", str(COOPERATIVITY_P1["sigma_ratio"]),
         "--out", str(out)]
    )
    capsys.readouterr()
    assert code == EXIT_OK
    return json.loads(out.read_text())["results"]


def test_criterion_03_cooperativity_table(tmp_path, capsys):
    t0 = time.perf_counter()
    results = _run_cooperativity_p1(tmp_path, capsys)
    printed = COOPERATIVITY_P1["printed"]
    assert results["c_max"]["display"] == "0.72 ± 0.05"
    assert results["cooperativity"]["display"] == "0.10 ± 0.01"
    # two-decimal comparison for the fraction; its sigma is exact at the
    # table's three decimals (the 0.140 third digit is the known slip,
    # see the literal test below)
    rho = results["linewidth_fraction"]["value"]
    sigma_rho = results["linewidth_fraction"]["sigma"]
    assert f"{rho:.2f}" == f"{printed['fraction'][0]:.2f}"
    assert f"{sigma_rho:.3f}" == f"{printed['fraction'][1]:.3f}"

    out2 = tmp_path / "p2.json"
    code = main(
        ["cooperativity",
         "--gamma-mhz", str(COOPERATIVITY_P2["gamma_mhz"]),
         "--sigma-gamma-mhz", str(COOPERATIVITY_P2["sigma_gamma_mhz"]),
         "--ratio", str(COOPERATIVITY_P2["ratio"]),
         "--sigma-ratio", str(COOPERATIVITY_P2["sigma_ratio"]),
         "--out", str(out2)]
    )
    capsys.readouterr()
    assert code == EXIT_OK
    results2 = json.loads(out2.read_text())["results"]
    assert results2["c_max"]["display"] == "1.98 ± 0.10"
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _pass(3, f"c_max, C, and fraction reproduced at printed precision "
             f"through the CLI; {elapsed:.3f} s")


@pytest.mark.xfail(
    strict=True,
    reason="literal reading: the summary table prints gamma/gamma_tot = 0.140, "
    "but its own inputs give 82.22/578.81 = 0.14205 which prints 0.142 at "
    "three decimals (0.140 matches the narrative's rounded 588 MHz total "
    "linewidth instead).",
)
def test_criterion_03_literal_fraction_three_decimals(tmp_path, capsys):
    results = _run_cooperativity_p1(tmp_path, capsys)
    assert results["linewidth_fraction"]["display"] == "0.140 ± 0.009"


# ----------------------------------------- 4: headline derived closed forms


def test_criterion_04_headline_quantities():
    t0 = time.perf_counter()
    branching = branching_fraction(0.3, 0.7, 0.325)
    assert branching.value == 0.06825

    # Purcell bounds from the narrative lifetime ratios
    f_min_1 = purcell_from_ratio(1.7, branching)
    f_min_2 = purcell_from_ratio(3.0, branching)
    assert f_min_1 == pytest.approx(11.256410256410255, rel=1e-14)
    assert f_min_2 == pytest.approx(30.304029304029303, rel=1e-14)
    assert abs(f_min_1 - 11.0) <= 0.5
    assert abs(f_min_2 - 30.0) <= 0.5
    # the summary-table ratio 1.72 gives the operational example value
    assert purcell_from_ratio(1.72, branching) == pytest.approx(
        11.549450549450547, rel=1e-14
    )

    # second-emitter cooperativity: lifetime limit 107.42 MHz plus the
    # 506 MHz non-radiative balance of the total linewidth
    c_p2 = cooperativity_from_measurements(107.42, 107.42 + 506.0, 2.98)
    assert c_p2 == pytest.approx(0.34673078804082036, rel=1e-14)
    assert abs(c_p2 - 0.35) <= 0.02

    # low-temperature projections: both totals reduced by the same
    # 168 MHz thermal excess (588 - 420 from the narrative)
    c_p1_cold = cooperativity_from_measurements(82.22, 420.0, 1.72)
    c_p2_cold = cooperativity_from_measurements(107.42, 613.42 - 168.0, 2.98)
    assert c_p1_cold == pytest.approx(0.14094857142857142, rel=1e-14)
    assert c_p2_cold == pytest.approx(0.47750797000583717, rel=1e-13)
    assert abs(c_p1_cold - 0.14) <= 0.01
    assert abs(c_p2_cold - 0.45) <= 0.05

    # linewidth broadening between the on- and off-resonance lifetimes
    on, _ = linewidth_from_lifetime(1.13, 0.01)
    off, _ = linewidth_from_lifetime(1.94, 0.06)
    broadening = on - off
    assert 58.5 <= broadening <= 60.5

    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _pass(4, f"F_min {f_min_1:.3f}/{f_min_2:.3f}, C {c_p2:.4f}, cold "
             f"projections {c_p1_cold:.4f}/{c_p2_cold:.4f}, broadening "
             f"{broadening:.2f} MHz; {elapsed:.3f} s")


# ------------------------------- 5 + 6: oracle equivalence and invariants


PAIRS_50 = [(2.0, 1.0), (5.0, 2.0), (1.0, 0.5), (3.0, 3.0), (4.0, 1.0)]
PAIRS_10 = [(2.0, 1.0), (3.0, 3.0)]
DELTA_FRACS = np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])

_GRID_CACHE = {}


def _oracle_grid():
    """Sweep (g, gamma, kappa, delta) once; criteria 5 and 6 both read it."""
    if _GRID_CACHE:
        return _GRID_CACHE
    t0 = time.perf_counter()
    worst = {50.0: 0.0, 10.0: 0.0}
    n_sets_50 = 0
    trace_drifts, herm_drifts, rk4_ratios = [], [], []
    for mult, pairs in ((50.0, PAIRS_50), (10.0, PAIRS_10)):
        for g, gamma in pairs:
            kappa = mult * max(g, gamma)
            system = CoupledSystem.from_rates(gamma=gamma, kappa=kappa, g=g)
            deltas = kappa * DELTA_FRACS
            comp = validate_adiabatic_elimination(system, deltas)
            assert comp.asserted and comp.regime_ok
            worst[mult] = max(worst[mult], comp.max_relative_error)
            if mult == 50.0:
                n_sets_50 += deltas.size

            diss = DissipatorSpec(
                ((gamma, "emitter-decay"), (kappa, "cavity-loss"))
            )
            v0 = TruncatedState.excited(3).rho.reshape(-1)
            fastest = max(kappa, g, gamma)
            for delta in deltas:
                detuned = system.detuned(delta)
                traj = evolve_master_equation(
                    detuned, diss, TruncatedState.excited(3), keep_coherences=True
                )
                trace_drifts.append(float(np.max(np.abs(traj.trace - 1.0))))
                stack = traj.coherences
                herm_drifts.append(
                    float(np.max(np.abs(stack - np.conj(np.transpose(stack, (0, 2, 1))))))
                )
                m = liouvillian(build_hamiltonian(detuned, 3) / HBAR, diss.operators(3))
                rk4_ratios.append(_rk4_error_ratio(m, v0, fastest))
    _GRID_CACHE.update(
        n_sets_50=n_sets_50,
        worst=worst,
        trace_drifts=trace_drifts,
        herm_drifts=herm_drifts,
        rk4_ratios=rk4_ratios,
        n_runs=len(trace_drifts),
        elapsed=time.perf_counter() - t0,
    )
    return _GRID_CACHE


def test_criterion_05_adiabatic_elimination_equivalence():
    grid = _oracle_grid()
    assert grid["n_sets_50"] >= 20
    assert grid["worst"][50.0] <= 0.02
    assert grid["worst"][10.0] <= 0.10
    assert grid["elapsed"] < 60.0
    _pass(5, f"{grid['n_sets_50']} sets at kappa = 50x: worst "
             f"{grid['worst'][50.0]:.2%}; at 10x: {grid['worst'][10.0]:.2%}; "
             f"{grid['elapsed']:.1f} s")


def test_criterion_06_master_equation_invariants():
    grid = _oracle_grid()
    n_expected = len(DELTA_FRACS) * (len(PAIRS_50) + len(PAIRS_10))
    assert grid["n_runs"] == n_expected
    max_trace = max(grid["trace_drifts"])
    max_herm = max(grid["herm_drifts"])
    min_ratio = min(grid["rk4_ratios"])
    assert max_trace <= 1e-9
    assert max_herm <= 1e-12
    assert min_ratio >= 12.0
    _pass(6, f"every run of criterion 5 ({grid['n_runs']}): trace drift "
             f"<= {max_trace:.1e}, Hermiticity <= {max_herm:.1e}, "
             f"step-halving ratio >= {min_ratio:.1f}")


# ------------------------------------------- 7: exGaussian stable form


def test_criterion_07_exgaussian_against_convolution():
    t0 = time.perf_counter()
    a, mu, sigma, gamma = 1000.0, 2.0, 0.228, 0.5147

    def convolution(t):
        # defining integral: exponential decay from zero blurred by the
        # Gaussian response, with the amplitude convention of the closed form
        c = (t - mu) - sigma**2 * gamma
        integrand = lambda s: (
            a * sigma * math.sqrt(2.0 * math.pi) * math.exp(-gamma * s)
            * math.exp(-0.5 * ((t - mu - s) / sigma) ** 2)
            / (sigma * math.sqrt(2.0 * math.pi))
        )
        hi = max(c, 0.0) + 60.0 * sigma
        pts = [c] if 0.0 < c < hi else None
        val, _ = quad(integrand, 0.0, hi, epsabs=0.0, epsrel=1e-12,
                      limit=200, points=pts)
        return val

    ts = np.linspace(mu - 10.0 * sigma, mu + 10.0 / gamma, 200)
    closed = exgaussian_eval(ts, a, mu, sigma, gamma, 0.0)
    worst = 0.0
    for t, have in zip(ts, closed):
        want = convolution(t)
        worst = max(worst, abs(have - want) / abs(want))
    assert worst <= 1e-8

    area = exgaussian_area(a, sigma, gamma)
    quad_area, _ = quad(
        lambda t: exgaussian_eval(t, a, mu, sigma, gamma, 0.0),
        mu - 60.0 * sigma, mu + 200.0 / gamma, epsabs=0.0, epsrel=1e-10, limit=400,
    )
    assert abs(quad_area - area) / area <= 1e-6

    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _pass(7, f"200-point convolution agreement {worst:.1e}, area identity "
             f"{abs(quad_area - area) / area:.1e}; {elapsed:.2f} s")


# ------------------------------------------ 8: fit-recovery Monte Carlo


MC_LIFETIME_SEED = 79000
MC_PLE_SEED = 80000
MC_TAU_TRUTH = 1.0 / 0.5147
MC_FWHM_TRUTH_MHZ = 578.81


def _lifetime_trial(seed):
    spec = SynthSpec(
        truth={"a": 1200.0, "mu_ns": 2.0, "sigma_irf_ns": 0.228,
               "gamma_per_ns": 0.5147, "b": 2.0},
        axis=(0.0, 12.0, 64), seed=seed, noise="poisson", total_events=1e6,
    )
    fit = fit_lifetime(synth_lifetime_histogram(spec))
    return fit.derived["tau_ns"]


def _ple_trial(seed):
    spec = SynthSpec(
        truth={"amp": 800.0, "nu0_ghz": 0.0, "fwhm_ghz": 0.57881, "b": 30.0},
        axis=(-3.0, 3.0, 241), seed=seed, noise="poisson",
    )
    _, integrated = synth_ple_scan(spec, 1)
    return fit_ple(integrated).derived["fwhm_mhz"]


def _coverage(trials, truth):
    values = np.array([t[0] for t in trials])
    sigmas = np.array([t[1] for t in trials])
    n_within = int(np.sum(np.abs(values - truth) <= 2.0 * sigmas))
    return n_within, float(np.mean(sigmas)), float(np.std(values, ddof=1))


def test_criterion_08_fit_recovery_monte_carlo():
    t0 = time.perf_counter()
    lifetime = [_lifetime_trial(MC_LIFETIME_SEED + i) for i in range(100)]
    ple = [_ple_trial(MC_PLE_SEED + i) for i in range(100)]

    n_lt, mean_sigma_lt, scatter_lt = _coverage(lifetime, MC_TAU_TRUTH)
    n_pl, mean_sigma_pl, scatter_pl = _coverage(ple, MC_FWHM_TRUTH_MHZ)
    assert n_lt >= 95
    assert n_pl >= 95
    assert abs(mean_sigma_lt / scatter_lt - 1.0) <= 0.30
    assert abs(mean_sigma_pl / scatter_pl - 1.0) <= 0.30

    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    _pass(8, f"lifetime {n_lt}/100 within 2 sigma (sigma/scatter "
             f"{mean_sigma_lt / scatter_lt:.2f}), ple {n_pl}/100 "
             f"({mean_sigma_pl / scatter_pl:.2f}); {elapsed:.1f} s")


# -------------------------------------- 9: two-transition broadening


def test_criterion_09_two_transition_broadening():
    t0 = time.perf_counter()
    mhz = lambda v: TWO_PI * 1e6 * v
    kappa = mhz(24000.0)
    system = CoupledSystem.from_rates(gamma=mhz(88.0), kappa=kappa, g=mhz(2700.0))
    deltas = kappa * np.linspace(-2.0, 2.0, 13)
    rows = synth_detuning_series(system, 2, kappa, deltas)
    # fit layer works in ns and rad/ns
    points = np.column_stack([rows[:, 0] * 1e-9, rows[:, 1] * 1e9, rows[:, 2] * 1e9])
    fit = fit_detuning_series(points, kappa=kappa * 1e-9)
    width, _ = fit.derived["width"]
    assert width > kappa * 1e-9
    assert any("unresolved transitions" in w for w in fit.warnings)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    _pass(9, f"splitting = kappa gives fitted width {width / (kappa * 1e-9):.2f}x "
             f"kappa with the unresolved-transitions warning; {elapsed:.2f} s")


# -------------------------------------------------------- 10: determinism


def test_criterion_10_determinism(tmp_path, capsys):
    spec = tmp_path / "lt.spec"
    spec.write_text(
        "kind = lifetime\na = 1200\nmu_ns = 2.0\ngamma_per_ns = 0.5147\n"
        "b = 2.0\naxis_start_ns = 0\naxis_stop_ns = 12\nn_bins = 64\n"
        "seed = 42\nnoise = poisson\n"
    )
    csvs, reports = [], []
    for run in ("first", "second"):
        data = tmp_path / f"{run}.csv"
        report = tmp_path / f"{run}_report.json"
        assert main(["synth", "--spec", str(spec), "--out", str(data)]) == EXIT_OK
        assert main(["fit-lifetime", str(data), "--out", str(report)]) == EXIT_OK
        capsys.readouterr()
        csvs.append(data.read_bytes())
        # the report embeds the input path; normalize it before comparing
        doc = json.loads(report.read_text())
        doc["inputs"]["histogram_csv"] = "histogram.csv"
        reports.append(json.dumps(doc, sort_keys=True))
    assert csvs[0] == csvs[1]
    assert reports[0] == reports[1]

    # bitwise-identical fit outputs on identical input
    spec_obj = SynthSpec(
        truth={"a": 1200.0, "mu_ns": 2.0, "sigma_irf_ns": 0.228,
               "gamma_per_ns": 0.5147, "b": 2.0},
        axis=(0.0, 12.0, 64), seed=7, noise="poisson",
    )
    hist = synth_lifetime_histogram(spec_obj)
    first = fit_lifetime(hist)
    second = fit_lifetime(hist)
    assert first.param_vector().tobytes() == second.param_vector().tobytes()
    assert first.covariance.tobytes() == second.covariance.tobytes()
    assert first.n_iter == second.n_iter

    digest = hashlib.sha256(csvs[0]).hexdigest()
    _pass(10, f"synth bytes, report bytes, and fit bit patterns identical "
              f"across reruns (csv sha256 {digest[:12]})")
