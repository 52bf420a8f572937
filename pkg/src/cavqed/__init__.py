"""Cavity QED lifetime analysis toolkit.

Closed-form Purcell/cooperativity relations, a truncated Jaynes-Cummings
master-equation oracle, lineshape fitting with exact uncertainty
propagation, and deterministic synthetic-data generation.
"""

from ._version import __version__
from .constants import C, EPSILON_0, H, HBAR, TWO_PI
from .data import (
    DataFormatError,
    Histogram,
    Scan,
    parse_key_value,
    read_detuning_csv,
    read_histogram_csv,
    read_scan_csv,
    write_detuning_csv,
    write_histogram_csv,
    write_scan_csv,
)
from .fitting import (
    DEFAULT_SIGMA_IRF_NS,
    FitError,
    FitResult,
    fit_detuning_series,
    fit_lifetime,
    fit_ple,
    lm_minimize,
    poisson_weights,
)
from .lindblad import (
    AdiabaticComparison,
    DecayRateEstimate,
    DissipatorSpec,
    IntegrationError,
    Trajectory,
    TruncatedState,
    ValidationError,
    build_hamiltonian,
    effective_hamiltonian,
    evolve_effective,
    evolve_master_equation,
    extract_decay_rate,
    liouvillian,
    rk4_step_matrix,
    validate_adiabatic_elimination,
)
from .lineshapes import (
    exgaussian_area,
    exgaussian_eval,
    lorentzian_area,
    lorentzian_eval,
)
from .model import (
    BranchingFraction,
    CavityParams,
    CoupledSystem,
    EmitterParams,
    ModeVolume,
    UnitError,
    branching_fraction,
    cavity_lorentzian,
    cavity_rate_from_ratio,
    cooperativity_from_measurements,
    cooperativity_from_rates,
    coupling_rate,
    effective_decay_rate,
    lifetime_limited_linewidth,
    lifetime_ratio,
    purcell_enhancement,
    purcell_factor,
    purcell_from_ratio,
    wigner_weisskopf_rate,
)
from .propagation import (
    linewidth_from_lifetime,
    propagate_cooperativity,
    propagate_product,
    propagate_ratio,
    propagate_reciprocal,
)
from .report import Report, file_sha256, fmt17, make_result
from .synth import (
    SynthSpec,
    expected_lifetime_total,
    synth_detuning_series,
    synth_lifetime_histogram,
    synth_ple_scan,
)

__all__ = [
    "__version__",
    "C", "EPSILON_0", "H", "HBAR", "TWO_PI",
    "DataFormatError", "Histogram", "Scan",
    "parse_key_value",
    "read_detuning_csv", "read_histogram_csv", "read_scan_csv",
    "write_detuning_csv", "write_histogram_csv", "write_scan_csv",
    "DEFAULT_SIGMA_IRF_NS", "FitError", "FitResult",
    "fit_detuning_series", "fit_lifetime", "fit_ple",
    "lm_minimize", "poisson_weights",
    "AdiabaticComparison", "DecayRateEstimate", "DissipatorSpec",
    "IntegrationError", "Trajectory", "TruncatedState", "ValidationError",
    "build_hamiltonian", "effective_hamiltonian",
    "evolve_effective", "evolve_master_equation", "extract_decay_rate",
    "liouvillian", "rk4_step_matrix", "validate_adiabatic_elimination",
    "exgaussian_area", "exgaussian_eval", "lorentzian_area", "lorentzian_eval",
    "BranchingFraction", "CavityParams", "CoupledSystem", "EmitterParams",
    "ModeVolume", "UnitError",
    "branching_fraction", "cavity_lorentzian", "cavity_rate_from_ratio",
    "cooperativity_from_measurements", "cooperativity_from_rates",
    "coupling_rate", "effective_decay_rate", "lifetime_limited_linewidth",
    "lifetime_ratio", "purcell_enhancement", "purcell_factor",
    "purcell_from_ratio", "wigner_weisskopf_rate",
    "linewidth_from_lifetime", "propagate_cooperativity",
    "propagate_product", "propagate_ratio", "propagate_reciprocal",
    "Report", "file_sha256", "fmt17", "make_result",
    "SynthSpec", "expected_lifetime_total",
    "synth_detuning_series", "synth_lifetime_histogram", "synth_ple_scan",
]
