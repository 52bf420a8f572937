"""Closed-form cavity QED relations for a two-level emitter in a single-mode cavity.

All rates and detunings here are angular (rad/s). The module covers the
microscopic inputs (dipole coupling, spontaneous emission, Purcell factor),
the bad-cavity effective decay rate, and the measurement-side relations
that turn lifetime ratios and linewidths into Purcell enhancement and
cooperativity numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import C, EPSILON_0, HBAR, TWO_PI
from .units import wavelength_to_angular

#: default transition wavelength used when a system is built from rates only;
#: matches the SiV zero-phonon line this package is typically used with.
DEFAULT_WAVELENGTH_M = 737e-9

MODE_VOLUME_UNITS = ("m^3", "(lambda/n)^3")


class UnitError(ValueError):
    """Raised when a tagged quantity is used in an incompatible unit system."""


#: warnings attached to reports whenever the corresponding formula feeds a result.
FORMULA_NOTES = {
    "wigner-weisskopf-rate": (
        "spontaneous-emission rate evaluated with c^3 in the denominator; "
        "dimensional analysis of a rate requires c^3 although the formula is "
        "sometimes printed with c^2"
    ),
    "coupling-rate": (
        "coupling rate evaluated with the standard vacuum-field normalization "
        "g = (|mu|/n)*sqrt(omega/(2*eps0*hbar*V)); forms printed with 4*pi*eps0 "
        "break the identity 4g^2/(kappa*gamma_eg) = F_P*overlap^2 by 2*pi"
    ),
}


@dataclass(frozen=True)
class ModeVolume:
    """Cavity mode volume with an explicit unit tag.

    ``m^3`` is an absolute volume; ``(lambda/n)^3`` is normalized to the
    cubed in-medium wavelength of the mode it belongs to.
    """

    value: float
    unit: str = "m^3"

    def __post_init__(self):
        if self.unit not in MODE_VOLUME_UNITS:
            raise UnitError(
                f"unknown mode-volume unit {self.unit!r}; expected one of {MODE_VOLUME_UNITS}"
            )
        if self.value <= 0:
            raise ValueError("mode volume must be positive")

    def in_m3(self, wavelength_m: float, refractive_index: float) -> float:
        """Resolve to an absolute volume against a metre wavelength."""
        if self.unit == "m^3":
            return self.value
        if wavelength_m <= 0:
            raise UnitError(
                "normalized mode volume requires a positive metre wavelength to resolve"
            )
        return self.value * (wavelength_m / refractive_index) ** 3


@dataclass(frozen=True)
class EmitterParams:
    """Two-level emitter parameters.

    Parameters
    ----------
    omega_e : float
        Transition angular frequency (rad/s).
    gamma : float
        Total population decay rate outside the cavity (rad/s).
    dipole_moment : float
        Transition dipole magnitude |mu| (C*m).
    gamma_d : float
        Pure-dephasing rate (rad/s).
    eta, dw, xi : float
        Quantum efficiency, Debye-Waller factor and ZPL branching ratio,
        each in [0, 1]. Their product is the fraction of total decay that
        proceeds through the cavity-coupled dipole transition.
    """

    omega_e: float
    gamma: float
    dipole_moment: float
    gamma_d: float = 0.0
    eta: float = 1.0
    dw: float = 1.0
    xi: float = 1.0

    def __post_init__(self):
        if self.omega_e <= 0:
            raise ValueError("omega_e must be positive")
        if self.gamma < 0 or self.gamma_d < 0:
            raise ValueError("decay rates must be nonnegative")
        if self.dipole_moment <= 0:
            raise ValueError("dipole_moment must be positive")
        for name in ("eta", "dw", "xi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class CavityParams:
    """Single-mode cavity parameters.

    kappa is always derived as omega_c/q_factor; it is never stored.
    """

    omega_c: float
    q_factor: float
    mode_volume: ModeVolume
    refractive_index: float = 1.0
    overlap: float = 1.0

    def __post_init__(self):
        if self.omega_c <= 0:
            raise ValueError("omega_c must be positive")
        if self.q_factor <= 0:
            raise ValueError("q_factor must be positive")
        if isinstance(self.mode_volume, (int, float)):
            object.__setattr__(self, "mode_volume", ModeVolume(float(self.mode_volume)))
        if self.refractive_index < 1.0:
            raise ValueError("refractive_index must be >= 1")
        if not -1.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [-1, 1]")

    @property
    def kappa(self) -> float:
        """Cavity energy decay rate omega_c/Q (rad/s)."""
        return self.omega_c / self.q_factor

    @property
    def wavelength(self) -> float:
        """Vacuum wavelength of the cavity resonance (m)."""
        return TWO_PI * C / self.omega_c


@dataclass(frozen=True)
class BranchingFraction:
    """Fraction of the total decay that proceeds through the dipole transition."""

    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("branching fraction must lie in [0, 1]")

    @classmethod
    def from_emitter(cls, emitter: EmitterParams) -> "BranchingFraction":
        return cls(emitter.eta * emitter.dw * emitter.xi)


@dataclass(frozen=True)
class CoupledSystem:
    """Emitter-cavity system with coupling g and detuning delta = omega_c - omega_e."""

    emitter: EmitterParams
    cavity: CavityParams
    g: float
    delta: float = 0.0

    @property
    def kappa(self) -> float:
        return self.cavity.kappa

    def bad_cavity_check(self) -> bool:
        """True when kappa >= 10*g and kappa >= 10*gamma (regime flag, not an error)."""
        k = self.kappa
        return k >= 10.0 * abs(self.g) and k >= 10.0 * self.emitter.gamma

    def detuned(self, delta: float) -> "CoupledSystem":
        """Copy of this system at a different detuning."""
        return CoupledSystem(self.emitter, self.cavity, self.g, delta)

    @classmethod
    def from_rates(
        cls,
        gamma: float,
        kappa: float,
        g: float,
        delta: float = 0.0,
        gamma_d: float = 0.0,
        wavelength_m: float = DEFAULT_WAVELENGTH_M,
        refractive_index: float = 2.4,
    ) -> "CoupledSystem":
        """Build a system from rates alone, for dynamics and rate formulas.

        Microscopic fields that the rate-level formulas never touch
        (dipole moment, mode volume) are filled with nominal placeholders.
        """
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        omega_e = wavelength_to_angular(wavelength_m)
        omega_c = omega_e + delta
        emitter = EmitterParams(
            omega_e=omega_e, gamma=gamma, dipole_moment=1e-29, gamma_d=gamma_d
        )
        cavity = CavityParams(
            omega_c=omega_c,
            q_factor=omega_c / kappa,
            mode_volume=ModeVolume(1.0, "(lambda/n)^3"),
            refractive_index=refractive_index,
        )
        return cls(emitter=emitter, cavity=cavity, g=g, delta=delta)


def branching_fraction(eta: float, dw: float, xi: float) -> BranchingFraction:
    """Branching fraction eta*dw*xi of decay through the dipole transition."""
    for name, v in (("eta", eta), ("dw", dw), ("xi", xi)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return BranchingFraction(eta * dw * xi)


def coupling_rate(emitter: EmitterParams, cavity: CavityParams) -> float:
    """Single-photon Rabi frequency g (rad/s).

    g = (|mu|/n) * sqrt(omega_c / (2 eps0 hbar V)) * overlap, with V the
    absolute mode volume in m^3. The sign of the overlap is preserved;
    downstream formulas use g squared.

    Notes
    -----
    The 2*eps0 vacuum-field normalization is required for consistency with
    the Purcell factor: 4g^2/(kappa*gamma_eg) = F_P*overlap^2 holds exactly.
    See FORMULA_NOTES["coupling-rate"].
    """
    if cavity.omega_c <= 0:
        raise ValueError("omega_c must be positive")
    v_abs = cavity.mode_volume.in_m3(cavity.wavelength, cavity.refractive_index)
    if v_abs <= 0:
        raise ValueError("mode volume must be positive")
    n = cavity.refractive_index
    return (
        (emitter.dipole_moment / n)
        * math.sqrt(cavity.omega_c / (2.0 * EPSILON_0 * HBAR * v_abs))
        * cavity.overlap
    )


def wigner_weisskopf_rate(omega_e: float, n: float, dipole_moment: float) -> float:
    """Free-space spontaneous emission rate of the dipole transition (rad/s).

    gamma_eg = omega_e^3 * n * |mu|^2 / (3 pi eps0 hbar c^3).

    The c^3 power is fixed by dimensional analysis; reports generated from
    this rate carry FORMULA_NOTES["wigner-weisskopf-rate"].
    """
    if omega_e <= 0 or n <= 0 or dipole_moment <= 0:
        raise ValueError("all arguments must be positive")
    return omega_e**3 * n * dipole_moment**2 / (3.0 * math.pi * EPSILON_0 * HBAR * C**3)


def purcell_factor(wavelength: float, n: float, q_factor: float, mode_volume) -> float:
    """Ideal Purcell factor F_P = (3/4 pi^2) (lambda/n)^3 (Q/V).

    ``mode_volume`` may be a ModeVolume (either unit tag) or a plain float,
    which is taken as an absolute volume in the same length unit system as
    ``wavelength`` (metres throughout this package).
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    if q_factor <= 0:
        raise ValueError("q_factor must be positive")
    if not isinstance(mode_volume, ModeVolume):
        mode_volume = ModeVolume(float(mode_volume))
    v_abs = mode_volume.in_m3(wavelength, n)
    return 3.0 / (4.0 * math.pi**2) * (wavelength / n) ** 3 * q_factor / v_abs


def cavity_lorentzian(delta: float, kappa: float) -> float:
    """Detuning response (kappa/2)^2 / ((kappa/2)^2 + delta^2) of the cavity term."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    half = 0.5 * kappa
    return half * half / (half * half + delta * delta)


def purcell_enhancement(system: CoupledSystem, open_fraction: float = 1.0) -> float:
    """Multiplicative decay-rate enhancement of the coupled transition.

    F = open_fraction + F_P * overlap^2 * (kappa/2)^2 / ((kappa/2)^2 + delta^2).

    The overlap enters squared because the enhancement scales with g^2.
    ``open_fraction`` is the fraction of the transition's free-space emission
    that survives outside the cavity mode (1 for an open cavity).
    """
    if not 0.0 < open_fraction <= 1.0:
        raise ValueError("open_fraction must lie in (0, 1]")
    cav = system.cavity
    fp = purcell_factor(cav.wavelength, cav.refractive_index, cav.q_factor, cav.mode_volume)
    return open_fraction + fp * cav.overlap**2 * cavity_lorentzian(system.delta, system.kappa)


def effective_decay_rate(system: CoupledSystem) -> float:
    """Bad-cavity effective population decay rate (rad/s).

    gamma_eff = gamma + (4 g^2 / kappa) * (kappa/2)^2 / ((kappa/2)^2 + delta^2),
    from adiabatic elimination of the cavity field. Callers should consult
    ``system.bad_cavity_check()``; the formula is asymptotic in kappa/g and
    kappa/gamma.
    """
    kappa = system.kappa
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return system.emitter.gamma + (4.0 * system.g**2 / kappa) * cavity_lorentzian(
        system.delta, kappa
    )


def lifetime_ratio(system: CoupledSystem) -> float:
    """Off-resonant to on-resonant lifetime ratio 1 + 4g^2/(kappa*gamma)."""
    gamma = system.emitter.gamma
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 1.0 + 4.0 * system.g**2 / (system.kappa * gamma)


def cavity_rate_from_ratio(ratio: float, gamma: float) -> float:
    """Invert the lifetime ratio: 4g^2/kappa = gamma*(ratio - 1)."""
    if ratio < 1.0:
        raise ValueError("lifetime ratio below 1 is outside this model")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return gamma * (ratio - 1.0)


def purcell_from_ratio(ratio: float, branching: BranchingFraction) -> float:
    """Lower bound on the Purcell enhancement from a measured lifetime ratio.

    F = 1 + (ratio - 1)/branching. The full decay accelerates only through
    the branching fraction of the dipole transition, so the enhancement of
    that transition is the lifetime-ratio excess scaled up by 1/branching.
    """
    if ratio < 1.0:
        raise ValueError("lifetime ratio below 1 is outside this model")
    if branching.value <= 0:
        raise ValueError("branching fraction must be positive")
    return 1.0 + (ratio - 1.0) / branching.value


def cooperativity_from_rates(system: CoupledSystem) -> float:
    """Cooperativity C = 4g^2 / (kappa (gamma + gamma_d))."""
    gamma_sum = system.emitter.gamma + system.emitter.gamma_d
    kappa = system.kappa
    if gamma_sum <= 0:
        raise ValueError("gamma + gamma_d must be positive")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return 4.0 * system.g**2 / (kappa * gamma_sum)


def cooperativity_from_measurements(
    gamma_lifetime_limited: float, gamma_total: float, ratio: float
) -> float:
    """Cooperativity from linewidths and the lifetime ratio.

    C = (gamma/gamma_tot) * (ratio - 1), where gamma is the lifetime-limited
    linewidth and gamma_tot the measured total linewidth (any consistent
    linewidth unit; only the fraction enters).
    """
    if gamma_lifetime_limited <= 0:
        raise ValueError("lifetime-limited linewidth must be positive")
    if gamma_total < gamma_lifetime_limited:
        raise ValueError("total linewidth cannot be below the lifetime limit")
    if ratio < 1.0:
        raise ValueError("lifetime ratio below 1 is outside this model")
    return (gamma_lifetime_limited / gamma_total) * (ratio - 1.0)


def lifetime_limited_linewidth(tau: float) -> float:
    """Lifetime-limited FWHM linewidth in ordinary frequency: 1/(2 pi tau) (Hz)."""
    if tau <= 0:
        raise ValueError("lifetime must be positive")
    return 1.0 / (TWO_PI * tau)
