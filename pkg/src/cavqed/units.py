"""Unit conversions.

Internal convention: every rate, linewidth and detuning is angular (rad/s).
CLI flags, config keys and report fields use explicit unit suffixes
(``_mhz``, ``_ghz``, ``_rad_per_s``, ``_nm``, ``_ns``) and are converted at
the boundary, by 2*pi where the tagged unit is an ordinary frequency.
"""

from .constants import C, TWO_PI


def mhz_to_rad_per_s(value_mhz: float) -> float:
    return TWO_PI * 1e6 * value_mhz


def rad_per_s_to_mhz(value: float) -> float:
    return value / (TWO_PI * 1e6)


def ghz_to_rad_per_s(value_ghz: float) -> float:
    return TWO_PI * 1e9 * value_ghz


def rad_per_s_to_ghz(value: float) -> float:
    return value / (TWO_PI * 1e9)


def wavelength_to_angular(wavelength_m: float) -> float:
    """Angular frequency of light at the given vacuum wavelength."""
    if wavelength_m <= 0:
        raise ValueError("wavelength must be positive")
    return TWO_PI * C / wavelength_m


def detuning_from_wavelength_offset(delta_lambda_m: float, wavelength_m: float) -> float:
    """Angular detuning corresponding to a small wavelength offset.

    Uses delta_omega = -2*pi*c*delta_lambda/lambda**2 with the reference
    wavelength taken at the line the offset is measured from. A positive
    wavelength offset (redder) maps to a negative frequency detuning.
    """
    if wavelength_m <= 0:
        raise ValueError("reference wavelength must be positive")
    return -TWO_PI * C * delta_lambda_m / wavelength_m**2
