"""Measurement-data containers and the CSV / key=value file formats.

The CSV dialect is deliberately rigid: comma separated, '.' decimal point,
'#'-prefixed comment lines, an optional header row naming the columns.
Parse errors carry the 1-based line number so the CLI can point at the
offending row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """Malformed input file; message includes the source line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Histogram:
    """Time-binned photon counts.

    bin_centers are in ns, strictly increasing with uniform width (1e-9
    relative). Counts are nonnegative; they are stored as floats so that
    noiseless synthetic expectations (non-integer) fit in the same carrier
    as measured integer counts.
    """

    bin_centers: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.bin_centers, dtype=float)
        y = np.asarray(self.counts, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two bins")
        if y.shape != t.shape:
            raise ValueError("counts and bin_centers must have equal length")
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise ValueError("bin centers must be strictly increasing")
        if np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
            raise ValueError("bins must be uniform to 1e-9 relative")
        if np.any(y < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "bin_centers", t)
        object.__setattr__(self, "counts", y)

    @property
    def bin_width(self) -> float:
        return float(self.bin_centers[1] - self.bin_centers[0])


@dataclass(frozen=True)
class Scan:
    """One PLE scan: counts against laser frequency offset in GHz."""

    frequency_offsets: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.frequency_offsets, dtype=float)
        y = np.asarray(self.counts, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("need at least two scan points")
        if y.shape != x.shape:
            raise ValueError("counts and frequency_offsets must have equal length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("frequency axis must be strictly increasing")
        if np.any(y < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "frequency_offsets", x)
        object.__setattr__(self, "counts", y)

    def windowed(self, lo: float, hi: float) -> "Scan":
        """Sub-scan restricted to [lo, hi] GHz."""
        if hi <= lo:
            raise ValueError("window must satisfy lo < hi")
        mask = (self.frequency_offsets >= lo) & (self.frequency_offsets <= hi)
        if np.count_nonzero(mask) < 2:
            raise DataFormatError(
                f"window [{lo:g}, {hi:g}] GHz selects fewer than two scan points"
            )
        return Scan(self.frequency_offsets[mask], self.counts[mask], dict(self.meta))


def _data_lines(path):
    """Yield (line_number, stripped_text) for non-comment, non-blank lines."""
    text = Path(path).read_text()
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield i, line


def _parse_table(path, expected_columns: int, header_names=None):
    """Parse a numeric CSV; returns (rows array, header tokens or None).

    A leading non-numeric row is taken as the header. Every other row must
    have exactly expected_columns numeric fields.
    """
    rows = []
    header = None
    first = True
    for lineno, line in _data_lines(path):
        fields = [f.strip() for f in line.split(",")]
        if first:
            first = False
            try:
                float(fields[0])
            except ValueError:
                header = fields
                if header_names is not None and len(header) != expected_columns:
                    raise DataFormatError(
                        f"expected {expected_columns} columns, header has {len(header)}",
                        lineno,
                    )
                continue
        if len(fields) != expected_columns:
            raise DataFormatError(
                f"expected {expected_columns} comma-separated values, got {len(fields)}",
                lineno,
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise DataFormatError(f"non-numeric field: {exc}", lineno) from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), header


def read_histogram_csv(path) -> Histogram:
    """Read (t_ns, counts) rows into a Histogram."""
    rows, header = _parse_table(path, 2, ("t_ns", "counts"))
    if header is not None and header[0] != "t_ns":
        raise DataFormatError(f"{path}: expected t_ns,counts columns, got {header}")
    return Histogram(rows[:, 0], rows[:, 1], {"source": str(path)})


def write_histogram_csv(path, hist: Histogram) -> None:
    with open(path, "w") as fh:
        for key, val in sorted(hist.meta.items()):
            if key != "source":
                fh.write(f"# {key} = {val}\n")
        fh.write("t_ns,counts\n")
        for t, c in zip(hist.bin_centers, hist.counts):
            fh.write(f"{t:.17g},{c:.17g}\n")


def read_scan_csv(path) -> Scan:
    """Read (freq_ghz, counts) rows into a Scan."""
    rows, header = _parse_table(path, 2, ("freq_ghz", "counts"))
    if header is not None and header[0] != "freq_ghz":
        raise DataFormatError(f"{path}: expected freq_ghz,counts columns, got {header}")
    return Scan(rows[:, 0], rows[:, 1], {"source": str(path)})


def write_scan_csv(path, scan: Scan) -> None:
    with open(path, "w") as fh:
        for key, val in sorted(scan.meta.items()):
            if key != "source":
                fh.write(f"# {key} = {val}\n")
        fh.write("freq_ghz,counts\n")
        for x, c in zip(scan.frequency_offsets, scan.counts):
            fh.write(f"{x:.17g},{c:.17g}\n")


DETUNING_UNITS = ("delta_nm", "delta_ghz")


def read_detuning_csv(path):
    """Read a detuning series (delta, tau_ns, sigma_tau_ns).

    The header must name the detuning column delta_nm or delta_ghz; that
    single tag fixes the unit for the whole file. Returns
    (deltas, unit, tau_ns, sigma_tau_ns).
    """
    rows, header = _parse_table(path, 3)
    if header is None:
        raise DataFormatError(
            f"{path}: detuning series needs a header naming the unit "
            f"({' or '.join(DETUNING_UNITS)})"
        )
    unit_tags = [h for h in header if h in DETUNING_UNITS]
    if len(unit_tags) != 1:
        raise DataFormatError(
            f"{path}: exactly one detuning column of {DETUNING_UNITS} required, "
            f"header has {header} (mixed or missing units)"
        )
    if header[0] not in DETUNING_UNITS or header[1] != "tau_ns" or header[2] != "sigma_tau_ns":
        raise DataFormatError(
            f"{path}: expected columns (delta_nm|delta_ghz, tau_ns, sigma_tau_ns), got {header}"
        )
    return rows[:, 0], header[0], rows[:, 1], rows[:, 2]


def write_detuning_csv(path, deltas, unit: str, taus, sigma_taus, meta: dict | None = None) -> None:
    if unit not in DETUNING_UNITS:
        raise ValueError(f"unit must be one of {DETUNING_UNITS}")
    with open(path, "w") as fh:
        for key, val in sorted((meta or {}).items()):
            fh.write(f"# {key} = {val}\n")
        fh.write(f"{unit},tau_ns,sigma_tau_ns\n")
        for d, t, s in zip(deltas, taus, sigma_taus):
            fh.write(f"{d:.17g},{t:.17g},{s:.17g}\n")


def parse_key_value(path) -> dict:
    """Parse a flat key = value config file.

    '#' comments and blank lines are skipped; keys must be unique. Values
    stay strings; the consumer owns unit interpretation (the unit is part
    of the key name, e.g. kappa_mhz).
    """
    out: dict = {}
    for lineno, line in _data_lines(path):
        if "=" not in line:
            raise DataFormatError("expected key = value", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise DataFormatError("empty key", lineno)
        if key in out:
            raise DataFormatError(f"duplicate key {key!r}", lineno)
        out[key] = value
    return out


def require_keys(config: dict, required, optional, context: str) -> None:
    """Reject unknown keys and report missing required ones."""
    unknown = sorted(set(config) - set(required) - set(optional))
    if unknown:
        raise DataFormatError(f"{context}: unknown keys {unknown}")
    missing = sorted(set(required) - set(config))
    if missing:
        raise DataFormatError(f"{context}: missing required keys {missing}")


def parse_float(config: dict, key: str, default=None) -> float:
    if key not in config:
        if default is None:
            raise DataFormatError(f"missing numeric key {key!r}")
        return default
    try:
        return float(config[key])
    except ValueError:
        raise DataFormatError(f"key {key!r} has non-numeric value {config[key]!r}") from None


def parse_int(config: dict, key: str, default=None) -> int:
    if key not in config:
        if default is None:
            raise DataFormatError(f"missing integer key {key!r}")
        return default
    try:
        return int(config[key])
    except ValueError:
        raise DataFormatError(f"key {key!r} has non-integer value {config[key]!r}") from None


def parse_float_list(config: dict, key: str):
    try:
        return [float(tok) for tok in config[key].split(",") if tok.strip()]
    except ValueError:
        raise DataFormatError(f"key {key!r} must be a comma-separated number list") from None
