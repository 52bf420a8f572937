#!/usr/bin/env python3
"""Regenerate tests/fixtures/erfc_reference.csv with 50-digit mpmath values.

The fixture pins erfc on a grid covering the argument range the stable
exGaussian evaluation visits, including the deep positive tail where
naive exp(z^2)*erfc(z) formulations overflow.
"""

from pathlib import Path

import mpmath

mpmath.mp.dps = 50

GRID = [
    -6.0, -5.0, -4.0, -3.0, -2.5, -2.0, -1.5, -1.0, -0.75, -0.5, -0.25,
    -0.1, -0.01, 0.0, 0.01, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5,
    3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 26.5, 28.0,
]


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "erfc_reference.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["x,erfc_x"]
    for x in GRID:
        val = mpmath.erfc(mpmath.mpf(repr(x)))
        lines.append(f"{x!r},{mpmath.nstr(val, 20, strip_zeros=False)}")
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out} ({len(GRID)} rows)")


if __name__ == "__main__":
    main()
