"""Physical constants pinned to the CODATA 2018 recommended values.

Values are fixed here rather than imported from scipy.constants so that
derived coupling rates do not drift when the environment's scipy moves to
a newer CODATA vintage.
"""

import math

#: speed of light in vacuum, m/s (exact)
C = 299_792_458.0

#: Planck constant, J*s (exact)
H = 6.626_070_15e-34

#: reduced Planck constant, J*s
HBAR = H / (2.0 * math.pi)

#: vacuum permittivity, F/m (CODATA 2018)
EPSILON_0 = 8.854_187_8128e-12

TWO_PI = 2.0 * math.pi
