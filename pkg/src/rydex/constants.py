"""Physical constants (SI), re-exported from :mod:`scipy.constants`."""

import numpy as np
from scipy import constants as _sc

HBAR = _sc.hbar
H_PLANCK = _sc.h
Q_E = _sc.e
EPS0 = _sc.epsilon_0
MU0 = _sc.mu_0
C0 = _sc.c
K_B = _sc.k
ETA0 = float(np.sqrt(MU0 / EPS0))
A0_BOHR = _sc.physical_constants["Bohr radius"][0]
EA0 = Q_E * A0_BOHR
AMU = _sc.physical_constants["atomic mass constant"][0]
TWO_PI = 2.0 * np.pi
