"""Physical constants (SI)."""

import math

C0 = 299_792_458.0
MU0 = 1.25663706212e-6
EPS0 = 1.0 / (MU0 * C0 * C0)
ETA0 = MU0 * C0

MM = 1e-3

# design frequency used to turn loss tangents into an effective conductivity
F_DESIGN = 28e9
OMEGA_DESIGN = 2 * math.pi * F_DESIGN
