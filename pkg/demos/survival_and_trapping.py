"""
Trapping by a decelerating drive
================================

With ``f(a) = -a**gamma`` and ``gamma < 3/2`` the diffusivity reaches zero
after a finite amount of local time, and the particle is stuck at the
origin from then on.  Because ``A_t`` depends on the path only through the
local time, a single exact draw of ``(W_t, L_t)`` decides the outcome.
"""

# %%
# Exact sampling against the closed-form survival curve
# -----------------------------------------------------
import math

import numpy as np

from lmdiff.flow import PowerLawDrive
from lmdiff.process import sample_exact, simulate_discrete_terminal, survival_probability
from lmdiff.rng import RngStream

drive = PowerLawDrive(-1, 0.0)
print("local time needed to trap:", drive.blowup_threshold(1.0))
for k, t in enumerate((0.25, 1.0, 4.0, 25.0, 100.0)):
    ens = sample_exact(drive, 1.0, t, RngStream(0, k), 100_000)
    print(f"t={t:6g}  MC survival={1 - ens.trapped_fraction:.4f}  exact={float(survival_probability(drive, t)):.4f}")

# %%
# Slow decay of survival
# ----------------------
# For large ``t`` survival falls off like ``t**-0.5``.
for t in (1e2, 1e4, 1e6):
    exact = float(survival_probability(drive, t))
    asym = 2 / (1.5 * math.sqrt(math.pi * t))
    print(f"t={t:8.0e}  exact={exact:.6e}  asymptotic={asym:.6e}")

# %%
# The random-walk scheme
# ----------------------
# The walk scheme updates the diffusivity only when the walk sits at zero.
# Its trapped fraction approaches the exact value at rate ``n**-0.5``.
exact = 1 - float(survival_probability(drive, 4.0))
for n in (100, 1_000, 10_000):
    ens = simulate_discrete_terminal(drive, 1.0, 4.0, n, 100_000, RngStream(1, n))
    print(f"n={n:6d}  trapped={ens.trapped_fraction:.4f}  exact={exact:.4f}  gap={ens.trapped_fraction - exact:+.4f}")

# %%
# Positions of the survivors
# --------------------------
ens = sample_exact(drive, 1.0, 4.0, RngStream(2), 100_000)
alive = ens.alive
print("survivors:", int(alive.sum()), " median |x|:", float(np.median(np.abs(ens.x[alive]))))
