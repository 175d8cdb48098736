"""
Absorption or global existence
==============================

Below ``gamma = 3/2`` the decelerating drive pushes mass into the atom at
``a = 0`` in finite time.  Above it the atom stays empty and the ``L^2``
norm stays bounded.  Each run below is only a finite-grid symptom check.
It cannot certify continuum blow-up or global existence.
"""

# %%
# The ``a`` grid starts at ``a0 / na``; anything pushed below that counts as
# absorbed.  For ``gamma = 1.6`` a coarse ``a`` grid leaks a few ``1e-6`` into
# the atom, so that run uses ``na = 1000``.
import numpy as np

from lmdiff.flow import PowerLawDrive
from lmdiff.pde import GridSpec, blowup_probe, smooth_initial, solve_pde

for gamma, na, x_max, t_end in ((0.5, 200, 6.0, 1.0), (1.0, 200, 6.0, 1.0), (1.6, 1000, 10.0, 5.0)):
    grid = GridSpec.for_point_source(1.0, 401, na, x_max, t_end)
    n0 = smooth_initial(grid, 0.2, 0.1, 1.0)
    run = solve_pde(PowerLawDrive(-1, gamma), n0, grid, output_times=np.linspace(0, t_end, 21)[1:])
    probe = blowup_probe(run, gamma)
    print(
        f"gamma={gamma}: verdict={probe.verdict!r}  p(end)={probe.p_curve[-1]:.3e}  "
        f"sup L2/L2(0)={probe.l2_curve.max() / probe.l2_curve[0]:.3f}  M={probe.M}  Y(0)->Y(end)="
        f"{probe.y_curve[0]:.3f}->{probe.y_curve[-1]:.3f}"
    )
print(probe.note)
