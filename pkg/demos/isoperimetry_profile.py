"""Cheeger constants, observable diameter and concentration for small graphs.

The last block prints a path on five vertices where concentration below
1/4 at radius 1 coexists with an observable diameter of 3.
"""

from curvlab import iso_profile
from curvlab import generators as gen
from curvlab.isoperimetry import concentration_profile, obs_diameter

for name, c in [("C8", gen.cycle(8)), ("Q3", gen.hypercube(3)), ("K5", gen.complete(5)), ("P6", gen.path(6))]:
    p = iso_profile(c, eps_values=(1 / 8, 1 / 4))
    conc = ", ".join(f"{r}:{v:.3g}" for r, (v, _) in p.concentration.items())
    print(f"{name:4s} h={p.h.value:.4f} h_log={p.h_log.value:.4f} h_sqrtlog={p.h_sqrtlog.value:.4f} "
          f"diam_obs(1/8)={p.diam_obs[1 / 8].value:g} rho={p.rho:.4g}  conc {{{conc}}}")

c = gen.path(5)
conc1 = concentration_profile(c)[1][0]
d = obs_diameter(c, 0.25)
print(f"\nP5: conc(1) = {conc1:g} < 1/4, diam_obs(1/4) = {d.value:g} with A={d.A}, B={d.B}")
