"""Edge curvature and the sectional (W_inf) test on a few standard chains."""

import numpy as np

from curvlab import curvature_table
from curvlab import generators as gen

chains = {
    "C4": gen.cycle(4),
    "lazy C4": gen.lazify(gen.cycle(4)),
    "lazy Q3": gen.lazify(gen.hypercube(3)),
    "BD monotone": gen.random_birth_death(6, np.random.default_rng(1), monotone=True),
    "BD random": gen.random_birth_death(6, np.random.default_rng(1), monotone=False),
    "lazy GEPS(0.01)": gen.lazify(gen.counterexample(0.01), "uniform"),
}

for name, c in chains.items():
    rows = curvature_table(c, sectional=c.is_lazy)
    kmin = min(r.kappa for r in rows)
    line = f"{name:16s} n={c.n:2d}  min kappa {kmin:8.4f}"
    if c.is_lazy:
        ok = all(r.sectional_nonneg for r in rows)
        kinf = min(r.kappa_inf for r in rows)
        line += f"  min kappa_inf {kinf:8.4f}  sectional>=0 {ok}"
    print(line)
