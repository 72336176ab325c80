"""Constant-Laplacian separation on a lazy birth-death chain and the
Dirichlet eigenvalue bounds it yields."""

import numpy as np

from curvlab import CutPartition, dirichlet_from_separation, laplacian
from curvlab import generators as gen

c = gen.random_birth_death(8, np.random.default_rng(4), monotone=True, lazy=True)
part = CutPartition.of(c, X=[0, 1, 2], K=[3, 4], Y=[5, 6, 7])
b = dirichlet_from_separation(c, part)
sol = b.solution
np.set_printoptions(precision=5, suppress=True)
print("f        ", sol.f)
print("Laplacian", laplacian(c, sol.f))
print(f"C = {sol.C:.6g}, residual {sol.residual:.1e}, {sol.iterations} sweeps")
print("checks   ", sol.checks)
print(f"lambda_X = {b.lambda_X:.5g} >= bound {b.bound_X:.5g}")
print(f"lambda_Y = {b.lambda_Y:.5g} >= bound {b.bound_Y:.5g}")
print(f"theta(bounds) = {b.theta:.5g} vs P0/(16 diam^2) = {b.theta_target:.5g}")
