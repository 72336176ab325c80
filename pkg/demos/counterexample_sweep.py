"""Three-point chains whose curvature stays >= 1 while a test-function
ratio for the modified log-Sobolev constant keeps falling."""

from curvlab import alpha_mod, counterexample_ratio, kappa, OptConfig
from curvlab import generators as gen

print(f"{'eps':>8}  {'k(0,1)':>10}  {'k(1,2)':>10}  {'ratio':>10}  {'alpha_mod':>10}")
for k in range(1, 9):
    eps = 10.0 ** -k
    c = gen.counterexample(eps)
    am = alpha_mod(c, OptConfig(restarts=16)).value if k <= 4 else float("nan")
    print(f"{eps:8.0e}  {kappa(c, 0, 1):10.4f}  {kappa(c, 1, 2):10.4f}  "
          f"{counterexample_ratio(eps):10.5f}  {am:10.5f}")
