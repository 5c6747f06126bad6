"""Why restart: iteration counts of the plain and restarted solvers.

The plain method needs O(1/eps) steps. Restarting on shrinking balls turns
strong monotonicity into a log(1/eps) count.
"""

import numpy as np

from bregman_vi import RestartConfig, UmpConfig, bundled_problems, restart_solve, ump_solve
from bregman_vi.geometry import bregman, max_bregman_over_set

pr = bundled_problems(["affine_ball_10"])["affine_ball_10"]
x0 = pr.set.default_point()
R0_sq = max_bregman_over_set(pr.setup, pr.set, x0)

print(f"{'eps':>8} {'plain N':>8} {'V avg':>10} {'restart N':>10} {'stages':>7} {'V final':>10}")
for eps in [1e-1, 1e-2, 1e-3, 1e-4]:
    plain = ump_solve(pr.oracle, pr.setup, pr.set, UmpConfig(eps, 1.0, x0))
    state = restart_solve(pr.oracle, pr.setup, pr.set,
                          RestartConfig(eps, pr.mu, pr.setup.omega, x0, R0_sq, 1.0))
    print(f"{eps:>8g} {plain.N:>8d} {bregman(pr.setup, pr.x_star, plain.averaged_w):>10.2e} "
          f"{state.total_inner:>10d} {state.p:>7d} {bregman(pr.setup, pr.x_star, state.final_point):>10.2e}")

# per-stage picture for the tightest tolerance
state = restart_solve(pr.oracle, pr.setup, pr.set, RestartConfig(1e-6, pr.mu, 1.0, x0, R0_sq, 1.0))
V = [bregman(pr.setup, pr.x_star, c) for c in state.centers]
print("\nstage  inner  V(x*, x_p)   R_p^2")
for p, (n, v, r) in enumerate(zip(state.inner_counts + [0], V, state.radii_sq)):
    print(f"{p:>5} {n:>6} {v:>11.3e} {r:>9.3e}")
