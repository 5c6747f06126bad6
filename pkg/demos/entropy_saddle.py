"""Entropy geometry on a matrix game.

The regularized game min_x max_y y^T M x + mu d(x) - mu d(y) over two
simplices becomes a VI with a relatively strongly monotone operator.
Mirror steps are multiplicative weights.
"""

import numpy as np

from bregman_vi import RestartConfig, bundled_problems, restart_solve
from bregman_vi.geometry import bregman, max_bregman_over_set

for name in ["saddle_matching_pennies", "saddle_random_3x4"]:
    pr = bundled_problems([name])[name]
    x0 = np.asarray(pr.params["x0"])
    R0_sq = max_bregman_over_set(pr.setup, pr.set, x0)
    state = restart_solve(pr.oracle, pr.setup, pr.set,
                          RestartConfig(1e-8, pr.mu, pr.setup.omega, x0, R0_sq, 1.0))
    n = pr.params["M"].shape[1]
    x, y = state.final_point[:n], state.final_point[n:]
    print(name)
    print("  row strategy   ", np.round(y, 6))
    print("  column strategy", np.round(x, 6))
    print(f"  KL to reference {bregman(pr.setup, pr.x_star, state.final_point):.2e}, "
          f"{state.total_inner} inner steps in {state.p} stages")
