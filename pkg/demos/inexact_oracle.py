"""How much accuracy a delta-inexact oracle costs.

With a perturbed operator the restarted method no longer reaches eps; it
stalls at a floor proportional to delta. The guarantee printed alongside is
eps + (delta/mu)(1 + 2 omega L / mu).
"""

from bregman_vi import RestartConfig, bundled_problems, perturbed, restart_solve
from bregman_vi.certify import theorem2_accuracy_bound
from bregman_vi.geometry import bregman, max_bregman_over_set

base = bundled_problems(["affine_ball_2"])["affine_ball_2"]
x0 = base.set.default_point()
R0_sq = max_bregman_over_set(base.setup, base.set, x0)
eps = 1e-8

print(f"{'delta':>8} {'V final':>10} {'guarantee':>10}")
for delta in [0.0, 1e-6, 1e-4, 1e-2]:
    pr = perturbed(base, delta, seed=1)
    state = restart_solve(pr.oracle, pr.setup, pr.set, RestartConfig(eps, pr.mu, 1.0, x0, R0_sq, 1.0))
    V = bregman(pr.setup, pr.x_star, state.final_point)
    print(f"{delta:>8g} {V:>10.2e} {theorem2_accuracy_bound(pr.mu, 1.0, pr.L, delta, eps):>10.2e}")
