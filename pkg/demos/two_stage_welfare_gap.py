"""How locally optimal backward induction loses social welfare, and how the
exact program and frozen subgame improvement recover it.

The two-stage game has a subgame (node 4) with three equilibria worth
(0, 8), (0, 8/5) and (5, 2).  Picking the locally best one (welfare 8) locks
the root into a continuation worth 2 + phi, while the globally best play
sacrifices local welfare at node 4 to earn 7 at the root.  The gap 5 - phi
grows without bound as phi decreases.
"""
from nscsg import (
    FsiConfig,
    build,
    run_fsi,
    run_gbi,
    social_welfare,
    solve_exact_grid,
    unfold_tree,
)
from nscsg.verify import check_spce, check_spne

phi = -10.0
bundle = build("counterexample", {"phi": phi})
tree = unfold_tree(bundle.model, bundle.initial, bundle.horizon)
print(f"two-stage game with phi = {phi}: {len(tree.nodes)} histories")

for kind in ("ne", "ce"):
    sol = run_gbi(tree, bundle.rewards, kind, "sw-optimal")
    check = check_spne if kind == "ne" else check_spce
    print(f"  backward induction ({kind}): welfare {social_welfare(sol):+.3f}, "
          f"subgame perfect: {check(tree, bundle.rewards, sol).passed}")

grid_ne = solve_exact_grid(tree, bundle.rewards, "ne", resolution=5)
print(f"  exact grid (independent mixtures, d=5): welfare {grid_ne.social_welfare:+.3f} "
      f"({grid_ne.feasible} feasible of {grid_ne.checked} points)")
print(f"  welfare gap versus backward induction: {grid_ne.social_welfare - (2 + phi):.3f} "
      f"= 5 - phi")

# joint recommendations can even beat 7: correlating the node-4 subgame at
# exactly the root's indifference point is feasible and worth 7.8
grid_ce = solve_exact_grid(tree, bundle.rewards, "ce", resolution=5)
print(f"  exact grid (joint recommendations, d=5): welfare {grid_ce.social_welfare:+.3f}")

sol, trace = run_fsi(tree, bundle.rewards, "ne", FsiConfig(m_max=5, seed=1))
print("  frozen subgame improvement trace:",
      " -> ".join(f"{row.social_welfare:+.2f}" for row in trace))
