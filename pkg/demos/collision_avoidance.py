"""Two aircraft with advisory networks: perception inside the unfolding,
trust dynamics, equilibrium versus zero-sum altitudes, and rollouts.

Runs entirely on seeded stub networks with the production shape (four inputs,
seven rectified layers of 45 units, nine advisory scores); drop real weight
files (vcas_1.json .. vcas_9.json) into a directory and pass ``nets=<dir>``
to reproduce published trajectories instead.
"""
import csv

import numpy as np

from nscsg import build, run_gbi, run_minimax, social_welfare, stats, unfold_tree
from nscsg.verify import check_spce, check_spne, simulate

bundle = build("vcas", {"t0": 3, "eps_own": 0.0, "eps_int": 0.0})
tree = unfold_tree(bundle.model, bundle.initial, bundle.horizon)
st = stats(tree)
print(f"three-second encounter: {st['nodes']} histories, per stage {st['per_stage']}")

ne = run_gbi(tree, bundle.rewards, "ne", "sw-optimal")
ce = run_gbi(tree, bundle.rewards, "ce", "sw-optimal")
print(f"equilibrium altitude (final stage): {ne.values[0, 0]:+.2f} ft "
      f"(independent) / {ce.values[0, 0]:+.2f} ft (correlated)")
print(f"verified: {check_spne(tree, bundle.rewards, ne).passed} / "
      f"{check_spce(tree, bundle.rewards, ce).passed}")

zs_bundle = build("vcas", {"t0": 3, "zero_sum": True})
zs_tree = unfold_tree(zs_bundle.model, zs_bundle.initial, zs_bundle.horizon)
zs = run_minimax(zs_tree, zs_bundle.rewards)
print(f"zero-sum baseline altitude: {zs.values[0, 0]:+.2f} ft "
      f"(equilibria coordinate, opposition cannot)")

sim = simulate(tree, ne, bundle.rewards, seed=0)
print("sample rollout:")
for k, state in enumerate(sim.path.states):
    h, vo, vi, t = state.env
    print(f"  stage {k}: h={h:8.3f}  climb own/int {vo:+7.2f}/{vi:+7.2f}  t={t:.0f}")
print(f"  zero-acceleration violations per agent: {sim.zero_action_counts}")

# altitude curve data across horizons, equilibria versus zero-sum
with open("vcas_altitude.csv", "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["t0", "h_equilibria", "h_zero_sum"])
    for t0 in (2, 3):
        eq_b = build("vcas", {"t0": t0})
        eq_tree = unfold_tree(eq_b.model, eq_b.initial, t0)
        eq = run_gbi(eq_tree, eq_b.rewards, "ne")
        zs_b = build("vcas", {"t0": t0, "zero_sum": True})
        zs_t = unfold_tree(zs_b.model, zs_b.initial, t0)
        writer.writerow([t0, f"{eq.values[0, 0]:.9g}",
                         f"{run_minimax(zs_t, zs_b.rewards).values[0, 0]:.9g}"])
print("wrote vcas_altitude.csv")

# the trust-and-fuel structure needs the tree extents (two passes)
tf = build("vcas", {"t0": 2, "eps_own": 0.1, "reward": "trust-fuel"})
tf_tree = unfold_tree(tf.model, tf.initial, tf.horizon)
tf_sol = run_gbi(tf_tree, tf.rewards, "ne")
print(f"trust-and-fuel structure (h_max={tf.extras['h_max']:.1f}, "
      f"acc_max={tf.extras['hdd_max']:.2f}): welfare {social_welfare(tf_sol):+.3f}")
