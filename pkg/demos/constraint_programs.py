"""The equilibrium conditions as an explicit polynomial program: variable and
constraint counts, feasibility checking, and the bridge between the program
view and the definition-level checkers.
"""
import numpy as np

from nscsg import (
    assignment_from_solution,
    build,
    build_ce_system,
    build_ne_system,
    check_feasibility,
    program_size,
    run_gbi,
    unfold_tree,
)
from nscsg.speprog import dump_system
from nscsg.verify import check_spne

bundle = build("counterexample", {"phi": -10})
tree = unfold_tree(bundle.model, bundle.initial, bundle.horizon)

ne_system = build_ne_system(tree, bundle.rewards)
ce_system = build_ce_system(tree, bundle.rewards)
for name, system in (("independent mixtures", ne_system), ("joint recommendations", ce_system)):
    size = program_size(system)
    degree = max(c.degree() for c in system.constraints)
    print(f"{name}: {size.variables} strategy/value variables "
          f"(+{size.variables_with_z - size.variables} post-action), "
          f"{size.constraints_with_zdef} constraints, max monomial degree {degree}")
    print("  by origin:", dict(sorted(size.by_origin.items())))

solution = run_gbi(tree, bundle.rewards, "ne", "sw-optimal")
assignment = assignment_from_solution(tree, bundle.rewards, solution)
feas = check_feasibility(ne_system, assignment, tol=1e-7)
defn = check_spne(tree, bundle.rewards, solution, tol=1e-7)
print(f"backward-induction output: program residuals "
      f"eq {feas.max_equality_residual:.1e} / ineq {feas.max_inequality_violation:.1e}, "
      f"deviation gap {defn.max_gap:.1e}")
print("program feasibility and the definition agree:", feas.feasible == defn.passed)

# perturbing one mixture breaks both views at once
from nscsg.nfg import StageSolution

node4 = next(n for n in tree.nodes if n.stage == 1 and int(n.state.env[0]) == 4)
broken = solution.copy()
prof = broken.profiles[node4.id]
broken.profiles[node4.id] = StageSolution("ne", prof.mu1, np.array([0.6, 0.4]), None, prof.payoffs)
feas_b = check_feasibility(ne_system, assignment_from_solution(tree, bundle.rewards, broken), 1e-7)
defn_b = check_spne(tree, bundle.rewards, broken, tol=1e-7)
print(f"after a deliberate perturbation: feasible={feas_b.feasible}, passes={defn_b.passed}, "
      f"worst constraint {feas_b.worst}")

dump_system(ne_system, "counterexample_program.txt")
print("wrote counterexample_program.txt (one constraint per line)")
