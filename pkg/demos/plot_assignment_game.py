"""
Optimal assignment and stable payoffs
=====================================

Workers and firms with types on a line.  Output is complementary in the two
types, so the surplus-maximizing plan sorts them positively, and the dual
potentials split the surplus so that no worker-firm pair can do better.
"""

import numpy as np

from coupling_lab import DiscreteMeasure, line_space
from coupling_lab.matching import equivalence_audit, is_stable, stable_matching_exists

x = np.array([1.0, 2.0, 3.0])
workers = DiscreteMeasure(line_space(x), [1 / 3, 1 / 3, 1 / 3])
firms = DiscreteMeasure(line_space(x), [1 / 3, 1 / 3, 1 / 3])
phi = np.outer(x, x) / 3

outcome = stable_matching_exists(workers, firms, phi)
print(np.round(outcome.plan.mass, 3))
print("worker payoffs:", np.round(outcome.payoff.u, 4))
print("firm payoffs  :", np.round(outcome.payoff.v, 4))
print("blocking pairs:", is_stable(outcome, phi).blocking_pairs)

# %%
# Every vertex of the coupling polytope, audited: the optimal ones admit a
# stable payoff, the rest fall short of the optimal value.
report = equivalence_audit(workers, firms, phi)
for a in sorted(report.vertices, key=lambda a: -a.surplus):
    print(f"surplus={a.surplus:.4f}  optimal={a.optimal}  stable={a.stable_payoff}")
print("consistent:", report.consistent)
