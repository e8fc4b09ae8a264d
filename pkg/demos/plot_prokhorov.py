"""
Prokhorov distance on a finite space
====================================

Two routes to the same number.  The coupling route looks for a joint law
that keeps little mass on pairs that are far apart; the direct route checks
every subset against its open enlargement.
"""

import numpy as np

from coupling_lab import DiscreteMeasure, line_space, prokhorov_direct, prokhorov_distance

# three points on a line, one unit apart
S = line_space([0.0, 1.0, 2.0])
P = DiscreteMeasure(S, [0.6, 0.4, 0.0])
Q = DiscreteMeasure(S, [0.2, 0.4, 0.4])

cert = prokhorov_distance(P, Q)
print("coupling route :", cert.epsilon)
print("direct route   :", prokhorov_direct(P, Q))

# %%
# The certificate carries the witness coupling.  Its mass on the far set is
# the quantity the distance bounds.
print(np.round(cert.witness_coupling.mass, 3))
print("far mass:", cert.far_mass, "attained:", cert.attained, "check:", cert.check())

# %%
# Moving Q toward P shrinks the distance.
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    R = DiscreteMeasure(S, (1 - t) * Q.w + t * P.w)
    print(f"t={t:4.2f}  d_P={prokhorov_distance(P, R).epsilon:.4f}")
