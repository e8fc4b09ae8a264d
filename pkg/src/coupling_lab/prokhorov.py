"""Exact Prokhorov distance between measures on one finite metric space.

Two independent routes are provided.  :func:`prokhorov_distance` works with
couplings: for a threshold ``t`` the least mass any coupling can put on
``{d > t}`` is a 0/1-cost transportation problem, and it is constant between
consecutive distance values.  :func:`prokhorov_direct` scans every subset ``A``
against its open enlargement and is meant as a test oracle only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import Coupling
from .errors import SpaceMismatch, TooLargeForOracle
from .metric_measure import DiscreteMeasure
from .transport import solve_primal

TAU_CERT = 1e-9
ORACLE_CAP = 20


@dataclass(frozen=True, eq=False)
class ProkhorovCertificate:
    """The distance with a coupling that witnesses it.

    When ``attained`` is true the witness puts at most ``epsilon`` on
    ``{d >= epsilon}``.  Otherwise the infimum is a distance value that is not
    itself admissible; the witness then bounds the mass of ``{d > epsilon}``,
    which certifies every level strictly above ``epsilon``.
    """

    epsilon: float
    witness_coupling: Coupling
    far_mass: float
    attained: bool

    def far_set(self) -> np.ndarray:
        d = self.witness_coupling.X.dist
        return d >= self.epsilon if self.attained else d > self.epsilon

    def check(self, tol: float = TAU_CERT) -> bool:
        mass = math.fsum(self.witness_coupling.mass[self.far_set()])
        return abs(mass - self.far_mass) <= tol and mass <= self.epsilon + tol


def _check_pair(P: DiscreteMeasure, Q: DiscreteMeasure):
    if not P.same_space(Q):
        raise SpaceMismatch("Prokhorov distance needs both measures on one space")


def _min_mass_on(P, Q, far: np.ndarray):
    plan = solve_primal(P, Q, -far.astype(float)).plan
    return math.fsum(plan.mass[far]), plan


def min_far_mass(P: DiscreteMeasure, Q: DiscreteMeasure, eps: float):
    """Least mass a coupling of P and Q can put on ``{d >= eps}``, with the coupling."""
    _check_pair(P, Q)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _min_mass_on(P, Q, P.space.dist >= eps)


def prokhorov_distance(P: DiscreteMeasure, Q: DiscreteMeasure) -> ProkhorovCertificate:
    """Prokhorov distance via the coupling characterization.

    With breakpoints ``D_0 = 0 < D_1 < ... < D_K`` (the distinct distances),
    the least far mass is a constant ``g_k`` for every level in
    ``(D_k, D_{k+1}]``, so the distance is ``min_k max(D_k, g_k)``.  ``g`` is
    nonincreasing and ``D`` increasing, so the minimum sits at the first
    ``k`` with ``g_k <= D_k``, found by bisection.
    """
    _check_pair(P, Q)
    dist = P.space.dist
    D = np.concatenate([[0.0], P.space.distinct_distances()])
    K = len(D) - 1
    cache = {}

    def g(k):
        if k not in cache:
            cache[k] = _min_mass_on(P, Q, dist > D[k])
        return cache[k]

    lo, hi = 0, K  # g_K = 0 <= D_K, so the predicate holds at K
    while lo < hi:
        mid = (lo + hi) // 2
        if g(mid)[0] <= D[mid]:
            hi = mid
        else:
            lo = mid + 1
    k = lo
    if k > 0 and g(k - 1)[0] <= D[k]:
        # crossing inside (D_{k-1}, D_k]: the level g_{k-1} is admissible
        far, plan = g(k - 1)
        return ProkhorovCertificate(float(max(far, 0.0)), plan, far, attained=far > 0)
    far, plan = g(k)
    return ProkhorovCertificate(float(D[k]), plan, far, attained=False)


def prokhorov_direct(P: DiscreteMeasure, Q: DiscreteMeasure) -> float:
    """Prokhorov distance from ``inf{eps > 0 : P(A) <= Q(A^eps) + eps for all A}``.

    ``A^eps`` is the open enlargement.  Exponential in the space size.
    """
    _check_pair(P, Q)
    size = P.size
    if size > ORACLE_CAP:
        raise TooLargeForOracle(f"{size} points exceeds the oracle limit of {ORACLE_CAP}")
    dist = P.space.dist
    subsets = ((np.arange(2**size)[:, None] >> np.arange(size)) & 1).astype(float)
    p_mass = subsets @ P.w
    D = np.concatenate([[0.0], P.space.distinct_distances()])
    best = math.inf
    for k in range(len(D)):
        # on (D_k, D_{k+1}] the open enlargement is fixed; D_{k+1} is a member
        probe = D[k + 1] if k + 1 < len(D) else D[k] + 1.0
        upper = D[k + 1] if k + 1 < len(D) else math.inf
        near = (dist < probe).astype(float)
        enlarged = (subsets @ near) > 0
        gap = float(np.max(p_mass - enlarged @ Q.w))
        cand = max(D[k], gap)
        if cand <= upper:
            best = min(best, cand)
    return float(best)
