"""Assignment game with transferable utility on finite type spaces.

An outcome is an assignment (a coupling) together with payoffs ``(u, v)``.
Payoffs must split the surplus exactly on every matched pair, and the outcome
is stable when no pair of types could jointly earn more than they receive.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coupling import Coupling
from .errors import ShapeMismatch
from .metric_measure import DiscreteMeasure
from .transport import (
    TAU_DUAL,
    TAU_GAP,
    TAU_OPT,
    TAU_SUPP,
    Potentials,
    as_grid,
    evaluate_surplus,
    solve_transport,
    transportation_vertices,
)


@dataclass(frozen=True)
class PayoffCheck:
    """Matched cells ``(i, j, u_i + v_j - phi_ij)`` where the split is off."""

    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class StabilityCheck:
    """Blocking pairs ``(i, j, deficit)`` with ``deficit = phi_ij - u_i - v_j``."""

    blocking_pairs: list = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return not self.blocking_pairs


@dataclass(frozen=True, eq=False)
class Outcome:
    plan: Coupling
    payoff: Potentials

    def validate(self, phi, tau_dual: float = TAU_DUAL, tau_supp: float = TAU_SUPP):
        check = check_payoff(self.plan, self.payoff, phi, tau_dual, tau_supp)
        if not check.valid:
            raise ValueError(f"payoff does not split surplus on {len(check.violations)} matched cells")
        return self


def _shape(pay: Potentials, phi):
    phi = as_grid(phi)
    if phi.shape != (pay.u.size, pay.v.size):
        raise ShapeMismatch(f"payoffs {(pay.u.size, pay.v.size)} vs surplus grid {phi.shape}")
    return phi


def check_payoff(plan: Coupling, pay: Potentials, phi, tau_dual: float = TAU_DUAL,
                 tau_supp: float = TAU_SUPP) -> PayoffCheck:
    """Cells with mass above ``tau_supp`` where ``u_i + v_j != phi_ij`` beyond ``tau_dual``."""
    phi = _shape(pay, phi)
    if plan.shape != phi.shape:
        raise ShapeMismatch(f"plan {plan.shape} vs surplus grid {phi.shape}")
    gap = pay.slack(phi)
    bad = (plan.mass > tau_supp) & (np.abs(gap) > tau_dual)
    return PayoffCheck([(int(i), int(j), float(gap[i, j])) for i, j in np.argwhere(bad)])


def is_stable(outcome: Outcome, phi, tau_dual: float = TAU_DUAL) -> StabilityCheck:
    """Every pair ``(i, j)`` with ``u_i + v_j < phi_ij - tau_dual`` blocks."""
    phi = _shape(outcome.payoff, phi)
    deficit = -outcome.payoff.slack(phi)
    bad = deficit > tau_dual
    return StabilityCheck([(int(i), int(j), float(deficit[i, j])) for i, j in np.argwhere(bad)])


def stable_matching_exists(mu: DiscreteMeasure, nu: DiscreteMeasure, phi) -> Outcome:
    """A stable outcome: the surplus-maximizing plan with the optimal duals as payoffs."""
    opt, pot = solve_transport(mu, nu, phi)
    outcome = Outcome(opt.plan, pot)
    if not check_payoff(opt.plan, pot, phi).valid or not is_stable(outcome, phi).stable:
        raise AssertionError("optimal plan and duals failed to form a stable outcome")
    gap = abs(pot.value(mu, nu) - opt.value)
    if gap > TAU_GAP:
        raise AssertionError(f"duality gap {gap:.3e} exceeds {TAU_GAP}")
    return outcome


@dataclass(frozen=True)
class VertexAudit:
    plan: Coupling
    surplus: float
    optimal: bool
    # optimal vertices: the optimal duals form a stable payoff for this plan
    stable_payoff: bool
    # non-optimal vertices: surplus < V - tau, so no stable payoff can exist
    unstable_by_audit: bool


@dataclass(frozen=True)
class EquivalenceReport:
    value: float
    payoff: Potentials
    vertices: list

    @property
    def consistent(self) -> bool:
        """Every vertex is either optimal and stable, or non-optimal and refuted."""
        return all(
            (a.optimal and a.stable_payoff) or (not a.optimal and a.unstable_by_audit)
            for a in self.vertices
        )

    @property
    def n_optimal(self) -> int:
        return sum(a.optimal for a in self.vertices)


def equivalence_audit(mu: DiscreteMeasure, nu: DiscreteMeasure, phi,
                      tau_opt: float = TAU_OPT) -> EquivalenceReport:
    """Check stability against optimality on every vertex of the coupling polytope.

    Optimal vertices must accept the optimal duals as a stable payoff.  A
    non-optimal vertex is refuted by surplus alone: a stable payoff for it
    would integrate to its own surplus (equal split on the support) and to at
    least V (it dominates the surplus everywhere, so it is dual feasible).
    """
    phi = as_grid(phi)
    opt, pot = solve_transport(mu, nu, phi)
    V = opt.value
    audits = []
    for x in transportation_vertices(mu, nu):
        plan = Coupling(mu, nu, x, tol=1e-10)
        s = evaluate_surplus(plan, phi)
        optimal = s >= V - tau_opt
        if optimal:
            ok = (check_payoff(plan, pot, phi).valid
                  and is_stable(Outcome(plan, pot), phi).stable)
            audits.append(VertexAudit(plan, s, True, ok, False))
        else:
            audits.append(VertexAudit(plan, s, False, False, s < V - tau_opt))
    return EquivalenceReport(V, pot, audits)


def best_effort_payoff(plan: Coupling, phi) -> Potentials:
    """Some payoff that splits the surplus on the plan's support.

    Solves ``u_i + v_j = phi_ij`` on the support by propagation from each
    component's first row (set to 0); unmatched types get 0.
    """
    phi = as_grid(phi).values
    m, n = plan.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    supp = plan.mass > TAU_SUPP
    for start in range(m):
        if not np.isnan(u[start]):
            continue
        u[start] = 0.0
        stack = [("r", start)]
        while stack:
            kind, a = stack.pop()
            if kind == "r":
                for j in np.flatnonzero(supp[a]):
                    if np.isnan(v[j]):
                        v[j] = phi[a, j] - u[a]
                        stack.append(("c", j))
            else:
                for i in np.flatnonzero(supp[:, a]):
                    if np.isnan(u[i]):
                        u[i] = phi[i, a] - v[a]
                        stack.append(("r", i))
    return Potentials(u, np.nan_to_num(v))

