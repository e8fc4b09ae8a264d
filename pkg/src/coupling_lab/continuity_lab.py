"""Experiments on how couplings and optimal values move with the marginals.

:func:`transfer_coupling` carries a coupling of (mu, nu) over to perturbed
marginals by gluing it between two Prokhorov-optimal couplings, and
certifies that the result is within ``d_P(mu', mu) + d_P(nu, nu')`` of the
original.  The remaining functions probe limits of feasible couplings, the
convergence of optimal values under empirical sampling, and the stability of
the set of optimal plans.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from .coupling import SIGMA, Coupling, glue, glue4, marginalize, permute
from .errors import EmptySequence, SpaceMismatch
from .metric_measure import (
    DiscreteMeasure,
    SampleStream,
    empirical_sample,
    product_space,
    total_variation,
)
from .prokhorov import TAU_CERT, min_far_mass, prokhorov_distance
from .transport import enumerate_optimal_vertices, value

TAU_FEAS = 1e-10


@dataclass(frozen=True, eq=False)
class PerturbationCertificate:
    pi_n: Coupling
    eps_n: float
    delta_n: float
    d_bound: float
    d_actual: float
    v1: Coupling
    v2: Coupling
    # the sigma-image of the 4-axis gluing, as a coupling of (pi_n, pi)
    glued: Coupling
    glued_far_mass: float

    @property
    def holds(self) -> bool:
        return self.d_actual <= self.d_bound + TAU_CERT


def _witness(P: DiscreteMeasure, Q: DiscreteMeasure, slack: float):
    """Level and coupling with mass at most the level on the far set."""
    cert = prokhorov_distance(P, Q)
    if slack == 0:
        return cert.epsilon, cert.witness_coupling
    level = cert.epsilon + slack
    _, plan = min_far_mass(P, Q, level)
    return level, plan


def transfer_coupling(pi: Coupling, mu_new: DiscreteMeasure, nu_new: DiscreteMeasure,
                      slack: float = 0.0) -> PerturbationCertificate:
    """Build a coupling of (mu_new, nu_new) close to ``pi``.

    ``slack`` is added to both Prokhorov levels before choosing witnesses;
    0 uses the exact optimum, ``1/n`` mirrors choosing levels within 1/n of
    the infimum.
    """
    mu, nu = pi.rows, pi.cols
    if mu_new.space != mu.space or nu_new.space != nu.space:
        raise SpaceMismatch("new marginals must live on the coupling's spaces")
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    eps, v1 = _witness(mu_new, mu, slack)      # v1 couples (mu_new, mu)
    m1 = glue(v1, pi)                           # axes (x1, x2, y1)
    delta, v2 = _witness(nu, nu_new, slack)    # v2 couples (nu, nu_new)
    mn = glue4(m1, v2)                          # axes (x1, x2, y1, y2)
    mt = permute(mn, SIGMA)                     # axes (x1, y2, x2, y1)
    pi_n = Coupling(mu_new, nu_new, marginalize(mt, (0, 1)).mass, tol=TAU_FEAS)

    XY = product_space(mu.space, nu.space)
    k = XY.size
    glued = Coupling.from_mass(mt.mass.reshape(k, k), XY, XY, tol=TAU_FEAS)
    bound = eps + delta
    glued_far = math.fsum(glued.mass[XY.dist > bound])
    d_actual = prokhorov_distance(pi_n.as_measure(XY), pi.as_measure(XY)).epsilon
    cert = PerturbationCertificate(pi_n, eps, delta, bound, d_actual, v1, v2, glued, glued_far)
    if not cert.holds or glued_far > bound + TAU_CERT:
        raise AssertionError(
            f"certified bound failed: d_P={d_actual!r}, eps+delta={bound!r}, far={glued_far!r}"
        )
    return cert


@dataclass(frozen=True)
class UHCReport:
    limit_mass: np.ndarray
    marginal_deviation: float
    test_deviation: float
    marginal_gap: float
    l1_gap: float
    ok: bool


def _test_family(size: int) -> np.ndarray:
    """Indicators of each point, a ramp and an alternating sign; all bounded by 1."""
    ramp = np.arange(size) / max(size - 1, 1)
    alt = (-1.0) ** np.arange(size)
    return np.vstack([np.eye(size), ramp, alt])


def uhc_probe(seq: Sequence, limit, tail_start: int | None = None,
              tol: float = 1e-12, check: bool = True) -> UHCReport:
    """Average the tail of a sequence of couplings and test its marginals.

    ``seq`` holds ``(mu_k, nu_k, pi_k)`` triples and ``limit`` is ``(mu, nu)``.
    Deviations of the averaged coupling must not exceed the marginals' own
    distance to the limit over the same tail.
    """
    if not seq:
        raise EmptySequence("uhc_probe needs at least one coupling")
    mu, nu = limit
    K = len(seq) // 2 if tail_start is None else tail_start
    tail = seq[K:]
    if not tail:
        raise EmptySequence(f"tail starting at {K} is empty")
    for mk, nk, pk in tail:
        if mk.space != mu.space or nk.space != nu.space or pk.shape != (mu.size, nu.size):
            raise SpaceMismatch("sequence must live on the limit's spaces")
    bar = np.mean([pk.mass for _, _, pk in tail], axis=0)
    rows, cols = bar.sum(axis=1), bar.sum(axis=0)
    marg_dev = max(np.max(np.abs(rows - mu.w)), np.max(np.abs(cols - nu.w)))
    fx, fy = _test_family(mu.size), _test_family(nu.size)
    test_dev = max(np.max(np.abs(fx @ rows - fx @ mu.w)), np.max(np.abs(fy @ cols - fy @ nu.w)))
    sup_gap = max(max(np.max(np.abs(mk.w - mu.w)), np.max(np.abs(nk.w - nu.w)))
                  for mk, nk, _ in tail)
    l1_gap = max(max(np.sum(np.abs(mk.w - mu.w)), np.sum(np.abs(nk.w - nu.w)))
                 for mk, nk, _ in tail)
    ok = marg_dev <= sup_gap + tol and test_dev <= l1_gap + tol
    if check and not ok:
        raise AssertionError(
            f"limit marginals deviate by {marg_dev:.3e} / {test_dev:.3e}, "
            f"gaps {sup_gap:.3e} / {l1_gap:.3e}"
        )
    return UHCReport(bar, float(marg_dev), float(test_dev), float(sup_gap), float(l1_gap), ok)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    seed: int
    V_n: float
    V: float
    abs_err: float
    d_mu: float
    d_nu: float

    def __post_init__(self):
        if self.abs_err != abs(self.V_n - self.V):
            raise ValueError(f"abs_err {self.abs_err!r} != |V_n - V| for n={self.n}, seed={self.seed}")


CSV_HEADER = [f.name for f in fields(ConvergenceRow)]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([repr(x) for x in astuple(r)])
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for rec in reader:
        n, seed, *vals = rec
        out.append(ConvergenceRow(int(n), int(seed), *map(float, vals)))
    return out


def _convergence_row(mu, nu, phi, V, n, t, seed):
    mu_n = empirical_sample(mu, n, SampleStream(seed, 2 * t))
    nu_n = empirical_sample(nu, n, SampleStream(seed, 2 * t + 1))
    V_n = value(mu_n, nu_n, phi)
    return ConvergenceRow(
        n, seed, V_n, V, abs(V_n - V),
        prokhorov_distance(mu_n, mu).epsilon,
        prokhorov_distance(nu_n, nu).epsilon,
    )


def value_convergence(mu: DiscreteMeasure, nu: DiscreteMeasure, phi, n_grid, seeds,
                      workers: int = 1) -> list:
    """Optimal values of empirical marginals against the true optimal value.

    For grid position ``t`` the samples of mu and nu come from
    ``SampleStream(seed, 2t)`` and ``SampleStream(seed, 2t + 1)``.  Rows are
    sorted by ``(n, seed)``.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    V = value(mu, nu, phi)
    jobs = [(n, t, int(s)) for s in seeds for t, n in enumerate(n_grid)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda j: _convergence_row(mu, nu, phi, V, *j), jobs))
    else:
        rows = [_convergence_row(mu, nu, phi, V, *j) for j in jobs]
    return sorted(rows, key=lambda r: (r.n, r.seed))


def median_errors(rows) -> dict:
    """Median ``abs_err`` per sample size."""
    by_n = {}
    for r in rows:
        by_n.setdefault(r.n, []).append(r.abs_err)
    return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def hull_distance(x: np.ndarray, points: Sequence[np.ndarray]) -> float:
    """Euclidean distance from ``x`` to the convex hull of ``points``.

    Nonnegative least squares with a heavily weighted sum-to-one row; the
    weights are then renormalized so the returned distance is attained by an
    actual hull point.
    """
    A = np.column_stack([np.ravel(p) for p in points])
    weight = 1e4
    A_aug = np.vstack([A, weight * np.ones(A.shape[1])])
    b_aug = np.concatenate([np.ravel(x), [weight]])
    lam, _ = nnls(A_aug, b_aug)
    lam = lam / lam.sum()
    return float(np.linalg.norm(A @ lam - np.ravel(x)))


def perturb_measure(m: DiscreteMeasure, scale: float, rng: np.random.Generator) -> DiscreteMeasure:
    """Mix ``m`` with a random measure: total variation moves by at most ``scale``."""
    rho = rng.dirichlet(np.ones(m.size))
    w = (1 - scale) * m.w + scale * rho
    return DiscreteMeasure(m.space, w / math.fsum(w))


@dataclass(frozen=True)
class ArgmaxProbeRow:
    scale: float
    seed: int
    distance: float
    tv_mu: float
    tv_nu: float
    n_optimal: int


@dataclass(frozen=True)
class ArgmaxProbeReport:
    rows: list

    def max_by_scale(self) -> dict:
        out = {}
        for r in self.rows:
            out[r.scale] = max(out.get(r.scale, 0.0), r.distance)
        return dict(sorted(out.items(), reverse=True))


def argmax_stability_probe(mu: DiscreteMeasure, nu: DiscreteMeasure, phi, perturb_scale,
                           seeds) -> ArgmaxProbeReport:
    """Distance from perturbed optimal vertices to the unperturbed optimal set.

    ``perturb_scale`` may be a single scale or a sequence of them.  For each
    scale and seed the marginals are perturbed by :func:`perturb_measure`, the
    perturbed problem's optimal vertices are enumerated, and the largest
    distance to the convex hull of the original optimal vertices is recorded.
    """
    scales = [float(perturb_scale)] if np.isscalar(perturb_scale) else [float(s) for s in perturb_scale]
    base = [c.mass for c in enumerate_optimal_vertices(mu, nu, phi)]
    rows = []
    for scale in scales:
        for seed in seeds:
            rng = SampleStream(int(seed), 0).generator()
            mu_p = perturb_measure(mu, scale, rng)
            nu_p = perturb_measure(nu, scale, rng)
            opt = enumerate_optimal_vertices(mu_p, nu_p, phi)
            dist = max(hull_distance(c.mass, base) for c in opt)
            rows.append(ArgmaxProbeRow(scale, int(seed), dist, total_variation(mu, mu_p),
                                       total_variation(nu, nu_p), len(opt)))
    return ArgmaxProbeReport(rows)
