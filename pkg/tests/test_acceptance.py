"""Acceptance criteria, one test per criterion.

Each criterion builds its random instances from MASTER_SEED, writes a CSV
artifact, and reports one PASS/FAIL line (collected by the terminal-summary
hook in conftest.py).  Criterion 7 re-runs 1-6 and compares the artifacts
byte for byte.

Run alone with ``pytest tests/test_acceptance.py``.
"""
import csv
import io
import time

import numpy as np
import pytest

from coupling_lab.cli import trial_seed
from coupling_lab.continuity_lab import median_errors, rows_to_csv, transfer_coupling, value_convergence
from coupling_lab.coupling import Coupling, glue, glue4
from coupling_lab.matching import equivalence_audit, is_stable, Outcome
from coupling_lab.metric_measure import DiscreteMeasure, euclidean_space, line_space
from coupling_lab.prokhorov import prokhorov_direct, prokhorov_distance
from coupling_lab.transport import solve_primal, solve_transport

MASTER_SEED = 20261016
RESULTS = []

pytestmark = pytest.mark.acceptance


def instance_rng(criterion, k):
    return np.random.default_rng(np.random.SeedSequence(MASTER_SEED, spawn_key=(criterion, k)))


def rand_space(rng, size):
    return euclidean_space(rng.random((size, 2)))


def rand_measure(rng, space, zero_prob=0.2):
    w = rng.dirichlet(np.ones(space.size))
    keep = rng.random(space.size) >= zero_prob
    keep[rng.integers(space.size)] = True
    w = np.where(keep, w, 0.0)
    return DiscreteMeasure(space, w / w.sum())


def rand_coupling(rng, mu, nu):
    plan = solve_primal(mu, nu, rng.normal(size=(mu.size, nu.size))).plan.mass
    lam = rng.random()
    return Coupling(mu, nu, lam * plan + (1 - lam) * np.outer(mu.w, nu.w))


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def report(number, title, ok, detail, elapsed, limit):
    line = (f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}; "
            f"{elapsed:.1f}s (limit {limit}s)")
    RESULTS.append(line)
    print(line)


def axis_sum(mass, keep):
    drop = tuple(a for a in range(mass.ndim) if a not in keep)
    return mass.sum(axis=drop)


# -- criterion bodies: each returns (ok, detail, csv_text) ------------------------

def gluing_exactness():
    rows, worst = [], 0.0
    for k in range(100):
        rng = instance_rng(1, k)
        spaces = [rand_space(rng, int(s)) for s in rng.integers(1, 7, size=4)]
        ms = [rand_measure(rng, S) for S in spaces]
        v1, pi, v2 = (rand_coupling(rng, a, b) for a, b in zip(ms, ms[1:]))
        m3 = glue(v1, pi)
        m4 = glue4(m3, v2)
        devs = [
            np.max(np.abs(axis_sum(m3.mass, (0, 1)) - v1.mass)),
            np.max(np.abs(axis_sum(m3.mass, (1, 2)) - pi.mass)),
            np.max(np.abs(axis_sum(m4.mass, (0, 1)) - v1.mass)),
            np.max(np.abs(axis_sum(m4.mass, (1, 2)) - pi.mass)),
            np.max(np.abs(axis_sum(m4.mass, (2, 3)) - v2.mass)),
        ]
        dev = float(max(devs))
        worst = max(worst, dev)
        rows.append((k, "x".join(str(S.size) for S in spaces), dev))
    return worst <= 1e-12, f"max marginal deviation {worst:.2e} <= 1e-12", \
        to_csv(["instance", "sizes", "max_dev"], rows)


def prokhorov_equivalence():
    rows, worst_eq, worst_sym, worst_tri = [], 0.0, 0.0, -np.inf
    for k in range(100):
        rng = instance_rng(2, k)
        S = rand_space(rng, int(rng.integers(1, 7)))
        P, Q, R = (rand_measure(rng, S) for _ in range(3))
        d_pq = prokhorov_distance(P, Q).epsilon
        eq = abs(d_pq - prokhorov_direct(P, Q))
        sym = abs(d_pq - prokhorov_distance(Q, P).epsilon)
        tri = prokhorov_distance(P, R).epsilon - d_pq - prokhorov_distance(Q, R).epsilon
        worst_eq, worst_sym, worst_tri = max(worst_eq, eq), max(worst_sym, sym), max(worst_tri, tri)
        rows.append((k, S.size, d_pq, eq, sym, tri))
    ok = worst_eq <= 1e-9 and worst_sym <= 1e-12 and worst_tri <= 1e-9
    detail = (f"|coupling - direct| max {worst_eq:.2e}, asymmetry max {worst_sym:.2e}, "
              f"triangle excess max {worst_tri:.2e}")
    return ok, detail, to_csv(["instance", "size", "d_P", "oracle_gap", "asymmetry", "triangle_excess"], rows)


def certified_bound():
    rows, worst, fails = [], -np.inf, 0
    for k in range(200):
        rng = instance_rng(3, k)
        X, Y = rand_space(rng, int(rng.integers(1, 6))), rand_space(rng, int(rng.integers(1, 6)))
        mu, nu = rand_measure(rng, X), rand_measure(rng, Y)
        pi = rand_coupling(rng, mu, nu)
        mu_new, nu_new = rand_measure(rng, X), rand_measure(rng, Y)
        for mode, slack in (("zero", 0.0), ("paper", 1.0 / (k + 1))):
            try:
                cert = transfer_coupling(pi, mu_new, nu_new, slack=slack)
                Coupling(mu_new, nu_new, cert.pi_n.mass, tol=1e-10)
            except AssertionError:
                fails += 1
                continue
            excess = cert.d_actual - cert.d_bound
            worst = max(worst, excess)
            rows.append((k, mode, cert.eps_n, cert.delta_n, cert.d_actual, excess))
    ok = fails == 0 and worst <= 1e-9
    return ok, f"max d_P(pi_n, pi) - (eps_n + delta_n) = {worst:.2e}, failures {fails}", \
        to_csv(["instance", "slack_mode", "eps_n", "delta_n", "d_actual", "excess"], rows)


def duality_and_stability():
    rows, worst_gap, blocking = [], 0.0, 0
    for k in range(500):
        rng = instance_rng(4, k)
        m, n = (int(s) for s in rng.integers(1, 11, size=2))
        mu, nu = rand_measure(rng, rand_space(rng, m)), rand_measure(rng, rand_space(rng, n))
        phi = rng.normal(size=(m, n))
        opt, pot = solve_transport(mu, nu, phi)
        gap = abs(pot.value(mu, nu) - opt.value)
        nb = len(is_stable(Outcome(opt.plan, pot), phi, tau_dual=1e-9).blocking_pairs)
        worst_gap, blocking = max(worst_gap, gap), blocking + nb
        rows.append((k, m, n, opt.value, gap, nb))
    ok = worst_gap <= 1e-8 and blocking == 0
    return ok, f"max duality gap {worst_gap:.2e}, blocking pairs {blocking}", \
        to_csv(["instance", "m", "n", "V", "gap", "blocking_pairs"], rows)


def converse_audit():
    rows, bad = [], 0
    for k in range(100):
        rng = instance_rng(5, k)
        m, n = (int(s) for s in rng.integers(1, 5, size=2))
        mu, nu = rand_measure(rng, rand_space(rng, m)), rand_measure(rng, rand_space(rng, n))
        rep = equivalence_audit(mu, nu, rng.normal(size=(m, n)))
        for a in rep.vertices:
            ok_vertex = (a.optimal and a.stable_payoff) or \
                (not a.optimal and a.surplus < rep.value - 1e-9 and a.unstable_by_audit)
            bad += not ok_vertex
        rows.append((k, m, n, rep.value, len(rep.vertices), rep.n_optimal, int(rep.consistent)))
    return bad == 0, f"{sum(r[4] for r in rows)} vertices audited, {bad} inconsistent", \
        to_csv(["instance", "m", "n", "V", "vertices", "optimal", "consistent"], rows)


N_GRID = [50, 200, 1000, 5000]


def convergence_instance():
    """Fixed 20-point marginals on [0, 1] with quadratic surplus -(x - y)^2."""
    x = np.linspace(0, 1, 20)
    S = line_space(x)
    mu_w = 1.0 + np.arange(20)
    nu_w = 1.0 + 0.5 * np.cos(np.arange(20))
    mu = DiscreteMeasure(S, mu_w / mu_w.sum())
    nu = DiscreteMeasure(S, nu_w / nu_w.sum())
    phi = -np.subtract.outer(x, x) ** 2
    return mu, nu, phi


def value_convergence_check():
    mu, nu, phi = convergence_instance()
    seeds = [trial_seed(MASTER_SEED, t) for t in range(20)]
    rows = value_convergence(mu, nu, phi, N_GRID, seeds)
    med = median_errors(rows)
    seq = [med[n] for n in N_GRID]
    spread = float(phi.max() - phi.min())
    monotone = all(a >= b for a, b in zip(seq, seq[1:]))
    ok = monotone and seq[-1] <= 0.05 * spread
    detail = "median |V_n - V| " + ", ".join(f"n={n}: {v:.2e}" for n, v in zip(N_GRID, seq)) + \
        f"; bound at n=5000: {0.05 * spread:.2e}"
    return ok, detail, rows_to_csv(rows)


CRITERIA = {
    1: ("gluing exactness", gluing_exactness, 5),
    2: ("Prokhorov oracle equivalence and metric axioms", prokhorov_equivalence, 30),
    3: ("certified transfer bound, both slack modes", certified_bound, 60),
    4: ("strong duality and stability", duality_and_stability, 30),
    5: ("stability/optimality converse audit", converse_audit, 30),
    6: ("empirical value convergence", value_convergence_check, 120),
}


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    return root, {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, artifacts):
    root, store = artifacts
    title, body, limit = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail, text = body()
    elapsed = time.perf_counter() - t0
    (root / f"criterion_{number}.csv").write_text(text)
    store[number] = text.encode()
    report(number, title, ok and elapsed < limit, detail, elapsed, limit)
    assert ok, detail
    assert elapsed < limit, f"took {elapsed:.1f}s, limit {limit}s"


def test_criterion_7_determinism(artifacts):
    root, store = artifacts
    t0 = time.perf_counter()
    differing = []
    for number, (_, body, _) in sorted(CRITERIA.items()):
        first = store.get(number)
        if first is None:
            first = body()[2].encode()
        if body()[2].encode() != first:
            differing.append(number)
    ok = not differing
    report(7, "byte-identical artifacts on re-run", ok,
           f"criteria with differing CSV: {differing or 'none'}", time.perf_counter() - t0, "-")
    assert ok
