"""Exact surplus maximization over couplings of two discrete marginals.

The solver is a primal network simplex on the complete bipartite
transportation graph.  A basis is a spanning tree with ``m + n - 1`` cells;
node potentials are recomputed on the tree each pivot.  Bland's rule (lowest
flat cell index ``i * n + j`` for both entering and leaving arcs) makes it
terminate on degenerate instances, which 0/1 surplus grids and empirical
marginals with empty cells produce constantly.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coupling import Coupling
from .errors import ShapeMismatch, SolverFailure, TooLargeForEnumeration
from .metric_measure import TAU_MASS, DiscreteMeasure

TAU_OBJ = 1e-9
TAU_DUAL = 1e-9
TAU_GAP = 1e-8
TAU_OPT = 1e-9
TAU_SUPP = 1e-12
ENUM_CAP = 16


@dataclass(frozen=True, eq=False)
class SurplusGrid:
    """Surplus ``values[i, j]`` generated by pairing x_i with y_j."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ShapeMismatch(f"surplus grid must be 2-d, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("surplus grid entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    @property
    def spread(self) -> float:
        return float(self.values.max() - self.values.min())


def as_grid(phi) -> SurplusGrid:
    return phi if isinstance(phi, SurplusGrid) else SurplusGrid(phi)


@dataclass(frozen=True, eq=False)
class Potentials:
    """Dual pair (u over X, v over Y); also the payoffs of an outcome."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("u", "v"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return math.fsum(self.u * mu.w) + math.fsum(self.v * nu.w)

    def slack(self, phi) -> np.ndarray:
        """``u[i] + v[j] - phi[i, j]``; nonnegative everywhere iff dual feasible."""
        return self.u[:, None] + self.v[None, :] - as_grid(phi).values

    def shifted(self, c: float) -> "Potentials":
        return Potentials(self.u + c, self.v - c)


@dataclass(frozen=True, eq=False)
class OptimalPlan:
    plan: Coupling
    value: float
    status: str = "optimal"
    pivots: int = 0


def _check_shapes(mu, nu, phi: SurplusGrid):
    if phi.shape != (mu.size, nu.size):
        raise ShapeMismatch(f"surplus grid {phi.shape} vs marginals {(mu.size, nu.size)}")


def evaluate_surplus(pi: Coupling, phi) -> float:
    """Total surplus ``sum_ij mass[i, j] * phi[i, j]``, row-major, compensated."""
    phi = as_grid(phi)
    if phi.shape != pi.shape:
        raise ShapeMismatch(f"surplus grid {phi.shape} vs coupling {pi.shape}")
    return math.fsum((pi.mass * phi.values).ravel())


class _Tree:
    """Spanning-tree basis of the m x n transportation graph.

    Row i is node i, column j is node m + j.
    """

    def __init__(self, m, n, cells):
        self.m, self.n = m, n
        self.cells = set(cells)

    def adjacency(self):
        adj = [[] for _ in range(self.m + self.n)]
        for i, j in self.cells:
            adj[i].append(self.m + j)
            adj[self.m + j].append(i)
        return adj

    def potentials(self, phi):
        """Solve u[i] + v[j] = phi[i, j] on the tree with u[0] = 0."""
        m = self.m
        adj = self.adjacency()
        pot = np.full(m + self.n, np.nan)
        pot[0] = 0.0
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for b in adj[a]:
                if np.isnan(pot[b]):
                    i, j = (a, b - m) if a < m else (b, a - m)
                    pot[b] = phi[i, j] - pot[a]
                    queue.append(b)
        return pot[:m], pot[m:]

    def path(self, src, dst):
        """Node path from src to dst in the tree."""
        adj = self.adjacency()
        parent = {src: None}
        queue = deque([src])
        while queue:
            a = queue.popleft()
            if a == dst:
                break
            for b in adj[a]:
                if b not in parent:
                    parent[b] = a
                    queue.append(b)
        out = [dst]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out[::-1]


def _northwest_corner(a, b):
    m, n = len(a), len(b)
    a, b = a.copy(), b.copy()
    flow = np.zeros((m, n))
    cells = []
    i = j = 0
    while True:
        cells.append((i, j))
        if i == m - 1 and j == n - 1:
            flow[i, j] = max(min(a[i], b[j]), 0.0)
            break
        if j == n - 1 or (i < m - 1 and a[i] <= b[j]):
            x = a[i]
            flow[i, j] = x
            b[j] -= x
            a[i] = 0.0
            i += 1
        else:
            x = b[j]
            flow[i, j] = x
            a[i] -= x
            b[j] = 0.0
            j += 1
    return flow, cells


def _network_simplex(a, b, phi, max_pivots=None):
    """Maximize ``sum flow * phi`` subject to row sums a, column sums b.

    Returns (flow, u, v, pivots) with the terminal basis potentials.
    """
    m, n = phi.shape
    flow, cells = _northwest_corner(np.asarray(a, float), np.asarray(b, float))
    tree = _Tree(m, n, cells)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(phi))))
    if max_pivots is None:
        max_pivots = 50 * (m * n + m + n) + 1000
    pivots = 0
    while True:
        u, v = tree.potentials(phi)
        reduced = phi - u[:, None] - v[None, :]
        improving = np.flatnonzero(reduced.ravel() > tol)
        if improving.size == 0:
            break
        if pivots >= max_pivots:
            raise SolverFailure(f"no convergence after {pivots} pivots")
        ei, ej = divmod(int(improving[0]), n)
        # cycle: entering (ei, ej) gains, then alternate along the tree path
        # from column node back to row node ei
        nodes = tree.path(m + ej, ei)
        cycle = []
        for a_node, b_node in zip(nodes, nodes[1:]):
            cycle.append((a_node, b_node - m) if a_node < m else (b_node, a_node - m))
        minus = cycle[0::2]
        plus = cycle[1::2]
        theta = min(flow[c] for c in minus)
        leave = min((c for c in minus if flow[c] == theta), key=lambda c: c[0] * n + c[1])
        if theta > 0:
            for c in minus:
                flow[c] -= theta
            for c in plus:
                flow[c] += theta
            flow[ei, ej] += theta
        flow[leave] = 0.0
        tree.cells.remove(leave)
        tree.cells.add((ei, ej))
        pivots += 1
    np.maximum(flow, 0.0, out=flow)
    return flow, u, v, pivots


def _solve(mu, nu, phi):
    phi = as_grid(phi)
    _check_shapes(mu, nu, phi)
    flow, u, v, pivots = _network_simplex(mu.w, nu.w, phi.values)
    plan = Coupling(mu, nu, flow, tol=max(TAU_MASS, 1e-10))
    return plan, Potentials(u, v), pivots


def solve_primal(mu: DiscreteMeasure, nu: DiscreteMeasure, phi) -> OptimalPlan:
    """A coupling of ``mu`` and ``nu`` with maximal total surplus."""
    plan, _, pivots = _solve(mu, nu, phi)
    return OptimalPlan(plan, evaluate_surplus(plan, phi), pivots=pivots)


def solve_dual(mu: DiscreteMeasure, nu: DiscreteMeasure, phi) -> Potentials:
    """Optimal potentials, normalized so that ``u[0] == 0``."""
    return _solve(mu, nu, phi)[1]


def solve_transport(mu, nu, phi):
    """Primal plan and dual potentials from one solver run."""
    plan, pot, pivots = _solve(mu, nu, phi)
    return OptimalPlan(plan, evaluate_surplus(plan, phi), pivots=pivots), pot


def value(mu: DiscreteMeasure, nu: DiscreteMeasure, phi) -> float:
    """The optimal total surplus V(mu, nu)."""
    return solve_primal(mu, nu, phi).value


@lru_cache(maxsize=None)
def _tree_operators(m: int, n: int):
    """Every spanning tree of K_{m,n} with the map from marginals to its flow.

    Returns ``(ops, cells)`` where ``ops[t] @ concat(a, b[:-1])`` is the flow on
    ``cells[t]``.
    """
    k = m + n - 1
    all_cells = [(i, j) for i in range(m) for j in range(n)]
    ops, trees = [], []
    for subset in itertools.combinations(range(m * n), k):
        parent = list(range(m + n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for c in subset:
            i, j = all_cells[c]
            ri, rj = find(i), find(m + j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if not ok:
            continue
        A = np.zeros((k, k))
        for col, c in enumerate(subset):
            i, j = all_cells[c]
            A[i, col] = 1.0
            if j < n - 1:
                A[m + j, col] = 1.0
        ops.append(np.rint(np.linalg.inv(A)))
        trees.append(subset)
    return np.array(ops), np.array(trees)


def transportation_vertices(mu: DiscreteMeasure, nu: DiscreteMeasure, cap: int = ENUM_CAP):
    """All vertices of the transportation polytope, as mass arrays.

    Every vertex is the unique flow on some spanning-tree basis; each tree is
    solved, infeasible ones dropped, duplicates (degenerate bases) merged.
    """
    m, n = mu.size, nu.size
    if m * n > cap:
        raise TooLargeForEnumeration(f"{m}x{n} grid exceeds the {cap}-cell limit")
    ops, trees = _tree_operators(m, n)
    rhs = np.concatenate([mu.w, nu.w[:-1]])
    flows = ops @ rhs
    feasible = np.all(flows >= -1e-13, axis=1)
    out = []
    seen = set()
    for t in np.flatnonzero(feasible):
        x = np.zeros(m * n)
        x[trees[t]] = np.maximum(flows[t], 0.0)
        key = tuple(np.round(x, 12))
        if key in seen:
            continue
        seen.add(key)
        out.append(x.reshape(m, n))
    return out


def enumerate_optimal_vertices(mu: DiscreteMeasure, nu: DiscreteMeasure, phi,
                               tau: float = TAU_OPT):
    """Vertex couplings whose surplus is within ``tau`` of the optimum."""
    phi = as_grid(phi)
    _check_shapes(mu, nu, phi)
    verts = [Coupling(mu, nu, x, tol=1e-10) for x in transportation_vertices(mu, nu)]
    values = [evaluate_surplus(c, phi) for c in verts]
    best = value(mu, nu, phi)
    return [c for c, val in zip(verts, values) if val >= best - tau]
