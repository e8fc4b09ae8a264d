"""Couplings with fixed marginals, marginalization and the gluing construction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CouplingLabError, InvalidMeasure, MarginalMismatch, SizeOverflow
from .metric_measure import (
    TAU_MASS,
    DiscreteMeasure,
    MetricSpace,
    discrete_space,
    product_space,
    validate_space,
)

TAU_GLUE = 1e-10
MULTI_CAP = 10**7

# sigma(x1, x2, y1, y2) = (x1, y2, x2, y1): new axis k holds old axis SIGMA[k]
SIGMA = (0, 3, 1, 2)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint mass on X x Y whose row and column sums are ``rows`` and ``cols``."""

    rows: DiscreteMeasure
    cols: DiscreteMeasure
    mass: np.ndarray
    tol: float = field(default=TAU_MASS, repr=False)

    def __post_init__(self):
        mass = _readonly(self.mass)
        object.__setattr__(self, "mass", mass)
        if mass.shape != (self.rows.size, self.cols.size):
            raise InvalidMeasure(
                f"mass has shape {mass.shape}, marginals need "
                f"{(self.rows.size, self.cols.size)}"
            )
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise InvalidMeasure("coupling mass must be finite and nonnegative")
        row_err = np.max(np.abs(mass.sum(axis=1) - self.rows.w))
        col_err = np.max(np.abs(mass.sum(axis=0) - self.cols.w))
        if max(row_err, col_err) > self.tol:
            raise InvalidMeasure(
                f"coupling marginals off by {max(row_err, col_err):.3e} (tol {self.tol:.1e})"
            )

    @classmethod
    def from_mass(cls, mass, X: MetricSpace, Y: MetricSpace, tol: float = TAU_MASS):
        """Build a coupling whose marginals are recomputed from ``mass``."""
        mass = np.asarray(mass, dtype=float)
        rows = DiscreteMeasure(X, mass.sum(axis=1), tol=tol)
        cols = DiscreteMeasure(Y, mass.sum(axis=0), tol=tol)
        return cls(rows, cols, mass, tol=tol)

    @property
    def shape(self):
        return self.mass.shape

    @property
    def X(self) -> MetricSpace:
        return self.rows.space

    @property
    def Y(self) -> MetricSpace:
        return self.cols.space

    def as_measure(self, space: MetricSpace | None = None) -> DiscreteMeasure:
        """The coupling as a measure on the flattened product space."""
        if space is None:
            space = product_space(self.X, self.Y)
        return DiscreteMeasure(space, self.mass.ravel(), tol=max(self.tol, TAU_MASS))

    def support(self, tau: float = 0.0):
        return [tuple(int(k) for k in ij) for ij in np.argwhere(self.mass > tau)]


def product_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Coupling:
    """The independent coupling ``mu (x) nu``."""
    return Coupling(mu, nu, np.outer(mu.w, nu.w))


def identity_coupling(mu: DiscreteMeasure) -> Coupling:
    """Diagonal coupling of ``mu`` with itself."""
    return Coupling(mu, mu, np.diag(mu.w))


def marginal(pi: Coupling, axis: str) -> DiscreteMeasure:
    """Row (``"rows"``) or column (``"cols"``) marginal, recomputed from mass."""
    if axis == "rows":
        return DiscreteMeasure(pi.X, pi.mass.sum(axis=1), tol=max(pi.tol, TAU_MASS))
    if axis == "cols":
        return DiscreteMeasure(pi.Y, pi.mass.sum(axis=0), tol=max(pi.tol, TAU_MASS))
    raise ValueError("axis must be 'rows' or 'cols'")


@dataclass(frozen=True, eq=False)
class MultiCoupling:
    """Joint mass over a product of several finite spaces.

    ``constraints`` maps an increasing tuple of axis indices to the marginal
    array the mass must reproduce on those axes (in that axis order).
    """

    axes: tuple
    mass: np.ndarray
    constraints: dict = field(default_factory=dict)
    tol: float = field(default=TAU_MASS, repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        mass = _readonly(self.mass)
        object.__setattr__(self, "mass", mass)
        if mass.shape != tuple(a.size for a in axes):
            raise InvalidMeasure(f"mass shape {mass.shape} does not match the axes")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise InvalidMeasure("mass must be finite and nonnegative")
        total = math.fsum(mass.ravel())
        if abs(total - 1.0) > self.tol:
            raise InvalidMeasure(f"total mass {total!r} is not 1")
        cons = {}
        for key, arr in self.constraints.items():
            key = tuple(key)
            arr = _readonly(arr)
            got = _sum_to(mass, key)
            err = float(np.max(np.abs(got - arr))) if arr.size else 0.0
            if err > self.tol:
                raise MarginalMismatch(err, what=f"declared marginal on axes {key}")
            cons[key] = arr
        object.__setattr__(self, "constraints", cons)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def marginal_error(self) -> float:
        """Largest sup-norm deviation from any declared marginal."""
        errs = [np.max(np.abs(_sum_to(self.mass, k) - a)) for k, a in self.constraints.items()]
        return float(max(errs, default=0.0))


def _sum_to(mass: np.ndarray, keep) -> np.ndarray:
    keep = tuple(keep)
    drop = tuple(a for a in range(mass.ndim) if a not in keep)
    out = mass.sum(axis=drop) if drop else mass
    # sum leaves kept axes in increasing order; reorder to `keep`
    order = sorted(keep)
    return np.transpose(out, [order.index(k) for k in keep])


def _as_multi(m) -> MultiCoupling:
    if isinstance(m, MultiCoupling):
        return m
    return MultiCoupling((m.X, m.Y), m.mass, {(0, 1): m.mass}, tol=max(m.tol, TAU_MASS))


def _glue_last(first: MultiCoupling, second: Coupling, tol: float) -> MultiCoupling:
    shared_first = _sum_to(first.mass, (first.ndim - 1,))
    shared_second = second.mass.sum(axis=1)
    if shared_first.shape != shared_second.shape:
        raise MarginalMismatch(np.inf, what="shared axis size")
    dev = float(np.max(np.abs(shared_first - shared_second)))
    if dev > tol:
        raise MarginalMismatch(dev)
    n_entries = first.mass.size * second.mass.shape[1]
    if n_entries > MULTI_CAP:
        raise SizeOverflow(f"glued array would have {n_entries} entries, cap is {MULTI_CAP}")
    # conditional of the second coupling given the shared point; zero where unsupported
    cond = np.zeros_like(second.mass)
    pos = shared_second > 0
    cond[pos] = second.mass[pos] / shared_second[pos, None]
    mass = first.mass[..., None] * cond
    k = first.ndim
    constraints = dict(first.constraints)
    constraints[(k - 1, k)] = second.mass
    return MultiCoupling(
        first.axes + (second.Y,), mass, constraints, tol=max(first.tol, TAU_MASS) + dev
    )


def glue(m12, m23: Coupling, tol: float = TAU_GLUE) -> MultiCoupling:
    """Glue two couplings that share a middle marginal.

    Uses the conditionally independent gluing
    ``m(i, j, k) = m12(i, j) * m23(j, k) / v(j)`` with ``m = 0`` where the
    shared marginal ``v`` vanishes.  ``m12`` may itself be a MultiCoupling, in
    which case its last axis is the shared one.
    """
    return _glue_last(_as_multi(m12), m23, tol)


def glue4(m123: MultiCoupling, m34: Coupling, tol: float = TAU_GLUE) -> MultiCoupling:
    """Second gluing step: a 3-axis coupling with a coupling on its third axis."""
    if m123.ndim != 3:
        raise CouplingLabError(f"glue4 expects a 3-axis coupling, got {m123.ndim} axes")
    return _glue_last(m123, m34, tol)


def permute(m: MultiCoupling, perm) -> MultiCoupling:
    """Relabel axes: new axis ``k`` is old axis ``perm[k]``.

    With ``perm = SIGMA`` an atom at (a, b, c, d) moves to (a, d, b, c).
    """
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(m.ndim)):
        raise ValueError(f"{perm} is not a permutation of {m.ndim} axes")
    inv = [perm.index(a) for a in range(m.ndim)]
    constraints = {}
    for key, arr in m.constraints.items():
        new_key = tuple(inv[a] for a in key)
        order = np.argsort(new_key)
        constraints[tuple(np.array(new_key)[order].tolist())] = np.transpose(arr, order)
    return MultiCoupling(
        tuple(m.axes[p] for p in perm), np.transpose(m.mass, perm), constraints, tol=m.tol
    )


def marginalize(m: MultiCoupling, keep):
    """Sum out every axis not in ``keep``; result ordered as ``keep``.

    One kept axis gives a DiscreteMeasure, two give a Coupling, more give a
    MultiCoupling (with no declared constraints).
    """
    keep = tuple(int(k) for k in keep)
    if not keep or len(set(keep)) != len(keep) or not all(0 <= k < m.ndim for k in keep):
        raise ValueError(f"invalid axis selection {keep}")
    out = _sum_to(m.mass, keep)
    tol = max(m.tol, TAU_MASS)
    if len(keep) == 1:
        return DiscreteMeasure(m.axes[keep[0]], out, tol=tol)
    if len(keep) == 2:
        return Coupling.from_mass(out, m.axes[keep[0]], m.axes[keep[1]], tol=tol)
    return MultiCoupling(tuple(m.axes[k] for k in keep), out, tol=tol)


def coupling_to_json(pi: Coupling) -> dict:
    return {"mass": pi.mass.tolist()}


def coupling_from_json(obj: dict, X: MetricSpace | None = None, Y: MetricSpace | None = None,
                       tol: float = TAU_MASS) -> Coupling:
    """Load ``{"mass": [[...]]}``; marginals are always recomputed from mass.

    Spaces come from the arguments, else from optional ``rows_dist`` /
    ``cols_dist`` fields, else default to the discrete metric.
    """
    mass = np.asarray(obj["mass"], dtype=float)
    if mass.ndim != 2:
        raise InvalidMeasure("coupling mass must be a 2-d array")
    if X is None:
        X = validate_space(obj["rows_dist"]) if "rows_dist" in obj else discrete_space(mass.shape[0])
    if Y is None:
        Y = validate_space(obj["cols_dist"]) if "cols_dist" in obj else discrete_space(mass.shape[1])
    return Coupling.from_mass(mass, X, Y, tol=tol)
