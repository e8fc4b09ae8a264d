"""Finite metric spaces, discrete probability measures and empirical sampling.

Points are plain indices ``0..size-1``.  Coordinates or names, when a caller
has them, ride along in ``MetricSpace.labels`` and are never used by the math.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AsymmetricDistance,
    InvalidMeasure,
    InvalidMetric,
    NegativeDistance,
    SizeOverflow,
    SpaceMismatch,
    TriangleViolation,
)

TAU_TRI = 1e-12
TAU_MASS = 1e-12
PRODUCT_CAP = 10**6


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """A finite point set with a validated distance matrix.

    Build through :func:`validate_space`, :func:`euclidean_space` or
    :func:`product_space`; the bare constructor trusts its input.
    """

    dist: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "dist", _frozen(self.dist))

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MetricSpace):
            return NotImplemented
        return self is other or (
            self.dist.shape == other.dist.shape and np.array_equal(self.dist, other.dist)
        )

    def __hash__(self):
        return hash((self.dist.shape, self.dist.tobytes()))

    def distinct_distances(self) -> np.ndarray:
        """Sorted distinct positive distance values."""
        d = np.unique(self.dist)
        return d[d > 0]


def validate_space(dist, labels=None, tol: float = TAU_TRI) -> MetricSpace:
    """Check that ``dist`` is a finite metric and wrap it as a MetricSpace.

    Raises AsymmetricDistance, NegativeDistance or TriangleViolation naming the
    first offending index pair or triple in lexicographic order.
    """
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise InvalidMetric(f"distance matrix must be square and nonempty, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise InvalidMetric("distance matrix has non-finite entries")
    neg = np.argwhere(d < 0)
    if len(neg):
        i, j = neg[0]
        raise NegativeDistance(int(i), int(j), float(d[i, j]))
    diag = np.flatnonzero(np.diag(d) != 0)
    if len(diag):
        i = int(diag[0])
        raise InvalidMetric(f"dist[{i}][{i}]={d[i, i]!r} must be 0")
    asym = np.argwhere(d != d.T)
    if len(asym):
        i, j = asym[0]
        raise AsymmetricDistance(int(i), int(j), float(d[i, j]), float(d[j, i]))
    for i in range(d.shape[0]):
        # excess[j, k] = d[i, k] - d[i, j] - d[j, k]
        excess = d[i][None, :] - d[i][:, None] - d
        bad = np.argwhere(excess > tol)
        if len(bad):
            j, k = bad[0]
            raise TriangleViolation(i, int(j), int(k), float(excess[j, k]))
    return MetricSpace(d, labels=None if labels is None else tuple(labels))


def euclidean_space(points) -> MetricSpace:
    """Metric space on the rows of ``points`` with the Euclidean distance."""
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    diff = p[:, None, :] - p[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d = np.maximum(d, d.T)  # exact symmetry
    np.fill_diagonal(d, 0.0)
    return validate_space(d, labels=[tuple(row) for row in p.tolist()], tol=1e-9)


def discrete_space(size: int) -> MetricSpace:
    """The {0,1}-metric on ``size`` points."""
    d = 1.0 - np.eye(size)
    return MetricSpace(d)


def product_space(X: MetricSpace, Y: MetricSpace, cap: int = PRODUCT_CAP) -> MetricSpace:
    """X x Y with the max metric; point (i, j) is flattened to ``i * Y.size + j``."""
    size = X.size * Y.size
    if size > cap:
        raise SizeOverflow(f"product has {size} points, cap is {cap}")
    d = np.maximum(X.dist[:, None, :, None], Y.dist[None, :, None, :])
    return MetricSpace(d.reshape(size, size))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights over the points of a MetricSpace.

    ``counts`` is set only for empirical measures: the integer sample counts,
    whose total is the sample size exactly.
    """

    space: MetricSpace
    w: np.ndarray
    counts: np.ndarray | None = field(default=None, repr=False)
    tol: float = field(default=TAU_MASS, repr=False, compare=False)

    def __post_init__(self):
        w = _frozen(self.w)
        object.__setattr__(self, "w", w)
        if w.shape != (self.space.size,):
            raise InvalidMeasure(
                f"weights have shape {w.shape}, space has {self.space.size} points"
            )
        if not np.all(np.isfinite(w)):
            raise InvalidMeasure("weights must be finite")
        if np.any(w < 0):
            raise InvalidMeasure(f"negative weight at index {int(np.argmax(w < 0))}")
        total = math.fsum(w)
        if abs(total - 1.0) > self.tol:
            raise InvalidMeasure(f"weights sum to {total!r}, not 1")
        if self.counts is not None:
            object.__setattr__(self, "counts", _frozen(self.counts, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.space.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)

    @classmethod
    def point_mass(cls, space: MetricSpace, index: int) -> "DiscreteMeasure":
        w = np.zeros(space.size)
        w[index] = 1.0
        return cls(space, w)

    @classmethod
    def uniform(cls, space: MetricSpace) -> "DiscreteMeasure":
        return cls(space, np.full(space.size, 1.0 / space.size))

    def mass(self, subset: Iterable[int]) -> float:
        return math.fsum(self.w[list(subset)])

    def same_space(self, other: "DiscreteMeasure") -> bool:
        return self.space == other.space

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.w, other.w)

    __hash__ = None


def total_variation(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    if not p.same_space(q):
        raise SpaceMismatch("total variation needs measures on one space")
    return 0.5 * math.fsum(np.abs(p.w - q.w))


def enlarge(A: Iterable[int], eps: float, S: MetricSpace) -> frozenset:
    """Open enlargement ``{j : dist[i][j] < eps for some i in A}``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    idx = sorted(set(int(i) for i in A))
    if not idx:
        return frozenset()
    near = np.any(S.dist[idx] < eps, axis=0)
    return frozenset(int(j) for j in np.flatnonzero(near))


@dataclass(frozen=True)
class SampleStream:
    """Deterministic source of draws for one trial.

    The generator is Philox (counter based) keyed by
    ``SeedSequence(master_seed, spawn_key=(trial_index,))``, so a trial's draws
    depend on nothing but this pair.
    """

    master_seed: int
    trial_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if self.trial_index < 0:
            raise ValueError("trial_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.trial_index,))
        return np.random.Generator(np.random.Philox(seq))


def empirical_sample(target: DiscreteMeasure, n: int, stream: SampleStream) -> DiscreteMeasure:
    """Empirical measure of ``n`` i.i.d. draws from ``target``, on target's space.

    Draws use inverse-CDF lookup of uniform variates.  Counts are accumulated as
    integers and divided by ``n`` once.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    cdf = np.cumsum(target.w)
    last = int(target.support[-1])
    u = stream.generator().random(n)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), last)
    counts = np.bincount(idx, minlength=target.size)
    return DiscreteMeasure(target.space, counts / n, counts=counts)


def measure_from_json(obj: dict) -> DiscreteMeasure:
    """Load ``{"dist": [[...]], "w": [...]}``; the metric is validated."""
    try:
        dist, w = obj["dist"], obj["w"]
    except KeyError as exc:
        raise InvalidMeasure(f"missing field {exc.args[0]!r}") from None
    return DiscreteMeasure(validate_space(dist), w)


def measure_to_json(m: DiscreteMeasure) -> dict:
    return {"dist": m.space.dist.tolist(), "w": m.w.tolist()}


def as_space(dist_or_space) -> MetricSpace:
    if isinstance(dist_or_space, MetricSpace):
        return dist_or_space
    return validate_space(dist_or_space)


def line_space(coords: Sequence[float]) -> MetricSpace:
    """Points on the real line with ``|a - b|``."""
    c = np.asarray(coords, dtype=float)
    return validate_space(np.abs(c[:, None] - c[None, :]), labels=c.tolist())
