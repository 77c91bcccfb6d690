"""Finite metric spaces with a measure, subsets, and Lipschitz scalar functions.

Points are addressed by index into ``FiniteMetricSpace.points``; subsets are
plain frozensets of indices.  Distances are held as a dense float64 matrix and
the triangle inequality is validated at construction time.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

Subset = frozenset

TRIANGLE_TOL = 1e-9


class MetricError(ValueError):
    """Raised when distance data fails the metric axioms."""


class AnchorError(ValueError):
    """Raised when anchor values are incompatible with the Lipschitz budget."""

    def __init__(self, msg: str, pair: tuple):
        super().__init__(msg)
        self.pair = pair


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite metric space with a fully supported measure.

    ``grid`` carries lattice metadata (dims, metric kind, integer coordinates)
    when the space was produced by :func:`build_grid_space`; it is what makes
    coordinate-wise decompositions possible.
    """

    points: tuple
    dist: np.ndarray
    weights: np.ndarray
    grid: Optional[dict] = None

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        n = len(self.points)
        if d.shape != (n, n):
            raise MetricError(f"distance matrix shape {d.shape} != ({n},{n})")
        if w.shape != (n,):
            raise MetricError(f"weights shape {w.shape} != ({n},)")
        if np.any(w <= 0):
            raise MetricError("weights must be strictly positive")
        if np.any(np.diag(d) != 0):
            raise MetricError("dist(x,x) must be 0")
        if not np.array_equal(d, d.T):
            raise MetricError("distance matrix must be symmetric")
        off = d + np.eye(n)
        if np.any(off <= 0):
            raise MetricError("dist(x,y) must be positive for x != y")
        for k in range(n):
            if np.any(d > d[:, k, None] + d[None, k, :] + TRIANGLE_TOL):
                raise MetricError(f"triangle inequality fails through point {k}")
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.points)

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0

    def min_gap(self) -> float:
        """Smallest positive pairwise distance."""
        if self.n < 2:
            return 0.0
        d = self.dist[~np.eye(self.n, dtype=bool)]
        return float(d.min())

    def all_points(self) -> Subset:
        return frozenset(range(self.n))

    def dist_to_set(self, A: Iterable[int]) -> np.ndarray:
        """Vector of d(x, A) for every point x."""
        idx = sorted(A)
        if not idx:
            return np.full(self.n, np.inf)
        return self.dist[:, idx].min(axis=1)


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """A complex-valued function on the points of a space."""

    space: FiniteMetricSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.space.n,):
            raise ValueError(f"values shape {v.shape} != ({self.space.n},)")
        object.__setattr__(self, "values", v)

    def support(self) -> Subset:
        return frozenset(np.flatnonzero(self.values != 0).tolist())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if self.space.n else 0.0

    def is_contraction(self, tol: float = 1e-12) -> bool:
        return self.sup_norm() <= 1 + tol


def build_grid_space(
    dims: Sequence[int],
    metric_kind: str = "l1",
    weights: Optional[Sequence[float]] = None,
) -> FiniteMetricSpace:
    """Finite lattice box prod([0..dims[i]-1]) under an l1/linf/euclidean metric.

    Default weights are all 1 (counting measure).
    """
    dims = list(dims)
    if not dims or any(int(d) != d or d < 1 for d in dims):
        raise ValueError("dims must be a nonempty list of positive integers")
    if metric_kind not in ("l1", "linf", "euclidean"):
        raise ValueError(f"unknown metric kind {metric_kind!r}")
    coords = np.array(list(itertools.product(*(range(int(d)) for d in dims))), dtype=float)
    diffs = np.abs(coords[:, None, :] - coords[None, :, :])
    if metric_kind == "l1":
        dist = diffs.sum(axis=2)
    elif metric_kind == "linf":
        dist = diffs.max(axis=2)
    else:
        dist = np.sqrt((diffs**2).sum(axis=2))
    n = len(coords)
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(list(weights), dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per lattice point")
    points = tuple(tuple(int(c) for c in row) for row in coords)
    grid = {
        "dims": [int(d) for d in dims],
        "metric": metric_kind,
        "coords": coords.astype(int),
    }
    return FiniteMetricSpace(points=points, dist=dist, weights=w, grid=grid)


def set_distance(space: FiniteMetricSpace, A: Iterable[int], B: Iterable[int]) -> float:
    """min over a in A, b in B of dist(a, b)."""
    ia, ib = sorted(A), sorted(B)
    if not ia or not ib:
        raise ValueError("undefined set distance: empty subset")
    return float(space.dist[np.ix_(ia, ib)].min())


def neighborhood(space: FiniteMetricSpace, A: Iterable[int], r: float) -> Subset:
    """{x : d(x, A) <= r}.  Empty A yields the empty set."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    idx = sorted(A)
    if not idx:
        return frozenset()
    close = space.dist_to_set(idx) <= r
    return frozenset(np.flatnonzero(close).tolist())


def lipschitz_constant(space: FiniteMetricSpace, f: ScalarFunction) -> float:
    """Exact max over pairs x != y of |f(x)-f(y)| / d(x,y)."""
    n = space.n
    if n < 2:
        return 0.0
    gaps = np.abs(f.values[:, None] - f.values[None, :])
    mask = ~np.eye(n, dtype=bool)
    return float((gaps[mask] / space.dist[mask]).max())


def ramp_function(
    space: FiniteMetricSpace, S: Iterable[int], inner: float, outer: float
) -> ScalarFunction:
    """Contraction equal to 1 on the inner neighborhood of S, ramping linearly
    to 0 at distance ``outer``; Lipschitz constant at most 1/(outer - inner)."""
    idx = sorted(S)
    if not idx:
        raise ValueError("ramp base set must be nonempty")
    if not outer > inner:
        raise ValueError("outer must exceed inner")
    if inner < 0:
        raise ValueError("inner must be nonnegative")
    d = space.dist_to_set(idx)
    vals = np.clip((outer - d) / (outer - inner), 0.0, 1.0)
    return ScalarFunction(space=space, values=vals)


def mcshane_extend(
    space: FiniteMetricSpace, anchors: Mapping[int, float], L: float
) -> ScalarFunction:
    """Minimal L-Lipschitz extension of anchor values, clamped to [-1, 1].

    Anchors must be pairwise L-compatible and take values in [-1, 1].
    """
    if L <= 0:
        raise ValueError("L must be positive")
    if not anchors:
        raise ValueError("at least one anchor is required")
    items = sorted(anchors.items())
    for (s, vs), (t, vt) in itertools.combinations(items, 2):
        if abs(vs - vt) > L * space.dist[s, t] + 1e-12:
            raise AnchorError(
                f"anchors {s} and {t} violate the L-Lipschitz budget: "
                f"|{vs}-{vt}| > {L}*{space.dist[s, t]}",
                pair=(s, t),
            )
    for s, v in items:
        if abs(v) > 1 + 1e-12:
            raise ValueError(f"anchor value at {s} lies outside [-1, 1]")
    anchor_idx = [s for s, _ in items]
    anchor_val = np.array([v for _, v in items])
    candidates = anchor_val[None, :] + L * space.dist[:, anchor_idx]
    vals = np.clip(candidates.min(axis=1), -1.0, 1.0)
    return ScalarFunction(space=space, values=vals.astype(complex))


def indicator(space: FiniteMetricSpace, S: Iterable[int]) -> ScalarFunction:
    vals = np.zeros(space.n, dtype=complex)
    vals[sorted(S)] = 1.0
    return ScalarFunction(space=space, values=vals)


def subset_diameter(space: FiniteMetricSpace, S: Iterable[int]) -> float:
    idx = sorted(S)
    if len(idx) < 2:
        return 0.0
    return float(space.dist[np.ix_(idx, idx)].max())
