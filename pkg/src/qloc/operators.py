"""Operators on l^p(X; C^k): construction, truncation, propagation, and
certified p-norm brackets.

Norm brackets pair a witnessed lower bound with an analytic upper bound:
exact formulas at p in {1, 2, inf}, and for other exponents a dual power
iteration (lower) against Riesz-Thorin interpolation (upper).  Weighted
measures are reduced to the counting-measure case by conjugating with the
diagonal similarity D^(1/p).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .space import FiniteMetricSpace, ScalarFunction, Subset

BOYD_TOL = 1e-10
BOYD_MAX_ITER = 500
BOYD_RESTARTS = 8


@dataclass(frozen=True, eq=False)
class LpOperator:
    """Dense complex (n*k) x (n*k) matrix acting on l^p(X; l^p_k)."""

    space: FiniteMetricSpace
    p: float
    fiber_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError("p must satisfy p >= 1")
        if self.fiber_dim < 1:
            raise ValueError("fiber_dim must be positive")
        m = np.asarray(self.matrix, dtype=complex)
        nk = self.space.n * self.fiber_dim
        if m.shape != (nk, nk):
            raise ValueError(f"matrix shape {m.shape} != ({nk},{nk})")
        object.__setattr__(self, "matrix", m)

    def block(self, x: int, y: int) -> np.ndarray:
        k = self.fiber_dim
        return self.matrix[x * k : (x + 1) * k, y * k : (y + 1) * k]

    def with_matrix(self, m: np.ndarray) -> "LpOperator":
        return LpOperator(space=self.space, p=self.p, fiber_dim=self.fiber_dim, matrix=m)


@dataclass(frozen=True)
class NormBracket:
    """Certified interval [lo, hi] around a true operator p-norm."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi + 1e-12:
            raise ValueError(f"invalid bracket [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def identity_like(a: LpOperator) -> LpOperator:
    return a.with_matrix(np.eye(a.space.n * a.fiber_dim, dtype=complex))


def zero_like(a: LpOperator) -> LpOperator:
    return a.with_matrix(np.zeros_like(a.matrix))


# ---------------------------------------------------------------------------
# weighted <-> unweighted reduction


def _fiber_weights(space: FiniteMetricSpace, k: int) -> np.ndarray:
    return np.repeat(space.weights, k)


def _conjugated(a: LpOperator, p: float) -> np.ndarray:
    """D^(1/p) A D^(-1/p); the unweighted p-norm of the result equals the
    weighted p-norm of a.  For p = inf the weights drop out."""
    if math.isinf(p):
        return a.matrix
    w = _fiber_weights(a.space, a.fiber_dim) ** (1.0 / p)
    return (w[:, None] * a.matrix) / w[None, :]


# ---------------------------------------------------------------------------
# exact norms and interpolation bounds on plain matrices


def _norm1(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.abs(m).sum(axis=0).max())


def _norminf(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.abs(m).sum(axis=1).max())


def _norm2(m: np.ndarray) -> float:
    if m.size == 0 or not np.any(m):
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def _interp_hi(m: np.ndarray, p: float) -> float:
    """Riesz-Thorin upper bound for the p -> p operator norm of m."""
    if p == 1:
        return _norm1(m)
    if math.isinf(p):
        return _norminf(m)
    if p == 2:
        s = _norm2(m)
        return s * (1 + 1e-12) + 1e-300
    n1, n2, ninf = _norm1(m), _norm2(m), _norminf(m)
    q = p / (p - 1)
    bound = n1 ** (1.0 / p) * ninf ** (1.0 / q)
    if p < 2:
        theta = 2.0 / q  # 1/p = (1-theta)/1 + theta/2
        bound = min(bound, n1 ** (1 - theta) * (n2 * (1 + 1e-12)) ** theta)
    else:
        theta = 1.0 - 2.0 / p  # 1/p = (1-theta)/2 + theta/inf
        bound = min(bound, (n2 * (1 + 1e-12)) ** (1 - theta) * ninf**theta)
    return bound


def _vec_pnorm(x: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.abs(x).max()) if x.size else 0.0
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def _dual_vector(y: np.ndarray, p: float) -> np.ndarray:
    """z with ||z||_q = 1 and Re<z, y> = ||y||_p (q conjugate to p)."""
    ny = _vec_pnorm(y, p)
    if ny == 0:
        z = np.zeros_like(y)
        if z.size:
            z[0] = 1.0
        return z
    yn = y / ny  # normalize first so the phase division cannot overflow
    ay = np.abs(yn)
    # entries this small contribute nothing to the dual pairing; skipping
    # their phase only affects convergence speed, never soundness
    live = ay > 1e-300
    phase = np.where(live, np.conj(yn) / np.where(live, ay, 1.0), 1.0)
    if math.isinf(p):
        # dual in l^1: mass on a maximal coordinate
        z = np.zeros_like(y)
        j = int(np.argmax(ay))
        z[j] = phase[j]
        return z
    return phase * ay ** (p - 1)


def _boyd_lower(m: np.ndarray, p: float, rng: np.random.Generator,
                restarts: int = BOYD_RESTARTS) -> tuple[float, np.ndarray]:
    """Dual power iteration lower bound for the p -> p norm of m.

    Every iterate is a unit vector, so the returned value is always a
    certified lower bound; restarts guard against local maxima.
    """
    nrow, ncol = m.shape
    q = p / (p - 1) if p > 1 else math.inf
    starts = [np.ones(ncol, dtype=complex)]
    col_mass = np.abs(m).sum(axis=0)
    if col_mass.size:
        e = np.zeros(ncol, dtype=complex)
        e[int(np.argmax(col_mass))] = 1.0
        starts.append(e)
    for _ in range(restarts):
        starts.append(rng.standard_normal(ncol) + 1j * rng.standard_normal(ncol))
    best = 0.0
    best_x = starts[0]
    mt = m.T  # bilinear pairing throughout; dual vectors carry the conjugation
    for x in starts:
        nx = _vec_pnorm(x, p)
        if nx == 0:
            continue
        x = x / nx
        prev = -1.0
        for _ in range(BOYD_MAX_ITER):
            y = m @ x
            gamma = _vec_pnorm(y, p)
            if gamma > best:
                best, best_x = gamma, x
            z = mt @ _dual_vector(y, p)
            nz = _vec_pnorm(z, q)
            # optimality test: the bilinear pairing z.x reaches ||z||_q
            if nz <= np.real(np.sum(z * x)) + BOYD_TOL:
                break
            if abs(gamma - prev) <= BOYD_TOL * max(1.0, gamma):
                break
            prev = gamma
            x = _dual_vector(z, q)
    return best, best_x


def matrix_pnorm_bracket(m: np.ndarray, p: float,
                         seed: int = 0,
                         restarts: int = BOYD_RESTARTS) -> NormBracket:
    """Certified bracket of the unweighted p -> p norm of a plain matrix."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if m.size == 0 or not np.any(m):
        return NormBracket(0.0, 0.0)
    if p == 1:
        v = _norm1(m)
        return NormBracket(v, v)
    if math.isinf(p):
        v = _norminf(m)
        return NormBracket(v, v)
    if p == 2:
        s = _norm2(m)
        return NormBracket(s, s * (1 + 1e-12) + 1e-300)
    nrow, ncol = m.shape
    if nrow == 1:
        # single row: norm equals the dual q-norm of the row
        v = _vec_pnorm(m[0], p / (p - 1))
        return NormBracket(v, v * (1 + 1e-12))
    if ncol == 1:
        v = _vec_pnorm(m[:, 0], p)
        return NormBracket(v, v * (1 + 1e-12))
    hi = _interp_hi(m, p)
    rng = np.random.default_rng(seed)
    lo, _ = _boyd_lower(m, p, rng, restarts=restarts)
    return NormBracket(min(lo, hi), hi)


def op_norm(a: LpOperator, p: Optional[float] = None, seed: int = 0,
            restarts: int = BOYD_RESTARTS) -> NormBracket:
    """Certified bracket of the induced (weighted) p-norm of a."""
    p = a.p if p is None else p
    return matrix_pnorm_bracket(_conjugated(a, p), p, seed=seed, restarts=restarts)


def op_norm_hi(a: LpOperator, p: Optional[float] = None) -> float:
    """Upper bound only; skips the power-iteration search."""
    p = a.p if p is None else p
    m = _conjugated(a, p)
    if m.size == 0 or not np.any(m):
        return 0.0
    return _interp_hi(m, p)


# ---------------------------------------------------------------------------
# multiplication, truncation, propagation


def _expand(values: np.ndarray, k: int) -> np.ndarray:
    return np.repeat(values, k)


def multiply_function(f: ScalarFunction, a: LpOperator, side: str = "left",
                      g: Optional[ScalarFunction] = None) -> LpOperator:
    """f a (left), a f (right), or f a g (both)."""
    if f.space is not a.space:
        raise ValueError("function and operator live on different spaces")
    fv = _expand(f.values, a.fiber_dim)
    if side == "left":
        return a.with_matrix(fv[:, None] * a.matrix)
    if side == "right":
        return a.with_matrix(a.matrix * fv[None, :])
    if side == "both":
        if g is None:
            raise ValueError("side='both' requires g")
        if g.space is not a.space:
            raise ValueError("function and operator live on different spaces")
        gv = _expand(g.values, a.fiber_dim)
        return a.with_matrix(fv[:, None] * a.matrix * gv[None, :])
    raise ValueError(f"unknown side {side!r}")


def compress(a: LpOperator, U: Subset, V: Subset) -> LpOperator:
    """chi_U a chi_V."""
    n, k = a.space.n, a.fiber_dim
    mu = np.zeros(n)
    mu[sorted(U)] = 1.0
    mv = np.zeros(n)
    mv[sorted(V)] = 1.0
    m = _expand(mu, k)[:, None] * a.matrix * _expand(mv, k)[None, :]
    return a.with_matrix(m)


def _block_mask(space: FiniteMetricSpace, k: int, keep: np.ndarray) -> np.ndarray:
    return np.kron(keep, np.ones((k, k), dtype=bool))


def truncate(a: LpOperator, R: float) -> LpOperator:
    """Zero all fiber blocks with d(x,y) > R."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    keep = a.space.dist <= R
    return a.with_matrix(np.where(_block_mask(a.space, a.fiber_dim, keep), a.matrix, 0))


def propagation(a: LpOperator) -> float:
    """Largest d(x,y) over nonzero fiber blocks; 0 for the zero operator."""
    n, k = a.space.n, a.fiber_dim
    blocks = np.abs(a.matrix).reshape(n, k, n, k).sum(axis=(1, 3))
    nz = blocks > 0
    if not nz.any():
        return 0.0
    return float(a.space.dist[nz].max())


def commutator(a: LpOperator, f: ScalarFunction) -> LpOperator:
    """[a, f] = a f - f a, with f acting as a multiplication operator."""
    fv = _expand(f.values, a.fiber_dim)
    return a.with_matrix(a.matrix * fv[None, :] - fv[:, None] * a.matrix)
