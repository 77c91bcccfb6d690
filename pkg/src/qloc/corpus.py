"""Deterministic generators of test operators spanning the locality spectrum,
and a coarse classifier (finite propagation / quasi-local / neither).

Everything is seeded: the same GenSpec yields a bit-identical operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import operators as ops
from .locality import quasi_locality_profile
from .operators import LpOperator
from .space import FiniteMetricSpace

QUASI_LOCAL_REL_THRESHOLD = 1e-3  # artifact convention, stated in reports

KINDS = ("finite_prop", "exp_decay", "averaging", "random_dense")


@dataclass(frozen=True)
class GenSpec:
    """Seeded recipe for a test operator."""

    kind: str
    space: FiniteMetricSpace
    p: float
    fiber_dim: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")


def _block_mask(space: FiniteMetricSpace, k: int, keep: np.ndarray) -> np.ndarray:
    return np.kron(keep, np.ones((k, k), dtype=bool))


def gen(spec: GenSpec) -> LpOperator:
    """Produce the operator described by ``spec`` (bit-deterministic)."""
    space, k = spec.space, spec.fiber_dim
    nk = space.n * k
    seed = int(spec.params.get("seed", 0))
    rng = np.random.default_rng(seed)
    if spec.kind == "finite_prop":
        R = float(spec.params.get("R", 0.0))
        if R < 0:
            raise ValueError("R must be nonnegative")
        m = rng.standard_normal((nk, nk)) + 1j * rng.standard_normal((nk, nk))
        m = np.where(_block_mask(space, k, space.dist <= R), m, 0)
        a = LpOperator(space=space, p=spec.p, fiber_dim=k, matrix=m)
        hi = ops.op_norm_hi(a)
        if hi > 0:
            a = a.with_matrix(m / (hi * (1 + 1e-12)))
        return a
    if spec.kind == "exp_decay":
        lam = float(spec.params.get("lam", 0.5))
        if not 0 < lam < 1:
            raise ValueError("exp_decay needs lam in (0, 1)")
        phases = np.exp(2j * np.pi * rng.random((nk, nk)))
        decay = lam ** np.kron(space.dist, np.ones((k, k)))
        return LpOperator(space=space, p=spec.p, fiber_dim=k, matrix=decay * phases)
    if spec.kind == "averaging":
        # finite truncation of the summing functional: first row all ones
        m = np.zeros((nk, nk), dtype=complex)
        for y in range(space.n):
            m[0:k, y * k : (y + 1) * k] = np.eye(k)
        return LpOperator(space=space, p=spec.p, fiber_dim=k, matrix=m)
    # random_dense
    scale = float(spec.params.get("norm_target", 1.0))
    m = rng.standard_normal((nk, nk)) + 1j * rng.standard_normal((nk, nk))
    a = LpOperator(space=space, p=spec.p, fiber_dim=k, matrix=m)
    hi = ops.op_norm_hi(a)
    if hi > 0:
        a = a.with_matrix(m * (scale / (hi * (1 + 1e-12))))
    return a


@dataclass(frozen=True)
class Classification:
    """Result of the locality trichotomy.

    The quasi-local cutoff (eps_hi below 1e-3 of the norm within diam/2) is a
    convention: on a finite space every operator is trivially quasi-local in
    the asymptotic sense, so a relative threshold is required.
    """

    kind: str  # finite_propagation | quasi_local | not_quasi_local
    propagation: Optional[float] = None
    profile: Optional[object] = None
    witness: Optional[tuple] = None  # (R, U, V, certified lower bound)
    threshold: float = QUASI_LOCAL_REL_THRESHOLD


def classify(a: LpOperator, seed: int = 0) -> Classification:
    diam = a.space.diameter()
    prop = ops.propagation(a)
    if prop < diam or diam == 0:
        return Classification(kind="finite_propagation", propagation=prop)
    radii = [diam * j / 8.0 for j in range(0, 5)]  # up to diam/2
    profile = quasi_locality_profile(a, radii, seed=seed)
    cutoff = QUASI_LOCAL_REL_THRESHOLD * ops.op_norm_hi(a)
    if any(hi <= cutoff for hi in profile.eps_hi):
        return Classification(kind="quasi_local", propagation=prop, profile=profile)
    # witness: best certified lower bound over separated pairs at diam/2
    from .locality import _separated_pairs, _sub_norm_lo

    R = diam / 2.0
    best = (R, frozenset(), frozenset(), 0.0)
    for U, V in _separated_pairs(a.space, R):
        lb = _sub_norm_lo(a, U, V, seed=seed)
        if lb > best[3]:
            best = (R, U, V, lb)
    return Classification(kind="not_quasi_local", propagation=prop,
                          profile=profile, witness=best)
