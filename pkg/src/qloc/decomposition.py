"""Metric families, two-color R-decompositions, and decomposition chains.

A chain witnesses that a space can be cut, in finitely many rounds, into
uniformly bounded pieces while keeping same-color pieces strictly more than
the round's radius apart.  Grid spaces get a canonical chain (one round per
coordinate axis); arbitrary chains are accepted and validated exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .space import (
    FiniteMetricSpace,
    Subset,
    neighborhood,
    set_distance,
    subset_diameter,
)


class ChainError(ValueError):
    """Raised when a chain or decomposition cannot even be constructed."""


@dataclass(frozen=True, eq=False)
class MetricFamily:
    """A finite family of nonempty subsets of one space."""

    space: FiniteMetricSpace
    sets: tuple

    @classmethod
    def of(cls, space: FiniteMetricSpace, sets: Sequence) -> "MetricFamily":
        sets = tuple(frozenset(s) for s in sets)
        if not sets or any(not s for s in sets):
            raise ChainError("a metric family needs nonempty sets")
        return cls(space=space, sets=sets)

    def __len__(self) -> int:
        return len(self.sets)

    def max_diameter(self) -> float:
        return max(subset_diameter(self.space, s) for s in self.sets)


@dataclass(frozen=True, eq=False)
class RDecomposition:
    """A two-color splitting of ``target`` into pieces, same-color pieces
    strictly more than R apart."""

    space: FiniteMetricSpace
    target: Subset
    colors: tuple  # (tuple of color-0 pieces, tuple of color-1 pieces)
    R: float

    @classmethod
    def of(cls, space: FiniteMetricSpace, target, color0, color1,
           R: float) -> "RDecomposition":
        if R <= 0:
            raise ChainError("R must be positive")
        colors = (
            tuple(frozenset(s) for s in color0),
            tuple(frozenset(s) for s in color1),
        )
        return cls(space=space, target=frozenset(target), colors=colors, R=R)

    def all_pieces(self) -> tuple:
        return self.colors[0] + self.colors[1]


def validate_decomposition(dec: RDecomposition) -> dict:
    """Exact check of coverage, containment, and strict same-color separation.

    Failures are collected in the report, not raised; a violating pair is
    reported with its exact distance (d <= R counts as a violation)."""
    covered: set = set()
    containment_ok = True
    for piece in dec.all_pieces():
        covered |= piece
        if not piece <= dec.target:
            containment_ok = False
    coverage_ok = covered >= dec.target
    violations = []
    for color, pieces in enumerate(dec.colors):
        for i in range(len(pieces)):
            for j in range(i + 1, len(pieces)):
                d = set_distance(dec.space, pieces[i], pieces[j])
                if not d > dec.R:
                    violations.append((color, i, j, d))
    return {
        "valid": coverage_ok and containment_ok and not violations,
        "coverage_ok": coverage_ok,
        "containment_ok": containment_ok,
        "violations": violations,
        "R": dec.R,
    }


@dataclass(frozen=True, eq=False)
class DecompositionChain:
    """Families X_0 .. X_m with, at each step n, an R_n-decomposition of every
    set of X_{n-1} into pieces drawn from X_n."""

    space: FiniteMetricSpace
    families: tuple  # tuple of MetricFamily, length m+1
    steps: tuple  # tuple of dicts: Subset -> RDecomposition, length m
    radii: tuple
    final_diam: float

    @property
    def depth(self) -> int:
        return len(self.steps)


def make_chain(space: FiniteMetricSpace, families: Sequence[MetricFamily],
               steps: Sequence[Mapping], radii: Sequence[float]) -> DecompositionChain:
    if len(families) != len(steps) + 1 or len(steps) != len(radii):
        raise ChainError("need m+1 families, m steps, and m radii")
    final_diam = families[-1].max_diameter()
    return DecompositionChain(space=space, families=tuple(families),
                              steps=tuple(dict(s) for s in steps),
                              radii=tuple(float(r) for r in radii),
                              final_diam=final_diam)


def validate_chain(chain: DecompositionChain,
                   radii: Optional[Sequence[float]] = None) -> dict:
    """Validate every step of the chain at its radius; report final_diam."""
    radii = list(chain.radii) if radii is None else list(radii)
    failures = []
    if len(radii) != chain.depth:
        return {"valid": False, "failures": [("arity", None,
                f"{len(radii)} radii for {chain.depth} steps")],
                "final_diam": chain.final_diam}
    for n in range(chain.depth):
        prev, nxt = chain.families[n], chain.families[n + 1]
        step = chain.steps[n]
        for s in prev.sets:
            dec = step.get(s)
            if dec is None:
                failures.append(("missing", n + 1, f"no decomposition for a set of X_{n}"))
                continue
            if dec.R != radii[n]:
                failures.append(("radius", n + 1,
                                 f"decomposition radius {dec.R} != {radii[n]}"))
            if dec.target != s:
                failures.append(("target", n + 1, "decomposition target mismatch"))
            for piece in dec.all_pieces():
                if piece not in nxt.sets:
                    failures.append(("membership", n + 1,
                                     f"piece not drawn from X_{n + 1}"))
                    break
            rep = validate_decomposition(dec)
            if not rep["valid"]:
                failures.append(("decomposition", n + 1, rep))
    return {
        "valid": not failures,
        "failures": failures,
        "final_diam": chain.final_diam,
    }


def trivial_chain(space: FiniteMetricSpace, R: float) -> DecompositionChain:
    """The degenerate one-step chain {X} -> {X}; valid because every finite
    set is bounded, but it buys no propagation reduction."""
    X = space.all_points()
    fam = MetricFamily.of(space, [X])
    dec = RDecomposition.of(space, X, [X], [], R)
    return make_chain(space, [fam, fam], [{X: dec}], [R])


def _axis_pieces(space: FiniteMetricSpace, s: Subset, axis: int,
                 width: int) -> tuple:
    """Split s into intervals of ``width`` lattice points along one axis,
    returning (even-interval pieces, odd-interval pieces)."""
    coords = space.grid["coords"]
    buckets: dict = {}
    for x in sorted(s):
        k = int(coords[x, axis]) // width
        buckets.setdefault(k, set()).add(x)
    color0 = tuple(frozenset(buckets[k]) for k in sorted(buckets) if k % 2 == 0)
    color1 = tuple(frozenset(buckets[k]) for k in sorted(buckets) if k % 2 == 1)
    return color0, color1


def grid_chain(space: FiniteMetricSpace,
               radii: Sequence[float]) -> DecompositionChain:
    """Canonical chain on a grid space: round n cuts along axis n into
    alternately colored intervals of ceil(R_n)+1 lattice points, so same-color
    intervals sit strictly more than R_n apart in every supported metric."""
    if space.grid is None:
        raise ChainError("grid_chain needs a space built on lattice coordinates")
    axes = len(space.grid["dims"])
    radii = [float(r) for r in radii]
    if len(radii) > axes:
        raise ChainError(f"{len(radii)} radii for a {axes}-axis grid")
    if any(r <= 0 for r in radii):
        raise ChainError("radii must be positive")
    families = [MetricFamily.of(space, [space.all_points()])]
    steps = []
    for n, R in enumerate(radii):
        width = int(math.ceil(R)) + 1
        step: dict = {}
        new_sets = []
        for s in families[-1].sets:
            color0, color1 = _axis_pieces(space, s, n, width)
            step[s] = RDecomposition.of(space, s, color0, color1, R)
            new_sets.extend(color0 + color1)
        # dedupe while keeping deterministic order
        seen: set = set()
        uniq = [s for s in new_sets if not (s in seen or seen.add(s))]
        families.append(MetricFamily.of(space, uniq))
        steps.append(step)
    return make_chain(space, families, steps, radii)


def fatten_family(fam: MetricFamily, s: float) -> MetricFamily:
    """Replace each set by its s-neighborhood."""
    if s < 0:
        raise ChainError("fattening amount must be nonnegative")
    if s == 0:
        return fam
    return MetricFamily.of(fam.space,
                           [neighborhood(fam.space, x, s) for x in fam.sets])


def fatten_decomposition(dec: RDecomposition, s: float,
                         new_R: float) -> RDecomposition:
    """Fatten target and pieces by s and re-tag the radius.

    Pieces that were more than R apart are more than R - 2s apart afterwards;
    the caller picks new_R <= R - 2s and the result is validated exactly."""
    if s < 0:
        raise ChainError("fattening amount must be nonnegative")
    space = dec.space
    fat = lambda x: neighborhood(space, x, s)
    return RDecomposition.of(
        space,
        fat(dec.target),
        [fat(p) for p in dec.colors[0]],
        [fat(p) for p in dec.colors[1]],
        new_R,
    )
