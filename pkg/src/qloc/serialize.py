"""JSON interchange for spaces, operators, chains, and certificates.

Floats survive a round trip exactly (shortest-repr encoding); files are
written atomically (temp file + rename) so a crashed run never leaves a
half-written artifact behind.
"""
from __future__ import annotations

import json
import os
import tempfile
from typing import Optional

import numpy as np

from .decomposition import (
    DecompositionChain,
    MetricFamily,
    RDecomposition,
    make_chain,
)
from .operators import LpOperator
from .space import FiniteMetricSpace, build_grid_space


def write_json(path: str, obj) -> None:
    """Atomic JSON write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# spaces


def space_to_dict(space: FiniteMetricSpace) -> dict:
    if space.grid is not None:
        d = {"grid": {"dims": list(space.grid["dims"]),
                      "metric": space.grid["metric"]}}
        if not np.all(space.weights == 1.0):
            d["weights"] = space.weights.tolist()
        return d
    return {
        "points": list(range(space.n)),
        "dist": space.dist.tolist(),
        "weights": space.weights.tolist(),
    }


def space_from_dict(d: dict) -> FiniteMetricSpace:
    if "grid" in d:
        g = d["grid"]
        return build_grid_space(g["dims"], g.get("metric", "l1"),
                                weights=d.get("weights"))
    points = tuple(d["points"])
    dist = np.asarray(d["dist"], dtype=float)
    n = len(points)
    weights = np.asarray(d.get("weights", [1.0] * n), dtype=float)
    return FiniteMetricSpace(points=points, dist=dist, weights=weights)


# ---------------------------------------------------------------------------
# operators (sparse block triplets, complex as [re, im] pairs row-major)


def operator_to_dict(a: LpOperator) -> dict:
    n, k = a.space.n, a.fiber_dim
    entries = []
    for x in range(n):
        for y in range(n):
            blk = a.block(x, y)
            if np.any(blk):
                flat = []
                for v in blk.ravel():
                    flat.extend((v.real, v.imag))
                entries.append([x, y, flat])
    return {
        "space": space_to_dict(a.space),
        "p": "inf" if np.isinf(a.p) else a.p,
        "fiber_dim": k,
        "entries": entries,
    }


def operator_from_dict(d: dict) -> LpOperator:
    space = space_from_dict(d["space"])
    p = float("inf") if d["p"] == "inf" else float(d["p"])
    k = int(d["fiber_dim"])
    m = np.zeros((space.n * k, space.n * k), dtype=complex)
    for x, y, flat in d["entries"]:
        vals = np.asarray(flat, dtype=float).reshape(-1, 2)
        blk = (vals[:, 0] + 1j * vals[:, 1]).reshape(k, k)
        m[x * k : (x + 1) * k, y * k : (y + 1) * k] = blk
    return LpOperator(space=space, p=p, fiber_dim=k, matrix=m)


# ---------------------------------------------------------------------------
# chains


def _subset_to_list(s) -> list:
    return sorted(s)


def chain_to_dict(chain: DecompositionChain) -> dict:
    steps = []
    for step in chain.steps:
        rows = []
        for target, dec in step.items():
            rows.append({
                "target": _subset_to_list(target),
                "color0": [_subset_to_list(p) for p in dec.colors[0]],
                "color1": [_subset_to_list(p) for p in dec.colors[1]],
                "R": dec.R,
            })
        steps.append(rows)
    return {
        "space": space_to_dict(chain.space),
        "families": [[_subset_to_list(s) for s in fam.sets]
                     for fam in chain.families],
        "steps": steps,
        "radii": list(chain.radii),
        "final_diam": chain.final_diam,
    }


def chain_from_dict(d: dict,
                    space: Optional[FiniteMetricSpace] = None) -> DecompositionChain:
    space = space if space is not None else space_from_dict(d["space"])
    families = [MetricFamily.of(space, [frozenset(s) for s in fam])
                for fam in d["families"]]
    steps = []
    for rows in d["steps"]:
        step = {}
        for row in rows:
            dec = RDecomposition.of(space, row["target"], row["color0"],
                                    row["color1"], float(row["R"]))
            step[dec.target] = dec
        steps.append(step)
    return make_chain(space, families, steps, [float(r) for r in d["radii"]])
