"""Batch command-line front end.

Exit codes: 0 = all assertions hold, 1 = a named inequality or validation
failed, 2 = usage or I/O error.  All randomness flows from a single --seed
flag (default 0) recorded in every report; outputs are written atomically.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import operators as ops
from .approximation import (
    RampCheckError,
    StepBoundError,
    approximate_finite_propagation,
)
from .corpus import GenSpec, classify, gen
from .cutdown import (
    CutdownFamily,
    FamilyError,
    SignPartition,
    block_cutdown,
    block_expectation,
    sign_group_average,
    verify_block_norm_formula,
)
from .decomposition import ChainError, grid_chain, validate_chain
from .locality import (
    NotQuasiLocalError,
    commut_lower_bound,
    commut_upper_bound,
    quasi_locality_profile,
)
from .serialize import (
    chain_from_dict,
    chain_to_dict,
    operator_from_dict,
    operator_to_dict,
    read_json,
    space_from_dict,
    space_to_dict,
    write_json,
)
from .space import MetricError, indicator


class VerifyError(RuntimeError):
    """A certificate replay found a violated inequality or a tampered field."""


def _parse_grid(text: str):
    return [int(part) for part in text.lower().split("x")]


def _load_space(args):
    if getattr(args, "space", None):
        return space_from_dict(read_json(args.space))
    if getattr(args, "grid", None):
        from .space import build_grid_space

        return build_grid_space(_parse_grid(args.grid), args.metric)
    raise SystemExit("one of --space/--grid is required")


def _load_op(args):
    return operator_from_dict(read_json(args.op))


def _emit(args, report: dict) -> None:
    if getattr(args, "out", None):
        write_json(args.out, report)
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _parse_floats(text: str):
    return [float(x) for x in text.split(",")]


# ---------------------------------------------------------------------------
# verb handlers (each returns the process exit code)


def cmd_space(args) -> int:
    space = _load_space(args)
    report = {"n": space.n, "diameter": space.diameter(),
              "min_gap": space.min_gap(), "space": space_to_dict(space)}
    _emit(args, report)
    return 0


def cmd_gen(args) -> int:
    space = _load_space(args)
    params = {"seed": args.seed}
    if args.R is not None:
        params["R"] = args.R
    if args.lam is not None:
        params["lam"] = args.lam
    p = float("inf") if args.p == "inf" else float(args.p)
    spec = GenSpec(kind=args.kind, space=space, p=p,
                   fiber_dim=args.fiber_dim, params=params)
    a = gen(spec)
    _emit(args, operator_to_dict(a))
    return 0


def cmd_norm(args) -> int:
    a = _load_op(args)
    b = ops.op_norm(a, seed=args.seed)
    _emit(args, {"lo": b.lo, "hi": b.hi, "p": "inf" if np.isinf(a.p) else a.p,
                 "seed": args.seed})
    return 0


def cmd_profile(args) -> int:
    a = _load_op(args)
    if args.radii:
        radii = _parse_floats(args.radii)
    else:
        diam = a.space.diameter()
        radii = [diam * k / 8.0 for k in range(9)]
    prof = quasi_locality_profile(a, radii, seed=args.seed)
    cls = classify(a, seed=args.seed)
    report = prof.as_dict()
    report["classification"] = cls.kind
    if cls.witness is not None:
        R, U, V, lb = cls.witness
        report["witness"] = {"R": R, "U": sorted(U), "V": sorted(V), "lo": lb}
    report["seed"] = args.seed
    _emit(args, report)
    return 0


def cmd_commut(args) -> int:
    a = _load_op(args)
    lo, witness = commut_lower_bound(a, args.L, seed=args.seed)
    cert = commut_upper_bound(a, args.L, witness_lo=lo, witness=witness)
    report = cert.as_dict()
    report["seed"] = args.seed
    if lo > cert.bound + 1e-9:
        report["violated"] = "commutator lower bound exceeds certified upper bound"
        _emit(args, report)
        return 1
    _emit(args, report)
    return 0


def cmd_cutdown(args) -> int:
    a = _load_op(args)
    pieces = [frozenset(s) for s in read_json(args.pieces)]
    fam = CutdownFamily.from_functions(a.space,
                                       [indicator(a.space, s) for s in pieces])
    result = block_cutdown(a, fam)
    report = verify_block_norm_formula(a, fam, seed=args.seed)
    out = {
        "lhs": [report["lhs"].lo, report["lhs"].hi],
        "rhs": [report["rhs"].lo, report["rhs"].hi],
        "pass": report["pass"],
        "min_gap": fam.min_gap,
        "seed": args.seed,
    }
    if args.out:
        write_json(args.out, operator_to_dict(result))
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if report["pass"] else 1


def cmd_expect(args) -> int:
    a = _load_op(args)
    blocks = [frozenset(s) for s in read_json(args.blocks)]
    part = SignPartition.from_blocks(a.space, blocks)
    expected = block_expectation(a, part)
    report = {"blocks": len(blocks), "seed": args.seed}
    code = 0
    if len(blocks) + 1 <= 10:
        averaged = sign_group_average(a, part)
        diff = float(np.max(np.abs(expected.matrix - averaged.matrix)))
        report["max_entry_diff_vs_group_average"] = diff
        if diff > 1e-12:
            report["violated"] = "expectation != sign group average"
            code = 1
    if args.out:
        write_json(args.out, operator_to_dict(expected))
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return code


def cmd_chain(args) -> int:
    if args.chain:
        chain = chain_from_dict(read_json(args.chain))
    else:
        space = _load_space(args)
        chain = grid_chain(space, _parse_floats(args.radii))
    rep = validate_chain(chain)
    report = {"valid": rep["valid"], "final_diam": rep["final_diam"],
              "failures": [list(map(str, f)) for f in rep["failures"]]}
    if args.out:
        write_json(args.out, chain_to_dict(chain))
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if rep["valid"] else 1


def _run_pipeline(args, b):
    chain = None
    strategy = "grid"
    if args.chain and args.chain != "grid":
        strategy = "user"
        chain = chain_from_dict(read_json(args.chain))
    return approximate_finite_propagation(b, args.eps, chain_strategy=strategy,
                                          chain=chain, seed=args.seed)


def cmd_approx(args) -> int:
    b = _load_op(args)
    b_prime, cert = _run_pipeline(args, b)
    report = cert.as_dict()
    report["seed"] = args.seed
    if args.approx_out:
        write_json(args.approx_out, operator_to_dict(b_prime))
    _emit(args, report)
    return 0


def cmd_verify(args) -> int:
    b = _load_op(args)
    stored = read_json(args.cert)
    args.eps = float(stored["eps"])
    _, cert = _run_pipeline(args, b)
    fresh = cert.as_dict()
    for key in ("eps", "term_count", "final_propagation", "total_error",
                "degenerate", "schedule"):
        if fresh[key] != stored.get(key):
            raise VerifyError(
                f"certificate field {key!r} does not replay: "
                f"stored {stored.get(key)!r} vs recomputed {fresh[key]!r}")
    if not stored["total_error"][0] <= stored["eps"] + 1e-9:
        raise VerifyError("violated: total_error.lo <= eps")
    for row in stored["schedule"]:
        if not row["step_error"][0] <= 8.0 * row["eps_n"] * 4.0 ** (row["n"] - 1) + 1e-9:
            raise VerifyError(f"violated: step {row['n']} error exceeds its budget")
        if not row["commut_bound"] <= row["eps_n"] + 1e-12:
            raise VerifyError(f"violated: commut bound at step {row['n']} exceeds eps_n")
    report = {"verified": True, "cert": args.cert, "seed": args.seed}
    _emit(args, report)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qloc",
                                     description="certified quasi-locality toolkit")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(sp, op=False, space=False):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        if op:
            sp.add_argument("--op", required=True)
        if space:
            sp.add_argument("--space")
            sp.add_argument("--grid", help="lattice dims, e.g. 32 or 8x8")
            sp.add_argument("--metric", default="l1",
                            choices=["l1", "linf", "euclidean"])

    sp = sub.add_parser("space", help="build or validate a space")
    common(sp, space=True)
    sp.set_defaults(func=cmd_space)

    sp = sub.add_parser("gen", help="generate a corpus operator")
    common(sp, space=True)
    sp.add_argument("--kind", required=True,
                    choices=["finite_prop", "exp_decay", "averaging", "random_dense"])
    sp.add_argument("--p", default="2")
    sp.add_argument("--fiber-dim", type=int, default=1)
    sp.add_argument("--R", type=float)
    sp.add_argument("--lam", type=float)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("norm", help="certified operator norm bracket")
    common(sp, op=True)
    sp.set_defaults(func=cmd_norm)

    sp = sub.add_parser("profile", help="separation decay profile + classification")
    common(sp, op=True)
    sp.add_argument("--radii")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("commut", help="commutator bound certificate at scale L")
    common(sp, op=True)
    sp.add_argument("--L", type=float, required=True)
    sp.set_defaults(func=cmd_commut)

    sp = sub.add_parser("cutdown", help="block cutdown by an indicator family")
    common(sp, op=True)
    sp.add_argument("--pieces", required=True,
                    help="JSON file: list of point-id lists")
    sp.set_defaults(func=cmd_cutdown)

    sp = sub.add_parser("expect", help="block conditional expectation")
    common(sp, op=True)
    sp.add_argument("--blocks", required=True,
                    help="JSON file: list of point-id lists")
    sp.set_defaults(func=cmd_expect)

    sp = sub.add_parser("chain", help="generate or validate a decomposition chain")
    common(sp, space=True)
    sp.add_argument("--radii")
    sp.add_argument("--chain", help="existing chain JSON to validate")
    sp.set_defaults(func=cmd_chain)

    sp = sub.add_parser("approx", help="finite-propagation approximation pipeline")
    common(sp, op=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--chain", default="grid",
                    help="'grid' or a chain JSON path")
    sp.add_argument("--approx-out", help="where to write the approximant")
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("verify", help="replay a certificate and re-assert it")
    common(sp, op=True)
    sp.add_argument("--cert", required=True)
    sp.add_argument("--chain", default="grid")
    sp.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotQuasiLocalError as exc:
        json.dump({"error": str(exc), "violated": "quasi-locality certification",
                   "profile": exc.profile.as_dict()}, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 1
    except (MetricError, StepBoundError, RampCheckError, VerifyError) as exc:
        json.dump({"error": str(exc)}, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 1
    except (FileNotFoundError, json.JSONDecodeError, KeyError, ChainError,
            FamilyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
