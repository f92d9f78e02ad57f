"""Command-line front end: validation, composition, measurement, estimation.

Exit codes: 0 on success/pass, 1 on a failed validation or check, 2 on usage
or schema errors.  All reports go to stdout as JSON (or a small table with
``--format table``); fixed seeds give bit-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import serialize
from .comb import Comb, link_product, validate_deterministic, validate_probabilistic
from .core import DEFAULT_TOL, NotPSDError
from .covariant import (
    builtin_group,
    check_covariant_comb,
    check_covariant_tester,
    dihedral_rep_matrices,
    left_action,
    pauli_conjugation_matrices,
    s3_permutation_matrices,
    twirl_comb,
    twirl_tester,
)
from .estimation import (
    delta_error_cost,
    frame_alignment_compare,
    optimize_covariant_tester,
)
from .serialize import SchemaError
from .tester import (
    Tester,
    born_distribution,
    decompose_tester,
    dilate_instrument,
    operational_distance,
    validate_tester,
)

USAGE_ERROR = 2
CHECK_FAILED = 1


def _default_tol() -> float:
    env = os.environ.get("COMBKIT_TOL")
    if env is None:
        return DEFAULT_TOL
    try:
        return float(env)
    except ValueError:
        raise SchemaError("$COMBKIT_TOL", f"not a number: {env!r}")


def _emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(report, indent=2))
        return
    for key, value in report.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value)
        print(f"{key}\t{value}")


def _load(path: str, expect: str | None = None):
    try:
        return serialize.load(path, expect=expect)
    except FileNotFoundError:
        raise SchemaError(path, "file not found")


def _cmd_validate(args) -> tuple[int, dict]:
    obj = _load(args.infile)
    tol = args.tol
    if isinstance(obj, Comb):
        if args.probabilistic:
            result = validate_probabilistic(obj, tol=tol)
            report = {
                "target": "comb",
                "mode": "probabilistic",
                "feasible": result.feasible,
                "residual": result.residual,
            }
            return (0 if result.feasible else CHECK_FAILED), report
        try:
            chain = validate_deterministic(obj, tol=tol)
        except NotPSDError as exc:
            return CHECK_FAILED, {"target": "comb", "passed": False, "error": str(exc)}
        report = {
            "target": "comb",
            "mode": "deterministic",
            "passed": chain.passed,
            "residuals": list(chain.residuals),
            "scalar": chain.scalar,
            "tol": tol,
        }
        return (0 if chain.passed else CHECK_FAILED), report
    if isinstance(obj, Tester):
        try:
            rep = validate_tester(obj, tol=tol)
        except NotPSDError as exc:
            return CHECK_FAILED, {"target": "tester", "passed": False, "error": str(exc)}
        report = {
            "target": "tester",
            "passed": rep.passed,
            "residuals": list(rep.chain.residuals),
            "scalar": rep.chain.scalar,
            "element_min_eigenvalue": rep.element_min_eigenvalue,
            "tol": tol,
        }
        return (0 if rep.passed else CHECK_FAILED), report
    raise SchemaError("$.schema", "validate expects a comb or tester file")


def _cmd_link(args) -> tuple[int, dict]:
    a = _load(args.a)
    b = _load(args.b)
    a_op = a.op if isinstance(a, Comb) else a
    b_op = b.op if isinstance(b, Comb) else b
    result = link_product(a_op, b_op)
    serialize.save(args.out, "operator", result)
    return 0, {
        "out": args.out,
        "spaces": [s.id for s in result.spaces],
        "trace": float(np.real(result.trace())),
    }


def _cmd_born(args) -> tuple[int, dict]:
    comb = _load(args.comb, "comb")
    tester = _load(args.tester, "tester")
    probs = born_distribution(tester, comb)
    return 0, {"p": {str(k): v for k, v in probs.items()}, "total": sum(probs.values())}


def _cmd_dilate(args) -> tuple[int, dict]:
    inst = _load(args.infile)
    dilation = dilate_instrument(inst)
    worst = 0.0
    for b in inst.outcomes:
        from .core import canonical

        got = dilation.reconstruct(b)
        want = canonical(inst.elements[b])
        worst = max(worst, float(np.linalg.norm(got.matrix - want.matrix)))
    if args.out_comb:
        serialize.save(args.out_comb, "comb", dilation.merged_comb)
    if args.out_povm:
        serialize.save(args.out_povm, "povm", dilation.povm)
    report = {
        "ancilla_dim": dilation.ancilla.dim,
        "reconstruction_residual": worst,
        "povm_completeness_defect": dilation.povm.completeness_defect(),
    }
    return (0 if worst <= args.tol * 100 else CHECK_FAILED), report


def _cmd_decompose(args) -> tuple[int, dict]:
    tester = _load(args.infile, "tester")
    deco = decompose_tester(tester)
    if args.out_povm:
        serialize.save(args.out_povm, "povm", deco.povm)
    return 0, {
        "ancilla_dim": deco.ancilla.dim,
        "povm_completeness_defect": deco.povm.completeness_defect(),
        "total_eigenvalues": [float(x) for x in deco.eigenvalues],
    }


def _cmd_distance(args) -> tuple[int, dict]:
    a = _load(args.a, "comb")
    b = _load(args.b, "comb")
    if args.threads > 1 and args.restarts > 1:
        seeds = [None if args.seed is None else args.seed + k for k in range(args.restarts)]
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(
                pool.map(lambda s: operational_distance(a, b, restarts=1, seed=s), seeds)
            )
        best = max(results, key=lambda r: r.value)
        value, iterations = best.value, sum(r.iterations for r in results)
    else:
        result = operational_distance(a, b, restarts=args.restarts, seed=args.seed)
        value, iterations = result.value, result.iterations
        best = result
    if args.out_witness:
        serialize.save(args.out_witness, "operator", best.witness_total)
    return 0, {
        "distance_lower_bound": value,
        "restarts": args.restarts,
        "iterations": iterations,
        "seed": args.seed,
    }


def _load_rep(path: str):
    return _load(path, "representation")


def _cmd_twirl(args) -> tuple[int, dict]:
    obj = _load(args.infile)
    rep = _load_rep(args.rep)
    if isinstance(obj, Comb):
        out = twirl_comb(obj, rep)
        serialize.save(args.out, "comb", out)
        residual = check_covariant_comb(out, rep)
        return 0, {"target": "comb", "out": args.out, "covariance_residual": residual}
    if isinstance(obj, Tester):
        action = left_action(rep.group)
        out = twirl_tester(obj, rep, action)
        serialize.save(args.out, "tester", out)
        residual = check_covariant_tester(out, rep, action)
        return 0, {"target": "tester", "out": args.out, "covariance_residual": residual}
    raise SchemaError("$.schema", "twirl expects a comb or tester file")


def _cmd_check_covariance(args) -> tuple[int, dict]:
    obj = _load(args.infile)
    rep = _load_rep(args.rep)
    if isinstance(obj, Comb):
        residual = check_covariant_comb(obj, rep)
        target = "comb"
    elif isinstance(obj, Tester):
        residual = check_covariant_tester(obj, rep, left_action(rep.group))
        target = "tester"
    else:
        raise SchemaError("$.schema", "check-covariance expects a comb or tester file")
    passed = residual <= args.tol
    return (0 if passed else CHECK_FAILED), {
        "target": target,
        "covariance_residual": residual,
        "tol": args.tol,
        "passed": passed,
    }


def _cmd_estimate(args) -> tuple[int, dict]:
    fam = _load(args.family, "family")
    cost = _load(args.cost, "cost") if args.cost else delta_error_cost(fam.group)
    result = optimize_covariant_tester(
        fam, cost, restarts=args.restarts, seed=args.seed
    )
    from .estimation import average_cost, worst_case_cost

    worst = worst_case_cost(result.tester, fam, cost)
    report = {
        "average_cost": result.cost,
        "worst_case_cost": worst,
        "gap": worst - result.cost,
        "iterations": result.iterations,
        "restarts": result.restarts,
        "seed": args.seed,
        "witness_seed_operator": serialize.encode_operator(result.seed_operator),
    }
    return 0, report


_DEFAULT_PARTICLE_REPS = {
    "S3": s3_permutation_matrices,
    "D4": lambda: dihedral_rep_matrices(4),
    "Z2xZ2": pauli_conjugation_matrices,
}


def _cmd_align(args) -> tuple[int, dict]:
    group = builtin_group(args.group)
    if args.rep:
        rep = _load_rep(args.rep)
        if list(rep.matrices) != [0]:
            raise SchemaError("$.spaces", "alignment representation must use space id 0")
        unitaries = rep.matrices[0]
    elif args.group in _DEFAULT_PARTICLE_REPS:
        unitaries = _DEFAULT_PARTICLE_REPS[args.group]()
    else:
        omega = np.exp(2j * np.pi / group.order)
        unitaries = np.stack(
            [np.diag([1.0, omega**g]) for g in group.elements()]
        )
    cost = delta_error_cost(group)
    report = frame_alignment_compare(
        group,
        unitaries,
        n_ab=args.nab,
        n_ba=args.nba,
        rounds=args.rounds,
        cost=cost,
        classical_dim=args.classical_dim,
        restarts=args.restarts,
        seed=args.seed,
    )
    payload = {
        "group": args.group,
        "n_ab": args.nab,
        "n_ba": args.nba,
        "rounds": args.rounds,
        "classical_dim": args.classical_dim,
        "multi_round_cost": report.multi_round_cost,
        "single_round_cost": report.single_round_cost,
        "gap": report.gap,
        "seesaw_iterations": report.seesaw_iterations,
        "solver_tolerance": report.solver_tolerance,
        "seed": args.seed,
    }
    return 0, payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combkit",
        description="Sequential quantum networks: validation, composition, estimation.",
    )
    parser.add_argument("--format", choices=("json", "table"), default="json")
    parser.add_argument(
        "--threads", type=int, default=1, help="cap on concurrent restarts"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    tol = _default_tol()

    p = sub.add_parser("validate", help="check comb/tester normalization")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--probabilistic", action="store_true")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("link", help="link product of two operators/combs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_link)

    p = sub.add_parser("born", help="outcome distribution of a tester on a comb")
    p.add_argument("--comb", required=True)
    p.add_argument("--tester", required=True)
    p.set_defaults(handler=_cmd_born)

    p = sub.add_parser("dilate", help="realize an instrument as comb + ancilla POVM")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-comb")
    p.add_argument("--out-povm")
    p.add_argument("--tol", type=float, default=tol)
    p.set_defaults(handler=_cmd_dilate)

    p = sub.add_parser("decompose", help="tester as comb-to-state map + POVM")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-povm")
    p.set_defaults(handler=_cmd_decompose)

    p = sub.add_parser("distance", help="operational distance between two combs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-witness")
    p.set_defaults(handler=_cmd_distance)

    p = sub.add_parser("twirl", help="group-average a comb or tester")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--rep", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_twirl)

    p = sub.add_parser("check-covariance", help="covariance residual of a comb/tester")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--rep", required=True)
    p.add_argument("--tol", type=float, default=max(tol, 1e-9))
    p.set_defaults(handler=_cmd_check_covariance)

    p = sub.add_parser("estimate", help="optimal covariant estimation of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--cost")
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("align", help="multi-round vs single-round frame alignment")
    p.add_argument("--group", required=True)
    p.add_argument("--nab", type=int, required=True)
    p.add_argument("--nba", type=int, required=True)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--classical-dim", type=int, default=1)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rep", help="representation file for the exchanged particle")
    p.set_defaults(handler=_cmd_align)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, report = args.handler(args)
    except SchemaError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, KeyError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return CHECK_FAILED
    _emit(report, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
