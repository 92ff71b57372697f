"""Single entry point dispatching to every subsystem.

Exit codes: 0 success, 1 domain error (message names the violated
precondition), 2 usage error.  All file outputs are atomic
(write-then-rename) and every randomized run logs its seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

from .errors import LqpError
from .problems import ELEMX, ELEMX_MOD, ELEMX_QUARTER, ELEMX_RES, make_problem
from .protocol import (
    cost,
    execute,
    read_tree_file,
    validate,
    write_tree_file,
)
from .rings import GF2, INT, MODQ, QueryMatrix, RingSpec, Vec01
from .round_elim import eliminate_round, verify_shadowing
from .families import (
    int_family_size_target,
    modq_family_size_bound,
    uniform_family_gf2,
    uniform_family_int,
    uniform_family_modq,
)
from .upper_bounds import build_det_protocol, l0_success_rate
from .verify_lab import (
    BoundFormula,
    GF2_KROUND,
    MODQ_KROUND,
    brute_force_min_cost,
    envelope_inequality_holds,
    kw_simulate,
    lb_value,
    tradeoff_table,
)


def parse_ring(text: str) -> RingSpec:
    if text == "gf2":
        return RingSpec.gf2()
    if text.startswith("modq:"):
        return RingSpec.modq(int(text.split(":", 1)[1]))
    if text.startswith("int:"):
        return RingSpec.bounded_int(int(text.split(":", 1)[1]))
    raise ValueError(f"ring must be gf2, modq:Q, or int:B, got {text!r}")


def parse_range(text: str) -> list[int]:
    """'2..64' -> [2..64]; '8' -> [8]; '2,4,8' -> [2, 4, 8]."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in text:
        return [int(x) for x in text.split(",")]
    return [int(text)]


def _problem_from_args(args, n: int):
    kind = args.problem
    if kind == ELEMX:
        return make_problem(ELEMX, n)
    if kind == ELEMX_MOD:
        return make_problem(ELEMX_MOD, n, q=args.q)
    if kind == ELEMX_RES:
        return make_problem(ELEMX_RES, n, q=args.q, h=args.h)
    if kind == ELEMX_QUARTER:
        return make_problem(ELEMX_QUARTER, n)
    raise ValueError(f"unknown problem {kind!r}")


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_matrix_file(path: str) -> QueryMatrix:
    with open(path) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "ring" not in obj or "rows" not in obj:
        raise ValueError("matrix file needs fields 'ring' and 'rows'")
    ring_obj = obj["ring"]
    kind = ring_obj.get("kind")
    if kind == "gf2":
        ring = RingSpec.gf2()
    elif kind == "modq":
        ring = RingSpec.modq(int(ring_obj["q"]))
    elif kind == "int":
        ring = RingSpec.bounded_int(int(ring_obj["B"]))
    else:
        raise ValueError(f"unknown ring kind {kind!r} in matrix file")
    return QueryMatrix.make(ring, obj["rows"], int(obj.get("n", len(obj["rows"][0]))))


def cmd_build_det(args) -> int:
    ring = parse_ring(args.ring)
    tree = build_det_protocol(args.n, args.k, ring)
    write_tree_file(tree, args.out)
    print(
        f"build-det n={args.n} k={args.k} ring={ring.describe()} "
        f"rounds={tree.rounds} cost={cost(tree)} nodes={len(tree.nodes)} -> {args.out}"
    )
    return 0


def cmd_run(args) -> int:
    tree = read_tree_file(args.protocol)
    z = Vec01.from_bits(args.input)
    transcript = execute(tree, z)
    for nid, meas in transcript.path:
        print(f"node {nid}: measurement {meas}")
    print(f"output {transcript.output}")
    return 0


def cmd_validate(args) -> int:
    tree = read_tree_file(args.protocol)
    problem = _problem_from_args(args, tree.n)
    report = validate(tree, problem, cap=args.cap)
    if report.ok:
        print(f"ok checked={report.checked}")
        return 0
    print(f"FAIL counterexample={report.counterexample} ({report.reason})")
    return 1


def cmd_family(args) -> int:
    A = _read_matrix_file(args.matrix)
    ring = A.ring
    if ring.kind == GF2:
        fam = uniform_family_gf2(A)
        target = math.ceil(A.n / (A.d + 1))
        target_desc = f"ceil(n/(d+1)) = {target}"
    elif ring.kind == MODQ:
        fam = uniform_family_modq(A)
        target = modq_family_size_bound(A.n, A.d, ring.q)
        target_desc = f"n/((d+1) q ln q) - 1 = {target:.3f}"
    else:
        if args.t is not None:
            t = args.t
        else:
            t = max(1, min(A.d * math.ceil(math.log2(max(2, args.M))), A.n))
            print(f"note: weight t defaulted to {t} (clamped to desk scale)")
        fam = uniform_family_int(A, args.M, t)
        target = int_family_size_target(A.n, A.d, max(2, args.M))
        target_desc = f"n/(c0 d log n log M) - 1 = {target:.3f} (c0=1, advisory)"
    for i in range(fam.m):
        print(f"S_{i + 1} = {{{', '.join(map(str, sorted(fam.sets[i])))}}}")
    print(f"common measurement = ({fam.common})")
    print(f"m = {fam.m} vs target {target_desc}")
    return 0


def cmd_eliminate(args) -> int:
    tree = read_tree_file(args.protocol)
    case = args.case
    if case == "gf2":
        result = eliminate_round(tree)
    elif case.startswith("modq:"):
        parts = case.split(":")
        if len(parts) != 3:
            raise ValueError("modq case takes the form modq:Q:H")
        if tree.ring != RingSpec.modq(int(parts[1])):
            raise ValueError("protocol ring does not match the modq case")
        result = eliminate_round(tree, h=int(parts[2]))
    elif case.startswith("int:"):
        result = eliminate_round(tree, M=int(case.split(":", 1)[1]), t=args.t)
    else:
        raise ValueError(f"case must be gf2, modq:Q:H, or int:M, got {case!r}")
    write_tree_file(result.upsilon, args.out)
    verdict = verify_shadowing(result.upsilon, tree, result.hom)
    print(f"m = {result.m}")
    print(f"new problem = {result.new_problem.describe()}")
    print(f"shadowing = {'ok' if verdict else 'VIOLATED'}")
    print(f"-> {args.out}")
    return 0 if verdict else 1


def cmd_oracle(args) -> int:
    ring = parse_ring(args.ring)
    problem = _problem_from_args(args, args.n)
    best = brute_force_min_cost(problem, ring, args.k, args.budget)
    if best is None:
        print("exceeds-budget")
    else:
        print(best)
    return 0


def cmd_table(args) -> int:
    ring = parse_ring(args.ring)
    rows = tradeoff_table(parse_range(args.n), parse_range(args.k), ring)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["n", "k", "upper", "lower", "ratio"])
    for row in rows:
        writer.writerow([row.n, row.k, row.upper, f"{row.lower:.6f}", f"{row.ratio:.6f}"])
    if args.out:
        _atomic_write_text(args.out, buf.getvalue())
        print(f"{len(rows)} rows -> {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_l0(args) -> int:
    ring = parse_ring(args.ring)
    rate, rows = l0_success_rate(
        args.n, ring, args.seed, args.trials, args.weight, s=args.s
    )
    print(
        f"l0 n={args.n} ring={ring.describe()} seed={args.seed} "
        f"trials={args.trials} weight={args.weight} success_rate={rate:.4f}"
    )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["trial", "sketch_seed", "weight", "result", "ok"])
    for trial, sk_seed, weight, got, ok in rows:
        writer.writerow([trial, sk_seed, weight, "" if got is None else got, int(ok)])
    if args.out:
        _atomic_write_text(args.out, buf.getvalue())
        print(f"per-trial CSV -> {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_kw(args) -> int:
    X = Vec01.from_bits(args.x)
    Y = Vec01.from_bits(args.y)
    if X.n != args.n or Y.n != args.n:
        raise ValueError("player inputs must have length n")
    tree = build_det_protocol(args.n, args.k, RingSpec.gf2())
    result = kw_simulate(tree, X, Y)
    print(
        f"index={result.index} bits_exchanged={result.bits_exchanged} "
        f"rounds={result.rounds} (2*cost = {2 * cost(tree)})"
    )
    return 0


ENVELOPE_GRID_C = (0.5, 1.0, 2.0)


def _log_spaced_ns(lo: int = 2, hi: int = 10**6, points: int = 40) -> list[int]:
    out = sorted(
        {
            max(lo, min(hi, round(lo * (hi / lo) ** (i / (points - 1)))))
            for i in range(points)
        }
    )
    return out


def cmd_check_envelope(args) -> int:
    if args.grid:
        checked = 0
        for C in ENVELOPE_GRID_C:
            for mult in (1, 2):
                D = max(2 * C, 1.0) * mult
                for n in _log_spaced_ns():
                    for k in range(1, 21):
                        if not envelope_inequality_holds(C, D, n, k):
                            print(f"FAIL at C={C} D={D} n={n} k={k}")
                            return 1
                        checked += 1
        print(f"envelope inequality holds at all {checked} grid points")
        return 0
    ok = envelope_inequality_holds(args.C, args.D, args.n, args.k)
    print("true" if ok else "false")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqplab",
        description="linear query protocols for element extraction, desk scale",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="cap on internal parallelism (current implementation runs single-threaded)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-det", help="build the k-round interval-splitting tree")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ring", required=True, help="gf2 | modq:Q | int:B")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_det)

    p = sub.add_parser("run", help="execute a protocol file on one input")
    p.add_argument("--protocol", required=True)
    p.add_argument("--input", required=True, help="0/1 string, coordinate 1 first")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="exhaustively validate a protocol file")
    p.add_argument("--protocol", required=True)
    p.add_argument("--problem", required=True, choices=[ELEMX, ELEMX_MOD, ELEMX_RES, ELEMX_QUARTER])
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--h", type=int, default=0)
    p.add_argument("--cap", type=int, default=None, help="override the enumeration cap")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("family", help="build a uniform family from a matrix file")
    p.add_argument("--matrix", required=True, help="JSON {'ring': .., 'rows': [[..]]}")
    p.add_argument("--M", type=int, default=0, help="value bound (int ring)")
    p.add_argument("--t", type=int, default=None, help="pigeonhole weight (int ring)")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("eliminate", help="remove one round via lifting + shadowing")
    p.add_argument("--protocol", required=True)
    p.add_argument("--case", required=True, help="gf2 | modq:Q:H | int:M")
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("oracle", help="exact minimum cost by brute-force search")
    p.add_argument("--problem", required=True, choices=[ELEMX, ELEMX_MOD, ELEMX_RES, ELEMX_QUARTER])
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--h", type=int, default=0)
    p.add_argument("--ring", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--budget", type=int, required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("table", help="upper vs lower bound tradeoff CSV")
    p.add_argument("--n", required=True, help="range like 2..64 or list like 2,4,8")
    p.add_argument("--k", required=True, help="range like 1..6")
    p.add_argument("--ring", default="gf2")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("l0", help="Monte-Carlo success rate of the support sampler")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ring", required=True, help="modq:Q | int:B")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--weight", type=int, required=True)
    p.add_argument("--s", type=int, default=2, help="per-level recovery sparsity")
    p.add_argument("--out", default=None, help="per-trial CSV path")
    p.set_defaults(func=cmd_l0)

    p = sub.add_parser("kw", help="two-party difference search via a gf2 tree")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x", required=True, help="even-weight 0/1 string")
    p.add_argument("--y", required=True, help="odd-weight 0/1 string")
    p.set_defaults(func=cmd_kw)

    p = sub.add_parser(
        "check-envelope",
        help="verify the max(log-bound, elimination-bound) merge inequality",
    )
    p.add_argument("--grid", action="store_true", help="sweep the standard grid")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--D", type=float, default=2.0)
    p.add_argument("--n", type=float, default=16)
    p.add_argument("--k", type=int, default=2)
    p.set_defaults(func=cmd_check_envelope)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except LqpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
