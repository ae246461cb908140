"""Command-line surface: generators, bound/maxsat pipelines, verify, bench.

Exit codes: 0 ok, 1 usage, 2 input error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import abelian, generate, rounding
from .certify import (BoundCertificate, PipelineParams, PipelineResult,
                      integer_lower_bound, run_pipeline, verify_certificate)
from .cnf import CnfFormula, characteristic_function, parse_dimacs
from .errors import DenseCapExceeded, DimacsError, FsosError, RoundingError
from .gfunc import GroupFunction, brute_force_min
from .sdp import SdpOptions, solve_sdp
from .support import SupportSet, ranked_characters

USAGE_ERROR, INPUT_ERROR, VERIFY_ERROR = 1, 2, 3

ROUND_CHOICES = ("none", "gram", "stick", "moment", "all")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; spec reserves 2 for input
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


@dataclass
class RunReport:
    """One pipeline run; every number is recomputed from the certificate."""

    instance: str
    group: str
    sparsity: int
    params: dict
    bound: float
    integer_bound: int | None
    solver_status: str
    solver_iterations: int
    rounding: dict = field(default_factory=dict)
    best_rounded: float | None = None
    assignment: list[int] | None = None
    gap: float | None = None
    oracle_min: float | None = None
    maxsat: dict | None = None
    timings: dict = field(default_factory=dict)

    def to_json_dict(self, with_timings: bool = True) -> dict:
        out = {
            "instance": self.instance,
            "group": self.group,
            "sparsity": self.sparsity,
            "params": self.params,
            "bound": self.bound,
            "integer_bound": self.integer_bound,
            "solver": {"status": self.solver_status,
                       "iterations": self.solver_iterations},
            "rounding": self.rounding,
            "best_rounded": self.best_rounded,
            "assignment": self.assignment,
            "gap": self.gap,
            "oracle_min": self.oracle_min,
            "maxsat": self.maxsat,
        }
        if with_timings:
            out["timings"] = self.timings
        return out


_MD_COLUMNS = ("instance", "group", "sp", "d", "k", "bound", "int", "rounded",
               "gap", "status", "time_s")


def _report_row(r: RunReport) -> list[str]:
    return [
        r.instance, r.group, str(r.sparsity),
        str(r.params.get("d", "")), str(r.params.get("k", "")),
        f"{r.bound:.4g}",
        "" if r.integer_bound is None else str(r.integer_bound),
        "" if r.best_rounded is None else f"{r.best_rounded:.4g}",
        "" if r.gap is None else f"{r.gap:.3g}",
        r.solver_status,
        f"{r.timings.get('total', 0.0):.2f}",
    ]


def reports_to_md(reports: list[RunReport]) -> str:
    rows = [list(_MD_COLUMNS)] + [_report_row(r) for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(_MD_COLUMNS))]
    lines = []
    for j, row in enumerate(rows):
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        if j == 0:
            lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    return "\n".join(lines)


def reports_to_csv(reports: list[RunReport]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_MD_COLUMNS)
    for r in reports:
        writer.writerow(_report_row(r))
    return buf.getvalue()


def emit_reports(reports: list[RunReport], fmt: str, stream=None) -> None:
    stream = stream or sys.stdout
    if fmt == "json":
        payload = [r.to_json_dict() for r in reports]
        json.dump(payload[0] if len(payload) == 1 else payload, stream,
                  indent=1, sort_keys=True)
        stream.write("\n")
    elif fmt == "md":
        stream.write(reports_to_md(reports) + "\n")
    else:
        stream.write(reports_to_csv(reports))


# -- pipeline helpers ---------------------------------------------------------


def _solver_options(args) -> SdpOptions:
    telemetry = None
    if getattr(args, "telemetry", None):
        handle = open(args.telemetry, "w")
        handle.write("iteration,residual_max,lambda_min,bound,mu\n")

        def telemetry(row, _h=handle):
            _h.write("{iteration},{residual_max:.6g},{lambda_min:.6g},"
                     "{bound:.9g},{mu:.4g}\n".format(**row))
            _h.flush()

    return SdpOptions(
        max_iter=args.max_iter,
        tol=args.tol,
        rho=args.rho,
        time_cap=args.time_cap,
        telemetry=telemetry,
    )


def _apply_preset(preset: str | None, phi: CnfFormula | None,
                  f: GroupFunction, args) -> tuple[dict, SupportSet | None]:
    """Resolve l/m/d/k and an optional pre-built support (flags win)."""
    lo, hi, d, k = args.l, args.m, args.d, args.k
    lo = lo if lo is not None else 0
    support = None
    if preset and phi is None:
        raise FsosError("presets apply to MAX-SAT inputs")
    if preset == "max2sat":
        d = d if d is not None else 1
        k = k if k is not None else f.sparsity
        hi = hi if hi is not None else phi.total_weight
    elif preset == "max3sat":
        d = d if d is not None else 2
        k = k if k is not None else math.ceil(1.5 * f.sparsity)
        hi = hi if hi is not None else phi.total_weight
    elif preset == "round2sat":
        d = d if d is not None else 2
        hi = hi if hi is not None else phi.total_weight
        support = rounding_support(f, phi, lo, hi, d)
        k = support.size
    elif preset is not None:
        raise FsosError(f"unknown preset {preset!r}")
    return ({"l": lo, "m": hi, "d": d if d is not None else 2, "k": k},
            support)


def rounding_support_size(phi: CnfFormula) -> int:
    """Support budget for rounding runs: degree-<=1 characters plus one slot
    per distinct co-clause variable pair."""
    pairs = set()
    for c in phi.clauses:
        vs = sorted(c.pos | c.neg)
        pairs.update((a, b) for i, a in enumerate(vs) for b in vs[i + 1:])
    return 1 + phi.n_vars + len(pairs)


def rounding_support(f: GroupFunction, phi: CnfFormula, lo: int, hi: int,
                     degree: int) -> SupportSet:
    """Degree-<=1 characters plus the strongest sqrt-estimate characters,
    grown to the size of the co-clause pair basis."""
    target = rounding_support_size(phi)
    spec = f.spec
    keys = [0] + list(spec.weights)
    seen = set(int(k) for k in keys)
    for key in ranked_characters(f, lo, hi, degree):
        if len(keys) >= target:
            break
        ik = int(key) if spec.packable else key
        if ik not in seen:
            keys.append(key)
            seen.add(ik)
    return SupportSet(spec, np.asarray(keys, dtype=spec.key_dtype))


def build_pipeline_params(f: GroupFunction, resolved: dict, args,
                          support: SupportSet | None = None) -> PipelineParams:
    return PipelineParams(
        lo=resolved["l"],
        hi=resolved["m"],
        degree=resolved["d"],
        k=resolved["k"],
        round_support=args.round != "none",
        support=support,
        solver=_solver_options(args),
        refine_iter=args.refine_iter,
    )


def _run_rounding(result: PipelineResult, f: GroupFunction, methods: str,
                  seed: int) -> tuple[dict, rounding.RoundedSolution | None]:
    wanted = ("gram", "stick", "moment") if methods == "all" else (methods,)
    out: dict = {}
    solutions = []
    for method in wanted:
        try:
            if method == "gram":
                sol = rounding.gram_round(result.refined_Q, result.support, f,
                                          seed=seed, bound=result.bound)
            elif method == "stick":
                sol = rounding.stickelberger_round(result.refined_Q,
                                                   result.support, f,
                                                   seed=seed, bound=result.bound)
            else:
                sol = rounding.moment_round(result.moment_matrix,
                                            result.support, f,
                                            bound=result.bound)
        except RoundingError as exc:
            out[method] = {"error": str(exc)}
            continue
        out[method] = {
            "method": sol.method,
            "value": sol.achieved,
            "assignment": list(sol.witness.coords),
            "gap": sol.gap,
            "low_confidence": sol.low_confidence,
        }
        solutions.append(sol)
    best = rounding.best_candidate(f, solutions) if solutions else None
    return out, best


def _assignment_literals(g: abelian.GroupElement) -> list[int]:
    # coordinate 1 encodes True
    return [i + 1 if c == 1 else -(i + 1) for i, c in enumerate(g.coords)]


def execute_pipeline(instance: str, f: GroupFunction, resolved: dict, args,
                     phi: CnfFormula | None = None, oracle: bool = False,
                     support: SupportSet | None = None
                     ) -> tuple[RunReport, PipelineResult]:
    t0 = time.monotonic()
    params = build_pipeline_params(f, resolved, args, support=support)
    result = run_pipeline(f, params)
    cert = result.certificate

    check = verify_certificate(cert, f)
    if not check.accepted:
        raise FsosError(
            "internal self-check failed: " + "; ".join(check.reasons))

    integer_valued = phi is not None
    if not integer_valued:
        try:
            integer_valued = f.is_integer_valued()
        except DenseCapExceeded:
            integer_valued = False
    int_bound = integer_lower_bound(cert.bound) if integer_valued else None

    rounding_out: dict = {}
    best = None
    if args.round != "none":
        rounding_out, best = _run_rounding(result, f, args.round, args.seed)

    oracle_min = None
    if oracle:
        try:
            oracle_min = brute_force_min(f)[0]
        except (DenseCapExceeded, FsosError):
            oracle_min = None

    maxsat = None
    if phi is not None:
        w = phi.total_weight
        maxsat = {"total_weight": w,
                  "max_satisfiable_upper": w - (int_bound or 0)}
        if best is not None:
            maxsat["max_satisfiable_lower"] = w - int(round(best.achieved))

    report = RunReport(
        instance=instance,
        group=str(f.spec),
        sparsity=f.sparsity,
        params={**{k_: v for k_, v in resolved.items()},
                "round": args.round},
        bound=cert.bound,
        integer_bound=int_bound,
        solver_status=result.solution.status,
        solver_iterations=result.solution.iterations,
        rounding=rounding_out,
        best_rounded=None if best is None else best.achieved,
        assignment=None if best is None else _assignment_literals(best.witness),
        gap=None if best is None else best.gap,
        oracle_min=oracle_min,
        maxsat=maxsat,
        timings={**result.timings, "total": time.monotonic() - t0},
    )
    return report, result


# -- input loading ------------------------------------------------------------


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def load_function(path: str) -> GroupFunction:
    return GroupFunction.from_json_dict(json.loads(_read_text(path)))


# -- subcommands --------------------------------------------------------------


def cmd_bound(args) -> int:
    f = load_function(args.function)
    if not f.is_real():
        raise FsosError("bound requires a real-valued function")
    resolved, support = _apply_preset(None, None, f, args)
    if resolved["m"] is None:
        resolved["m"] = max(resolved["l"] + 1, int(
            math.ceil(f.constant_term.real + f.l1_nonconstant())))
    if resolved["k"] is None:
        resolved["k"] = max(1, 3 * f.sparsity)
    report, result = execute_pipeline("bound", f, resolved, args,
                                      oracle=args.oracle, support=support)
    if args.cert:
        with open(args.cert, "w") as fh:
            fh.write(result.certificate.to_json())
    emit_reports([report], args.out)
    return 0


def cmd_maxsat(args) -> int:
    phi = parse_dimacs(_read_text(args.path))
    f = characteristic_function(phi)
    if args.preset == "round2sat" and args.round == "none":
        args.round = "all"
    resolved, support = _apply_preset(args.preset, phi, f, args)
    if resolved["m"] is None:
        resolved["m"] = phi.total_weight
    if resolved["k"] is None:
        resolved["k"] = f.sparsity
    report, result = execute_pipeline(args.path, f, resolved, args, phi=phi,
                                      oracle=args.oracle, support=support)
    if args.cert:
        with open(args.cert, "w") as fh:
            fh.write(result.certificate.to_json())
    emit_reports([report], args.out)
    return 0


def cmd_gen_c2(args) -> int:
    f = generate.gen_random_c2(args.n, args.degree, args.sparsity,
                               args.coeff_bound, args.seed,
                               shift=not args.no_shift)
    _write_out(args.out_file, json.dumps(f.to_json_dict(), sort_keys=True))
    return 0


def cmd_gen_c3(args) -> int:
    f = generate.gen_random_c3(args.n, args.floor, args.h_bound, args.seed,
                               shift=not args.no_shift)
    _write_out(args.out_file, json.dumps(f.to_json_dict(), sort_keys=True))
    return 0


def cmd_gen_2sat(args) -> int:
    phi = generate.gen_random_2sat(args.n, args.m, args.seed)
    lines = [f"c random 2sat n={args.n} m={args.m} seed={args.seed}",
             f"p cnf {phi.n_vars} {phi.m}"]
    for c in phi.clauses:
        lits = sorted(c.pos) + [-v for v in sorted(c.neg)]
        lines.append(" ".join(str(x) for x in lits) + " 0")
    _write_out(args.out_file, "\n".join(lines) + "\n")
    return 0


def _write_out(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_verify(args) -> int:
    cert = BoundCertificate.from_json(_read_text(args.cert))
    f = load_function(args.function) if args.function else None
    res = verify_certificate(cert, f)
    payload = {"accepted": res.accepted, "reasons": list(res.reasons),
               "claimed_bound": cert.bound,
               "recomputed_bound": res.recomputed_bound}
    json.dump(payload, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0 if res.accepted else VERIFY_ERROR


def cmd_round(args) -> int:
    cert = BoundCertificate.from_json(_read_text(args.cert))
    res = verify_certificate(cert)
    if not res.accepted:
        print("certificate rejected: " + "; ".join(res.reasons), file=sys.stderr)
        return VERIFY_ERROR
    f = cert.function()
    out: dict = {"bound": cert.bound, "candidates": {}}
    methods = ("gram", "stick", "moment") if args.round in ("all", "none") \
        else (args.round,)
    for method in methods:
        try:
            if method == "gram":
                sol = rounding.gram_round(cert.Q, cert.support, f,
                                          seed=args.seed, bound=cert.bound)
            elif method == "stick":
                sol = rounding.stickelberger_round(cert.Q, cert.support, f,
                                                   seed=args.seed,
                                                   bound=cert.bound)
            else:
                # the moment matrix is not part of the certificate; re-solve
                from .sdp import assemble_gram_system

                sys_ = assemble_gram_system(f, cert.support)
                sol_sdp = solve_sdp(sys_, SdpOptions(max_iter=args.max_iter,
                                                     time_cap=args.time_cap))
                sol = rounding.moment_round(sol_sdp.H, cert.support, f,
                                            bound=cert.bound)
        except RoundingError as exc:
            out["candidates"][method] = {"error": str(exc)}
            continue
        out["candidates"][method] = {
            "value": sol.achieved,
            "assignment": list(sol.witness.coords),
            "literals": _assignment_literals(sol.witness),
            "gap": sol.gap,
        }
    json.dump(out, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _bench_instance(item: dict, pipeline: dict, args) -> RunReport:
    kind = item["kind"]
    phi = None
    if kind == "c2":
        f = generate.gen_random_c2(item["n"], item.get("degree", 3),
                                   item.get("sparsity", 50),
                                   item.get("coeff_bound", 5),
                                   item.get("seed", 0))
    elif kind == "c3":
        f = generate.gen_random_c3(item["n"], item["floor"],
                                   item.get("h_bound", 10),
                                   item.get("seed", 0))
    elif kind == "2sat":
        phi = generate.gen_random_2sat(item["n"], item["m"], item.get("seed", 0))
        f = characteristic_function(phi)
    elif kind == "dimacs":
        phi = parse_dimacs(_read_text(item["path"]))
        f = characteristic_function(phi)
    elif kind == "function":
        f = load_function(item["path"])
    else:
        raise FsosError(f"unknown instance kind {kind!r}")

    ns = argparse.Namespace(
        l=pipeline.get("l"), m=pipeline.get("m"), d=pipeline.get("d"),
        k=pipeline.get("k"), round=pipeline.get("round", "none"),
        max_iter=pipeline.get("max_iter", 50_000),
        tol=pipeline.get("tol", 1e-7), rho=pipeline.get("rho", 1.0),
        time_cap=pipeline.get("time_cap"), telemetry=None,
        refine_iter=pipeline.get("refine_iter", 500),
        seed=pipeline.get("seed", 0), oracle=False,
    )
    if pipeline.get("preset") == "round2sat" and ns.round == "none":
        ns.round = "all"
    resolved, support = _apply_preset(pipeline.get("preset"), phi, f, ns)
    if resolved["m"] is None:
        resolved["m"] = max(resolved["l"] + 1, int(
            math.ceil(f.constant_term.real + f.l1_nonconstant())))
    if resolved["k"] is None:
        resolved["k"] = max(1, 3 * f.sparsity)
    report, _ = execute_pipeline(item["id"], f, resolved, ns, phi=phi,
                                 oracle=pipeline.get("oracle", False),
                                 support=support)
    return report


def cmd_bench(args) -> int:
    suite = json.loads(_read_text(args.suite))
    try:
        instances = list(suite["instances"])
        pipeline = dict(suite.get("pipeline", {}))
        if "oracle" in suite:
            pipeline["oracle"] = bool(suite["oracle"])
        workers = int(suite.get("workers", 1))
        missing = [i for i, item in enumerate(instances)
                   if "id" not in item or "kind" not in item]
        if missing:
            raise FsosError(f"instances {missing} lack 'id'/'kind'")
    except (KeyError, TypeError) as exc:
        raise FsosError(f"bad suite config: {exc}") from exc

    reports: dict[str, RunReport] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {item["id"]: pool.submit(_bench_instance, item, pipeline, args)
                       for item in instances}
            for iid, fut in futures.items():
                reports[iid] = fut.result()
    else:
        for item in instances:
            reports[item["id"]] = _bench_instance(item, pipeline, args)

    ordered = [reports[item["id"]] for item in instances]
    emit_reports(ordered, args.out)

    with_oracle = [r for r in ordered if r.oracle_min is not None]
    if with_oracle and pipeline.get("round", "none") != "none":
        freq: dict[str, int] = {}
        for r in with_oracle:
            for method, entry in r.rounding.items():
                if "value" in entry and abs(entry["value"] - r.oracle_min) < 1e-6:
                    freq[method] = freq.get(method, 0) + 1
        summary = {"instances": len(with_oracle), "optimum_frequency": freq}
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return 0


# -- parser -------------------------------------------------------------------


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--l", type=int, default=None, help="fit range lower end")
    p.add_argument("--m", type=int, default=None, help="fit range upper end")
    p.add_argument("--d", type=int, default=None, help="sqrt fit degree")
    p.add_argument("--k", type=int, default=None, help="support size")
    p.add_argument("--round", choices=ROUND_CHOICES, default="none")
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--time-cap", type=float, default=None)
    p.add_argument("--refine-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--telemetry", default=None, help="write solver CSV here")
    p.add_argument("--oracle", action="store_true",
                   help="also brute-force the true minimum (small groups)")
    p.add_argument("--out", choices=("json", "md", "csv"), default="json")
    p.add_argument("--cert", default=None, help="write the certificate here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fsos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="lower-bound a function from JSON")
    p.add_argument("function", help="function JSON path or '-'")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("maxsat", help="bound a DIMACS cnf/wcnf instance")
    p.add_argument("path", help="DIMACS file path or '-'")
    p.add_argument("--preset", choices=("max2sat", "max3sat", "round2sat"),
                   default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_maxsat)

    p = sub.add_parser("gen-c2", help="random bounded-degree function on C2^n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--sparsity", type=int, default=50)
    p.add_argument("--coeff-bound", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-shift", action="store_true")
    p.add_argument("--out-file", default=None)
    p.set_defaults(func=cmd_gen_c2)

    p = sub.add_parser("gen-c3", help="random block function on C3^n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--floor", type=int, required=True)
    p.add_argument("--h-bound", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-shift", action="store_true")
    p.add_argument("--out-file", default=None)
    p.set_defaults(func=cmd_gen_c3)

    p = sub.add_parser("gen-2sat", help="random MAX-2SAT instance (DIMACS)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-file", default=None)
    p.set_defaults(func=cmd_gen_2sat)

    p = sub.add_parser("round", help="round candidates out of a certificate")
    p.add_argument("cert")
    p.add_argument("--round", choices=ROUND_CHOICES, default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--time-cap", type=float, default=None)
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("verify", help="independently check a certificate")
    p.add_argument("cert")
    p.add_argument("--function", default=None,
                   help="also pin the fingerprint to this function JSON")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a benchmark suite config")
    p.add_argument("suite")
    p.add_argument("--out", choices=("json", "md", "csv"), default="md")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DimacsError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except (FsosError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
