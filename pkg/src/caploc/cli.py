"""Command-line front end.

Exit codes: 0 success, 1 bad usage or unreadable input, 2 instance
infeasible for the requested solve, 3 a checked guarantee failed."""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction

from caploc import consolidation, flow, model, oracle, single_sink, uniform_exact
from caploc.exactlp import (
    build_ckfl_lp,
    build_sckfl_lp,
    fractional_support,
    solve_vertex,
    uniform_transfer_reduce,
)
from caploc.model import (
    InfeasibleError,
    Instance,
    ParseError,
    derive_rng,
    evaluate,
    instance_digest,
    parse_instance,
    rat_decimal,
    rat_str,
    serialize_instance,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_VIOLATION = 3


class _Parser(argparse.ArgumentParser):
    # bad flags are usage errors, exit 1 rather than argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}") from exc


_BENCH_ALGS = ("fptas", "two-approx", "exact-uniform", "consolidate", "cfl", "lp")


def _str_list(text: str) -> tuple[str, ...]:
    parts = tuple(part.strip() for part in text.split(",") if part.strip())
    bad = [p for p in parts if p not in _BENCH_ALGS]
    if bad or not parts:
        raise argparse.ArgumentTypeError(
            f"unknown algorithm(s) {bad}; choose from {', '.join(_BENCH_ALGS)}"
        )
    return parts


def build_parser() -> _Parser:
    top = _Parser(prog="caploc", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write an instance in caploc v1 form")
    gsub = gen.add_subparsers(dest="family", required=True)
    sink = argparse.ArgumentParser(add_help=False)
    sink.add_argument("--out", help="output file (default stdout)")

    grand = gsub.add_parser("random", parents=[sink],
                            help="random points on an integer grid")
    grand.add_argument("--seed", type=int, default=0)
    grand.add_argument("--n", type=int, required=True, help="facility count")
    grand.add_argument("--m", type=int, required=True, help="client count")
    grand.add_argument("--k", type=int, default=None)
    grand.add_argument("--box", type=int, default=20)
    grand.add_argument("--cap", type=_int_list, default=(1, 10), metavar="LO,HI")
    grand.add_argument("--demand", type=_int_list, default=(1, 10), metavar="LO,HI")
    grand.add_argument("--open-cost", type=_int_list, default=(0, 10), metavar="LO,HI")
    grand.add_argument("--distinct-sites", action="store_true")

    gfig = gsub.add_parser("figure1", parents=[sink],
                           help="family separating the relaxation from the optimum")
    gfig.add_argument("--s", type=int, default=10**4)
    gfig.add_argument("--M", type=int, default=10**6)

    gss = gsub.add_parser("subset-sum", parents=[sink],
                          help="selection instance encoding a subset-sum question")
    gss.add_argument("--sizes", type=_int_list, required=True)
    gss.add_argument("--d", type=int, required=True, help="demand to hit exactly")
    gss.add_argument("--k", type=int, required=True)

    slv = sub.add_parser("solve", help="solve an instance file")
    slv.add_argument("file")
    slv.add_argument(
        "--alg",
        required=True,
        choices=["fptas", "two-approx", "exact-uniform", "consolidate", "cfl", "brute-force"],
    )
    slv.add_argument("--k", type=int, default=None, help="override the instance's budget")
    slv.add_argument("--epsilon", type=_fraction, default=Fraction(1, 10))
    slv.add_argument("--gamma", type=_fraction, default=consolidation.GAMMA_DEFAULT)
    slv.add_argument("--seed", type=int, default=0)
    slv.add_argument("--cardinality", choices=["le", "eq"], default="le",
                     help="brute-force open-count mode")
    slv.add_argument("--oracle", action="store_true",
                     help="also brute-force the optimum and report the ratio")

    ver = sub.add_parser("verify", help="run a seeded battery of structural checks")
    ver.add_argument(
        "check",
        choices=["vertex-structure", "untight-graph", "proof-chain", "enumeration"],
    )
    ver.add_argument("--trials", type=int, default=50)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--max-side", type=int, default=4,
                     help="enumeration check: largest side of the bipartite graph")

    ben = sub.add_parser("bench", help="solve every instance in a directory with each algorithm")
    ben.add_argument("dir", help="directory of caploc v1 files")
    ben.add_argument("--algs", type=_str_list, required=True,
                     help="comma-separated: fptas,two-approx,exact-uniform,consolidate,cfl,lp")
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--k", type=int, default=None, help="budget for files that carry none")
    ben.add_argument("--epsilon", type=_fraction, default=Fraction(1, 10))
    ben.add_argument("--gamma", type=_fraction, default=consolidation.GAMMA_DEFAULT)
    return top


# ---------------------------------------------------------------------------
# generate


def _range_pair(pair, flag):
    if len(pair) != 2 or pair[0] > pair[1]:
        print(f"caploc: error: {flag} needs LO,HI with LO <= HI", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return (pair[0], pair[1])


def _cmd_generate(args) -> int:
    if args.family == "random":
        inst = model.gen_random(
            seed=args.seed,
            n=args.n,
            m=args.m,
            box=args.box,
            cap_range=_range_pair(args.cap, "--cap"),
            demand_range=_range_pair(args.demand, "--demand"),
            f_range=_range_pair(args.open_cost, "--open-cost"),
            k=args.k,
            distinct_sites=args.distinct_sites,
        )
    elif args.family == "figure1":
        inst = model.gen_figure1(s=args.s, M=args.M)
    else:
        inst = model.gen_subset_sum(args.sizes, args.d, args.k)
    text = serialize_instance(inst)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve


def _load(path: str) -> Instance:
    try:
        with open(path) as fh:
            return parse_instance(fh.read())
    except OSError as exc:
        print(f"caploc: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    except ParseError as exc:
        print(f"caploc: {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _need_k(args, inst) -> int:
    k = args.k if args.k is not None else inst.k
    if k is None:
        print("caploc: this algorithm needs a budget: pass --k or store one in the file",
              file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return k


def _cmd_solve(args) -> int:
    inst = _load(args.file)
    lines = [("instance", instance_digest(inst)), ("algorithm", args.alg)]
    k = None
    started = time.perf_counter()
    try:
        if args.alg == "fptas":
            k = _need_k(args, inst)
            if inst.n_clients != 1:
                print("caploc: fptas handles exactly one client", file=sys.stderr)
                return EXIT_USAGE
            lines += [("k", k), ("epsilon", rat_str(args.epsilon))]
            sol = single_sink.fptas_solve(inst, k, single_sink.FptasConfig(args.epsilon))
        elif args.alg == "two-approx":
            k = _need_k(args, inst)
            if inst.n_clients != 1:
                print("caploc: two-approx handles exactly one client", file=sys.stderr)
                return EXIT_USAGE
            lines.append(("k", k))
            sol = single_sink.two_approx_solve(inst, k)
        elif args.alg == "exact-uniform":
            k = _need_k(args, inst)
            if inst.uniform_capacity() is None:
                print("caploc: exact-uniform needs uniform capacities", file=sys.stderr)
                return EXIT_USAGE
            lines.append(("k", k))
            sol = uniform_exact.exact_uniform_solve(inst, k)
        elif args.alg == "consolidate":
            k = _need_k(args, inst)
            if inst.uniform_opening_cost() is None:
                print("caploc: consolidate needs uniform opening costs", file=sys.stderr)
                return EXIT_USAGE
            lines += [("k", k), ("seed", args.seed)]
            sol = consolidation.ckfl_uniform_f_solve(inst, k, seed=args.seed)
        elif args.alg == "cfl":
            if inst.uniform_opening_cost() is None:
                print("caploc: cfl needs uniform opening costs", file=sys.stderr)
                return EXIT_USAGE
            lines += [("seed", args.seed), ("gamma", rat_str(args.gamma))]
            sol = consolidation.cfl_uniform_f_solve(inst, seed=args.seed, gamma=args.gamma)
        else:
            if args.cardinality == "eq" or args.k is not None or inst.k is not None:
                k = _need_k(args, inst)
                lines += [("k", k), ("cardinality", args.cardinality)]
                sol = oracle.brute_force_ckfl(inst, k, cardinality=args.cardinality).witness
            else:
                sol = oracle.brute_force_cfl(inst).witness
    except InfeasibleError as exc:
        print(f"caploc: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"caploc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    wall_ms = (time.perf_counter() - started) * 1000

    # feasibility is part of every solver's contract; rounding solvers may
    # exceed k, up to twice the budget
    mode, cap = "none", None
    if args.alg in ("fptas", "two-approx", "exact-uniform", "brute-force"):
        mode, cap = ("le", k) if k is not None else ("none", None)
    elif args.alg == "consolidate":
        mode, cap = "le", 2 * k
    problems = model.check_feasible(inst, sol, k=cap, cardinality=mode)
    breakdown = evaluate(inst, sol)
    lines += [
        ("cost", f"{rat_str(breakdown.total)} ({rat_decimal(breakdown.total)})"),
        ("service", rat_str(breakdown.service)),
        ("opening", rat_str(breakdown.opening)),
        ("open-count", sol.open_count()),
        ("open-set", " ".join(str(i) for i in sol.open_indices())),
        ("wall-ms", f"{wall_ms:.1f}"),
    ]
    if args.oracle:
        if args.alg == "cfl":
            ref = oracle.brute_force_cfl(inst)
        elif args.alg == "two-approx":
            # this solver promises factor 2 against the best exactly-k set
            ref = oracle.brute_force_ckfl(inst, k, cardinality="eq")
        else:
            ref = oracle.brute_force_ckfl(inst, k, cardinality="le")
        lines.append(("oracle-cost", rat_str(ref.optimum)))
        if ref.optimum:
            ratio = breakdown.total / ref.optimum
            lines.append(("ratio", f"{rat_str(ratio)} ({rat_decimal(ratio)})"))
        else:
            lines.append(("ratio", "1" if breakdown.total == 0 else "undefined"))
    for key, value in lines:
        print(f"{key} {value}")
    if problems:
        for p in problems:
            print(f"violation {p}")
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _drop_one(inst: Instance, kind: str, idx: int) -> Instance:
    n = inst.n_facilities
    if kind == "facility":
        keep = [a for a in range(n) if a != idx] + list(range(n, n + inst.n_clients))
        facs = tuple(f for a, f in enumerate(inst.facilities) if a != idx)
        clients = inst.clients
    else:
        keep = list(range(n)) + [n + b for b in range(inst.n_clients) if b != idx]
        facs = inst.facilities
        clients = tuple(c for b, c in enumerate(inst.clients) if b != idx)
    metric = tuple(tuple(inst.metric[a][b] for b in keep) for a in keep)
    return Instance(facs, clients, metric, k=None)


def _shrink(inst: Instance, k: int, still_fails) -> tuple[Instance, int]:
    changed = True
    while changed:
        changed = False
        for kind, count in (("client", inst.n_clients), ("facility", inst.n_facilities)):
            if count <= 1:
                continue
            for idx in range(count):
                cand = _drop_one(inst, kind, idx)
                ck = min(k, cand.n_facilities)
                try:
                    if still_fails(cand, ck):
                        inst, k = cand, ck
                        changed = True
                        break
                except Exception:
                    continue
            if changed:
                break
    return inst, k


def _report_violation(label: str, inst: Instance, k: int, detail: str, still_fails) -> int:
    inst, k = _shrink(inst, k, still_fails)
    print(f"violation {label}: {detail}", file=sys.stderr)
    print(f"shrunk counterexample (k = {k}):", file=sys.stderr)
    sys.stderr.write(serialize_instance(inst))
    return EXIT_VIOLATION


def _sckfl_vertex_problem(inst: Instance, k: int) -> str | None:
    try:
        vertex = solve_vertex(build_sckfl_lp(inst, k, cardinality="eq"))
    except InfeasibleError:
        return None
    fracs = sorted(fractional_support(vertex))
    if len(fracs) not in (0, 2):
        return f"{len(fracs)} fractional opens, expected 0 or 2"
    if len(fracs) == 2:
        for i in range(inst.n_facilities):
            x = vertex[f"x{i}"]
            if x not in (Fraction(0), inst.facilities[i].capacity * vertex[f"y{i}"]):
                return f"x{i} strictly between 0 and capacity*y"
    return None


def _ckfl_vertex_problem(inst: Instance, k: int) -> str | None:
    m = inst.n_clients
    for mode in ("eq", "le"):
        try:
            vertex = solve_vertex(build_ckfl_lp(inst, k, cardinality=mode))
        except InfeasibleError:
            continue
        fracs = fractional_support(vertex)
        if len(fracs) > m + 1:
            return f"{len(fracs)} fractional opens, expected at most {m + 1}"
        if inst.uniform_capacity() is None:
            continue
        if mode == "eq" and inst.uniform_opening_cost() is None:
            # the idle-shift move is only free when fees agree
            continue
        values = uniform_transfer_reduce(inst, vertex.as_dict(), cardinality=mode)
        after = sum(1 for i in range(inst.n_facilities) if 0 < values[f"y{i}"] < 1)
        if after > m:
            return f"{after} fractional opens after transfer, expected at most {m}"
    return None


def _untight_problem(inst: Instance, k: int) -> str | None:
    try:
        ref = oracle.brute_force_ckfl(inst, k, cardinality="le")
    except InfeasibleError:
        return None
    problems = uniform_exact.audit_untight(inst, ref.witness)
    return "; ".join(problems) if problems else None


def _chain_problem(inst: Instance, k: int) -> str | None:
    try:
        rep = consolidation.ckfl_chain_report(inst, k, seed=0)
    except InfeasibleError:
        return None
    return "; ".join(rep.failures) if rep.failures else None


def _cmd_verify(args) -> int:
    rng = derive_rng(args.seed, f"verify-{args.check}")
    if args.check == "enumeration":
        side = args.max_side
        for a in range(1, side + 1):
            for b in range(1, side + 1):
                trees = list(uniform_exact.enumerate_spanning_trees(a, b))
                want = uniform_exact.count_spanning_trees(a, b)
                dedup = len(set(map(frozenset, trees)))
                if len(trees) != want or dedup != len(trees):
                    print(
                        f"violation enumeration: K({a},{b}) yielded {len(trees)} "
                        f"({dedup} distinct), formula says {want}",
                        file=sys.stderr,
                    )
                    return EXIT_VIOLATION
        print(f"ok: tree counts match the closed form up to {side}x{side}")
        return EXIT_OK

    ran = 0
    for trial in range(args.trials):
        if args.check == "vertex-structure":
            single = trial % 2 == 0
            inst = model.gen_random(
                seed=rng.getrandbits(32),
                n=3 + trial % 4,
                m=1 if single else 1 + trial % 3,
                f_range=(0, 8),
            )
            if not single and trial % 4 == 1:
                # exercise the uniform-capacity transfer branch
                cap = 2 + trial % 6
                fee = Fraction(trial % 5)
                inst = Instance(
                    tuple(model.Facility(cap, fee) for _ in inst.facilities),
                    inst.clients, inst.metric)
            k = 1 + trial % inst.n_facilities
            check = _sckfl_vertex_problem if single else _ckfl_vertex_problem
        elif args.check == "untight-graph":
            base = model.gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 4, m=1 + trial % 3,
                cap_range=(2, 9), f_range=(0, 6),
            )
            cap = 2 + trial % 6
            inst = Instance(
                tuple(model.Facility(cap, f.opening_cost) for f in base.facilities),
                base.clients, base.metric)
            k = 1 + trial % inst.n_facilities
            check = _untight_problem
        else:
            base = model.gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 4, m=1 + trial % 3,
                cap_range=(2, 9), distinct_sites=True,
            )
            fee = Fraction(1 + trial % 5)
            inst = Instance(
                tuple(model.Facility(f.capacity, fee) for f in base.facilities),
                base.clients, base.metric)
            k = 1 + trial % inst.n_facilities
            check = _chain_problem
        detail = check(inst, k)
        ran += 1
        if detail is not None:
            return _report_violation(
                args.check, inst, k, detail,
                lambda cand, ck: check(cand, ck) is not None,
            )
    print(f"ok: {ran} seeded cases, no {args.check} violations")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _bench_row(inst: Instance, alg: str, args):
    """(cost text, ratio text, open count text) for one instance/alg cell.

    ratio is achieved cost over the brute-force optimum, except for the
    relaxation row where it is optimum over bound: the integrality gap."""
    k = inst.k if inst.k is not None else args.k
    needs_k = alg in ("fptas", "two-approx", "exact-uniform", "consolidate", "lp")
    if needs_k and k is None:
        return "error: no budget in file and no --k", "-", "-"
    if alg in ("fptas", "two-approx") and inst.n_clients != 1:
        return "error: needs a single client", "-", "-"
    if alg == "exact-uniform" and inst.uniform_capacity() is None:
        return "error: needs uniform capacities", "-", "-"
    if alg in ("consolidate", "cfl") and inst.uniform_opening_cost() is None:
        return "error: needs uniform opening costs", "-", "-"
    try:
        if alg == "lp":
            if inst.n_clients == 1:
                lp = build_sckfl_lp(inst, k, cardinality="eq")
            else:
                lp = build_ckfl_lp(inst, k, cardinality="eq")
            bound = solve_vertex(lp).objective_value
            ref = oracle.brute_force_ckfl(inst, k, cardinality="le")
            gap = "-" if bound == 0 else rat_decimal(ref.optimum / bound)
            return rat_str(bound), gap, "-"
        if alg == "fptas":
            sol = single_sink.fptas_solve(inst, k, single_sink.FptasConfig(args.epsilon))
            ref = oracle.brute_force_ckfl(inst, k, cardinality="le")
        elif alg == "two-approx":
            sol = single_sink.two_approx_solve(inst, k)
            ref = oracle.brute_force_ckfl(inst, k, cardinality="eq")
        elif alg == "exact-uniform":
            sol = uniform_exact.exact_uniform_solve(inst, k)
            ref = oracle.brute_force_ckfl(inst, k, cardinality="le")
        elif alg == "consolidate":
            sol = consolidation.ckfl_uniform_f_solve(inst, k, seed=args.seed)
            ref = oracle.brute_force_ckfl(inst, k, cardinality="le")
        else:
            sol = consolidation.cfl_uniform_f_solve(inst, seed=args.seed, gamma=args.gamma)
            ref = oracle.brute_force_cfl(inst)
    except InfeasibleError:
        return "infeasible", "-", "-"
    cost = evaluate(inst, sol).total
    ratio = "-" if not ref.optimum else rat_decimal(cost / ref.optimum)
    return f"{rat_str(cost)} ({rat_decimal(cost)})", ratio, str(sol.open_count())


def _cmd_bench(args) -> int:
    import os

    try:
        names = sorted(
            entry for entry in os.listdir(args.dir)
            if os.path.isfile(os.path.join(args.dir, entry))
        )
    except OSError as exc:
        print(f"caploc: cannot list {args.dir}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print("instance\talg\tcost\tratio\topen-count\tms")
    for name in names:
        path = os.path.join(args.dir, name)
        try:
            with open(path) as fh:
                inst = parse_instance(fh.read())
        except (OSError, ParseError) as exc:
            for alg in args.algs:
                print(f"{name}\t{alg}\terror: {exc}\t-\t-\t-")
            continue
        for alg in args.algs:
            started = time.perf_counter()
            cost, ratio, opens = _bench_row(inst, alg, args)
            ms = (time.perf_counter() - started) * 1000
            print(f"{name}\t{alg}\t{cost}\t{ratio}\t{opens}\t{ms:.1f}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_bench(args)
    except SystemExit as exc:
        # argparse and the helpers exit through here; keep main returning
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
