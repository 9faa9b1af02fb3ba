"""Measure the consolidation guarantees over a batch of random instances.

For each seeded instance the guarantee chain is evaluated exactly and the
achieved quality constants are collected: alpha (clustering cost over the
exact median optimum) for the cardinality-bounded solver, beta and delta
(service and opening overshoot against the relaxation split) for the
unbounded one. The worst values observed bound the batch's true ratios.

    python3 scripts/ratio_experiment.py --trials 40 --seed 7
"""

from __future__ import annotations

import argparse
from fractions import Fraction

from caploc.consolidation import cfl_ratio_report, ckfl_chain_report
from caploc.model import (
    Client,
    Facility,
    InfeasibleError,
    Instance,
    derive_rng,
    gen_random,
    rat_decimal,
)


def uniform_fee_instance(seed: int, n: int, m: int, fee: int) -> Instance:
    base = gen_random(seed=seed, n=n, m=m, cap_range=(2, 8),
                      demand_range=(1, 5), distinct_sites=True)
    facilities = tuple(
        Facility(fac.capacity, Fraction(fee)) for fac in base.facilities
    )
    return Instance(facilities, base.clients, base.metric)


def run_chain(trials: int, rng) -> None:
    worst_alpha = None
    worst_ratio = None
    done = 0
    while done < trials:
        inst = uniform_fee_instance(rng.getrandbits(32), 3 + done % 3,
                                    2 + done % 3, 1 + done % 4)
        k = 1 + done % inst.n_facilities
        try:
            report = ckfl_chain_report(inst, k)
        except InfeasibleError:
            continue
        done += 1
        if not report.ok:
            print(f"BROKEN LINK at k={k}: {report.failures}")
            continue
        q = report.quantities
        alpha = q.get("alpha")
        if alpha is not None and (worst_alpha is None or alpha > worst_alpha):
            worst_alpha = alpha
        if q["opt0"]:
            ratio = q["solver_cost"] / q["opt0"]
            if worst_ratio is None or ratio > worst_ratio:
                worst_ratio = ratio
    print(f"cardinality-bounded: {done} instances")
    if worst_alpha is not None:
        print(f"  worst alpha          {rat_decimal(worst_alpha)}"
              f"  (headline 1 + 2*alpha = {rat_decimal(1 + 2 * worst_alpha)})")
    if worst_ratio is not None:
        print(f"  worst solver/optimum {rat_decimal(worst_ratio)}")


def run_cfl(trials: int, rng) -> None:
    worst_beta = None
    worst_delta = None
    worst_ratio = None
    done = 0
    while done < trials:
        inst = uniform_fee_instance(rng.getrandbits(32), 3 + done % 3,
                                    2 + done % 3, 1 + done % 4)
        try:
            report = cfl_ratio_report(inst)
        except InfeasibleError:
            continue
        done += 1
        if not report.ok:
            print(f"BROKEN LINK: {report.failures}")
            continue
        q = report.quantities
        beta = q.get("beta")
        if beta is not None and (worst_beta is None or beta > worst_beta):
            worst_beta = beta
        if worst_delta is None or q["delta"] > worst_delta:
            worst_delta = q["delta"]
        if q["opt0"]:
            ratio = q["solver_cost"] / q["opt0"]
            if worst_ratio is None or ratio > worst_ratio:
                worst_ratio = ratio
    print(f"unbounded cardinality: {done} instances")
    if worst_beta is not None and worst_delta is not None:
        headline = max(2 * worst_beta + 1, worst_delta + 1)
        print(f"  worst beta           {rat_decimal(worst_beta)}")
        print(f"  worst delta          {rat_decimal(worst_delta)}")
        print(f"  headline max(2b+1, d+1) = {rat_decimal(headline)}")
    if worst_ratio is not None:
        print(f"  worst solver/optimum {rat_decimal(worst_ratio)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=30,
                        help="feasible instances per solver family")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if args.trials < 1:
        parser.error("trials must be positive")

    run_chain(args.trials, derive_rng(args.seed, "ratio-chain"))
    run_cfl(args.trials, derive_rng(args.seed, "ratio-cfl"))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
