"""Sweep the four-facility worst-case family and print how far the
relaxation falls below the true optimum as the scale grows.

The family has capacities (s, s, M*s, s+1), free openings, demand 2s+1 and
budget 2. The optimum pays s+1; the relaxation pays min(s+1, 100M/(M-1)),
so the ratio grows linearly in s once s clears that threshold.

    python3 scripts/gap_sweep.py --scales 100,1000,10000 --M 1000000
"""

from __future__ import annotations

import argparse
from fractions import Fraction

from caploc.exactlp import build_sckfl_lp, solve_vertex
from caploc.model import gen_figure1, rat_decimal, rat_str
from caploc.oracle import brute_force_ckfl


def parse_scales(text: str) -> list[int]:
    try:
        scales = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not scales or any(s < 1 for s in scales):
        raise argparse.ArgumentTypeError("scales must be positive integers")
    return scales


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scales", type=parse_scales,
                        default=[10, 100, 1000, 10**4, 10**5],
                        help="comma-separated values of s")
    parser.add_argument("--M", type=int, default=10**6,
                        help="capacity multiplier of the oversized facility")
    args = parser.parse_args(argv)

    print("s\toptimum\trelaxation\tratio")
    for s in args.scales:
        inst = gen_figure1(s=s, M=args.M)
        optimum = brute_force_ckfl(inst, 2, cardinality="le").optimum
        relaxed = solve_vertex(
            build_sckfl_lp(inst, 2, cardinality="le")
        ).objective_value
        ratio = Fraction(optimum) / relaxed
        print(f"{s}\t{rat_str(optimum)}\t{rat_str(relaxed)}"
              f"\t{rat_decimal(ratio)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
