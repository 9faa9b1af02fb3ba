"""Brute-force reference solvers. Exponential, intended for desk scale only;
every approximation guarantee in the test suite is measured against these."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from caploc.model import (
    InfeasibleError,
    Instance,
    IntegralSolution,
    evaluate,
    solution_from_assignment,
)
from caploc.flow import serve_with_open_set


@dataclass(frozen=True)
class OracleResult:
    optimum: Fraction
    witness: IntegralSolution
    explored: int


def _serve_cost(inst: Instance, subset) -> tuple[Fraction, IntegralSolution] | None:
    if sum(inst.facilities[i].capacity for i in subset) < inst.total_demand:
        return None
    fm = serve_with_open_set(inst, subset)
    sol = solution_from_assignment(inst, sorted(subset), fm.flow)
    opening = sum(
        (inst.facilities[i].opening_cost for i in subset), Fraction(0)
    )
    return fm.cost + opening, sol


def brute_force_ckfl(inst: Instance, k: int, cardinality: str = "le") -> OracleResult:
    """Exact optimum over every open set of size <= k (or == k)."""
    n = inst.n_facilities
    if k < 1:
        raise ValueError("need k >= 1")
    if cardinality not in ("le", "eq"):
        raise ValueError(f"cardinality mode {cardinality!r}")
    if cardinality == "eq" and k > n:
        raise InfeasibleError(f"cannot open exactly {k} of {n} facilities")
    sizes = [k] if cardinality == "eq" else range(1, min(k, n) + 1)
    best = None
    explored = 0
    for size in sizes:
        for subset in itertools.combinations(range(n), size):
            explored += 1
            outcome = _serve_cost(inst, subset)
            if outcome is not None and (best is None or outcome[0] < best[0]):
                best = outcome
    if best is None:
        raise InfeasibleError(f"no feasible open set within budget {k}")
    return OracleResult(best[0], best[1], explored)


def brute_force_cfl(inst: Instance) -> OracleResult:
    """Exact optimum with no cardinality bound."""
    return brute_force_ckfl(inst, inst.n_facilities, "le")


def brute_force_ukm(inst: Instance, k: int) -> OracleResult:
    """Exact k-median optimum: every client to its nearest open center,
    capacities and opening costs ignored.

    The witness routes each demand whole to the chosen center; it is a
    k-median witness, not a capacity-feasible flow."""
    n, m = inst.n_facilities, inst.n_clients
    if k < 1:
        raise ValueError("need k >= 1")
    size = min(k, n)  # extra centers never hurt the assignment objective
    best = None
    explored = 0
    for subset in itertools.combinations(range(n), size):
        explored += 1
        cost = Fraction(0)
        assign = []
        for j in range(m):
            ci, choice = None, None
            for i in subset:
                c = inst.cost(i, j)
                if ci is None or c < ci:
                    ci, choice = c, i
            cost += inst.clients[j].demand * ci
            assign.append(choice)
        if best is None or cost < best[0]:
            best = (cost, subset, tuple(assign))
    cost, subset, assign = best
    rows = []
    for i in subset:
        rows.append(
            [
                Fraction(inst.clients[j].demand) if assign[j] == i else Fraction(0)
                for j in range(m)
            ]
        )
    witness = solution_from_assignment(inst, list(subset), rows)
    return OracleResult(cost, witness, explored)
