"""Independent reference implementations and instance makers shared by the
test modules. Everything here is deliberately naive: enumeration and exact
Gaussian elimination, no shortcuts shared with the code under test."""

from __future__ import annotations

import itertools
from fractions import Fraction

from caploc.model import Client, Facility, Instance


def uniform_f(inst: Instance, fee) -> Instance:
    return Instance(
        tuple(Facility(f.capacity, Fraction(fee)) for f in inst.facilities),
        inst.clients,
        inst.metric,
        k=inst.k,
    )


def uniform_caps(inst: Instance, cap: int, demand_multiple: bool = False) -> Instance:
    clients = inst.clients
    if demand_multiple:
        clients = tuple(
            Client(max(1, -(-c.demand // cap)) * cap) for c in inst.clients
        )
    return Instance(
        tuple(Facility(cap, f.opening_cost) for f in inst.facilities),
        clients,
        inst.metric,
        k=inst.k,
    )


def subset_sum_decide(sizes, d: int, k: int) -> bool:
    """Plain enumeration: is there a k-subset of sizes summing exactly to d?"""
    return any(sum(combo) == d for combo in itertools.combinations(sizes, k))


def gaussian_solve(matrix, rhs):
    """Solve a square system over Fractions; None when singular."""
    n = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(rhs[i])] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = aug[col][col]
        aug[col] = [v / inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return [aug[r][n] for r in range(n)]


def _satisfies(lp, point) -> bool:
    for row in lp.rows:
        lhs = sum(c * v for c, v in zip(row.coeffs, point))
        if row.rel == "=" and lhs != row.rhs:
            return False
        if row.rel == "<=" and lhs > row.rhs:
            return False
        if row.rel == ">=" and lhs < row.rhs:
            return False
    for v, lo in zip(point, lp.lower):
        if v < lo:
            return False
    for v, up in zip(point, lp.upper):
        if up is not None and v > up:
            return False
    return True


def enumerate_lp_minimum(lp):
    """Minimum objective over all vertices of a small bounded polytope,
    found by trying every choice of tight constraints. None when no vertex
    is feasible (for the bounded programs used in tests: infeasible)."""
    nv = len(lp.var_names)
    constraints = []  # (coeffs, rhs) rows to impose with equality
    for row in lp.rows:
        constraints.append((list(row.coeffs), row.rhs))
    for j in range(nv):
        unit = [Fraction(0)] * nv
        unit[j] = Fraction(1)
        constraints.append((unit, lp.lower[j]))
        if lp.upper[j] is not None:
            constraints.append((list(unit), lp.upper[j]))
    best = None
    for combo in itertools.combinations(range(len(constraints)), nv):
        matrix = [constraints[c][0] for c in combo]
        rhs = [constraints[c][1] for c in combo]
        point = gaussian_solve(matrix, rhs)
        if point is None or not _satisfies(lp, point):
            continue
        value = sum((c * v for c, v in zip(lp.objective, point)), Fraction(0))
        if best is None or value < best:
            best = value
    return best


def support_is_forest(flow) -> bool:
    """True when the bipartite graph of nonzero entries has no cycle."""
    a = len(flow)
    b = len(flow[0]) if flow else 0
    parent = list(range(a + b))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for i in range(a):
        for j in range(b):
            if flow[i][j]:
                ru, rv = find(i), find(a + j)
                if ru == rv:
                    return False
                parent[ru] = rv
    return True
