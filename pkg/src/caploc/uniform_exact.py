"""Exact solver for uniform capacities at desk scale.

An optimal flow can be assumed to have a forest of partially-loaded edges
(flow strictly between 0 and s), at most one below-capacity facility per
tree, and edge weights forced by the demands. Enumerating those forests and
solving the divisible remainder as a unit-supply transportation problem
yields the exact optimum for any fixed client count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from caploc.flow import solve_divisible_ckflu
from caploc.model import (
    Client,
    InfeasibleError,
    Instance,
    IntegralSolution,
    evaluate,
)


@dataclass(frozen=True)
class UntightGraph:
    """Bipartite forest of partially-loaded edges.

    facility_set lists the incident facilities (every one has an edge);
    slack lists facilities allowed to end below capacity, at most one per
    connected component."""

    facility_set: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]  # (facility index, client index)
    slack: tuple[int, ...]


def count_spanning_trees(a: int, b: int) -> int:
    """Number of spanning trees of the complete bipartite graph K_{a,b}."""
    if a < 1 or b < 1:
        raise ValueError("need a, b >= 1")
    return a ** (b - 1) * b ** (a - 1)


def enumerate_spanning_trees(a: int, b: int):
    """Yield each spanning tree of K_{a,b} exactly once.

    Trees are tuples of (left, right) index pairs in lexicographic order.
    Binary include/exclude partition over the edge list; the exclude branch
    is pruned when the remaining edges cannot span."""
    if a < 1 or b < 1:
        raise ValueError("need a, b >= 1")
    edges = [(i, j) for i in range(a) for j in range(b)]
    nodes = a + b
    target = nodes - 1

    def find(parent, x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def connects(parent, rest):
        parent = parent[:]
        groups = len(set(find(parent, x) for x in range(nodes)))
        for i, j in rest:
            ri, rj = find(parent, i), find(parent, a + j)
            if ri != rj:
                parent[ri] = rj
                groups -= 1
        return groups == 1

    def rec(pos, picked, parent):
        if len(picked) == target:
            yield tuple(picked)
            return
        if pos == len(edges):
            return
        i, j = edges[pos]
        ri, rj = find(parent, i), find(parent, a + j)
        if ri != rj:
            child = parent[:]
            child[ri] = rj
            picked.append((i, j))
            yield from rec(pos + 1, picked, child)
            picked.pop()
        if connects(parent, edges[pos + 1 :]):
            yield from rec(pos + 1, picked, parent)

    yield from rec(0, [], list(range(nodes)))


def _components(graph: UntightGraph):
    adj: dict = {}
    for i, j in graph.edges:
        adj.setdefault(("f", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("f", i))
    seen = set()
    comps = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        comps.append(sorted(comp))
    return comps, adj


def propagate_weights(graph: UntightGraph, demands, s: int):
    """Forced edge weights of the forest, or None when no integral flow fits.

    Leaf-to-root: a client's edge toward the root carries its unserved
    demand modulo s; a facility's edge toward the root tops it up to exactly
    s. Weights must land strictly inside (0, s), client leftovers must be
    nonnegative, and the root facility must end exactly full unless it is
    the component's slack facility.
    """
    comps, adj = _components(graph)
    slack = set(graph.slack)
    for comp in comps:
        if len([u for u in comp if u[0] == "f" and u[1] in slack]) > 1:
            return None
    weights: dict[tuple[int, int], int] = {}
    residuals: dict[int, int] = {}
    for comp in comps:
        facs = [u[1] for u in comp if u[0] == "f"]
        root_fac = min((f for f in facs if f in slack), default=min(facs))
        root = ("f", root_fac)
        order = []
        parent = {root: None}
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            for v in adj[u]:
                if v != parent[u]:
                    parent[v] = u
                    stack.append(v)
        for u in reversed(order):
            children = [v for v in adj[u] if parent.get(v) == u]
            inflow = 0
            for v in children:
                key = (u[1], v[1]) if u[0] == "f" else (v[1], u[1])
                inflow += weights[key]
            if u[0] == "c":
                rem = demands[u[1]] - inflow
                w = rem % s
                if w == 0 or rem < 0:
                    return None
                weights[(parent[u][1], u[1])] = w
                residuals[u[1]] = rem - w
            elif parent[u] is not None:
                w = s - inflow
                if not 0 < w < s:
                    return None
                weights[(u[1], parent[u][1])] = w
            else:
                if u[1] in slack:
                    if not 0 < inflow < s:
                        return None
                elif inflow != s:
                    return None
    return weights, residuals


def audit_untight(inst: Instance, sol: IntegralSolution) -> list[str]:
    """Structural checks on the partial-edge subgraph of a vertex flow."""
    s = inst.uniform_capacity()
    if s is None:
        raise ValueError("audit needs uniform capacities")
    n, m = inst.n_facilities, inst.n_clients
    edges = [
        (i, j)
        for i in range(n)
        for j in range(m)
        if 0 < sol.flow[i][j] < s
    ]
    problems = []
    facs = sorted({i for i, _ in edges})
    if len(facs) > m:
        problems.append(f"{len(facs)} partially-loaded facilities, above client count {m}")
    if len(edges) > 2 * m - 1:
        problems.append(f"{len(edges)} partial edges, above 2m-1 = {2 * m - 1}")
    # cycle check and per-component slack count by union-find
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in edges:
        parent.setdefault(("f", i), ("f", i))
        parent.setdefault(("c", j), ("c", j))
        ri, rj = find(("f", i)), find(("c", j))
        if ri == rj:
            problems.append(f"cycle through edge ({i},{j})")
        else:
            parent[ri] = rj
    slack_by_root: dict = {}
    for i in facs:
        used = sum(sol.flow[i], Fraction(0))
        if used > s:
            problems.append(f"facility {i} above capacity")
        if used < s:
            root = find(("f", i))
            slack_by_root[root] = slack_by_root.get(root, 0) + 1
    for root, count in slack_by_root.items():
        if count > 1:
            problems.append(f"component of {root} has {count} below-capacity facilities")
    return problems


# ---------------------------------------------------------------------------
# exact solver


def exact_uniform_solve(inst: Instance, k: int, max_clients: int = 4) -> IntegralSolution:
    s = inst.uniform_capacity()
    if s is None:
        raise ValueError("exact solver needs uniform capacities")
    n, m = inst.n_facilities, inst.n_clients
    if m > max_clients:
        raise ValueError(
            f"{m} clients: enumeration over partial-edge forests is desk-scale only "
            f"(max_clients={max_clients})"
        )
    if not 1 <= k <= n:
        raise InfeasibleError(f"k = {k} outside 1..{n}")
    demands = inst.demands()
    opening = inst.opening_costs()

    best: tuple[Fraction, IntegralSolution] | None = None

    def consider(cost, sol):
        nonlocal best
        if best is None or cost < best[0]:
            best = (cost, sol)

    if all(d % s == 0 for d in demands):
        try:
            sol = solve_divisible_ckflu(inst, k)
            consider(evaluate(inst, sol).total, sol)
        except InfeasibleError:
            pass

    tree_cache: dict[int, list] = {}
    seen: set[frozenset] = set()
    residue_memo: dict = {}
    for size in range(1, min(m, k, n) + 1):
        trees = tree_cache.get(size)
        if trees is None:
            trees = list(enumerate_spanning_trees(size, m))
            tree_cache[size] = trees
        for fbar in itertools.combinations(range(n), size):
            for tree in trees:
                for mask in range(1, 1 << len(tree)):
                    chosen = [tree[t] for t in range(len(tree)) if mask >> t & 1]
                    if len({e[0] for e in chosen}) != size:
                        continue  # an isolated facility belongs to a smaller pool
                    edges = frozenset((fbar[a], j) for a, j in chosen)
                    if edges in seen:
                        continue
                    seen.add(edges)
                    touched = {j for _, j in edges}
                    if any(demands[j] % s for j in range(m) if j not in touched):
                        continue
                    _try_candidates(
                        inst, k, s, fbar, edges, touched, residue_memo, consider
                    )
    if best is None:
        raise InfeasibleError(f"no solution opening at most {k} facilities")
    return best[1]


def _try_candidates(inst, k, s, fbar, edges, touched, residue_memo, consider):
    n, m = inst.n_facilities, inst.n_clients
    demands = inst.demands()
    base = UntightGraph(fbar, tuple(sorted(edges)), ())
    comps, _ = _components(base)
    comp_facs = [[u[1] for u in comp if u[0] == "f"] for comp in comps]
    for picks in itertools.product(*[[None] + facs for facs in comp_facs]):
        slack = tuple(p for p in picks if p is not None)
        graph = UntightGraph(fbar, base.edges, slack)
        outcome = propagate_weights(graph, demands, s)
        if outcome is None:
            continue
        weights, residuals = outcome
        res_vec = tuple(
            residuals.get(j, 0) if j in touched else demands[j] for j in range(m)
        )
        key = (fbar, res_vec)
        if key in residue_memo:
            residue = residue_memo[key]
        else:
            residue = _solve_residue(inst, fbar, res_vec, k - len(fbar), s)
            residue_memo[key] = residue
        if residue is None:
            continue
        residue_cost, residue_flows, residue_open = residue
        cost = residue_cost
        flow = [[Fraction(0)] * m for _ in range(n)]
        open_vec = [0] * n
        for i in fbar:
            open_vec[i] = 1
            cost += inst.facilities[i].opening_cost
        for (i, j), w in weights.items():
            flow[i][j] = Fraction(w)
            cost += inst.cost(i, j) * w
        for i in residue_open:
            open_vec[i] = 1
        for (i, j), w in residue_flows.items():
            flow[i][j] += Fraction(w)
        sol = IntegralSolution(tuple(open_vec), tuple(tuple(r) for r in flow))
        consider(cost, sol)


def _solve_residue(inst, fbar, res_vec, budget, s):
    """Optimal way to serve the divisible leftovers from the unused pool.

    Facilities carrying partial edges are spent: the full ones have no room
    and the slack one stays below capacity by construction, so the pool is
    the complement of fbar. Returns (cost, flows, opened) or None."""
    m = inst.n_clients
    pool = [i for i in range(inst.n_facilities) if i not in fbar]
    clients = [j for j in range(m) if res_vec[j] > 0]
    if not clients:
        return Fraction(0), {}, ()
    if budget <= 0 or not pool:
        return None
    keep = pool + [inst.n_facilities + j for j in clients]
    metric = tuple(tuple(inst.metric[a][b] for b in keep) for a in keep)
    sub = Instance(
        tuple(inst.facilities[i] for i in pool),
        tuple(Client(res_vec[j]) for j in clients),
        metric,
        k=None,
    )
    try:
        sol = solve_divisible_ckflu(sub, budget)
    except InfeasibleError:
        return None
    flows = {}
    for a, i in enumerate(pool):
        for b, j in enumerate(clients):
            if sol.flow[a][b]:
                flows[(i, j)] = sol.flow[a][b]
    opened = tuple(pool[a] for a in range(len(pool)) if sol.open[a])
    return evaluate(sub, sol).total, flows, opened
