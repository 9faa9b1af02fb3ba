"""Exact min-cost transportation flows via successive shortest paths.

Supplies and demands are integers, unit costs exact rationals, so optimal
flows are integral. Returned flows are post-processed to vertices of the
transportation polytope (forest support) by cost-neutral cycle cancelling.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction

from caploc.model import InfeasibleError, Instance, IntegralSolution, solution_from_assignment

BIG = None  # sentinel; real arc capacity bound set per problem


@dataclass(frozen=True)
class TransportationProblem:
    supplies: tuple[int, ...]
    demands: tuple[int, ...]
    unit_costs: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        a, b = len(self.supplies), len(self.demands)
        if len(self.unit_costs) != a or any(len(r) != b for r in self.unit_costs):
            raise ValueError(f"cost matrix is not {a}x{b}")
        if any(s < 0 for s in self.supplies) or any(d < 0 for d in self.demands):
            raise ValueError("negative supply or demand")


@dataclass(frozen=True)
class FlowMatrix:
    flow: tuple[tuple[int, ...], ...]
    cost: Fraction

    def row_totals(self) -> tuple[int, ...]:
        return tuple(sum(r) for r in self.flow)

    def col_totals(self) -> tuple[int, ...]:
        if not self.flow:
            return ()
        return tuple(sum(r[j] for r in self.flow) for j in range(len(self.flow[0])))


def solve_transportation(tp: TransportationProblem) -> FlowMatrix:
    """Integral optimal flow meeting every demand exactly; supplies are
    upper bounds. Surplus supply is absorbed by an internal free sink."""
    a, b = len(tp.supplies), len(tp.demands)
    total_supply, total_demand = sum(tp.supplies), sum(tp.demands)
    if total_supply < total_demand:
        raise InfeasibleError(
            f"total supply {total_supply} below total demand {total_demand}"
        )
    surplus = total_supply - total_demand
    demands = list(tp.demands)
    costs = [list(row) for row in tp.unit_costs]
    if surplus > 0:
        demands.append(surplus)
        for row in costs:
            row.append(Fraction(0))
    nb = len(demands)
    flow = _ssp(tp.supplies, demands, costs)
    _make_forest(flow, costs, a, nb)
    real = tuple(tuple(row[:b]) for row in flow)
    cost = Fraction(0)
    for i in range(a):
        for j in range(b):
            if real[i][j]:
                cost += tp.unit_costs[i][j] * real[i][j]
    return FlowMatrix(real, cost)


def _ssp(supplies, demands, costs):
    """Successive shortest augmenting paths with node potentials."""
    a, b = len(supplies), len(demands)
    source, target = 0, 1 + a + b
    nodes = target + 1
    big = sum(supplies) + 1

    # arcs as parallel arrays; arc 2t and 2t+1 are a residual pair
    head, cap, cost = [], [], []
    adj = [[] for _ in range(nodes)]

    def add_arc(u, v, c, w):
        adj[u].append(len(head))
        head.append(v)
        cap.append(c)
        cost.append(w)
        adj[v].append(len(head))
        head.append(u)
        cap.append(0)
        cost.append(-w)

    for i in range(a):
        add_arc(source, 1 + i, supplies[i], Fraction(0))
    arc_of = [[0] * b for _ in range(a)]
    for i in range(a):
        for j in range(b):
            arc_of[i][j] = len(head)
            add_arc(1 + i, 1 + a + j, big, costs[i][j])
    for j in range(b):
        add_arc(1 + a + j, target, demands[j], Fraction(0))

    if any(costs[i][j] < 0 for i in range(a) for j in range(b)):
        pot = _bellman_ford(nodes, adj, head, cap, cost, source)
    else:
        pot = [Fraction(0)] * nodes

    remaining = sum(demands)
    while remaining > 0:
        dist = [None] * nodes
        prev_arc = [-1] * nodes
        dist[source] = Fraction(0)
        heap = [(Fraction(0), source)]
        seen = [False] * nodes
        while heap:
            d_u, u = heapq.heappop(heap)
            if seen[u]:
                continue
            seen[u] = True
            for t in adj[u]:
                if cap[t] > 0:
                    v = head[t]
                    nd = d_u + cost[t] + pot[u] - pot[v]
                    if dist[v] is None or nd < dist[v]:
                        dist[v] = nd
                        prev_arc[v] = t
                        heapq.heappush(heap, (nd, v))
        if not seen[target]:
            raise InfeasibleError("demand unreachable")  # cannot occur on complete bipartite data
        for v in range(nodes):
            if dist[v] is not None:
                pot[v] += dist[v]
        bottleneck = remaining
        v = target
        while v != source:
            t = prev_arc[v]
            bottleneck = min(bottleneck, cap[t])
            v = head[t ^ 1]
        v = target
        while v != source:
            t = prev_arc[v]
            cap[t] -= bottleneck
            cap[t ^ 1] += bottleneck
            v = head[t ^ 1]
        remaining -= bottleneck

    return [[cap[arc_of[i][j] ^ 1] for j in range(b)] for i in range(a)]


def _bellman_ford(nodes, adj, head, cap, cost, source):
    dist = [Fraction(0)] * nodes  # all nodes reachable enough for potentials
    for _ in range(nodes):
        changed = False
        for u in range(nodes):
            du = dist[u]
            for t in adj[u]:
                if cap[t] > 0 and du + cost[t] < dist[head[t]]:
                    dist[head[t]] = du + cost[t]
                    changed = True
        if not changed:
            break
    return dist


def _make_forest(flow, costs, a, nb):
    """Cancel support cycles at zero cost until the support is a forest."""
    while True:
        cycle = _find_cycle(flow, a, nb)
        if cycle is None:
            return
        delta = Fraction(0)
        eps = None
        for (i, j, sign) in cycle:
            delta += costs[i][j] if sign > 0 else -costs[i][j]
            if sign < 0:
                eps = flow[i][j] if eps is None else min(eps, flow[i][j])
        if delta != 0:
            raise AssertionError("support cycle with nonzero cost in an optimal flow")
        for (i, j, sign) in cycle:
            flow[i][j] += sign * eps


def _find_cycle(flow, a, nb):
    """A cycle in the bipartite support graph as (row, col, sign) steps."""
    adj = [[] for _ in range(a + nb)]
    for i in range(a):
        for j in range(nb):
            if flow[i][j] > 0:
                adj[i].append(a + j)
                adj[a + j].append(i)
    state = [0] * (a + nb)
    parent = [-1] * (a + nb)
    for root in range(a + nb):
        if state[root]:
            continue
        stack = [(root, -1)]
        while stack:
            u, pu = stack.pop()
            if state[u] == 1:
                continue
            state[u] = 1
            parent[u] = pu
            for v in adj[u]:
                if v == pu:  # tree edge back to the parent, never a cycle here
                    continue
                if state[v] == 1:
                    # walk u back to v
                    path = [u]
                    w = u
                    while w != v:
                        w = parent[w]
                        path.append(w)
                    steps = []
                    for idx in range(len(path)):
                        x, y = path[idx], path[(idx + 1) % len(path)]
                        sign = 1 if idx % 2 == 0 else -1
                        if x < a:
                            steps.append((x, y - a, sign))
                        else:
                            steps.append((y, x - a, sign))
                    return steps
                stack.append((v, u))
    return None


# ---------------------------------------------------------------------------
# facility-location wrappers


def serve_with_open_set(inst: Instance, open_indices) -> FlowMatrix:
    """Cheapest exact service of all demands from the given open facilities.

    Rows of the result follow sorted(open_indices)."""
    idx = sorted(set(open_indices))
    if not idx:
        raise InfeasibleError("no facilities open")
    supplies = tuple(inst.facilities[i].capacity for i in idx)
    demands = inst.demands()
    unit = tuple(tuple(inst.cost(i, j) for j in range(inst.n_clients)) for i in idx)
    return solve_transportation(TransportationProblem(supplies, demands, unit))


def serve_as_solution(inst: Instance, open_indices) -> IntegralSolution:
    idx = sorted(set(open_indices))
    fm = serve_with_open_set(inst, idx)
    return solution_from_assignment(inst, idx, fm.flow)


def solve_divisible_ckflu(inst: Instance, k: int) -> IntegralSolution:
    """Exact optimum when capacities are uniform and divide every demand.

    Each facility either ships its full capacity to a single client or stays
    closed, so the problem is a unit-supply transportation problem whose
    shipping cost to a client folds in the opening cost."""
    s = inst.uniform_capacity()
    if s is None:
        raise ValueError("divisible solver needs uniform capacities")
    units = []
    for j, c in enumerate(inst.clients):
        if c.demand % s != 0:
            raise ValueError(f"demand of client {j} not divisible by capacity {s}")
        units.append(c.demand // s)
    n, m = inst.n_facilities, inst.n_clients
    need = sum(units)
    if need > k:
        raise InfeasibleError(f"{need} full facilities needed, budget is {k}")
    if need > n:
        raise InfeasibleError(f"{need} full facilities needed, only {n} exist")
    supplies = (1,) * n
    demands = tuple(units)  # surplus facilities park on the internal free sink
    unit = tuple(
        tuple(s * inst.cost(i, j) + inst.facilities[i].opening_cost for j in range(m))
        for i in range(n)
    )
    fm = solve_transportation(TransportationProblem(supplies, demands, unit))
    open_idx = []
    rows = []
    for i in range(n):
        row = [Fraction(0)] * m
        served = False
        for j in range(m):
            if fm.flow[i][j]:
                row[j] = Fraction(s * fm.flow[i][j])
                served = True
        if served:
            open_idx.append(i)
            rows.append(row)
    return solution_from_assignment(inst, open_idx, rows)
