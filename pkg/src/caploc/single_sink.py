"""Single-client solvers.

fptas_solve enumerates which facility may end partially used and how costly
the costliest fully-used one may be, then fills capacities by a knapsack-
style DP over floor-scaled costs. two_approx_solve rounds optimal LP
vertices, recursing on a shrinking facility pool; its output opens exactly
k facilities and costs at most twice the exactly-k optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from caploc.exactlp import build_sckfl_lp, solve_vertex
from caploc.model import (
    InfeasibleError,
    Instance,
    IntegralSolution,
    solution_from_assignment,
)


@dataclass(frozen=True)
class FptasConfig:
    epsilon: Fraction

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class DPTable:
    """best[g][b][p] = largest capacity sum over <= g of the first b items
    with scaled costs summing to exactly p; -1 marks unreachable states."""

    items: tuple[tuple[int, int], ...]  # (capacity, scaled cost)
    gmax: int
    pmax: int
    best: np.ndarray

    def value(self, g: int, b: int, p: int) -> int:
        return int(self.best[g, b, p])

    def witness(self, g: int, b: int, p: int) -> tuple[int, ...]:
        """Item positions realizing best[g][b][p]; ties prefer not opening."""
        if self.best[g, b, p] < 0:
            raise ValueError("unreachable state has no witness")
        picks = []
        while b > 0:
            if self.best[g, b, p] == self.best[g, b - 1, p]:
                b -= 1
                continue
            cap, sc = self.items[b - 1]
            assert g > 0 and p >= sc
            assert self.best[g, b, p] == self.best[g - 1, b - 1, p - sc] + cap
            picks.append(b - 1)
            g, b, p = g - 1, b - 1, p - sc
        return tuple(reversed(picks))


def dp_solve(items, gmax: int, pmax: int) -> DPTable:
    items = tuple((int(c), int(p)) for c, p in items)
    if any(c < 0 or p < 0 for c, p in items):
        raise ValueError("negative capacity or scaled cost")
    nb = len(items)
    best = np.full((gmax + 1, nb + 1, pmax + 1), -1, dtype=np.int64)
    best[:, 0, 0] = 0
    for b, (cap, sc) in enumerate(items):
        best[:, b + 1, :] = best[:, b, :]
        if sc <= pmax and gmax >= 1:
            prev = best[0:gmax, b, 0 : pmax + 1 - sc]
            grown = np.where(prev >= 0, prev + cap, -1)
            np.maximum(best[1 : gmax + 1, b + 1, sc:], grown,
                       out=best[1 : gmax + 1, b + 1, sc:])
    return DPTable(items, gmax, pmax, best)


# ---------------------------------------------------------------------------
# FPTAS


def _require_single_client(inst: Instance):
    if inst.n_clients != 1:
        raise ValueError("single-client solver got a multi-client instance")


def fptas_solve(inst: Instance, k: int, config: FptasConfig) -> IntegralSolution:
    """Cost at most (1 + epsilon) times the optimum opening <= k facilities."""
    _require_single_client(inst)
    n = inst.n_facilities
    if not 1 <= k <= n:
        raise ValueError(f"k = {k} outside 1..{n}")
    d = inst.clients[0].demand
    eps = Fraction(config.epsilon)

    weights = []  # (C_i, capacity, unit cost, opening cost, index)
    for i, f in enumerate(inst.facilities):
        c = inst.cost(i, 0)
        weights.append((c * f.capacity + f.opening_cost, f.capacity, c, f.opening_cost, i))
    free = sorted((w for w in weights if w[0] == 0), key=lambda w: (-w[1], w[4]))
    positive = sorted((w for w in weights if w[0] > 0), key=lambda w: (w[0], w[4]))

    best = None  # (total cost, [(facility, flow)])
    # a free facility costs nothing to open or use, but still spends budget,
    # so the number opened is enumerated rather than assumed maximal
    for q in range(min(len(free), k) + 1):
        opened = free[:q]
        room = sum(w[1] for w in opened)
        served = min(d, room)
        flows = []
        left = served
        for w in opened:
            take = min(left, w[1])
            flows.append((w[4], Fraction(take)))
            left -= take
        if served == d:
            if best is None or best[0] > 0:
                best = (Fraction(0), flows)
            continue
        if k - q == 0:
            continue
        core = _scaled_core(positive, d - served, k - q, eps)
        if core is not None and (best is None or core[0] < best[0]):
            best = (core[0], flows + core[1])
    if best is None:
        raise InfeasibleError(f"no k-subset of facilities covers demand {d}")
    open_idx = sorted(i for i, _ in best[1])
    by_idx = dict(best[1])
    return solution_from_assignment(
        inst, open_idx, [[by_idx[i]] for i in open_idx]
    )


def _scaled_core(items, d: int, k: int, eps: Fraction):
    """All items have positive full-use cost C_i; items sorted by C_i."""
    nb = len(items)
    if nb == 0:
        return None
    best = None  # (orig cost, flows, tag)

    def consider(cost, flows):
        nonlocal best
        if best is None or cost < best[0]:
            best = (cost, flows)

    # single-facility candidates
    for C, cap, c, f, idx in items:
        if cap >= d:
            consider(d * c + f, [(idx, Fraction(d))])

    for t in range(nb):
        C_t, s_t, c_t, f_t, idx_t = items[t]
        for r in range(nb):
            ground = [b for b in range(r + 1) if b != t]
            if ground:
                c0 = items[ground[-1]][0]
                w = eps * c0 / k
                pcap = int(Fraction(k) / eps)  # floor(C^0/W) independent of C^0
            else:
                w = Fraction(1)
                pcap = 0
            pmax = (k - 1) * pcap
            caps = [items[b][1] for b in ground]
            scaled = [int(items[b][0] / w) for b in ground]
            table = dp_solve(list(zip(caps, scaled)), k - 1, pmax)
            cbar_t = c_t / w
            fbar_t = f_t / w
            choice = None  # (scaled cost, g, p, x_t)
            final = table.best[:, len(ground), :]
            for g in range(k):
                row = final[g]
                for p in range(pmax + 1):
                    reach = int(row[p])
                    if reach < 0:
                        continue
                    x_t = d - reach
                    if 0 <= x_t <= s_t:
                        sc = p + x_t * cbar_t + fbar_t
                        if choice is None or sc < choice[0]:
                            choice = (sc, g, p, x_t)
            if choice is None:
                continue
            _, g, p, x_t = choice
            picks = table.witness(g, len(ground), p)
            flows = [(items[ground[b]][4], Fraction(items[ground[b]][1])) for b in picks]
            flows.append((idx_t, Fraction(x_t)))
            cost = sum((items[ground[b]][0] for b in picks), Fraction(0))
            cost += x_t * c_t + f_t
            consider(cost, flows)
    return best


# ---------------------------------------------------------------------------
# LP-vertex-guided 2-approximation (exactly-k opening semantics)


def two_approx_solve(inst: Instance, k: int, stats: dict | None = None) -> IntegralSolution:
    _require_single_client(inst)
    n = inst.n_facilities
    if k < 1:
        raise ValueError("need k >= 1")
    if stats is not None:
        stats.setdefault("calls", 0)
        stats.setdefault("lp_solves", 0)
        stats.setdefault("max_depth", 0)
    outcome = _find_solution(inst, tuple(range(n)), k, 0, stats)
    if outcome is None:
        raise InfeasibleError(f"no solution opening exactly {k} facilities")
    return outcome


def _restricted_lp(inst: Instance, active, k, fixed_one=None, fixed_zero=()):
    lp = build_sckfl_lp_active(inst, active, k)
    if fixed_one is None and not fixed_zero:
        return lp
    lower = list(lp.lower)
    upper = list(lp.upper)
    pos = {i: t for t, i in enumerate(active)}
    if fixed_one is not None:
        lower[pos[fixed_one]] = Fraction(1)
    for i in fixed_zero:
        upper[pos[i]] = Fraction(0)
    return type(lp)(lp.var_names, lp.objective, lp.rows, tuple(lower), tuple(upper))


def build_sckfl_lp_active(inst: Instance, active, k):
    sub_fac = tuple(inst.facilities[i] for i in active)
    keep = list(active) + [inst.n_facilities]
    metric = tuple(tuple(inst.metric[a][b] for b in keep) for a in keep)
    sub = Instance(sub_fac, inst.clients, metric, k=k)
    return build_sckfl_lp(sub, k, "eq")


def _solution_from_vertex(inst: Instance, active, vertex) -> IntegralSolution:
    opens, flows = [], []
    for t, i in enumerate(active):
        if vertex[f"y{t}"] == 1:
            opens.append(i)
            flows.append([vertex[f"x{t}"]])
    return solution_from_assignment(inst, opens, flows)


def _cost(inst: Instance, sol: IntegralSolution) -> Fraction:
    total = Fraction(0)
    for i in sol.open_indices():
        total += inst.facilities[i].opening_cost
        total += inst.cost(i, 0) * sol.flow[i][0]
    return total


def _find_solution(inst, active, k, depth, stats):
    if stats is not None:
        stats["calls"] += 1
        stats["max_depth"] = max(stats["max_depth"], depth)
    try:
        vertex = _solve_active(inst, active, k, stats)
    except InfeasibleError:
        return None
    fracs = [i for t, i in enumerate(active) if 0 < vertex[f"y{t}"] < 1]
    if not fracs:
        return _solution_from_vertex(inst, active, vertex)

    assert len(fracs) == 2, "vertex of the single-client relaxation must have 0 or 2 fractional opens"
    i1, i2 = sorted(fracs, key=lambda i: (-inst.facilities[i].capacity, i))
    pos = {i: t for t, i in enumerate(active)}

    # merge the fractional pair into the larger facility
    merged_flow = vertex[f"x{pos[i1]}"] + vertex[f"x{pos[i2]}"]
    assert merged_flow <= inst.facilities[i1].capacity
    opens, flows = [i1], [[merged_flow]]
    for t, i in enumerate(active):
        if i not in (i1, i2) and vertex[f"y{t}"] == 1:
            opens.append(i)
            flows.append([vertex[f"x{t}"]])
    sol_merge = solution_from_assignment(inst, opens, flows)

    sol_rec = _find_solution(inst, tuple(i for i in active if i != i1), k, depth + 1, stats)

    candidates = [sol_merge] + ([sol_rec] if sol_rec is not None else [])

    closed: list[int] = []
    while len(closed) <= len(active) - k:
        try:
            v5 = _solve_active(inst, active, k, stats, fixed_one=i1, fixed_zero=closed)
        except InfeasibleError:
            break
        fr5 = [i for t, i in enumerate(active) if 0 < v5[f"y{t}"] < 1]
        if not fr5:
            candidates.append(_solution_from_vertex(inst, active, v5))
            break
        if v5[f"x{pos[i1]}"] == inst.facilities[i1].capacity:
            break
        assert len(fr5) == 2
        i3, i4 = sorted(fr5, key=lambda i: (inst.facilities[i].opening_cost, i))
        # the vertex ships nothing through i1 here (flows sit at 0 or at
        # capacity*y, and the capacity case exited above), so closing i1
        # and rounding the fractional pair up stays feasible
        assert v5[f"x{pos[i1]}"] == 0
        opens, flows = [], []
        for t, i in enumerate(active):
            if i == i1:
                continue
            if i in (i3, i4) or v5[f"y{t}"] == 1:
                opens.append(i)
                flows.append([v5[f"x{t}"]])
        candidates.append(solution_from_assignment(inst, opens, flows))
        closed.append(i4)

    return min(candidates, key=lambda s: _cost(inst, s))


def _solve_active(inst, active, k, stats, fixed_one=None, fixed_zero=()):
    lp = _restricted_lp(inst, active, k, fixed_one, fixed_zero)
    if stats is not None:
        stats["lp_solves"] += 1
    return solve_vertex(lp)
