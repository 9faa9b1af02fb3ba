"""Exact rational linear programming to vertex solutions.

Two-phase dense-tableau simplex with Bland's rule, no floating point
anywhere. Solutions come back as polytope vertices together with the set of
tight constraints; `certify` checks that set has full column rank. The
module also hosts the LP builders for the facility-location relaxations and
the uniform-capacity fractional-open reduction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from gmpy2 import mpq

from caploc.model import InfeasibleError, Instance, UnboundedError

_ZERO = mpq(0)
_ONE = mpq(1)


@dataclass(frozen=True)
class Row:
    coeffs: tuple[Fraction, ...]
    rel: str  # '<=', '=', '>='
    rhs: Fraction


@dataclass(frozen=True)
class LinearProgram:
    var_names: tuple[str, ...]
    objective: tuple[Fraction, ...]
    rows: tuple[Row, ...]
    lower: tuple[Fraction, ...]
    upper: tuple[Fraction | None, ...]

    def __post_init__(self):
        n = len(self.var_names)
        if len(set(self.var_names)) != n:
            raise ValueError("duplicate variable names")
        if len(self.objective) != n or len(self.lower) != n or len(self.upper) != n:
            raise ValueError("objective/bounds length mismatch")
        for r in self.rows:
            if len(r.coeffs) != n:
                raise ValueError("row width mismatch")
            if r.rel not in ("<=", "=", ">="):
                raise ValueError(f"bad relation {r.rel!r}")
        for lo, up in zip(self.lower, self.upper):
            if up is not None and lo > up:
                raise ValueError("lower bound above upper bound")

    def index(self, name: str) -> int:
        return self.var_names.index(name)


@dataclass(frozen=True)
class VertexSolution:
    lp: LinearProgram
    values: tuple[Fraction, ...]
    objective_value: Fraction
    tight: tuple[tuple, ...]  # ('row', i) / ('lb', j) / ('ub', j)

    def __getitem__(self, name: str) -> Fraction:
        return self.values[self.lp.index(name)]

    def as_dict(self) -> dict[str, Fraction]:
        return dict(zip(self.lp.var_names, self.values))

    def certify(self) -> bool:
        """Tight constraints must span the full variable space."""
        normals = []
        for tag in self.tight:
            if tag[0] == "row":
                normals.append([mpq(c) for c in self.lp.rows[tag[1]].coeffs])
            else:
                unit = [_ZERO] * len(self.lp.var_names)
                unit[tag[1]] = _ONE
                normals.append(unit)
        return _rank(normals) == len(self.lp.var_names)


def _rank(rows) -> int:
    if not rows:
        return 0
    rows = [r[:] for r in rows]
    ncols = len(rows[0])
    rank = 0
    for col in range(ncols):
        pivot = None
        for r in range(rank, len(rows)):
            if rows[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        prow = rows[rank]
        inv = _ONE / prow[col]
        for r in range(rank + 1, len(rows)):
            factor = rows[r][col]
            if factor != 0:
                factor *= inv
                row = rows[r]
                for c in range(col, ncols):
                    row[c] -= factor * prow[c]
        rank += 1
        if rank == len(rows):
            break
    return rank


# ---------------------------------------------------------------------------
# simplex core


def solve_vertex(lp: LinearProgram) -> VertexSolution:
    """Optimal vertex of the LP; raises InfeasibleError / UnboundedError."""
    n = len(lp.var_names)
    lower = [mpq(v) for v in lp.lower]

    # shift to v = x - lower >= 0 and lift finite upper bounds into rows
    work = []  # (coeffs list over n vars, rel, rhs)
    for row in lp.rows:
        coeffs = [mpq(c) for c in row.coeffs]
        rhs = mpq(row.rhs) - sum(c * l for c, l in zip(coeffs, lower) if c != 0)
        work.append((coeffs, row.rel, rhs))
    for j, up in enumerate(lp.upper):
        if up is not None:
            coeffs = [_ZERO] * n
            coeffs[j] = _ONE
            work.append((coeffs, "<=", mpq(up) - lower[j]))

    # normalize to rhs >= 0
    norm = []
    for coeffs, rel, rhs in work:
        if rhs < 0:
            coeffs = [-c for c in coeffs]
            rhs = -rhs
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        norm.append((coeffs, rel, rhs))

    nrows = len(norm)
    n_slack = sum(1 for _, rel, _ in norm if rel != "=")
    n_art = sum(1 for _, rel, _ in norm if rel != "<=")
    width = n + n_slack + n_art
    tab = []
    basis = []
    slack_at = n
    art_at = n + n_slack
    art_cols = []
    for coeffs, rel, rhs in norm:
        line = coeffs + [_ZERO] * (n_slack + n_art) + [rhs]
        if rel == "<=":
            line[slack_at] = _ONE
            basis.append(slack_at)
            slack_at += 1
        elif rel == ">=":
            line[slack_at] = -_ONE
            slack_at += 1
            line[art_at] = _ONE
            basis.append(art_at)
            art_cols.append(art_at)
            art_at += 1
        else:
            line[art_at] = _ONE
            basis.append(art_at)
            art_cols.append(art_at)
            art_at += 1
        tab.append(line)

    if art_cols:
        costs1 = [_ZERO] * width
        for j in art_cols:
            costs1[j] = _ONE
        status = _run_simplex(tab, basis, costs1, width, allowed=range(width))
        if status == "unbounded":  # phase 1 objective is bounded below by 0
            raise AssertionError("phase-1 reported unbounded")
        total = sum(costs1[basis[i]] * tab[i][width] for i in range(len(tab)))
        if total != 0:
            raise InfeasibleError("LP infeasible")
        _drive_out_artificials(tab, basis, width, set(art_cols))

    costs2 = [_ZERO] * width
    for j in range(n):
        costs2[j] = mpq(lp.objective[j])
    allowed = [j for j in range(width) if j not in set(art_cols)]
    status = _run_simplex(tab, basis, costs2, width, allowed=allowed)
    if status == "unbounded":
        raise UnboundedError("objective unbounded below")

    shifted = [_ZERO] * width
    for i, b in enumerate(basis):
        shifted[b] = tab[i][width]
    # int() strips the bignum wrapper so plain Fractions leave this module
    values = tuple(
        Fraction(int((shifted[j] + lower[j]).numerator),
                 int((shifted[j] + lower[j]).denominator))
        for j in range(n)
    )
    objective_value = sum(
        (c * v for c, v in zip(lp.objective, values) if c != 0), Fraction(0)
    )

    tight = []
    for i, row in enumerate(lp.rows):
        lhs = sum((c * v for c, v in zip(row.coeffs, values) if c != 0), Fraction(0))
        if lhs == row.rhs:
            tight.append(("row", i))
    for j in range(n):
        if values[j] == lp.lower[j]:
            tight.append(("lb", j))
        if lp.upper[j] is not None and values[j] == lp.upper[j]:
            tight.append(("ub", j))
    return VertexSolution(lp, values, objective_value, tuple(tight))


def _run_simplex(tab, basis, costs, width, allowed) -> str:
    nrows = len(tab)
    z = []
    for j in range(width):
        cj = costs[j]
        for i in range(nrows):
            cb = costs[basis[i]]
            if cb != 0 and tab[i][j] != 0:
                cj -= cb * tab[i][j]
        z.append(cj)
    allowed = list(allowed)
    while True:
        enter = -1
        for j in allowed:  # Bland: lowest eligible index enters
            if z[j] < 0:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave = -1
        best_num = best_den = None
        for i in range(nrows):
            a = tab[i][enter]
            if a > 0:
                num, den = tab[i][width], a
                if leave < 0:
                    better = True
                else:
                    cmp = num * best_den - best_num * den
                    better = cmp < 0 or (cmp == 0 and basis[i] < basis[leave])
                if better:
                    leave, best_num, best_den = i, num, den
        if leave < 0:
            return "unbounded"
        _pivot(tab, basis, z, leave, enter, width)


def _pivot(tab, basis, z, pr, pc, width):
    prow = tab[pr]
    inv = _ONE / prow[pc]
    if inv != 1:
        for c in range(width + 1):
            if prow[c] != 0:
                prow[c] *= inv
    for i, row in enumerate(tab):
        if i != pr:
            factor = row[pc]
            if factor != 0:
                for c in range(width + 1):
                    if prow[c] != 0:
                        row[c] -= factor * prow[c]
    factor = z[pc]
    if factor != 0:
        for c in range(width):
            if prow[c] != 0:
                z[c] -= factor * prow[c]
    basis[pr] = pc


def _drive_out_artificials(tab, basis, width, art_cols):
    dead = []
    for i in range(len(tab)):
        if basis[i] in art_cols:
            pc = -1
            for j in range(width):
                if j not in art_cols and tab[i][j] != 0:
                    pc = j
                    break
            if pc < 0:
                dead.append(i)  # redundant original row
                continue
            zdummy = [_ZERO] * width
            _pivot(tab, basis, zdummy, i, pc, width)
    for i in reversed(dead):
        del tab[i]
        del basis[i]


# ---------------------------------------------------------------------------
# relaxation builders

F0 = Fraction(0)
F1 = Fraction(1)


def build_sckfl_lp(inst: Instance, k: int, cardinality: str = "eq") -> LinearProgram:
    """Single-client relaxation: open vars y_i in [0,1], flow vars x_i >= 0."""
    if inst.n_clients != 1:
        raise ValueError("single-client builder needs exactly one client")
    n = inst.n_facilities
    d = inst.clients[0].demand
    names = tuple(f"y{i}" for i in range(n)) + tuple(f"x{i}" for i in range(n))
    objective = tuple(f.opening_cost for f in inst.facilities) + tuple(
        inst.cost(i, 0) for i in range(n)
    )
    rows = [Row((F0,) * n + (F1,) * n, "=", Fraction(d))]
    rows.append(Row((F1,) * n + (F0,) * n, cardinality_rel(cardinality), Fraction(k)))
    for i in range(n):
        coeffs = [F0] * (2 * n)
        coeffs[i] = Fraction(-inst.facilities[i].capacity)
        coeffs[n + i] = F1
        rows.append(Row(tuple(coeffs), "<=", F0))
    lower = (F0,) * (2 * n)
    upper = (F1,) * n + (None,) * n
    return LinearProgram(names, objective, tuple(rows), lower, upper)


def build_ckfl_lp(inst: Instance, k: int, cardinality: str = "eq") -> LinearProgram:
    """Full relaxation with per-client demand rows and facility coupling rows."""
    n, m = inst.n_facilities, inst.n_clients
    names = tuple(f"y{i}" for i in range(n)) + tuple(
        f"x{i}_{j}" for i in range(n) for j in range(m)
    )
    nv = n + n * m
    objective = list(f.opening_cost for f in inst.facilities)
    for i in range(n):
        for j in range(m):
            objective.append(inst.cost(i, j))
    rows = []
    for j in range(m):
        coeffs = [F0] * nv
        for i in range(n):
            coeffs[n + i * m + j] = F1
        rows.append(Row(tuple(coeffs), "=", Fraction(inst.clients[j].demand)))
    for i in range(n):
        coeffs = [F0] * nv
        coeffs[i] = Fraction(-inst.facilities[i].capacity)
        for j in range(m):
            coeffs[n + i * m + j] = F1
        rows.append(Row(tuple(coeffs), "<=", F0))
    coeffs = [F1] * n + [F0] * (n * m)
    rows.append(Row(tuple(coeffs), cardinality_rel(cardinality), Fraction(k)))
    lower = (F0,) * nv
    upper = (F1,) * n + (None,) * (n * m)
    return LinearProgram(tuple(names), tuple(objective), tuple(rows), lower, upper)


def build_ukm_lp(inst: Instance, l: int) -> LinearProgram:
    """k-median relaxation: fractional assignment, no capacities, no opening
    cost in the objective; at most l centers."""
    n, m = inst.n_facilities, inst.n_clients
    names = tuple(f"y{i}" for i in range(n)) + tuple(
        f"x{i}_{j}" for i in range(n) for j in range(m)
    )
    nv = n + n * m
    objective = [F0] * n
    for i in range(n):
        for j in range(m):
            objective.append(inst.clients[j].demand * inst.cost(i, j))
    rows = []
    for j in range(m):
        coeffs = [F0] * nv
        for i in range(n):
            coeffs[n + i * m + j] = F1
        rows.append(Row(tuple(coeffs), "=", F1))
    for i in range(n):
        for j in range(m):
            coeffs = [F0] * nv
            coeffs[i] = -F1
            coeffs[n + i * m + j] = F1
            rows.append(Row(tuple(coeffs), "<=", F0))
    coeffs = [F1] * n + [F0] * (n * m)
    rows.append(Row(tuple(coeffs), "<=", Fraction(l)))
    lower = (F0,) * nv
    upper = (F1,) * n + (F1,) * (n * m)
    return LinearProgram(tuple(names), tuple(objective), tuple(rows), lower, upper)


def build_transportation_lp(supplies, demands, unit_costs) -> LinearProgram:
    """Plain transportation LP, used to cross-check the flow solver."""
    a, b = len(supplies), len(demands)
    names = tuple(f"x{i}_{j}" for i in range(a) for j in range(b))
    objective = tuple(Fraction(unit_costs[i][j]) for i in range(a) for j in range(b))
    rows = []
    for i in range(a):
        coeffs = [F0] * (a * b)
        for j in range(b):
            coeffs[i * b + j] = F1
        rows.append(Row(tuple(coeffs), "<=", Fraction(supplies[i])))
    for j in range(b):
        coeffs = [F0] * (a * b)
        for i in range(a):
            coeffs[i * b + j] = F1
        rows.append(Row(tuple(coeffs), "=", Fraction(demands[j])))
    lower = (F0,) * (a * b)
    upper = (None,) * (a * b)
    return LinearProgram(names, objective, tuple(rows), lower, upper)


def cardinality_rel(mode: str) -> str:
    if mode == "eq":
        return "="
    if mode == "le":
        return "<="
    raise ValueError(f"cardinality mode {mode!r} (want 'eq' or 'le')")


def fractional_support(vertex: VertexSolution) -> set[str]:
    """Names of open variables strictly between 0 and 1."""
    out = set()
    for name, value in zip(vertex.lp.var_names, vertex.values):
        if name.startswith("y") and 0 < value < 1:
            out.add(name)
    return out


# ---------------------------------------------------------------------------
# uniform-capacity fractional-open reduction


def uniform_transfer_reduce(
    inst: Instance, values: dict[str, Fraction], cardinality: str = "eq"
):
    """Move opening mass between fractional facilities until at most
    n_clients fractional opens remain, without changing the cost.

    Input is an optimal vertex of the full relaxation on a uniform-capacity
    instance, as a name->value dict; returns a new dict with equal cost.
    At such a vertex every fractional facility either sends its whole
    supply capacity*y to one client or serves nothing at all, so two kinds
    of move suffice: shifting demand (and the opening mass carrying it)
    between two fractional facilities serving the same client, and shifting
    bare opening mass off a fractional facility that serves nothing.  Under
    'le' cardinality an idle facility is closed outright instead, which is
    free because a positive fee on it would contradict optimality.
    """
    s = inst.uniform_capacity()
    if s is None:
        raise ValueError("transfer move needs uniform capacities")
    cardinality_rel(cardinality)
    n, m = inst.n_facilities, inst.n_clients
    vals = dict(values)

    def fractional():
        return [i for i in range(n) if 0 < vals[f"y{i}"] < 1]

    def fee(i):
        return inst.facilities[i].opening_cost

    while True:
        frac = fractional()
        if len(frac) <= m:
            return vals
        by_client: dict[int, int] = {}
        pair = None
        idle = []
        for i in frac:
            yi = vals[f"y{i}"]
            served = False
            for j in range(m):
                if vals[f"x{i}_{j}"] == s * yi and vals[f"x{i}_{j}"] > 0:
                    served = True
                    if j in by_client and pair is None:
                        pair = (by_client[j], i, j)
                    else:
                        by_client.setdefault(j, i)
            if not served:
                idle.append(i)
        if pair is not None:
            i1, i2, j = pair

            def unit_delta(a, b):
                # cost of shifting one demand unit (and 1/s of opening
                # mass) from b toward a
                return (inst.cost(a, j) - inst.cost(b, j)) + (
                    fee(a) - fee(b)
                ) / s

            if unit_delta(i1, i2) > 0:
                i1, i2 = i2, i1
            if unit_delta(i1, i2) < 0:
                # both directions stay feasible, so a strict drop in
                # either certifies the input was not optimal
                raise AssertionError("transfer move improved an optimal solution")
            eps = min(s * vals[f"y{i2}"], s * (1 - vals[f"y{i1}"]))
            vals[f"x{i1}_{j}"] += eps
            vals[f"x{i2}_{j}"] -= eps
            vals[f"y{i1}"] += eps / s
            vals[f"y{i2}"] -= eps / s
            continue
        if not idle:
            raise AssertionError(
                "no reducing move; input was not a vertex of the relaxation"
            )
        if cardinality == "le":
            i2 = idle[0]
            if fee(i2) > 0:
                # closing it would strictly improve the objective
                raise AssertionError(
                    "idle priced facility open; input was not optimal"
                )
            vals[f"y{i2}"] = Fraction(0)
            continue
        # equality budget: the idle open cannot be dropped, so hand its
        # mass to the cheapest other fractional facility
        i2 = max(idle, key=fee)
        i1 = min((i for i in frac if i != i2), key=fee)
        if fee(i1) < fee(i2):
            raise AssertionError("transfer move improved an optimal solution")
        if fee(i1) > fee(i2):
            raise AssertionError(
                "idle shift would raise the cost; fees are not uniform enough"
            )
        delta = min(vals[f"y{i2}"], 1 - vals[f"y{i1}"])
        vals[f"y{i1}"] += delta
        vals[f"y{i2}"] -= delta


def lp_cost_of(inst: Instance, values: dict[str, Fraction]) -> Fraction:
    total = Fraction(0)
    for i in range(inst.n_facilities):
        total += inst.facilities[i].opening_cost * values[f"y{i}"]
        for j in range(inst.n_clients):
            total += inst.cost(i, j) * values[f"x{i}_{j}"]
    return total
