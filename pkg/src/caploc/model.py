"""Instance model for hard-capacitated k-facility location.

Sites are indexed facilities-first: facility i is site i, client j is site
n_facilities + j in the metric. All arithmetic is exact rational; demands and
capacities are integers, costs are Fractions.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction


class InfeasibleError(Exception):
    """No feasible solution under the stated constraints."""


class UnboundedError(Exception):
    """Objective unbounded below on the feasible region."""


class ParseError(Exception):
    """Malformed instance text; message carries the 1-based line number."""


def as_rat(value) -> Fraction:
    """Coerce int / str ('p' or 'p/q') / Fraction to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"not an exact rational: {value!r}")


def rat_str(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rat_decimal(value: Fraction, sig: int = 6) -> str:
    """Decimal rendering for reports only; never used in computation."""
    value = Fraction(value)
    if value == 0:
        return "0"
    sign = "-" if value < 0 else ""
    value = abs(value)
    # scale so that 'sig' significant digits survive integer division
    exp = 0
    while value >= 10:
        value /= 10
        exp += 1
    while value < 1:
        value *= 10
        exp -= 1
    scaled = value * Fraction(10) ** (sig - 1)
    digits = scaled.numerator // scaled.denominator
    if scaled - digits >= Fraction(1, 2):
        digits += 1
    text = str(digits)
    if len(text) > sig:  # rounding carried into a new digit
        text = text[:sig]
        exp += 1
    point = exp + 1
    if 0 < point <= sig:
        out = text[:point] + ("." + text[point:] if point < sig else "")
    elif point <= 0:
        out = "0." + "0" * (-point) + text
    else:
        out = text + "0" * (point - sig)
    out = out.rstrip("0").rstrip(".") if "." in out else out
    return sign + out


@dataclass(frozen=True)
class Facility:
    capacity: int
    opening_cost: Fraction


@dataclass(frozen=True)
class Client:
    demand: int


@dataclass(frozen=True)
class Instance:
    facilities: tuple[Facility, ...]
    clients: tuple[Client, ...]
    metric: tuple[tuple[Fraction, ...], ...]
    k: int | None = None

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def n_clients(self) -> int:
        return len(self.clients)

    @property
    def total_demand(self) -> int:
        return sum(c.demand for c in self.clients)

    def cost(self, i: int, j: int) -> Fraction:
        """Unit service cost from facility i to client j."""
        return self.metric[i][self.n_facilities + j]

    def facility_dist(self, i1: int, i2: int) -> Fraction:
        return self.metric[i1][i2]

    def capacities(self) -> tuple[int, ...]:
        return tuple(f.capacity for f in self.facilities)

    def opening_costs(self) -> tuple[Fraction, ...]:
        return tuple(f.opening_cost for f in self.facilities)

    def demands(self) -> tuple[int, ...]:
        return tuple(c.demand for c in self.clients)

    def uniform_capacity(self) -> int | None:
        caps = set(self.capacities())
        return caps.pop() if len(caps) == 1 else None

    def uniform_opening_cost(self) -> Fraction | None:
        costs = set(self.opening_costs())
        return costs.pop() if len(costs) == 1 else None


@dataclass(frozen=True)
class CostBreakdown:
    service: Fraction
    opening: Fraction

    @property
    def total(self) -> Fraction:
        return self.service + self.opening


@dataclass(frozen=True)
class IntegralSolution:
    """Binary open vector plus a nonnegative rational flow matrix (n x m)."""

    open: tuple[int, ...]
    flow: tuple[tuple[Fraction, ...], ...]

    def open_count(self) -> int:
        return sum(self.open)

    def open_indices(self) -> tuple[int, ...]:
        return tuple(i for i, o in enumerate(self.open) if o)


def solution_from_assignment(inst: Instance, open_indices, flow_rows) -> IntegralSolution:
    """Build a full solution from rows covering only the open facilities."""
    n, m = inst.n_facilities, inst.n_clients
    open_vec = [0] * n
    flow = [[Fraction(0)] * m for _ in range(n)]
    for i, row in zip(open_indices, flow_rows):
        open_vec[i] = 1
        flow[i] = [Fraction(v) for v in row]
    return IntegralSolution(tuple(open_vec), tuple(tuple(r) for r in flow))


def evaluate(inst: Instance, sol: IntegralSolution) -> CostBreakdown:
    service = Fraction(0)
    for i in range(inst.n_facilities):
        row = sol.flow[i]
        for j in range(inst.n_clients):
            if row[j]:
                service += inst.cost(i, j) * row[j]
    opening = sum(
        (f.opening_cost for f, o in zip(inst.facilities, sol.open) if o),
        Fraction(0),
    )
    return CostBreakdown(service, opening)


def check_feasible(
    inst: Instance,
    sol: IntegralSolution,
    k: int | None = None,
    cardinality: str = "le",
) -> list[str]:
    """Return human-readable constraint violations; empty list means feasible.

    cardinality: 'le' enforces open_count <= k, 'eq' enforces open_count == k,
    'none' skips the cardinality bound (plain capacitated facility location).
    """
    n, m = inst.n_facilities, inst.n_clients
    problems = []
    if len(sol.open) != n or len(sol.flow) != n or any(len(r) != m for r in sol.flow):
        return [f"shape mismatch: expected open[{n}] and flow[{n}x{m}]"]
    for i in range(n):
        if sol.open[i] not in (0, 1):
            problems.append(f"open[{i}] = {sol.open[i]} is not binary")
    for i in range(n):
        used = sum(sol.flow[i], Fraction(0))
        for j in range(m):
            if sol.flow[i][j] < 0:
                problems.append(f"flow[{i}][{j}] = {rat_str(sol.flow[i][j])} negative")
        cap = inst.facilities[i].capacity * sol.open[i]
        if used > cap:
            problems.append(
                f"facility {i} ships {rat_str(used)} over capacity {cap}"
            )
    for j in range(m):
        served = sum((sol.flow[i][j] for i in range(n)), Fraction(0))
        if served != inst.clients[j].demand:
            problems.append(
                f"client {j} served {rat_str(served)} of demand {inst.clients[j].demand}"
            )
    if cardinality != "none":
        kk = inst.k if k is None else k
        if kk is not None:
            count = sol.open_count()
            if cardinality == "eq" and count != kk:
                problems.append(f"open count {count} != k = {kk}")
            elif cardinality == "le" and count > kk:
                problems.append(f"open count {count} > k = {kk}")
    return problems


def validate_instance(inst: Instance) -> list[str]:
    """Structural checks: positive sizes, metric axioms, k range."""
    problems = []
    n, m = inst.n_facilities, inst.n_clients
    if n < 1:
        problems.append("no facilities")
    if m < 1:
        problems.append("no clients")
    for i, f in enumerate(inst.facilities):
        if not isinstance(f.capacity, int) or f.capacity < 1:
            problems.append(f"facility {i} capacity {f.capacity} not a positive integer")
        if f.opening_cost < 0:
            problems.append(f"facility {i} opening cost negative")
    for j, c in enumerate(inst.clients):
        if not isinstance(c.demand, int) or c.demand < 1:
            problems.append(f"client {j} demand {c.demand} not a positive integer")
    size = n + m
    if len(inst.metric) != size or any(len(row) != size for row in inst.metric):
        problems.append(f"metric is not {size}x{size}")
        return problems
    for a in range(size):
        if inst.metric[a][a] != 0:
            problems.append(f"metric[{a}][{a}] nonzero")
        for b in range(size):
            if inst.metric[a][b] < 0:
                problems.append(f"metric[{a}][{b}] negative")
            if inst.metric[a][b] != inst.metric[b][a]:
                problems.append(f"metric not symmetric at ({a},{b})")
    # triangle inequality is load-bearing for the consolidation bounds
    for a in range(size):
        row_a = inst.metric[a]
        for b in range(size):
            ab = row_a[b]
            row_b = inst.metric[b]
            for c in range(size):
                if ab + row_b[c] < row_a[c]:
                    problems.append(f"triangle violated: d({a},{c}) > d({a},{b}) + d({b},{c})")
                    if len(problems) > 20:
                        return problems
    if inst.k is not None and not (1 <= inst.k <= n):
        problems.append(f"k = {inst.k} outside 1..{n}")
    return problems


# ---------------------------------------------------------------------------
# generators


def derive_rng(seed: int, label: str) -> random.Random:
    """Named split of the master seed; no ambient entropy."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _metric_from_points(points) -> tuple[tuple[Fraction, ...], ...]:
    size = len(points)
    rows = []
    for a in range(size):
        xa, ya = points[a]
        row = []
        for b in range(size):
            xb, yb = points[b]
            row.append(Fraction(abs(xa - xb) + abs(ya - yb)))
        rows.append(tuple(row))
    return tuple(rows)


def _star_metric(unit_costs) -> tuple[tuple[Fraction, ...], ...]:
    """Metric with one client hub: d(facility i, hub) = unit_costs[i].

    Facility-to-facility distances go through the hub, which satisfies the
    triangle inequality with equality.
    """
    n = len(unit_costs)
    size = n + 1
    rows = []
    for a in range(size):
        row = []
        for b in range(size):
            if a == b:
                row.append(Fraction(0))
            elif a == n:
                row.append(Fraction(unit_costs[b]))
            elif b == n:
                row.append(Fraction(unit_costs[a]))
            else:
                row.append(Fraction(unit_costs[a]) + Fraction(unit_costs[b]))
        rows.append(tuple(row))
    return tuple(rows)


def gen_figure1(s: int = 10**4, M: int = 10**6) -> Instance:
    """Single-client family with unbounded LP/MIP gap.

    Four facilities with capacities (s, s, M*s, s+1), zero opening costs,
    unit service costs (0, 0, 100, 1), one client of demand 2s+1, k = 2.
    """
    if s < 2 or M < 2:
        raise ValueError("family needs s >= 2 and M >= 2")
    caps = (s, s, M * s, s + 1)
    costs = (Fraction(0), Fraction(0), Fraction(100), Fraction(1))
    facilities = tuple(Facility(c, Fraction(0)) for c in caps)
    clients = (Client(2 * s + 1),)
    return Instance(facilities, clients, _star_metric(costs), k=2)


def gen_subset_sum(sizes, d: int, k: int) -> Instance:
    """Single-client instance whose optimum decides a SUBSET-SUM question.

    Facility i gets capacity sizes[i], opening cost 0 and unit service cost
    1 - 1/sizes[i]; some k-subset of sizes sums to exactly d iff the optimum
    equals d - k.
    """
    if any(not isinstance(s, int) or s < 1 for s in sizes):
        raise ValueError("sizes must be positive integers")
    if not 1 <= k <= len(sizes):
        raise ValueError("k outside 1..len(sizes)")
    costs = tuple(1 - Fraction(1, s) for s in sizes)
    facilities = tuple(Facility(s, Fraction(0)) for s in sizes)
    clients = (Client(d),)
    return Instance(facilities, clients, _star_metric(costs), k=k)


def gen_random(
    seed: int,
    n: int,
    m: int,
    box: int = 20,
    cap_range=(1, 10),
    demand_range=(1, 10),
    f_range=(0, 10),
    k: int | None = None,
    distinct_sites: bool = False,
) -> Instance:
    """Seeded random instance on an integer grid with the L1 metric."""
    rng = derive_rng(seed, f"random:{n}:{m}:{box}")
    count = n + m
    if distinct_sites:
        if (box + 1) ** 2 < count:
            raise ValueError("box too small for distinct sites")
        cells = rng.sample(range((box + 1) ** 2), count)
        points = [(c % (box + 1), c // (box + 1)) for c in cells]
    else:
        points = [(rng.randint(0, box), rng.randint(0, box)) for _ in range(count)]
    facilities = tuple(
        Facility(rng.randint(*cap_range), Fraction(rng.randint(*f_range)))
        for _ in range(n)
    )
    clients = tuple(Client(rng.randint(*demand_range)) for _ in range(m))
    return Instance(facilities, clients, _metric_from_points(points), k=k)


# ---------------------------------------------------------------------------
# caploc v1 text format


def serialize_instance(inst: Instance) -> str:
    lines = ["caploc v1"]
    k_text = "-" if inst.k is None else str(inst.k)
    lines.append(f"n {inst.n_facilities} m {inst.n_clients} k {k_text}")
    for i, f in enumerate(inst.facilities):
        lines.append(f"facility {i} cap {f.capacity} open {rat_str(f.opening_cost)}")
    for j, c in enumerate(inst.clients):
        lines.append(f"client {j} demand {c.demand}")
    lines.append("metric")
    for row in inst.metric:
        lines.append(" ".join(rat_str(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> Instance:
    raw = text.splitlines()
    lines = []
    for lineno, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body))

    def fail(lineno, msg):
        raise ParseError(f"line {lineno}: {msg}")

    if not lines:
        raise ParseError("line 1: empty instance text")
    pos = 0
    lineno, header = lines[pos]
    if header != "caploc v1":
        fail(lineno, f"expected header 'caploc v1', got {header!r}")
    pos += 1
    if pos >= len(lines):
        fail(lineno, "missing size line")
    lineno, size_line = lines[pos]
    parts = size_line.split()
    if len(parts) != 6 or parts[0] != "n" or parts[2] != "m" or parts[4] != "k":
        fail(lineno, "expected 'n <int> m <int> k <int or ->'")
    try:
        n, m = int(parts[1]), int(parts[3])
        k = None if parts[5] == "-" else int(parts[5])
    except ValueError:
        fail(lineno, "bad integer in size line")
    pos += 1

    facilities: list[Facility | None] = [None] * n
    clients: list[Client | None] = [None] * m
    for _ in range(n):
        if pos >= len(lines):
            fail(lineno, "missing facility lines")
        lineno, line = lines[pos]
        parts = line.split()
        if len(parts) != 6 or parts[0] != "facility" or parts[2] != "cap" or parts[4] != "open":
            fail(lineno, "expected 'facility <idx> cap <int> open <p/q>'")
        try:
            idx, cap, f_open = int(parts[1]), int(parts[3]), as_rat(parts[5])
        except (ValueError, ZeroDivisionError):
            fail(lineno, "bad number in facility line")
        if not 0 <= idx < n or facilities[idx] is not None:
            fail(lineno, f"facility index {parts[1]} out of range or repeated")
        facilities[idx] = Facility(cap, f_open)
        pos += 1
    for _ in range(m):
        if pos >= len(lines):
            fail(lineno, "missing client lines")
        lineno, line = lines[pos]
        parts = line.split()
        if len(parts) != 4 or parts[0] != "client" or parts[2] != "demand":
            fail(lineno, "expected 'client <idx> demand <int>'")
        try:
            idx, demand = int(parts[1]), int(parts[3])
        except ValueError:
            fail(lineno, "bad number in client line")
        if not 0 <= idx < m or clients[idx] is not None:
            fail(lineno, f"client index {parts[1]} out of range or repeated")
        clients[idx] = Client(demand)
        pos += 1

    if pos >= len(lines):
        fail(lineno, "missing 'metric' section")
    lineno, line = lines[pos]
    if line != "metric":
        fail(lineno, f"expected 'metric', got {line!r}")
    pos += 1
    size = n + m
    rows = []
    for _ in range(size):
        if pos >= len(lines):
            fail(lineno, f"metric needs {size} rows")
        lineno, line = lines[pos]
        entries = line.split()
        if len(entries) != size:
            fail(lineno, f"metric row has {len(entries)} entries, expected {size}")
        try:
            rows.append(tuple(as_rat(e) for e in entries))
        except (ValueError, ZeroDivisionError):
            fail(lineno, "bad rational in metric row")
        pos += 1
    if pos != len(lines):
        fail(lines[pos][0], "trailing content after metric")
    return Instance(tuple(facilities), tuple(clients), tuple(rows), k=k)


def instance_digest(inst: Instance) -> str:
    return hashlib.sha256(serialize_instance(inst).encode()).hexdigest()[:12]
