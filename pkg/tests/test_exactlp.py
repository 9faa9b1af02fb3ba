"""Exact simplex: optima against a vertex-enumeration oracle, certificates,
vertex structure of the location relaxations."""

from fractions import Fraction

import pytest

from helpers import enumerate_lp_minimum, uniform_caps, uniform_f
from caploc.exactlp import (
    LinearProgram,
    Row,
    build_ckfl_lp,
    build_sckfl_lp,
    build_transportation_lp,
    build_ukm_lp,
    fractional_support,
    lp_cost_of,
    solve_vertex,
    uniform_transfer_reduce,
)
from caploc.model import (
    InfeasibleError,
    UnboundedError,
    derive_rng,
    gen_figure1,
    gen_random,
)
from caploc.oracle import brute_force_ukm


def F(x):
    return Fraction(x)


class TestSolveVertexAgainstEnumeration:
    def test_location_relaxations(self):
        rng = derive_rng(0, "lp-battery")
        agreements = 0
        for trial in range(30):
            n = 2 + trial % 2
            inst = gen_random(seed=rng.getrandbits(32), n=n, m=1, f_range=(0, 6))
            k = 1 + trial % n
            lp = build_sckfl_lp(inst, k, cardinality="eq")
            want = enumerate_lp_minimum(lp)
            if want is None:
                with pytest.raises(InfeasibleError):
                    solve_vertex(lp)
            else:
                assert solve_vertex(lp).objective_value == want
                agreements += 1
        assert agreements >= 15

    def test_full_relaxations(self):
        rng = derive_rng(0, "lp-battery-ckfl")
        for trial in range(12):
            inst = gen_random(seed=rng.getrandbits(32), n=2, m=2, f_range=(0, 5))
            lp = build_ckfl_lp(inst, 1 + trial % 2, cardinality="eq")
            want = enumerate_lp_minimum(lp)
            if want is None:
                with pytest.raises(InfeasibleError):
                    solve_vertex(lp)
            else:
                assert solve_vertex(lp).objective_value == want

    def test_transportation(self):
        rng = derive_rng(0, "lp-battery-flow")
        for trial in range(15):
            a, b = 2, 2
            supplies = [1 + rng.randrange(6) for _ in range(a)]
            demands = [1 + rng.randrange(4) for _ in range(b)]
            if sum(supplies) < sum(demands):
                supplies[0] += sum(demands) - sum(supplies)
            costs = [[F(rng.randrange(9)) for _ in range(b)] for _ in range(a)]
            lp = build_transportation_lp(supplies, demands, costs)
            want = enumerate_lp_minimum(lp)
            assert want is not None
            assert solve_vertex(lp).objective_value == want


class TestVertexCertificates:
    def test_tight_rows_hold_with_equality(self):
        inst = gen_random(seed=1, n=4, m=2, f_range=(1, 7))
        vertex = solve_vertex(build_ckfl_lp(inst, 2, cardinality="eq"))
        assert vertex.certify()
        for tag in vertex.tight:
            if tag[0] == "row":
                row = vertex.lp.rows[tag[1]]
                lhs = sum(
                    c * v for c, v in zip(row.coeffs, vertex.values) if c != 0
                )
                assert lhs == row.rhs

    def test_unbounded_detected(self):
        lp = LinearProgram(
            var_names=("t",),
            objective=(F(-1),),
            rows=(Row((F(1),), ">=", F(0)),),
            lower=(F(0),),
            upper=(None,),
        )
        with pytest.raises(UnboundedError):
            solve_vertex(lp)

    def test_infeasible_detected(self):
        lp = LinearProgram(
            var_names=("t",),
            objective=(F(1),),
            rows=(Row((F(1),), ">=", F(5)),),
            lower=(F(0),),
            upper=(F(1),),
        )
        with pytest.raises(InfeasibleError):
            solve_vertex(lp)


class TestSingleClientVertexStructure:
    def test_fractional_count_zero_or_two(self):
        rng = derive_rng(1, "sckfl-structure")
        seen_two = 0
        for trial in range(60):
            inst = gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 4, m=1, f_range=(0, 9)
            )
            k = 1 + trial % inst.n_facilities
            try:
                vertex = solve_vertex(build_sckfl_lp(inst, k, cardinality="eq"))
            except InfeasibleError:
                continue
            fracs = fractional_support(vertex)
            assert len(fracs) in (0, 2)
            if len(fracs) == 2:
                seen_two += 1
                for i in range(inst.n_facilities):
                    x = vertex[f"x{i}"]
                    cap = inst.facilities[i].capacity
                    assert x == 0 or x == cap * vertex[f"y{i}"]
        assert seen_two >= 5  # the structured case actually occurs

    def test_figure1_lp_value_and_support(self):
        inst = gen_figure1(s=10**4, M=10**6)
        vertex = solve_vertex(build_sckfl_lp(inst, 2, cardinality="eq"))
        assert vertex.objective_value == Fraction(10**8, 999999)
        assert len(fractional_support(vertex)) == 2


class TestFullVertexStructure:
    def test_fractional_count_at_most_m_plus_one(self):
        rng = derive_rng(1, "ckfl-structure")
        for trial in range(40):
            inst = gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 4, m=1 + trial % 3,
                f_range=(0, 8),
            )
            k = 1 + trial % inst.n_facilities
            try:
                vertex = solve_vertex(build_ckfl_lp(inst, k, cardinality="eq"))
            except InfeasibleError:
                continue
            assert len(fractional_support(vertex)) <= inst.n_clients + 1

    @staticmethod
    def _feasible_after_reduce(inst, reduced, k, rel):
        n, m = inst.n_facilities, inst.n_clients
        for j in range(m):
            served = sum(reduced[f"x{i}_{j}"] for i in range(n))
            assert served == inst.clients[j].demand
        for i in range(n):
            used = sum(reduced[f"x{i}_{j}"] for j in range(m))
            assert used <= inst.facilities[i].capacity * reduced[f"y{i}"]
            assert 0 <= reduced[f"y{i}"] <= 1
        total = sum(reduced[f"y{i}"] for i in range(n))
        assert total == k if rel == "eq" else total <= k

    def test_transfer_le_mode_any_fees(self):
        rng = derive_rng(1, "transfer-le")
        checked = 0
        for trial in range(40):
            base = gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 4, m=1 + trial % 3,
                cap_range=(2, 9), f_range=(0, 8),
            )
            inst = uniform_caps(base, 2 + trial % 5)
            k = 1 + trial % inst.n_facilities
            try:
                vertex = solve_vertex(build_ckfl_lp(inst, k, cardinality="le"))
            except InfeasibleError:
                continue
            reduced = uniform_transfer_reduce(
                inst, vertex.as_dict(), cardinality="le")
            m = inst.n_clients
            frac_after = sum(
                1 for i in range(inst.n_facilities) if 0 < reduced[f"y{i}"] < 1)
            assert frac_after <= m
            assert lp_cost_of(inst, reduced) == vertex.objective_value
            self._feasible_after_reduce(inst, reduced, k, "le")
            checked += 1
        assert checked >= 20

    def test_transfer_eq_mode_uniform_fees(self):
        rng = derive_rng(1, "transfer-eq")
        reduced_any = 0
        for trial in range(40):
            base = gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 4, m=1 + trial % 3,
                cap_range=(2, 9),
            )
            inst = uniform_f(uniform_caps(base, 2 + trial % 5), F(trial % 4))
            k = 1 + trial % inst.n_facilities
            try:
                vertex = solve_vertex(build_ckfl_lp(inst, k, cardinality="eq"))
            except InfeasibleError:
                continue
            reduced = uniform_transfer_reduce(inst, vertex.as_dict())
            m = inst.n_clients
            frac_after = sum(
                1 for i in range(inst.n_facilities) if 0 < reduced[f"y{i}"] < 1)
            assert frac_after <= m
            if frac_after < len(fractional_support(vertex)):
                reduced_any += 1
            assert lp_cost_of(inst, reduced) == vertex.objective_value
            self._feasible_after_reduce(inst, reduced, k, "eq")
        assert reduced_any >= 1


class TestMedianRelaxation:
    def test_objective_ignores_opening_and_lower_bounds_oracle(self):
        rng = derive_rng(2, "ukm-lp")
        for trial in range(15):
            inst = gen_random(
                seed=rng.getrandbits(32), n=3 + trial % 3, m=2, f_range=(5, 9)
            )
            l = 1 + trial % inst.n_facilities
            value = solve_vertex(build_ukm_lp(inst, l)).objective_value
            assert value <= brute_force_ukm(inst, l).optimum
