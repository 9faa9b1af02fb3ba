"""Clustering, consolidation, the bicriteria solvers, and the exact
per-instance guarantee measurements."""

from fractions import Fraction

import pytest

from helpers import uniform_caps, uniform_f
from caploc.consolidation import (
    GAMMA_DEFAULT,
    ChainReport,
    StarSet,
    _check,
    cfl_ratio_report,
    cfl_uniform_f_solve,
    ckfl_chain_report,
    ckfl_uniform_f_solve,
    consolidate,
    ufl_local_search,
    ukm_local_search,
)
from caploc.model import (
    InfeasibleError,
    check_feasible,
    derive_rng,
    evaluate,
    gen_random,
    validate_instance,
)
from caploc.oracle import brute_force_ukm

F = Fraction


def fee_instance(seed, n, m, fee=2, distinct=True, cap=None):
    inst = gen_random(
        seed=seed, n=n, m=m, cap_range=(2, 8), demand_range=(1, 5),
        distinct_sites=distinct,
    )
    inst = uniform_f(inst, F(fee))
    if cap is not None:
        inst = uniform_caps(inst, cap)
    return inst


class TestMedianClustering:
    def test_exactly_l_centers_nearest_assignment(self):
        rng = derive_rng(7, "ukm-shape")
        for trial in range(15):
            inst = fee_instance(rng.getrandbits(32), n=5, m=4)
            l = 1 + trial % 5
            stars = ukm_local_search(inst, l)
            assert len(stars.centers) == l
            assert len(set(stars.centers)) == l
            recomputed = F(0)
            for j, c in enumerate(stars.center_of):
                assert c in stars.centers
                nearest = min(inst.cost(i, j) for i in stars.centers)
                assert inst.cost(c, j) == nearest
                recomputed += inst.clients[j].demand * inst.cost(c, j)
            assert stars.service_cost == recomputed

    def test_never_beats_the_exact_median(self):
        rng = derive_rng(7, "ukm-alpha")
        for trial in range(15):
            inst = fee_instance(rng.getrandbits(32), n=4, m=4)
            l = 1 + trial % 4
            stars = ukm_local_search(inst, l)
            assert stars.service_cost >= brute_force_ukm(inst, l).optimum

    def test_rejects_bad_center_count(self):
        inst = fee_instance(1, n=3, m=2)
        with pytest.raises(ValueError):
            ukm_local_search(inst, 0)
        with pytest.raises(ValueError):
            ukm_local_search(inst, 4)

    def test_seeded_determinism(self):
        inst = fee_instance(5, n=5, m=4)
        assert ukm_local_search(inst, 2, seed=9) == ukm_local_search(inst, 2, seed=9)


class TestFacilityClustering:
    def test_free_opening_reaches_nearest_site_everywhere(self):
        rng = derive_rng(7, "ufl-free")
        for trial in range(10):
            inst = fee_instance(rng.getrandbits(32), n=4, m=3, fee=3)
            stars = ufl_local_search(inst, gamma=F(0))
            want = sum(
                inst.clients[j].demand * min(
                    inst.cost(i, j) for i in range(inst.n_facilities))
                for j in range(inst.n_clients)
            )
            assert stars.service_cost == want

    def test_huge_scale_collapses_to_one_center(self):
        rng = derive_rng(7, "ufl-huge")
        for trial in range(10):
            inst = fee_instance(rng.getrandbits(32), n=4, m=3, fee=2)
            stars = ufl_local_search(inst, gamma=F(10**6))
            assert len(stars.centers) == 1

    def test_seeded_determinism(self):
        inst = fee_instance(6, n=5, m=3)
        a = ufl_local_search(inst, seed=4)
        b = ufl_local_search(inst, seed=4)
        assert a == b


class TestConsolidate:
    def test_demand_conserved_and_metric_valid(self):
        rng = derive_rng(7, "consolidate")
        for trial in range(12):
            inst = fee_instance(rng.getrandbits(32), n=4, m=4)
            stars = ukm_local_search(inst, 1 + trial % 4)
            cons = consolidate(inst, stars)
            assert sum(c.demand for c in cons.instance.clients) == inst.total_demand
            assert validate_instance(cons.instance) == []
            assert cons.instance.facilities == inst.facilities
            # each consolidated client sits on its center site: distance 0
            for idx, site in enumerate(cons.center_sites):
                assert cons.instance.cost(site, idx) == 0

    def test_unused_centers_are_dropped(self):
        inst = fee_instance(3, n=3, m=2)
        # hand-built clustering: both clients on center 0, center 2 idle
        stars = StarSet((0, 2), (0, 0), F(0))
        cons = consolidate(inst, stars)
        assert cons.center_sites == (0,)
        assert cons.instance.n_clients == 1


class TestBicriteriaSolvers:
    def test_ckfl_open_count_and_feasibility(self):
        rng = derive_rng(7, "ckfl-solve")
        hits = 0
        for trial in range(20):
            uniform = trial % 2 == 0
            inst = fee_instance(
                rng.getrandbits(32), n=4, m=3,
                cap=3 + trial % 3 if uniform else None,
            )
            k = 1 + trial % 4
            try:
                stats = {}
                sol = ckfl_uniform_f_solve(inst, k, stats=stats)
            except InfeasibleError:
                continue
            opens = sol.open_count()
            bound = 2 * k - 1 if inst.uniform_capacity() is not None else 2 * k
            assert opens <= bound
            assert check_feasible(inst, sol, k=opens) == []
            assert stats["best_l"] in range(1, k + 1)
            for l, cost, count in stats["per_l"]:
                assert 1 <= l <= k and cost > 0 and count >= 1
            hits += 1
        assert hits >= 10

    def test_ckfl_rejects_bad_k(self):
        inst = fee_instance(2, n=3, m=2)
        with pytest.raises(InfeasibleError):
            ckfl_uniform_f_solve(inst, 0)
        with pytest.raises(InfeasibleError):
            ckfl_uniform_f_solve(inst, 4)

    def test_cfl_feasibility(self):
        rng = derive_rng(7, "cfl-solve")
        hits = 0
        for trial in range(12):
            inst = fee_instance(rng.getrandbits(32), n=4, m=3)
            try:
                sol = cfl_uniform_f_solve(inst)
            except InfeasibleError:
                continue
            assert check_feasible(inst, sol, k=inst.n_facilities) == []
            hits += 1
        assert hits >= 8


class TestGuaranteeReports:
    def test_chain_battery_all_links_hold(self):
        rng = derive_rng(7, "chain")
        hits = 0
        for trial in range(25):
            inst = fee_instance(
                rng.getrandbits(32), n=3 + trial % 2, m=2 + trial % 2,
                fee=1 + trial % 4,
                cap=4 + trial % 3 if trial % 2 else None,
            )
            k = 1 + trial % inst.n_facilities
            try:
                report = ckfl_chain_report(inst, k)
            except InfeasibleError:
                continue
            assert report.ok, report.failures
            assert report.lstar <= k
            assert report.quantities["alpha"] >= 1
            hits += 1
        assert hits >= 12

    def test_cfl_battery_all_links_hold(self):
        rng = derive_rng(7, "cfl-report")
        hits = 0
        for trial in range(15):
            inst = fee_instance(
                rng.getrandbits(32), n=3 + trial % 2, m=2 + trial % 2,
                fee=1 + trial % 4,
            )
            try:
                report = cfl_ratio_report(inst)
            except InfeasibleError:
                continue
            assert report.ok, report.failures
            hits += 1
        assert hits >= 8

    def test_reports_demand_uniform_positive_fee(self):
        mixed = gen_random(seed=9, n=3, m=2, f_range=(1, 9))
        if mixed.uniform_opening_cost() is None:
            with pytest.raises(ValueError):
                ckfl_chain_report(mixed, 2)
            with pytest.raises(ValueError):
                cfl_ratio_report(mixed)
        free = uniform_f(gen_random(seed=9, n=3, m=2), 0)
        with pytest.raises(ValueError):
            cfl_ratio_report(free)

    def test_check_appends_only_violations(self):
        failures: list[str] = []
        _check(failures, "fine", F(1), F(1))
        _check(failures, "fine-too", F(1), F(2))
        _check(failures, "broken", F(3), F(2))
        assert failures == ["broken: 3 > 2"]
        report = ChainReport(2, 1, {}, tuple(failures))
        assert not report.ok
        assert ChainReport(2, 1, {}, ()).ok
