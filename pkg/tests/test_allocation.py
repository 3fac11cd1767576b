import random

import pytest

from fieldops.allocation import (
    allocate_refuges,
    allocation_cost,
    brute_force_allocation,
    check_allocation,
)
from fieldops.errors import ContractError, SizeGuardError, ValidationError
from fieldops.geo import haversine_distance
from fieldops.model import CasualtyCluster, GeoPoint, Refuge, Strategy, Thread

from helpers import CITY_LAT, CITY_LON, mk_world, random_allocation_world, square_region


def _world(clusters, refuges):
    return mk_world(clusters=clusters, refuges=refuges)


class TestAllocateRefuges:
    def test_single_option(self):
        w = _world(
            [CasualtyCluster("C1", GeoPoint(CITY_LON, CITY_LAT), 2)],
            [Refuge("R1", GeoPoint(CITY_LON + 0.01, CITY_LAT), 5)],
        )
        a = allocate_refuges(w, transport_speed=10.0)
        assert a.flows == (("C1", "R1", 2),)
        assert a.unassigned == 0

    def test_near_pairing_beats_far(self):
        w = _world(
            [
                CasualtyCluster("A", GeoPoint(CITY_LON - 0.05, CITY_LAT), 3),
                CasualtyCluster("B", GeoPoint(CITY_LON + 0.05, CITY_LAT), 2),
            ],
            [
                Refuge("R1", GeoPoint(CITY_LON - 0.049, CITY_LAT), 3),
                Refuge("R2", GeoPoint(CITY_LON + 0.049, CITY_LAT), 2),
            ],
        )
        a = allocate_refuges(w, transport_speed=10.0)
        assert set(a.flows) == {("A", "R1", 3), ("B", "R2", 2)}
        oracle = brute_force_allocation(w, transport_speed=10.0)
        assert a.total_cost == pytest.approx(oracle.total_cost, rel=1e-9)

    def test_zero_capacity_everything_unassigned(self):
        w = _world(
            [CasualtyCluster("C1", GeoPoint(CITY_LON, CITY_LAT), 4)],
            [Refuge("R1", GeoPoint(CITY_LON + 0.01, CITY_LAT), 0)],
        )
        a = allocate_refuges(w, transport_speed=10.0)
        assert a.flows == ()
        assert a.unassigned == 4

    def test_capacity_shortfall_serves_cheapest(self):
        # One slot; severity-weighted distance decides who gets it.
        w = _world(
            [
                CasualtyCluster("far", GeoPoint(CITY_LON + 0.05, CITY_LAT), 1, severity=1),
                CasualtyCluster("near", GeoPoint(CITY_LON + 0.001, CITY_LAT), 1, severity=1),
            ],
            [Refuge("R1", GeoPoint(CITY_LON, CITY_LAT), 1)],
        )
        a = allocate_refuges(w, transport_speed=10.0)
        assert a.flows == (("near", "R1", 1),)
        assert a.unassigned == 1

    def test_rejects_bad_speed(self):
        w = _world([], [])
        with pytest.raises(ContractError):
            allocate_refuges(w, transport_speed=0.0)

    def test_occupied_capacity_respected(self):
        w = _world(
            [CasualtyCluster("C1", GeoPoint(CITY_LON, CITY_LAT), 5)],
            [Refuge("R1", GeoPoint(CITY_LON + 0.01, CITY_LAT), capacity=5, occupied=3)],
        )
        a = allocate_refuges(w, transport_speed=10.0)
        assert a.flows == (("C1", "R1", 2),)
        assert a.unassigned == 3

    def test_strategy_filter_requires_transport_thread(self):
        region = square_region("zone", CITY_LON, CITY_LAT, half=0.02)
        inside = CasualtyCluster("in", GeoPoint(CITY_LON, CITY_LAT), 2)
        outside = CasualtyCluster("out", GeoPoint(CITY_LON + 0.2, CITY_LAT), 2)
        w = mk_world(
            regions=[region],
            clusters=[inside, outside],
            refuges=[Refuge("R1", GeoPoint(CITY_LON + 0.01, CITY_LAT), 10)],
        )
        strategy = Strategy(
            "s", "o",
            (Thread("T", 1, frozenset({"TRANSPORT"}), max_agents=5,
                    goal_regions=frozenset({"zone"})),),
        )
        a = allocate_refuges(w, transport_speed=10.0, strategy=strategy)
        assert [f[0] for f in a.flows] == ["in"]
        no_transport = Strategy(
            "s2", "o", (Thread("T", 1, frozenset({"SEARCH"}), max_agents=5),)
        )
        b = allocate_refuges(w, transport_speed=10.0, strategy=no_transport)
        assert b.flows == ()


class TestAllocationCost:
    def test_empty_is_zero(self):
        from fieldops.allocation import Allocation

        w = _world([], [])
        assert allocation_cost(Allocation((), 0.0, 0), w, 10.0) == 0.0

    def test_single_flow_arithmetic(self):
        # 2 persons, severity 2, 1000 m at 10 m/s = 100 s -> 400
        from fieldops.allocation import Allocation
        from helpers import lon_delta_for_distance

        d = lon_delta_for_distance(CITY_LAT, 1000.0)
        w = _world(
            [CasualtyCluster("C1", GeoPoint(CITY_LON, CITY_LAT), 2, severity=2)],
            [Refuge("R1", GeoPoint(CITY_LON + d, CITY_LAT), 5)],
        )
        a = Allocation((("C1", "R1", 2),), 0.0, 0)
        assert allocation_cost(a, w, 10.0) == pytest.approx(400.0, rel=1e-9)

    def test_matches_optimizer_total(self):
        rng = random.Random(23)
        for _ in range(20):
            w = random_allocation_world(rng)
            a = allocate_refuges(w, transport_speed=7.0)
            assert allocation_cost(a, w, 7.0) == pytest.approx(a.total_cost, rel=1e-6)

    def test_dangling_reference(self):
        from fieldops.allocation import Allocation

        w = _world([], [])
        with pytest.raises(ValidationError):
            allocation_cost(Allocation((("X", "Y", 1),), 0.0, 0), w, 10.0)


class TestBruteForceOracle:
    def test_guard(self):
        w = _world(
            [CasualtyCluster("C1", GeoPoint(CITY_LON, CITY_LAT), 9)],
            [Refuge("R1", GeoPoint(CITY_LON, CITY_LAT), 9)],
        )
        with pytest.raises(SizeGuardError):
            brute_force_allocation(w, transport_speed=10.0)

    def test_cross_check_corpus(self):
        rng = random.Random(31)
        for _ in range(60):
            w = random_allocation_world(rng)
            fast = allocate_refuges(w, transport_speed=5.0)
            slow = brute_force_allocation(w, transport_speed=5.0)
            assert fast.total_cost == pytest.approx(slow.total_cost, rel=1e-9), w
            assert fast.unassigned == slow.unassigned
            assert check_allocation(w, fast) == []
            assert check_allocation(w, slow) == []

    def test_conservation(self):
        rng = random.Random(37)
        for _ in range(30):
            w = random_allocation_world(rng)
            a = allocate_refuges(w, transport_speed=5.0)
            total = sum(c.count for c in w.casualty_clusters.values())
            assert sum(p for _, _, p in a.flows) + a.unassigned == total


class TestScaleInvariance:
    def test_flow_set_invariant_under_speed_rescale(self):
        rng = random.Random(41)
        for _ in range(20):
            w = random_allocation_world(rng)
            base = allocate_refuges(w, transport_speed=3.0)
            for k in (0.5, 2.0, 10.0):
                scaled = allocate_refuges(w, transport_speed=3.0 * k)
                assert scaled.flows == base.flows
                assert scaled.total_cost == pytest.approx(base.total_cost / k, rel=1e-9)
