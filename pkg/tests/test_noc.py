from __future__ import annotations

import copy
import random
from collections import Counter, deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antituring.fabric import Topology, build_fabric
from antituring.lang import Compiler
from antituring.noc import (
    INITIATOR,
    manhattan,
    neighbors,
    plan_walk,
    route_back,
    route_request,
    spanning_tree,
)
from antituring.packets import ProtocolViolation, RequestPacket

from gen import random_fabric, random_request_text

topologies = st.lists(st.integers(1, 5), min_size=2, max_size=3).map(lambda e: Topology(tuple(e)))


def bfs_distance(topology: Topology, a, b) -> int:
    dist = {a: 0}
    queue = deque([a])
    while queue:
        node = queue.popleft()
        for nb in neighbors(topology, node):
            if nb not in dist:
                dist[nb] = dist[node] + 1
                queue.append(nb)
    return dist[b]


class TestGeometry:
    def test_neighbors_2x2(self):
        t = Topology((2, 2))
        assert set(neighbors(t, (0, 0))) == {(0, 1), (1, 0)}
        assert set(neighbors(t, (1, 1))) == {(1, 0), (0, 1)}

    def test_neighbors_3d_corner(self):
        assert len(neighbors(Topology((2, 2, 2)), (0, 0, 0))) == 3

    def test_neighbors_unknown(self):
        with pytest.raises(KeyError):
            neighbors(Topology((2, 2)), (2, 0))

    def test_walk_examples(self):
        assert plan_walk(Topology((2, 2))) == [(0, 0), (0, 1), (1, 1), (1, 0)]
        assert plan_walk(Topology((3, 3))) == [(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0),
                                               (2, 0), (2, 1), (2, 2)]
        assert plan_walk(Topology((1, 5))) == [(0, i) for i in range(5)]

    @given(topologies)
    def test_walk_is_a_hamiltonian_path(self, topology):
        walk = plan_walk(topology)
        assert walk[0] == (0,) * topology.dims
        assert sorted(walk) == sorted(topology.coords())
        assert all(manhattan(a, b) == 1 for a, b in zip(walk, walk[1:]))

    def test_tree_examples(self):
        assert spanning_tree(Topology((2, 2)), (0, 0)) == {
            (0, 1): (0, 0), (1, 0): (0, 0), (1, 1): (0, 1)}
        assert spanning_tree(Topology((1, 1)), (0, 0)) == {}

    @given(topologies)
    def test_tree_is_bfs(self, topology):
        root = (0,) * topology.dims
        parent = spanning_tree(topology, root)
        assert len(parent) == topology.size - 1
        for child, par in parent.items():
            assert manhattan(child, par) == 1
            assert bfs_distance(topology, root, child) == bfs_distance(topology, root, par) + 1

    def test_route_back_examples(self):
        t = Topology((2, 2))
        assert route_back(t, (1, 1), (0, 0)) == [(1, 1), (0, 1), (0, 0)]
        assert route_back(t, (1, 0), (1, 0)) == []

    @given(topologies, st.data())
    def test_route_back_is_shortest(self, topology, data):
        coords = topology.coords()
        a = data.draw(st.sampled_from(coords))
        b = data.draw(st.sampled_from(coords))
        path = route_back(topology, a, b)
        if a == b:
            assert path == []
            return
        assert path[0] == a and path[-1] == b
        assert len(path) - 1 == bfs_distance(topology, a, b) == manhattan(a, b)
        assert all(manhattan(x, y) == 1 for x, y in zip(path, path[1:]))


Q1 = "MATCH ANY(temp) WHERE value > 29 APPLY count;"


class TestDelivery:
    @pytest.mark.parametrize("policy", ["walk", "flood", "serpentine-walk", "flood-spanning-tree"])
    def test_d1_counters(self, d1_fabric, compile_one, policy):
        delivery = route_request(d1_fabric, compile_one(Q1), policy)
        assert delivery.packet.counters == (2, 2)

    def test_walk_hop_count(self, d1_fabric, compile_one):
        delivery = route_request(d1_fabric, compile_one(Q1), "walk")
        assert delivery.packet.hop_count == 6
        request_links = [(e.src, e.dst) for e in delivery.events if e.kind in ("inject", "hop", "eject")]
        assert request_links == [(INITIATOR, (0, 0)), ((0, 0), (0, 1)), ((0, 1), (1, 1)),
                                 ((1, 1), (1, 0)), ((1, 0), (0, 0)), ((0, 0), INITIATOR)]

    def test_confirmations_from_temp_holders(self, d1_fabric, compile_one):
        delivery = route_request(d1_fabric, compile_one("MATCH ANY(temp) APPLY count;"))
        assert {c.dpu_id for _, c in delivery.confirmations} == {(0, 0), (0, 1)}
        assert {r.dpu_id for _, r in delivery.results} == {(0, 0), (0, 1)}

    def test_zero_match(self, d1_fabric, compile_one):
        delivery = route_request(d1_fabric, compile_one("MATCH ANY(unicorn) APPLY search;"), "flood")
        assert delivery.packet.counters == (0, 4)
        assert delivery.confirmations == [] and delivery.results == []

    def test_trace_is_tick_ordered(self, d1_fabric, compile_one):
        events = route_request(d1_fabric, compile_one(Q1), "flood").events
        assert [e.tick for e in events] == sorted(e.tick for e in events)
        assert {e.kind for e in events} <= {"inject", "hop", "deliver", "confirm", "result", "eject"}
        assert list(events[0].to_json()) == ["tick", "kind", "from", "to", "request", "bytes"]

    def test_multicast_needs_targets(self, d1_fabric, compile_one):
        with pytest.raises(ValueError):
            route_request(d1_fabric, compile_one(Q1), "multicast")

    def test_unknown_policy(self, d1_fabric, compile_one):
        with pytest.raises(ValueError):
            route_request(d1_fabric, compile_one(Q1), "teleport")

    def test_double_delivery_is_a_violation(self, d1_fabric, compile_one):
        from antituring.dpu import on_request_packet

        packet = RequestPacket(compile_one(Q1))
        dpu = d1_fabric.dpus[(0, 0)]
        on_request_packet(dpu, packet)
        with pytest.raises(ProtocolViolation, match="double delivery"):
            on_request_packet(dpu, packet)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_random_walk_and_flood_agree(seed):
    rng = random.Random(seed)
    fabric = random_fabric(rng, n_records=rng.randint(0, 200), grid=rng.choice([(4, 4), (3, 5), (2, 2, 3)]))
    compiler = Compiler()
    (request,) = compiler.compile_program(random_request_text(rng))
    n = fabric.topology.size
    outcomes = {}
    for policy in ("walk", "flood"):
        delivery = route_request(copy.deepcopy(fabric), request, policy)
        packet = delivery.packet
        # conservation and coverage
        assert sum(packet.counters) == n
        delivered = [e.dst for e in delivery.events if e.kind == "deliver"]
        assert Counter(delivered) == Counter(fabric.topology.coords())
        if policy == "walk":
            assert packet.visited == plan_walk(fabric.topology)
        # hop accounting
        assert packet.hop_count == sum(1 for e in delivery.events if e.kind in ("inject", "hop", "eject"))
        assert len(delivery.link_events) == sum(1 for e in delivery.events if e.kind != "deliver")
        partials = sorted((r.dpu_id, repr(r.partial.encode())) for _, r in delivery.results)
        outcomes[policy] = (packet.counters, partials)
    assert outcomes["walk"] == outcomes["flood"]
