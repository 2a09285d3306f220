from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antituring.evolution import evolution_epoch, evolve, jaccard, relation_oracle
from antituring.fabric import Topology, build_fabric
from antituring.noc import manhattan
from antituring.records import Record

from gen import random_fabric


def brute_force_edges(fabric, theta):
    """All unordered pairs with exact rational Jaccard >= theta."""
    digests = {c: d.digest for c, d in fabric.dpus.items()}
    out = {}
    for a, b in itertools.combinations(sorted(digests), 2):
        union = digests[a] | digests[b]
        if union:
            w = Fraction(len(digests[a] & digests[b]), len(union))
            if w >= Fraction(theta).limit_denominator(10**9):
                out[(a, b)] = float(w)
    return out


def fabric_with(extent, digests):
    fabric = build_fabric(Topology(extent))
    for i, (coord, kws) in enumerate(digests.items()):
        fabric.dpus[coord].add_record(Record(f"r{i}", {}, frozenset(kws)))
    return fabric


def test_jaccard():
    assert jaccard(frozenset("ab"), frozenset("bc")) == pytest.approx(1 / 3)
    assert jaccard(frozenset(), frozenset()) == 0.0


def test_theta_one_distinct_digests_gives_no_edges():
    fabric = fabric_with((2, 2), {(0, 0): "ab", (0, 1): "bc", (1, 0): "cd", (1, 1): "de"})
    assert evolution_epoch(fabric, 1.0).edges == {}


def test_tiny_theta_gives_complete_graph():
    fabric = fabric_with((2, 3), {c: {"shared", f"own{c}"} for c in Topology((2, 3)).coords()})
    assert len(evolution_epoch(fabric, 0.01).edges) == 15


def test_two_dpus_one_third():
    fabric = fabric_with((1, 2), {(0, 0): "ab", (0, 1): "bc"})
    graph = relation_oracle(fabric, 1 / 3)
    assert graph.weights() == {((0, 0), (0, 1)): pytest.approx(1 / 3)}
    assert evolution_epoch(fabric, 1 / 3).pairs() == graph.pairs()


def test_singleton_oracle():
    assert relation_oracle(fabric_with((1, 1), {(0, 0): "a"}), 0.5).edges == {}


def test_d1_fixpoint_equals_oracle(d1_fabric):
    graph = evolution_epoch(d1_fabric, 0.25)
    assert graph.weights() == brute_force_edges(d1_fabric, 0.25)
    assert graph.weights() == relation_oracle(d1_fabric, 0.25).weights()
    assert graph.stable_epoch <= d1_fabric.topology.diameter


def test_epoch_zero_is_empty(d1_fabric):
    graph = evolve(d1_fabric, 0.25, epochs=0)
    assert graph.edges == {} and graph.epochs_run == 0


def test_partial_epochs_only_reach_near_pairs(d1_fabric):
    graph = evolve(d1_fabric, 0.01, epochs=1)
    assert all(manhattan(a, b) == 1 for a, b in graph.pairs())


@pytest.mark.parametrize("theta", [0, -0.1, 1.5])
def test_theta_validated(d1_fabric, theta):
    with pytest.raises(ValueError):
        evolution_epoch(d1_fabric, theta)


def test_relations_recorded_on_dpus(d1_fabric):
    graph = evolution_epoch(d1_fabric, 0.25)
    for (a, b), (w, _) in graph.edges.items():
        assert d1_fabric.dpus[a].relations[b] == w == d1_fabric.dpus[b].relations[a]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([0.05, 0.1, 0.2, 0.3, 0.5, 1.0]))
def test_random_fixpoint_properties(seed, theta):
    rng = random.Random(seed)
    fabric = random_fabric(rng, n_records=rng.randint(0, 120), grid=rng.choice([(3, 3), (4, 4), (2, 2, 3)]))
    graph = evolution_epoch(fabric, theta)
    assert graph.stable_epoch <= fabric.topology.diameter
    assert graph.weights() == relation_oracle(fabric, theta).weights()
    assert graph.weights() == pytest.approx(brute_force_edges(fabric, theta))
    for (a, b), (w, epoch) in graph.edges.items():
        assert a != b and w >= theta
        assert epoch >= manhattan(a, b)
