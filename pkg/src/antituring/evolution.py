"""Gradual relation formation between DPUs through neighbour-only digest gossip."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from antituring.fabric import Fabric
from antituring.noc import neighbors
from antituring.packets import Coord


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = len(a | b)
    # two empty digests share nothing worth relating
    return len(a & b) / union if union else 0.0


def _edge(a: Coord, b: Coord) -> tuple[Coord, Coord]:
    return (a, b) if a <= b else (b, a)


@dataclass
class RelationGraph:
    """Undirected edges keyed by sorted endpoint pair -> (weight, formed_at_epoch)."""

    edges: dict[tuple[Coord, Coord], tuple[float, int]] = field(default_factory=dict)
    epochs_run: int = 0
    stable_epoch: int = 0

    def pairs(self) -> set[tuple[Coord, Coord]]:
        return set(self.edges)

    def weights(self) -> dict[tuple[Coord, Coord], float]:
        return {e: w for e, (w, _) in self.edges.items()}

    def neighborhood(self, dpu: Coord) -> set[Coord]:
        out = set()
        for a, b in self.edges:
            if a == dpu:
                out.add(b)
            elif b == dpu:
                out.add(a)
        return out

    def to_json(self) -> list[dict]:
        return [
            {"a": list(a), "b": list(b), "weight": w, "formed_at_epoch": epoch}
            for (a, b), (w, epoch) in sorted(self.edges.items())
        ]


def _check_theta(theta: float) -> None:
    if not 0 < theta <= 1:
        raise ValueError(f"theta must be in (0, 1], got {theta}")


def gossip_round(fabric: Fabric, theta: float, epoch: int, graph: RelationGraph) -> bool:
    """One synchronous epoch. Each DPU sends what it knows (its own digest plus
    learned peer digests) to its mesh neighbours only. Returns True if any
    DPU learned something new."""
    outbox = {
        c: {c: d.digest, **d.gossip} for c, d in fabric.dpus.items()
    }
    changed = False
    for coord, dpu in fabric.dpus.items():
        own = dpu.digest
        for nb in neighbors(fabric.topology, coord):
            for peer, digest in outbox[nb].items():
                if peer == coord or dpu.gossip.get(peer) == digest:
                    continue
                dpu.gossip[peer] = digest
                changed = True
                weight = jaccard(own, digest)
                key = _edge(coord, peer)
                if weight >= theta and key not in graph.edges:
                    graph.edges[key] = (weight, epoch)
                    dpu.relations[peer] = weight
                    fabric.dpus[peer].relations[coord] = weight
    return changed


def evolve(fabric: Fabric, theta: float, epochs: int | None = None) -> RelationGraph:
    """Run gossip epochs: exactly ``epochs`` of them, or until nothing changes.

    ``stable_epoch`` is the last epoch that taught any DPU something new.
    """
    _check_theta(theta)
    for dpu in fabric.dpus.values():
        dpu.gossip.clear()
        dpu.relations.clear()
    graph = RelationGraph()
    epoch = 0
    while epochs is None or epoch < epochs:
        epoch += 1
        if gossip_round(fabric, theta, epoch, graph):
            graph.stable_epoch = epoch
        elif epochs is None:
            break
    graph.epochs_run = epoch
    if epochs is None or epoch >= fabric.topology.diameter:
        fabric.relations_generation = fabric.generation
    return graph


def evolution_epoch(fabric: Fabric, theta: float) -> RelationGraph:
    """Evolve relations to their fixpoint."""
    return evolve(fabric, theta)


def relation_oracle(fabric: Fabric, theta: float) -> RelationGraph:
    """All-pairs Jaccard over current digests; edge iff weight >= theta."""
    _check_theta(theta)
    graph = RelationGraph()
    coords = sorted(fabric.dpus)
    for a, b in itertools.combinations(coords, 2):
        w = jaccard(fabric.dpus[a].digest, fabric.dpus[b].digest)
        if w >= theta:
            graph.edges[(a, b)] = (w, 0)
    return graph
