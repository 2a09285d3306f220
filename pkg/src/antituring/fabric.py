"""The persistent processing space: topology, DPUs and record placement."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from antituring.dpu import DpuState, FsmState
from antituring.packets import Coord
from antituring.records import Record

PLACEMENT_POLICIES = ("round-robin", "keyword-hash", "affinity")

FNV64_OFFSET = 14695981039346656037
FNV64_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


class TopologyError(ValueError):
    pass


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    extent: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.extent) not in (2, 3):
            raise TopologyError(f"invalid topology: dims must be 2 or 3, got {len(self.extent)}")
        if any(not isinstance(e, int) or e < 1 for e in self.extent):
            raise TopologyError(f"invalid topology: every extent must be >= 1, got {self.extent}")

    @classmethod
    def parse(cls, text: str) -> Topology:
        if not re.fullmatch(r"\d+(x\d+)*", text.strip().lower()):
            raise TopologyError(f"invalid topology {text!r}: expected e.g. 4x4 or 2x2x2")
        return cls(tuple(int(p) for p in text.strip().lower().split("x")))

    @property
    def dims(self) -> int:
        return len(self.extent)

    @property
    def size(self) -> int:
        return math.prod(self.extent)

    @property
    def diameter(self) -> int:
        return sum(e - 1 for e in self.extent)

    def coords(self) -> list[Coord]:
        """All DPU coordinates in row-major order."""
        return list(itertools.product(*(range(e) for e in self.extent)))

    def contains(self, coord: Coord) -> bool:
        return len(coord) == self.dims and all(0 <= c < e for c, e in zip(coord, self.extent))

    def index_of(self, coord: Coord) -> int:
        idx = 0
        for c, e in zip(coord, self.extent):
            idx = idx * e + c
        return idx

    def __str__(self) -> str:
        return "x".join(map(str, self.extent))


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


@dataclass
class Fabric:
    topology: Topology
    dpus: dict[Coord, DpuState]
    seed: int
    initiator: Coord
    # bumped by every placement; the initiator port sees every ingest
    generation: int = 0
    relations_generation: int | None = None
    # ids seen at the ingest port; no record->DPU map is kept outside the DPUs
    ingested_ids: set[str] = field(default_factory=set, repr=False)

    def dpu(self, coord: Coord) -> DpuState:
        try:
            return self.dpus[tuple(coord)]
        except KeyError:
            raise KeyError(f"unknown DpuId {coord}") from None

    def records(self) -> list[Record]:
        return [r for d in self.dpus.values() for r in d.store.values()]

    @property
    def record_count(self) -> int:
        return sum(len(d.store) for d in self.dpus.values())


def build_fabric(topology: Topology, seed: int = 0) -> Fabric:
    coords = topology.coords()
    dpus = {c: DpuState(id=c) for c in coords}
    return Fabric(topology=topology, dpus=dpus, seed=seed, initiator=coords[0])


def knowledge_digest(fabric: Fabric, dpu: Coord) -> frozenset[str]:
    return fabric.dpu(dpu).digest


def _hash_target(record: Record, n: int) -> int:
    return fnv1a_64(min(record.keywords).encode("utf-8")) % n


def place_records(
    fabric: Fabric,
    records: Sequence[Record],
    policy: str = "round-robin",
    capacity: int | None = None,
) -> dict[str, Coord]:
    """Assign each record to exactly one DPU and index it there.

    ``capacity`` applies to the affinity policy only and defaults to
    ``ceil(2 * len(records) / dpu_count)``.
    """
    if policy not in PLACEMENT_POLICIES:
        raise PlacementError(f"unknown placement policy {policy!r}")
    coords = fabric.topology.coords()
    n = len(coords)
    seen = set(fabric.ingested_ids)
    for record in records:
        if record.id in seen:
            raise PlacementError(f"duplicate record id {record.id!r}")
        seen.add(record.id)

    assignment: dict[str, Coord] = {}
    if policy == "round-robin":
        for i, record in enumerate(records):
            assignment[record.id] = coords[i % n]
    elif policy == "keyword-hash":
        for record in records:
            assignment[record.id] = coords[_hash_target(record, n)]
    else:
        assignment = _affinity(fabric, records, coords, capacity)

    for record in records:
        fabric.dpus[assignment[record.id]].add_record(record)
    fabric.ingested_ids.update(assignment)
    if records:
        fabric.generation += 1
    return assignment


def _affinity(fabric: Fabric, records: Sequence[Record], coords: list[Coord],
              capacity: int | None) -> dict[str, Coord]:
    n = len(coords)
    if capacity is None:
        capacity = max(1, math.ceil(2 * len(records) / n))
    load = {c: len(fabric.dpus[c].store) for c in coords}
    digests = {c: set(fabric.dpus[c].digest) for c in coords}
    cursor = 0
    assignment: dict[str, Coord] = {}
    for record in records:
        best, best_overlap = None, 0
        for c in coords:
            overlap = len(digests[c] & record.keywords)
            if overlap > best_overlap and load[c] < capacity:
                best, best_overlap = c, overlap
        if best is None:
            for step in range(n):
                c = coords[(cursor + step) % n]
                if load[c] < capacity:
                    best = c
                    cursor = (cursor + step + 1) % n
                    break
        if best is None:
            raise PlacementError(
                f"capacity exceeded: no DPU can take record {record.id!r} (capacity {capacity})"
            )
        assignment[record.id] = best
        load[best] += 1
        digests[best] |= record.keywords
    return assignment


def all_idle(fabric: Fabric) -> bool:
    return all(d.fsm is FsmState.IDLE for d in fabric.dpus.values())

