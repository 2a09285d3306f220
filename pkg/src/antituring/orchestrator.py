"""End-to-end request execution, the CPU-centric baseline and data-movement metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

from antituring.dpu import FsmStep, numeric_sum
from antituring.fabric import Fabric
from antituring.lang.compiler import Request
from antituring.noc import (
    INITIATOR,
    Delivery,
    TraceEvent,
    normalize_policy,
    plan_walk,
    route_back,
    route_request,
)
from antituring.packets import Coord, PartialResult, ProtocolViolation
from antituring.records import Record, serialized_size

METRIC_FIELDS = ("payload_bytes", "byte_hops", "hops", "packets", "completion_tick")


@dataclass(frozen=True)
class Metrics:
    payload_bytes: int = 0
    byte_hops: int = 0
    hops: int = 0
    packets: int = 0
    completion_tick: int = 0

    def to_json(self) -> dict:
        return {f: getattr(self, f) for f in METRIC_FIELDS}

    @classmethod
    def from_events(cls, events: Sequence[TraceEvent], payload_bytes: int, packets: int,
                    completion_tick: int) -> Metrics:
        links = [e for e in events if e.is_link]
        return cls(
            payload_bytes=payload_bytes,
            byte_hops=sum(e.nbytes for e in links),
            hops=len(links),
            packets=packets,
            completion_tick=completion_tick,
        )


@dataclass(frozen=True)
class FinalResult:
    request_id: int
    status: str  # "ok" | "no-relevant-data"
    kind: str
    value: Any
    counters: tuple[int, int] | None
    confirmations: int = 0

    @property
    def payload(self) -> dict:
        value = list(self.value) if self.kind == "ids" else self.value
        return {"kind": self.kind, "value": value}


@dataclass
class Trace:
    events: list[TraceEvent]
    fsm_log: list[FsmStep] = field(default_factory=list)
    skips: list[tuple[Coord, int]] = field(default_factory=list)
    delivery: Delivery | None = None

    def jsonl_lines(self) -> list[dict]:
        return [e.to_json() for e in self.events]


class RunOutcome(NamedTuple):
    result: FinalResult
    metrics: Metrics
    trace: Trace


@dataclass(frozen=True)
class Comparison:
    fabric: Metrics
    baseline: Metrics
    ratios: dict[str, float | None]

    def to_json(self) -> dict:
        return {"fabric_metrics": self.fabric.to_json(),
                "baseline_metrics": self.baseline.to_json(),
                "ratios": dict(self.ratios)}


# --- aggregation at the initiator ------------------------------------------


def _number_kind(value) -> str:
    return "real" if isinstance(value, float) else "int"


def aggregate(op: str, partials: Iterable[PartialResult]) -> tuple[str, Any]:
    """Merge per-DPU partial results into the final payload ``(kind, value)``."""
    partials = list(partials)
    if op == "search":
        ids = sorted({rid for p in partials for rid in p.value})
        return "ids", tuple(ids)
    if op in ("count", "scale"):
        return "int", sum(p.value for p in partials)
    if op == "sum":
        total = numeric_sum([p.value for p in partials])
        return _number_kind(total), total
    if op in ("min", "max"):
        values = [p.value for p in partials if p.kind != "empty"]
        if not values:
            return "empty", None
        best = min(values) if op == "min" else max(values)
        return _number_kind(best), best
    if op == "avg":
        count = sum(p.value[1] for p in partials)
        if count == 0:
            return "empty", None
        return "real", numeric_sum([p.value[0] for p in partials]) / count
    raise ValueError(f"no aggregation rule for {op!r}")


# --- initiator cache for relation multicast --------------------------------


@dataclass
class Initiator:
    """State kept by the external request initiator across requests.

    ``covers`` maps a keyword to a set of DPUs known to include every holder of
    that keyword, stamped with the ingest generation it was learned at. Entries
    from an older generation are stale and never trusted.
    """

    covers: dict[str, tuple[frozenset[Coord], int]] = field(default_factory=dict)

    def learn(self, fabric: Fabric, request: Request, confirmers: Iterable[Coord]) -> None:
        # ALL-mode confirmers may miss partial holders, so only ANY (or a single
        # keyword) yields a cover
        if request.match_mode == "ALL" and len(request.keywords) > 1:
            return
        confirmers = frozenset(confirmers)
        for kw in request.keywords:
            prior = self._fresh(kw, fabric.generation)
            cover = confirmers if prior is None else confirmers & prior
            self.covers[kw] = (cover, fabric.generation)

    def _fresh(self, keyword: str, generation: int) -> frozenset[Coord] | None:
        entry = self.covers.get(keyword)
        if entry is None or entry[1] != generation:
            return None
        return entry[0]

    def _gossip_view(self, fabric: Fabric) -> dict[Coord, frozenset[str]] | None:
        """Digests the entry DPU learned through relation gossip, if current."""
        if fabric.relations_generation != fabric.generation:
            return None
        entry = fabric.dpus[fabric.initiator]
        if len(entry.gossip) != len(fabric.dpus) - 1:
            return None
        return {entry.id: entry.digest, **entry.gossip}

    def targets(self, fabric: Fabric, request: Request) -> set[Coord] | None:
        """DPUs that must see ``request``, or None when nothing fresh covers it."""
        gossip = self._gossip_view(fabric)
        covers = []
        for kw in request.keywords:
            cover = self._fresh(kw, fabric.generation)
            if cover is None and gossip is not None:
                cover = frozenset(c for c, d in gossip.items() if kw in d)
            covers.append(cover)
        if request.match_mode == "ALL":
            known = [c for c in covers if c is not None]
            return set(frozenset.intersection(*known)) if known else None
        if any(c is None for c in covers):
            return None
        return set().union(*covers)


# --- fabric execution ------------------------------------------------------


def run_request(fabric: Fabric, request: Request, policy: str = "walk",
                initiator: Initiator | None = None) -> RunOutcome:
    """Inject ``request``, let every DPU decide and compute in place, and merge
    the partial results at the initiator."""
    policy = normalize_policy(policy)
    initiator = initiator if initiator is not None else Initiator()
    n = fabric.topology.size
    if policy == "multicast":
        targets = initiator.targets(fabric, request)
        if targets is None:
            delivery = route_request(fabric, request, "walk")
        else:
            delivery = route_request(fabric, request, "multicast", targets=targets)
    else:
        delivery = route_request(fabric, request, policy)

    packet = delivery.packet
    p, r = packet.counters
    broadcast = delivery.policy != "multicast" or delivery.fallback
    if broadcast and p + r != n:
        raise ProtocolViolation(f"counter conservation broken: {p}+{r} != {n}")
    if not broadcast and p + r != len(packet.visited):
        raise ProtocolViolation(f"counter conservation broken: {p}+{r} != {len(packet.visited)}")
    if len(delivery.results) != p or len(delivery.confirmations) != p:
        raise ProtocolViolation(
            f"request {request.request_id}: {p} acceptances but "
            f"{len(delivery.confirmations)} confirmations / {len(delivery.results)} results"
        )

    partials = [res.partial for _, res in sorted(delivery.results, key=lambda x: (x[0], x[1].dpu_id))]
    kind, value = aggregate(request.op, partials)
    initiator.learn(fabric, request, (c.dpu_id for _, c in delivery.confirmations))
    result = FinalResult(
        request_id=request.request_id,
        status="ok" if p > 0 else "no-relevant-data",
        kind=kind,
        value=value,
        counters=(p, r),
        confirmations=len(delivery.confirmations),
    )
    metrics = Metrics.from_events(
        delivery.events,
        payload_bytes=sum(res.payload_bytes for _, res in delivery.results),
        packets=delivery.packet_count,
        completion_tick=delivery.completion_tick,
    )
    trace = Trace(delivery.events, delivery.fsm_log, delivery.skips, delivery)
    return RunOutcome(result, metrics, trace)


# --- CPU-centric baseline --------------------------------------------------


def _record_matches(record: Record, request: Request) -> bool:
    hits = [kw in record.keywords for kw in request.keywords]
    return all(hits) if request.match_mode == "ALL" else any(hits)


def _holds(value, comparator: str, literal) -> bool:
    if isinstance(value, str) != isinstance(literal, str):
        return False
    if comparator == "==":
        return value == literal
    if comparator == "!=":
        return value != literal
    if isinstance(value, str):
        return False
    return {
        "<": value < literal,
        "<=": value <= literal,
        ">": value > literal,
        ">=": value >= literal,
    }[comparator]


def evaluate_centrally(records: Sequence[Record], request: Request) -> tuple[str, str, Any]:
    """Evaluate a request over a flat record list: ``(status, kind, value)``.

    Scale mutates the given records in place.
    """
    candidates = [r for r in records if _record_matches(r, request)]
    view = sorted(
        (r for r in candidates
         if all(c.field in r.fields and _holds(r.fields[c.field], c.comparator, c.literal)
                for c in request.conditions)),
        key=lambda r: r.id,
    )
    status = "ok" if candidates else "no-relevant-data"
    op = request.op
    if op == "search":
        return status, "ids", tuple(r.id for r in view)
    if op == "count":
        return status, "int", len(view)
    if op == "scale":
        name, factor = request.args
        updated = 0
        for r in view:
            value = r.fields.get(name)
            if value is not None and not isinstance(value, str):
                r.fields[name] = value * factor
                updated += 1
        return status, "int", updated
    name = request.args[0]
    values = [r.fields[name] for r in view
              if name in r.fields and not isinstance(r.fields[name], str)]
    if op == "sum":
        total = math.fsum(values) if any(isinstance(v, float) for v in values) else sum(values)
        return status, _number_kind(total), total
    if not values:
        return status, "empty", None
    if op == "avg":
        return status, "real", math.fsum(values) / len(values)
    best = min(values) if op == "min" else max(values)
    return status, _number_kind(best), best


def run_centralized(fabric: Fabric, request: Request) -> tuple[FinalResult, Metrics]:
    """Pull every record to a central core at the initiator port, then evaluate.

    Each DPU streams its records (one per tick, id order) over the
    dimension-ordered path to the entry DPU and out of the fabric; the core
    then processes one record per tick in arrival order.
    """
    entry = fabric.initiator
    events: list[TraceEvent] = []
    arrivals: list[int] = []
    seq = 0
    for coord in plan_walk(fabric.topology):
        dpu = fabric.dpus[coord]
        path = route_back(fabric.topology, coord, entry) or [coord]
        for k, rid in enumerate(sorted(dpu.store)):
            size = serialized_size(dpu.store[rid])
            t = k
            for a, b in zip(path, path[1:]):
                events.append(TraceEvent(t, "result", a, b, request.request_id, size, seq))
                seq += 1
                t += 1
            events.append(TraceEvent(t, "result", path[-1], INITIATOR, request.request_id, size, seq))
            seq += 1
            arrivals.append(t + 1)
    finish = 0
    for arrival in sorted(arrivals):
        finish = max(finish, arrival) + 1

    # the core works on pulled copies; nothing is written back to the DPUs
    records = sorted((Record(r.id, dict(r.fields), r.keywords) for r in fabric.records()),
                     key=lambda r: r.id)
    status, kind, value = evaluate_centrally(records, request)
    result = FinalResult(request.request_id, status, kind, value, counters=None)
    metrics = Metrics.from_events(
        events,
        payload_bytes=sum(serialized_size(r) for r in records),
        packets=len(records),
        completion_tick=finish,
    )
    return result, metrics


def compare(fabric_metrics: Metrics, baseline_metrics: Metrics) -> Comparison:
    """Per-field fabric/baseline ratios; None where the baseline is zero."""
    ratios: dict[str, float | None] = {}
    for name in METRIC_FIELDS:
        base = getattr(baseline_metrics, name)
        ratios[name] = getattr(fabric_metrics, name) / base if base else None
    return Comparison(fabric_metrics, baseline_metrics, ratios)


def payloads_equal(a: FinalResult, b: FinalResult, rel_tol: float = 1e-9) -> bool:
    """Exact for ids and integers, relative tolerance for reals."""
    if a.kind == "ids" or b.kind == "ids":
        return a.kind == b.kind and tuple(a.value) == tuple(b.value)
    if a.kind == "empty" or b.kind == "empty":
        return a.kind == b.kind
    if isinstance(a.value, float) or isinstance(b.value, float):
        return math.isclose(a.value, b.value, rel_tol=rel_tol, abs_tol=1e-12)
    return a.value == b.value


__all__ = [
    "Comparison",
    "FinalResult",
    "Initiator",
    "Metrics",
    "RunOutcome",
    "Trace",
    "aggregate",
    "compare",
    "evaluate_centrally",
    "payloads_equal",
    "run_centralized",
    "run_request",
]
