"""The DPU automaton: decide, prepare a view, run a functional block, report."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from antituring.blocks import REGISTRY, FunctionalBlock
from antituring.lang.compiler import Condition, Request
from antituring.packets import (
    ConfirmationPacket,
    Coord,
    PartialResult,
    ProtocolViolation,
    RequestPacket,
)
from antituring.records import FieldValue, KnowledgeIndex, Record

FORECAST_TICKS_PER_CANDIDATE = 1
FORECAST_OVERHEAD_TICKS = 2


class FsmState(enum.Enum):
    IDLE = "Idle"
    MATCHING = "Matching"
    PREPARING_VIEW = "PreparingView"
    EXECUTING = "Executing"
    REPORTING = "Reporting"


TRANSITIONS: Mapping[FsmState, frozenset[FsmState]] = {
    FsmState.IDLE: frozenset({FsmState.MATCHING}),
    FsmState.MATCHING: frozenset({FsmState.IDLE, FsmState.PREPARING_VIEW}),
    FsmState.PREPARING_VIEW: frozenset({FsmState.EXECUTING}),
    FsmState.EXECUTING: frozenset({FsmState.REPORTING}),
    FsmState.REPORTING: frozenset({FsmState.IDLE}),
}


@dataclass(frozen=True)
class FsmStep:
    tick: int
    dpu: Coord
    request_id: int
    source: FsmState
    target: FsmState


@dataclass
class DpuState:
    id: Coord
    store: dict[str, Record] = field(default_factory=dict)
    index: KnowledgeIndex = field(default_factory=KnowledgeIndex)
    fsm: FsmState = FsmState.IDLE
    relations: dict[Coord, float] = field(default_factory=dict)
    gossip: dict[Coord, frozenset[str]] = field(default_factory=dict)
    handled: set[tuple[int, int]] = field(default_factory=set)
    accepted: set[int] = field(default_factory=set)

    @property
    def digest(self) -> frozenset[str]:
        return self.index.digest

    def add_record(self, record: Record) -> None:
        if record.id in self.store:
            raise ValueError(f"record {record.id!r} already stored on {self.id}")
        self.store[record.id] = record
        self.index.add(record)

    def transition(self, target: FsmState, tick: int, request_id: int,
                   log: list[FsmStep] | None = None) -> None:
        if target not in TRANSITIONS[self.fsm]:
            raise ProtocolViolation(
                f"DPU {self.id}: illegal transition {self.fsm.value} -> {target.value}"
            )
        if target is FsmState.EXECUTING and request_id not in self.accepted:
            raise ProtocolViolation(f"DPU {self.id}: executing request {request_id} never accepted")
        if log is not None:
            log.append(FsmStep(tick, self.id, request_id, self.fsm, target))
        self.fsm = target


@dataclass(frozen=True)
class Decision:
    accept: bool
    reason: str  # "keyword-match" | "no-relevant-keyword"


@dataclass(frozen=True)
class View:
    record_ids: tuple[str, ...]
    candidate_count: int


class FieldTypeError(TypeError):
    pass


def keyword_predicate(keywords: frozenset[str] | set[str], request: Request) -> bool:
    if request.match_mode == "ALL":
        return all(kw in keywords for kw in request.keywords)
    return any(kw in keywords for kw in request.keywords)


def decide(dpu: DpuState, request: Request) -> Decision:
    """Accept iff the DPU's own digest satisfies the keyword match.

    Conditions are not consulted; they only filter the view later.
    """
    if keyword_predicate(dpu.digest, request):
        return Decision(True, "keyword-match")
    return Decision(False, "no-relevant-keyword")


def candidate_ids(dpu: DpuState, request: Request) -> list[str]:
    sets = [dpu.index.lookup(kw) for kw in request.keywords]
    if request.match_mode == "ALL":
        ids = set.intersection(*sets) if sets else set()
    else:
        ids = set().union(*sets)
    return sorted(ids)


def forecast(dpu: DpuState, request: Request) -> int:
    n = len(candidate_ids(dpu, request))
    return FORECAST_TICKS_PER_CANDIDATE * n + FORECAST_OVERHEAD_TICKS


def on_request_packet(
    dpu: DpuState, packet: RequestPacket
) -> tuple[RequestPacket, ConfirmationPacket | None]:
    """Apply this DPU's decision to the travelling packet.

    Exactly one counter increments. Accepting DPUs also produce a
    confirmation carrying their forecast.
    """
    key = (packet.request.request_id, packet.round)
    if key in dpu.handled or dpu.id in packet.visited:
        raise ProtocolViolation(
            f"double delivery of request {packet.request.request_id} to DPU {dpu.id}"
        )
    dpu.handled.add(key)
    packet.visited.append(dpu.id)
    decision = decide(dpu, packet.request)
    if not decision.accept:
        packet.rejection_count += 1
        return packet, None
    packet.processing_count += 1
    dpu.accepted.add(packet.request.request_id)
    n = len(candidate_ids(dpu, packet.request))
    confirmation = ConfirmationPacket(
        request_id=packet.request.request_id,
        dpu_id=dpu.id,
        forecast_ticks=FORECAST_TICKS_PER_CANDIDATE * n + FORECAST_OVERHEAD_TICKS,
        matched_estimate=n,
    )
    return packet, confirmation


def compare(value: FieldValue, comparator: str, literal: FieldValue) -> bool:
    """Evaluate ``value <cmp> literal``. int and real compare as numbers; text
    only compares with text."""
    if isinstance(value, str) != isinstance(literal, str):
        raise FieldTypeError(f"cannot compare {value!r} with {literal!r}")
    if comparator == "==":
        return value == literal
    if comparator == "!=":
        return value != literal
    if isinstance(value, str):
        raise FieldTypeError("ordered comparison on text")
    if comparator == "<":
        return value < literal
    if comparator == "<=":
        return value <= literal
    if comparator == ">":
        return value > literal
    if comparator == ">=":
        return value >= literal
    raise ValueError(f"unknown comparator {comparator!r}")


def satisfies(record: Record, conditions: Sequence[Condition]) -> bool:
    for cond in conditions:
        if cond.field not in record.fields:
            return False
        try:
            if not compare(record.fields[cond.field], cond.comparator, cond.literal):
                return False
        except FieldTypeError:
            return False
    return True


def prepare_view(dpu: DpuState, request: Request) -> View:
    candidates = candidate_ids(dpu, request)
    view = tuple(rid for rid in candidates if satisfies(dpu.store[rid], request.conditions))
    return View(view, len(candidates))


def _numeric_values(dpu: DpuState, view: View, name: str) -> tuple[list[FieldValue], int]:
    values, skipped = [], 0
    for rid in view.record_ids:
        value = dpu.store[rid].fields.get(name)
        if value is None or isinstance(value, str):
            skipped += 1
        else:
            values.append(value)
    return values, skipped


def _number_kind(value: FieldValue) -> str:
    return "real" if isinstance(value, float) else "int"


def numeric_sum(values: Sequence[FieldValue]) -> int | float:
    if any(isinstance(v, float) for v in values):
        return math.fsum(values)
    return sum(values)


def execute_block(dpu: DpuState, block: FunctionalBlock, view: View,
                  args: Sequence[FieldValue], request_id: int = 0) -> PartialResult:
    """Run ``block`` over the view records held by ``dpu``.

    Records lacking the named field, or holding text in it, are skipped and
    counted in ``PartialResult.skipped``.
    """
    def result(kind: str, value, skipped: int = 0) -> PartialResult:
        return PartialResult(request_id, dpu.id, kind, value, skipped)

    kind = block.kind
    if kind == "search":
        return result("ids", tuple(view.record_ids))
    if kind == "count":
        return result("int", len(view.record_ids))
    if kind == "scale":
        name, factor = args
        updated = skipped = 0
        for rid in view.record_ids:
            fields = dpu.store[rid].fields
            value = fields.get(name)
            if value is None or isinstance(value, str):
                skipped += 1
                continue
            fields[name] = value * factor
            updated += 1
        return result("int", updated, skipped)

    values, skipped = _numeric_values(dpu, view, args[0])
    if kind == "sum":
        total = numeric_sum(values)
        return result(_number_kind(total), total, skipped)
    if kind == "avg":
        return result("sumcount", (numeric_sum(values), len(values)), skipped)
    if not values:
        return result("empty", None, skipped)
    best = min(values) if kind == "min" else max(values)
    if kind in ("min", "max"):
        return result(_number_kind(best), best, skipped)
    raise ValueError(f"no executor for block {kind!r}")


def execution_ticks(view: View) -> int:
    """Ticks from acceptance to result departure: 1 to build the view, 1 per
    view record, 1 to report."""
    return 1 + len(view.record_ids) + 1


__all__ = [
    "REGISTRY",
    "Decision",
    "DpuState",
    "FsmState",
    "FsmStep",
    "View",
    "compare",
    "decide",
    "execute_block",
    "execution_ticks",
    "forecast",
    "on_request_packet",
    "prepare_view",
]
