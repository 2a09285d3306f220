"""Packets exchanged between the initiator and the DPUs, with their byte model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from antituring.lang.compiler import Request

Coord = tuple[int, ...]

PACKET_HEADER_BYTES = 16
CONFIRMATION_BYTES = PACKET_HEADER_BYTES + 8


class ProtocolViolation(RuntimeError):
    """A DPU saw the same request twice, or some other protocol rule broke."""


@dataclass
class RequestPacket:
    request: Request
    processing_count: int = 0
    rejection_count: int = 0
    hop_count: int = 0
    visited: list[Coord] = field(default_factory=list)
    round: int = 0  # 0 for the first issue, 1 for a fallback re-broadcast

    @property
    def nbytes(self) -> int:
        # header holds the request id and both counters
        return PACKET_HEADER_BYTES + len(self.request.source_text.encode("utf-8"))

    @property
    def counters(self) -> tuple[int, int]:
        return self.processing_count, self.rejection_count

    def merge(self, other: RequestPacket) -> None:
        """Fold a child's counters into this packet (convergecast)."""
        if other.request.request_id != self.request.request_id:
            raise ProtocolViolation("merging counters of different requests")
        self.processing_count += other.processing_count
        self.rejection_count += other.rejection_count
        self.visited.extend(other.visited)


@dataclass(frozen=True)
class ConfirmationPacket:
    request_id: int
    dpu_id: Coord
    forecast_ticks: int
    matched_estimate: int

    nbytes = CONFIRMATION_BYTES


@dataclass(frozen=True)
class PartialResult:
    """One DPU's contribution. ``kind`` is one of ids/int/real/sumcount/empty."""

    request_id: int
    dpu_id: Coord
    kind: str
    value: Any
    skipped: int = 0

    def encode(self) -> dict:
        value = list(self.value) if self.kind in ("ids", "sumcount") else self.value
        return {"kind": self.kind, "value": value}

    @property
    def payload_nbytes(self) -> int:
        if self.kind == "ids":
            return sum(len(rid.encode("utf-8")) + 1 for rid in self.value)
        if self.kind in ("int", "real"):
            return 8
        if self.kind == "sumcount":
            return 16
        return 0


@dataclass(frozen=True)
class ResultPacket:
    request_id: int
    dpu_id: Coord
    partial: PartialResult

    @property
    def payload_bytes(self) -> int:
        return PACKET_HEADER_BYTES + self.partial.payload_nbytes
