"""Deterministic simulator of a keyword-addressed data-processing-unit fabric."""

from antituring.evolution import RelationGraph, evolution_epoch, relation_oracle
from antituring.fabric import Fabric, Topology, build_fabric, knowledge_digest, place_records
from antituring.lang import Compiler, ParseError, Request, parse_program
from antituring.orchestrator import (
    FinalResult,
    Initiator,
    Metrics,
    compare,
    run_centralized,
    run_request,
)
from antituring.records import Record, register_record, serialized_size

__version__ = "0.1.0"

__all__ = [
    "Compiler",
    "Fabric",
    "FinalResult",
    "Initiator",
    "Metrics",
    "ParseError",
    "Record",
    "RelationGraph",
    "Request",
    "Topology",
    "build_fabric",
    "compare",
    "evolution_epoch",
    "knowledge_digest",
    "parse_program",
    "place_records",
    "register_record",
    "relation_oracle",
    "run_centralized",
    "run_request",
    "serialized_size",
]
