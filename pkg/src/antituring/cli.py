"""Command-line entry point: ``antituring {run,evolve,check}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from antituring.evolution import evolve
from antituring.fabric import PLACEMENT_POLICIES, Topology, TopologyError, build_fabric, place_records
from antituring.lang import CompileError, Compiler, ParseError, parse_program
from antituring.noc import normalize_policy
from antituring.orchestrator import Initiator, compare, payloads_equal, run_centralized, run_request
from antituring.packets import ProtocolViolation
from antituring.records import RecordError, load_dataset, normalize_extraction, register_records

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PROTOCOL = 2

DEFAULTS = {
    "topology": "4x4",
    "placement": "round-robin",
    "routing": "walk",
    "extraction": "tags",
    "seed": 0,
    "theta": 0.25,
    "epochs": None,
    "dataset": None,
    "script": None,
    "trace": None,
    "metrics": None,
    "relations": None,
}


class ConfigError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--topology", help="mesh extent, e.g. 4x4 or 2x2x2")
    p.add_argument("--placement", choices=PLACEMENT_POLICIES)
    p.add_argument("--routing", choices=("walk", "flood", "multicast"))
    p.add_argument("--extraction", choices=("tags", "tags+text"))
    p.add_argument("--dataset", help="JSON Lines dataset")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="antituring", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a request script over a dataset")
    _add_common(run)
    run.add_argument("--script", help=".atm request script")
    run.add_argument("--trace", help="write link events as JSON Lines")
    run.add_argument("--metrics", help="write the metrics report (default: stdout)")

    ev = sub.add_parser("evolve", help="grow the DPU relation graph by digest gossip")
    _add_common(ev)
    ev.add_argument("--theta", type=float, help="Jaccard threshold in (0, 1]")
    ev.add_argument("--epochs", type=int, help="gossip epochs (default: until fixpoint)")
    ev.add_argument("--relations", help="write the edge list here (default: stdout)")

    check = sub.add_parser("check", help="parse and compile a script only")
    check.add_argument("script")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Flags win over the config file, which wins over built-in defaults."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"{path}: file not found")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    try:
        cfg["topology_obj"] = Topology.parse(str(cfg["topology"]))
        cfg["routing"] = normalize_policy(cfg["routing"])
        cfg["extraction"] = normalize_extraction(cfg["extraction"])
    except (TopologyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg["placement"] not in PLACEMENT_POLICIES:
        raise ConfigError(f"unknown placement policy {cfg['placement']!r}")
    return cfg


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _load_fabric(cfg: dict):
    if not cfg["dataset"]:
        raise ConfigError("--dataset is required")
    path = Path(cfg["dataset"])
    if not path.is_file():
        raise ConfigError(f"{path}: file not found")
    try:
        records = register_records(load_dataset(path), cfg["extraction"])
    except RecordError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    fabric = build_fabric(cfg["topology_obj"], cfg["seed"])
    place_records(fabric, records, cfg["placement"])
    return fabric


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read_script(path: str):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: file not found")
    text = p.read_text(encoding="utf-8")
    try:
        return Compiler().compile_program(text)
    except (ParseError, CompileError) as exc:
        raise ConfigError(f"{p}:{exc}") from None


def cmd_run(cfg: dict) -> int:
    if not cfg["script"]:
        raise ConfigError("--script is required")
    requests = _read_script(cfg["script"])
    fabric = _load_fabric(cfg)
    initiator = Initiator()
    entries, trace_lines = [], []
    for request in requests:
        baseline_result, baseline_metrics = run_centralized(fabric, request)
        result, metrics, trace = run_request(fabric, request, cfg["routing"], initiator)
        comparison = compare(metrics, baseline_metrics)
        entries.append({
            "request_id": request.request_id,
            "source_text": request.source_text,
            "status": result.status,
            "payload": result.payload,
            "counters": list(result.counters),
            "confirmations": result.confirmations,
            "oracle_match": payloads_equal(result, baseline_result),
            **comparison.to_json(),
        })
        trace_lines.extend(trace.jsonl_lines())
    report = {
        "config": {k: cfg[k] for k in ("topology", "placement", "routing", "extraction", "seed")},
        "requests": entries,
    }
    _write(cfg["metrics"], json.dumps(report, indent=2, sort_keys=True) + "\n")
    if cfg["trace"]:
        _write(cfg["trace"], "".join(json.dumps(line) + "\n" for line in trace_lines))
    return EXIT_OK


def cmd_evolve(cfg: dict) -> int:
    theta = cfg["theta"]
    if not isinstance(theta, (int, float)) or not 0 < theta <= 1:
        raise ConfigError(f"invalid theta {theta}: must be in (0, 1]")
    epochs = cfg["epochs"]
    if epochs is not None and epochs < 0:
        raise ConfigError(f"invalid epochs {epochs}: must be >= 0")
    fabric = _load_fabric(cfg)
    graph = evolve(fabric, float(theta), epochs)
    out = {"theta": theta, "epochs_run": graph.epochs_run, "stable_epoch": graph.stable_epoch,
           "edges": graph.to_json()}
    _write(cfg["relations"], json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_check(script: str) -> int:
    p = Path(script)
    if not p.is_file():
        raise ConfigError(f"{p}: file not found")
    text = p.read_text(encoding="utf-8")
    try:
        asts = parse_program(text)
        compiler = Compiler()
        requests = [compiler.compile(ast) for ast in asts]
    except (ParseError, CompileError) as exc:
        raise ConfigError(f"{p}:{exc}") from None
    print(f"{p}: {len(requests)} requests")
    for req in requests:
        conds = len(req.conditions)
        print(f"  #{req.request_id} {req.match_mode}({', '.join(req.keywords)}) "
              f"conditions={conds} op={req.op} :: {req.source_text}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args.script)
        cfg = resolve_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_evolve(cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_ERROR
    except ProtocolViolation as exc:
        _err(f"protocol violation: {exc}")
        return EXIT_PROTOCOL
    except OSError as exc:
        _err(f"{exc.filename}: {exc.strerror}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
