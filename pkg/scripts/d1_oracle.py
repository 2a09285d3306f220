"""Brute-force the D1 regression values straight from the fixture file.

Deliberately imports nothing from the package: records are matched, filtered
and aggregated with plain comprehensions so the numbers can serve as an
independent check on the simulator.

Usage: python3 scripts/d1_oracle.py [path/to/d1.jsonl]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

DEFAULT = Path(__file__).resolve().parent.parent / "data" / "d1.jsonl"
GRID = [(0, 0), (0, 1), (1, 0), (1, 1)]


def load(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def tags(rec: dict) -> set[str]:
    return {t.strip().lower() for t in rec["tags"]}


def size(rec: dict) -> int:
    fields = rec.get("fields", {})
    numeric = sum(1 for v in fields.values() if not isinstance(v, str))
    text = sum(len(v.encode()) for v in fields.values() if isinstance(v, str))
    return 16 + 8 * numeric + text + sum(len(t.encode()) + 1 for t in tags(rec))


def oracle(records: list[dict]) -> dict:
    # round-robin over a 2x2 mesh in file order
    home = {rec["id"]: GRID[i % 4] for i, rec in enumerate(records)}
    temp = [r for r in records if "temp" in tags(r)]
    temp_holders = sorted({home[r["id"]] for r in temp})

    q1 = [r for r in temp if r["fields"].get("value", float("-inf")) > 29]
    oslo = sorted(r["id"] for r in records if "sensor" in tags(r) and r["fields"].get("city") == "Oslo")
    scaled = [r for r in temp if isinstance(r["fields"].get("value"), (int, float)) and r["fields"]["value"] < 30]
    after = {r["id"]: r["fields"]["value"] * (2 if r in scaled else 1) for r in temp}

    return {
        "placement": {rid: list(c) for rid, c in home.items()},
        "q1_count": len(q1),
        "q1_counters": [len(temp_holders), 4 - len(temp_holders)],
        "temp_sum": sum(r["fields"]["value"] for r in temp),
        "oslo_search": oslo,
        "scale_updated": len(scaled),
        "temp_sum_after_scale": sum(after.values()),
        "unicorn_counters": [0, 4],
        "baseline_payload_bytes": sum(size(r) for r in records),
    }


def main(argv: list[str]) -> int:
    path = Path(argv[1]) if len(argv) > 1 else DEFAULT
    print(json.dumps(oracle(load(path)), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
