from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from antituring.fabric import Fabric, Topology, build_fabric, place_records  # noqa: E402
from antituring.lang import Compiler  # noqa: E402
from antituring.records import load_dataset, register_records  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
D1_PATH = ROOT / "data" / "d1.jsonl"


@pytest.fixture
def d1_raws() -> list[dict]:
    return load_dataset(D1_PATH)


@pytest.fixture
def d1_fabric(d1_raws) -> Fabric:
    fabric = build_fabric(Topology((2, 2)), seed=7)
    place_records(fabric, register_records(d1_raws), "round-robin")
    return fabric


@pytest.fixture
def compile_one():
    compiler = Compiler()

    def _compile(text: str):
        (request,) = compiler.compile_program(text)
        return request

    return _compile


# acceptance criterion number -> one-line verdict, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, name: str, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {name} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
