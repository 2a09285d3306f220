"""Functional-block registry shared by the compiler and the DPU engine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

# argument kinds
FIELD = "field"
NUMBER = "number"


@dataclass(frozen=True)
class FunctionalBlock:
    keyword: str
    signature: tuple[str, ...]
    mutates: bool = False

    @property
    def kind(self) -> str:
        return self.keyword


REGISTRY: Mapping[str, FunctionalBlock] = {
    b.keyword: b
    for b in (
        FunctionalBlock("search", ()),
        FunctionalBlock("count", ()),
        FunctionalBlock("sum", (FIELD,)),
        FunctionalBlock("min", (FIELD,)),
        FunctionalBlock("max", (FIELD,)),
        FunctionalBlock("avg", (FIELD,)),
        FunctionalBlock("scale", (FIELD, NUMBER), mutates=True),
    )
}


def select_block(request, registry: Mapping[str, FunctionalBlock] = REGISTRY) -> FunctionalBlock:
    # compile already validated the keyword, so a miss here is a programming error
    return registry[request.op]
