"""Seeded generators for datasets, requests and programs used across tests."""

from __future__ import annotations

import random

from antituring.fabric import Fabric, Topology, build_fabric, place_records
from antituring.lang.parser import Condition, FieldRef, Literal, RequestAst, format_request
from antituring.records import register_records

VOCAB = [f"k{i}" for i in range(24)]
CITIES = ["Oslo", "Pune", "Kyiv", "Lima", "Nairobi", "Kyoto"]
GRIDS = [(4, 4), (8, 8), (4, 4, 4)]


def random_raws(rng: random.Random, n: int, vocab=VOCAB) -> list[dict]:
    raws = []
    for i in range(n):
        tags = rng.sample(vocab, rng.randint(1, 3))
        fields: dict = {}
        if rng.random() < 0.85:
            fields["value"] = rng.randint(-50, 1000)
        if rng.random() < 0.6:
            fields["score"] = round(rng.uniform(0.0, 100.0), 3)
        if rng.random() < 0.5:
            fields["city"] = rng.choice(CITIES)
        if rng.random() < 0.3:
            fields["code"] = rng.choice([200, 404, 500])
        raws.append({"id": f"rec{i:04d}", "tags": tags, "fields": fields})
    return raws


def random_fabric(rng: random.Random, n_records: int | None = None, grid=None,
                  policy: str | None = None) -> Fabric:
    grid = grid or rng.choice(GRIDS)
    n = rng.randint(0, 1000) if n_records is None else n_records
    fabric = build_fabric(Topology(tuple(grid)), seed=rng.randrange(2**32))
    place_records(fabric, register_records(random_raws(rng, n)),
                  policy or rng.choice(["round-robin", "keyword-hash", "affinity"]))
    return fabric


def _condition(rng: random.Random) -> Condition:
    name = rng.choice(["value", "score", "city", "code", "missing"])
    if name == "city" or (name == "missing" and rng.random() < 0.5):
        return Condition(name, rng.choice(["==", "!="]), rng.choice(CITIES))
    if name == "score":
        literal = round(rng.uniform(0, 100), 2)
    else:
        literal = rng.randint(-50, 1000)
    if rng.random() < 0.05:
        # kind mismatch on purpose: numeric field vs text literal
        return Condition(name, "==", "Oslo")
    return Condition(name, rng.choice(["==", "!=", "<", "<=", ">", ">="]), literal)


def random_request_ast(rng: random.Random, vocab=VOCAB) -> RequestAst:
    mode = "ALL" if rng.random() < 0.25 else "ANY"
    k = rng.randint(1, 2 if mode == "ALL" else 3)
    keywords = rng.sample(vocab, k)
    if rng.random() < 0.08:
        keywords = ["unicorn"]
    conditions = tuple(_condition(rng) for _ in range(rng.choice([0, 0, 1, 1, 2])))
    op = rng.choice(["search", "count", "sum", "min", "max", "avg", "scale"])
    if op in ("search", "count"):
        args = ()
    elif op == "scale":
        factor = rng.choice([2, 3, -1, 0.5])
        args = (FieldRef(rng.choice(["value", "score", "city"])), Literal(factor))
    else:
        args = (FieldRef(rng.choice(["value", "score", "value", "city", "missing"])),)
    return RequestAst(mode, tuple(keywords), conditions, op, args)


def random_request_text(rng: random.Random) -> str:
    return format_request(random_request_ast(rng))


# --- program generator for round-trip tests --------------------------------

_ODD_KEYWORDS = ["e-mail", "new york", 'say "hi"', "back\\slash", "tab\tsep", "500", "3.25",
                 "MATCH", "ünïcode", "x"]


def random_program_ast(rng: random.Random) -> RequestAst:
    def kw() -> str:
        if rng.random() < 0.3:
            return rng.choice(_ODD_KEYWORDS)
        return rng.choice(VOCAB + ["Temp", "SENSOR", "_x1"])

    def literal():
        r = rng.random()
        if r < 0.35:
            return rng.randint(-10**12, 10**12)
        if r < 0.7:
            return rng.choice([rng.uniform(-1e6, 1e6), rng.uniform(-1, 1) * 1e-7,
                               rng.uniform(1, 9) * 1e20, 0.0, 1.5])
        return rng.choice(CITIES + ["", 'q"uote', "line\nbreak", "ü"])

    conds = []
    for _ in range(rng.randint(0, 3)):
        lit = literal()
        ops = ["==", "!="] if isinstance(lit, str) else ["==", "!=", "<", "<=", ">", ">="]
        conds.append(Condition(rng.choice(["value", "city", "f_2"]), rng.choice(ops), lit))
    op = rng.choice(["count", "search", "sum", "scale", "whatever"])
    args = tuple(
        FieldRef(rng.choice(["value", "x"])) if rng.random() < 0.5 else Literal(literal())
        for _ in range(rng.randint(0, 3))
    )
    return RequestAst(rng.choice(["ANY", "ALL"]), tuple(kw() for _ in range(rng.randint(1, 4))),
                      tuple(conds), op, args)


# --- invalid program mutations ----------------------------------------------


def _splice(text: str, start: int, end: int, repl: str) -> str:
    return text[:start] + repl + text[end:]


def mutate_program(rng: random.Random, text: str) -> str:
    """Return a copy of a valid program with one edit that makes it invalid."""
    from antituring.lang.lexer import COMPARATORS, tokenize

    toks = tokenize(text)[:-1]
    choices = ["drop_semicolon", "bad_paren", "bad_mode", "dangling_where", "stray_quote",
               "illegal_char", "drop_apply"]
    if any(t.kind in COMPARATORS for t in toks):
        choices.append("bad_comparator")
    kind = rng.choice(choices)

    def pick(*kinds):
        return rng.choice([t for t in toks if t.kind in kinds])

    if kind == "drop_semicolon":
        t = pick(";")
        return _splice(text, t.offset, t.end, " ")
    if kind == "bad_paren":
        t = pick("(")
        return _splice(text, t.offset, t.end, "[")
    if kind == "bad_mode":
        t = pick("ANY", "ALL")
        return _splice(text, t.offset, t.end, "SOME")
    if kind == "dangling_where":
        t = pick("APPLY")
        return _splice(text, t.offset, t.offset, "WHERE ")
    if kind == "stray_quote":
        return text + ' "never closed'
    if kind == "illegal_char":
        t = rng.choice(toks)
        return _splice(text, t.offset, t.offset, rng.choice("@$%^&{}|~`"))
    if kind == "drop_apply":
        t = pick("APPLY")
        return _splice(text, t.offset, t.end, "")
    t = pick(*COMPARATORS)
    return _splice(text, t.offset, t.end, rng.choice(["=<", "=>", "<>", "===", "!"]))
