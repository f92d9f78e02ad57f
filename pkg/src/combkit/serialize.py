"""Strict JSON serialization for every artifact the toolkit exchanges.

Every file carries a ``schema`` tag and a ``version`` field; unknown or
missing keys are rejected with the JSON path to the offending entry.  Complex
matrices are stored as row-major arrays of ``[re, im]`` pairs, which
round-trips doubles bit-exactly through the shortest-repr float encoding.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

import numpy as np

from .comb import ChannelNetwork, Comb, NetworkChannel
from .core import LabeledOperator, SpaceLabel
from .covariant import FiniteGroup, Representation, group_from_table
from .estimation import CombFamily, CostFunction, family_from_base
from .tester import POVM, Instrument, Tester

SCHEMA_PREFIX = "combkit/"
VERSION = 1


class SchemaError(ValueError):
    """A JSON document that does not match its declared schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require_keys(obj: Mapping, required: set, optional: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    keys = set(obj)
    missing = required - keys
    if missing:
        raise SchemaError(path, f"missing keys {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise SchemaError(path, f"unknown keys {sorted(unknown)}")


def _expect_int(value, path: str, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SchemaError(path, f"expected >= {minimum}, got {value}")
    return value


def _expect_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(path, f"expected a string, got {value!r}")
    return value


# -- complex matrices --------------------------------------------------------


def _encode_complex_flat(matrix: np.ndarray) -> list:
    flat = np.asarray(matrix, dtype=np.complex128).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _decode_pairs(data, count: int, path: str) -> np.ndarray:
    if not isinstance(data, list) or len(data) != count:
        raise SchemaError(path, f"expected {count} [re, im] pairs")
    out = np.empty(count, dtype=np.complex128)
    for i, pair in enumerate(data):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise SchemaError(f"{path}[{i}]", f"expected [re, im], got {pair!r}")
        out[i] = complex(pair[0], pair[1])
    return out


def encode_rect(matrix: np.ndarray) -> dict:
    m = np.asarray(matrix, dtype=np.complex128)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": _encode_complex_flat(m)}


def decode_rect(obj, path: str) -> np.ndarray:
    _require_keys(obj, {"rows", "cols", "data"}, set(), path)
    rows = _expect_int(obj["rows"], f"{path}.rows", 1)
    cols = _expect_int(obj["cols"], f"{path}.cols", 1)
    flat = _decode_pairs(obj["data"], rows * cols, f"{path}.data")
    return flat.reshape(rows, cols)


# -- spaces and operators ----------------------------------------------------


def encode_space(s: SpaceLabel) -> dict:
    return {"id": s.id, "dim": s.dim, "role": s.role}


def decode_space(obj, path: str) -> SpaceLabel:
    _require_keys(obj, {"id", "dim", "role"}, set(), path)
    return SpaceLabel(
        _expect_int(obj["id"], f"{path}.id"),
        _expect_int(obj["dim"], f"{path}.dim", 1),
        _expect_str(obj["role"], f"{path}.role"),
    )


def encode_operator(op: LabeledOperator) -> dict:
    return {
        "spaces": [encode_space(s) for s in op.spaces],
        "matrix": _encode_complex_flat(op.matrix),
    }


def decode_operator(obj, path: str) -> LabeledOperator:
    _require_keys(obj, {"spaces", "matrix"}, set(), path)
    if not isinstance(obj["spaces"], list):
        raise SchemaError(f"{path}.spaces", "expected a list")
    spaces = tuple(
        decode_space(s, f"{path}.spaces[{i}]") for i, s in enumerate(obj["spaces"])
    )
    dim = int(np.prod([s.dim for s in spaces], dtype=np.int64)) if spaces else 1
    flat = _decode_pairs(obj["matrix"], dim * dim, f"{path}.matrix")
    return LabeledOperator(spaces, flat.reshape(dim, dim))


# -- combs and networks ------------------------------------------------------


def encode_comb(c: Comb) -> dict:
    return {"teeth": c.teeth, "kind": c.kind, "op": encode_operator(c.op)}


def decode_comb(obj, path: str) -> Comb:
    _require_keys(obj, {"teeth", "kind", "op"}, set(), path)
    kind = _expect_str(obj["kind"], f"{path}.kind")
    return Comb(
        decode_operator(obj["op"], f"{path}.op"),
        _expect_int(obj["teeth"], f"{path}.teeth", 1),
        kind,
    )


def encode_network(net: ChannelNetwork) -> dict:
    return {
        "channels": [
            {
                "in_dim": c.in_dim,
                "out_dim": c.out_dim,
                "mem_in": c.mem_in,
                "mem_out": c.mem_out,
                "kraus": [encode_rect(k) for k in c.kraus],
            }
            for c in net.channels
        ]
    }


def decode_network(obj, path: str) -> ChannelNetwork:
    _require_keys(obj, {"channels"}, set(), path)
    if not isinstance(obj["channels"], list) or not obj["channels"]:
        raise SchemaError(f"{path}.channels", "expected a nonempty list")
    channels = []
    for j, ch in enumerate(obj["channels"]):
        cpath = f"{path}.channels[{j}]"
        _require_keys(ch, {"in_dim", "out_dim", "mem_in", "mem_out", "kraus"}, set(), cpath)
        kraus = tuple(
            decode_rect(k, f"{cpath}.kraus[{i}]") for i, k in enumerate(ch["kraus"])
        )
        channels.append(
            NetworkChannel(
                kraus,
                _expect_int(ch["in_dim"], f"{cpath}.in_dim", 1),
                _expect_int(ch["out_dim"], f"{cpath}.out_dim", 1),
                _expect_int(ch["mem_in"], f"{cpath}.mem_in", 1),
                _expect_int(ch["mem_out"], f"{cpath}.mem_out", 1),
            )
        )
    return ChannelNetwork(tuple(channels))


# -- testers, instruments, POVMs ---------------------------------------------


def _decode_outcome(value, path: str):
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise SchemaError(path, f"outcomes must be integers or strings, got {value!r}")
    return value


def encode_tester(t: Instrument) -> dict:
    return {
        "teeth": t.teeth,
        "outcomes": list(t.outcomes),
        "elements": [[b, encode_operator(t.elements[b])] for b in t.outcomes],
    }


def _decode_elements(obj, path: str):
    _require_keys(obj, {"teeth", "outcomes", "elements"}, set(), path)
    outcomes = tuple(
        _decode_outcome(b, f"{path}.outcomes[{i}]") for i, b in enumerate(obj["outcomes"])
    )
    pairs = obj["elements"]
    if not isinstance(pairs, list) or len(pairs) != len(outcomes):
        raise SchemaError(f"{path}.elements", "expected one [outcome, operator] pair per outcome")
    elements = {}
    for i, pair in enumerate(pairs):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(f"{path}.elements[{i}]", "expected [outcome, operator]")
        b = _decode_outcome(pair[0], f"{path}.elements[{i}][0]")
        if b not in outcomes:
            raise SchemaError(f"{path}.elements[{i}][0]", f"outcome {b!r} not listed")
        elements[b] = decode_operator(pair[1], f"{path}.elements[{i}][1]")
    teeth = _expect_int(obj["teeth"], f"{path}.teeth", 1)
    return outcomes, elements, teeth


def decode_tester(obj, path: str) -> Tester:
    outcomes, elements, teeth = _decode_elements(obj, path)
    return Tester(outcomes, elements, teeth)


def decode_instrument(obj, path: str) -> Instrument:
    outcomes, elements, teeth = _decode_elements(obj, path)
    return Instrument(outcomes, elements, teeth)


def encode_povm(p: POVM) -> dict:
    return {
        "space": encode_space(p.space),
        "outcomes": list(p.outcomes),
        "elements": [[b, encode_rect(p.elements[b])] for b in p.outcomes],
    }


def decode_povm(obj, path: str) -> POVM:
    _require_keys(obj, {"space", "outcomes", "elements"}, set(), path)
    space = decode_space(obj["space"], f"{path}.space")
    outcomes = tuple(
        _decode_outcome(b, f"{path}.outcomes[{i}]") for i, b in enumerate(obj["outcomes"])
    )
    elements = {}
    for i, pair in enumerate(obj["elements"]):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(f"{path}.elements[{i}]", "expected [outcome, matrix]")
        elements[pair[0]] = decode_rect(pair[1], f"{path}.elements[{i}][1]")
    return POVM(space, outcomes, elements)


# -- groups, representations, families, costs --------------------------------


def encode_group(g: FiniteGroup) -> dict:
    return {"name": g.name, "table": [[int(x) for x in row] for row in g.table]}


def decode_group(obj, path: str) -> FiniteGroup:
    _require_keys(obj, {"name", "table"}, set(), path)
    table = obj["table"]
    if not isinstance(table, list) or not all(isinstance(r, list) for r in table):
        raise SchemaError(f"{path}.table", "expected a list of rows")
    try:
        return group_from_table(_expect_str(obj["name"], f"{path}.name"), np.asarray(table))
    except ValueError as exc:
        raise SchemaError(f"{path}.table", str(exc)) from exc


def encode_representation(rep: Representation) -> dict:
    return {
        "group": encode_group(rep.group),
        "spaces": [
            [int(sid), [encode_rect(rep.matrices[sid][g]) for g in rep.group.elements()]]
            for sid in sorted(rep.matrices)
        ],
    }


def decode_representation(obj, path: str) -> Representation:
    _require_keys(obj, {"group", "spaces"}, set(), path)
    group = decode_group(obj["group"], f"{path}.group")
    mats = {}
    for i, pair in enumerate(obj["spaces"]):
        spath = f"{path}.spaces[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(spath, "expected [space_id, [matrices]]")
        sid = _expect_int(pair[0], f"{spath}[0]")
        stack = [decode_rect(m, f"{spath}[1][{g}]") for g, m in enumerate(pair[1])]
        if len(stack) != group.order:
            raise SchemaError(f"{spath}[1]", f"expected {group.order} matrices")
        mats[sid] = np.stack(stack)
    rep = Representation(group, mats)
    rep.check(1e-7)
    return rep


def encode_family(f: CombFamily) -> dict:
    return {"representation": encode_representation(f.rep), "base": encode_comb(f.base)}


def decode_family(obj, path: str) -> CombFamily:
    _require_keys(obj, {"representation", "base"}, set(), path)
    rep = decode_representation(obj["representation"], f"{path}.representation")
    base = decode_comb(obj["base"], f"{path}.base")
    return family_from_base(rep.group, rep, base)


def encode_cost(c: CostFunction) -> dict:
    return {
        "group": encode_group(c.group),
        "name": c.name,
        "table": [[float(x) for x in row] for row in c.table],
    }


def decode_cost(obj, path: str) -> CostFunction:
    _require_keys(obj, {"group", "table"}, {"name"}, path)
    group = decode_group(obj["group"], f"{path}.group")
    table = obj["table"]
    if not isinstance(table, list):
        raise SchemaError(f"{path}.table", "expected a list of rows")
    return CostFunction(group, np.asarray(table, dtype=float), obj.get("name", "custom"))


# -- file envelope ------------------------------------------------------------

_ENCODERS = {
    "operator": encode_operator,
    "comb": encode_comb,
    "network": encode_network,
    "tester": encode_tester,
    "instrument": encode_tester,
    "povm": encode_povm,
    "group": encode_group,
    "representation": encode_representation,
    "family": encode_family,
    "cost": encode_cost,
}

_DECODERS = {
    "operator": decode_operator,
    "comb": decode_comb,
    "network": decode_network,
    "tester": decode_tester,
    "instrument": decode_instrument,
    "povm": decode_povm,
    "group": decode_group,
    "representation": decode_representation,
    "family": decode_family,
    "cost": decode_cost,
}


def dumps(kind: str, value: Any, indent: int | None = None) -> str:
    payload = {"schema": SCHEMA_PREFIX + kind, "version": VERSION}
    payload.update(_ENCODERS[kind](value))
    return json.dumps(payload, indent=indent)


def loads(text: str, expect: str | None = None) -> Any:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("$", "expected a JSON object")
    if "schema" not in obj or "version" not in obj:
        raise SchemaError("$", "missing schema/version envelope")
    schema = obj["schema"]
    if not isinstance(schema, str) or not schema.startswith(SCHEMA_PREFIX):
        raise SchemaError("$.schema", f"unknown schema {schema!r}")
    kind = schema[len(SCHEMA_PREFIX) :]
    if kind not in _DECODERS:
        raise SchemaError("$.schema", f"unknown schema {schema!r}")
    if expect is not None and kind != expect:
        raise SchemaError("$.schema", f"expected combkit/{expect}, got {schema!r}")
    if obj["version"] != VERSION:
        raise SchemaError("$.version", f"unsupported version {obj['version']!r}")
    body = {k: v for k, v in obj.items() if k not in ("schema", "version")}
    return _DECODERS[kind](body, "$")


def save(path: str, kind: str, value: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(kind, value, indent=2))
        fh.write("\n")


def load(path: str, expect: str | None = None) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read(), expect=expect)
