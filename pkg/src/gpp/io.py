"""JSON encoding of guidance traces.

A trace is a JSON list of objects ``{"kind": ..., "value": ...}`` where kind
is one of ``psample``, ``csample``, ``pbranch``, ``cbranch`` or ``fold``
(folds carry no value).  Integers denote naturals and numbers written with
a decimal point or exponent denote reals, so ``1.0`` and ``1`` differ.
"""
from __future__ import annotations

import json
import math

from .errors import GppError
from .syntax import CBranch, CSample, Fold, FOLD, PBranch, PSample, Trace

_KINDS = {PSample: "psample", CSample: "csample", PBranch: "pbranch", CBranch: "cbranch"}
_CTORS = {v: k for k, v in _KINDS.items()}


class TraceFormatError(GppError):
    pass


def message_to_json(msg) -> dict:
    if isinstance(msg, Fold):
        return {"kind": "fold"}
    return {"kind": _KINDS[type(msg)], "value": msg.value}


def trace_to_json(s: Trace) -> list:
    return [message_to_json(m) for m in s]


def _scalar(v, where):
    if isinstance(v, bool):
        return v
    if isinstance(v, int):
        if v < 0:
            raise TraceFormatError(f"{where}: negative integer {v} is not a natural")
        return v
    if isinstance(v, float):
        if not math.isfinite(v):
            raise TraceFormatError(f"{where}: non-finite number")
        return v
    raise TraceFormatError(f"{where}: expected a number or boolean, got {v!r}")


def trace_from_json(data) -> Trace:
    if not isinstance(data, list):
        raise TraceFormatError("a trace must be a JSON list")
    out = []
    for i, item in enumerate(data):
        where = f"message {i}"
        if not isinstance(item, dict) or "kind" not in item:
            raise TraceFormatError(f"{where}: expected an object with a 'kind' field")
        kind = item["kind"]
        if kind == "fold":
            out.append(FOLD)
            continue
        if kind not in _CTORS:
            raise TraceFormatError(f"{where}: unknown kind {kind!r}")
        if "value" not in item:
            raise TraceFormatError(f"{where}: missing 'value'")
        v = _scalar(item["value"], where)
        if kind in ("pbranch", "cbranch") and not isinstance(v, bool):
            raise TraceFormatError(f"{where}: branch selections are booleans")
        out.append(_CTORS[kind](v))
    return Trace(tuple(out))


def dumps_trace(s: Trace) -> str:
    return json.dumps(trace_to_json(s))


def loads_trace(text: str) -> Trace:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"invalid JSON: {exc}") from None
    return trace_from_json(data)


def load_trace(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        return loads_trace(fh.read())


def dump_trace(s: Trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_trace(s) + "\n")
