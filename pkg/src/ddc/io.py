"""JSON persistence for named matrices and small documents.

Floats are written with 17 significant digits, so save followed by load is
bit-exact.  Matrices are row-major nested arrays.  Non-finite numbers are
rejected on both sides with the offending field path.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np


class MatrixFileError(ValueError):
    """Malformed or non-finite content in a matrix file."""


def _reject_constant(name: str):
    raise ValueError(f"non-finite literal {name}")


def _encode(value: Any, path: str, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        value = value.item()
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise MatrixFileError(f"{path}: non-finite value {value}")
        return "%.17g" % value
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, f'{path}.{k}' if path else str(k), indent, level + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        parts = [_encode(v, f"{path}[{i}]", indent, level + 1) for i, v in enumerate(value)]
        if all(not isinstance(v, (list, tuple, Mapping, np.ndarray)) for v in value):
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    raise MatrixFileError(f"{path}: cannot serialise {type(value).__name__}")


def dumps(doc: Mapping[str, Any], indent: int = 2) -> str:
    return _encode(doc, "", indent, 0) + "\n"


def _is_numeric_array(value: list) -> bool:
    flat = value
    while flat and isinstance(flat[0], list):
        flat = [x for row in flat for x in (row if isinstance(row, list) else [row])]
    return bool(flat) and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in flat)


def _decode(value: Any, path: str) -> Any:
    if isinstance(value, dict):
        return {k: _decode(v, f"{path}.{k}" if path else k) for k, v in value.items()}
    if isinstance(value, list):
        if value and _is_numeric_array(value):
            if isinstance(value[0], list):
                widths = {len(r) if isinstance(r, list) else -1 for r in value}
                if len(widths) != 1 or -1 in widths:
                    raise MatrixFileError(f"{path}: ragged matrix rows")
            return np.array(value, dtype=float)
        return [_decode(v, f"{path}[{i}]") for i, v in enumerate(value)]
    return value


def loads(text: str, source: str = "<string>") -> dict[str, Any]:
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MatrixFileError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except ValueError as exc:
        raise MatrixFileError(f"{source}: {exc} at {_locate_nonfinite(raw_text=text)}") from exc
    if not isinstance(raw, dict):
        raise MatrixFileError(f"{source}: top level must be an object")
    return _decode(raw, "")


def _locate_nonfinite(raw_text: str) -> str:
    """Field path of the first NaN/Infinity literal, found by re-parsing with a marker."""
    marker = "__ddc_nonfinite__"
    doc = json.loads(raw_text, parse_constant=lambda name: marker)
    stack: list[tuple[str, Any]] = [("", doc)]
    while stack:
        path, value = stack.pop(0)
        if value == marker:
            return path or "<root>"
        if isinstance(value, dict):
            stack.extend((f"{path}.{k}" if path else k, v) for k, v in value.items())
        elif isinstance(value, list):
            stack.extend((f"{path}[{i}]", v) for i, v in enumerate(value))
    return "<unknown>"


def save_matrix_file(path, named: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(named))
    return path


def load_matrix_file(path) -> dict[str, Any]:
    path = Path(path)
    return loads(path.read_text(), source=str(path))
