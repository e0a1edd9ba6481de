"""Canonical JSON and CSV emission.

Floats are printed with 17 significant digits (which round-trips doubles
exactly), keys are sorted, and '.' is always the decimal separator, so
re-reading a report and re-emitting it is byte-identical.
"""

from __future__ import annotations

import numpy as np


def fmt_float(x: float) -> str:
    x = float(x)
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("reports must not contain NaN or infinities")
    if x == 0.0:
        x = 0.0  # normalize -0.0
    return f"{x:.17g}"


def _emit(obj, indent: int, pieces: list) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            pieces.append("{}")
            return
        pieces.append("{\n")
        items = sorted(obj.items())
        for i, (k, v) in enumerate(items):
            if not isinstance(k, str):
                raise TypeError("JSON object keys must be strings")
            pieces.append(f'{pad}  "{k}": ')
            _emit(v, indent + 1, pieces)
            pieces.append(",\n" if i + 1 < len(items) else "\n")
        pieces.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            pieces.append("[]")
            return
        pieces.append("[\n")
        for i, v in enumerate(obj):
            pieces.append(pad + "  ")
            _emit(v, indent + 1, pieces)
            pieces.append(",\n" if i + 1 < len(obj) else "\n")
        pieces.append(pad + "]")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        pieces.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        pieces.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        pieces.append(fmt_float(float(obj)))
    elif isinstance(obj, str):
        import json as _json

        pieces.append(_json.dumps(obj))
    elif obj is None:
        pieces.append("null")
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, pieces)
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def canonical_json(obj) -> str:
    pieces: list = []
    _emit(obj, 0, pieces)
    pieces.append("\n")
    return "".join(pieces)


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(obj))


def csv_table(columns: list[str], rows: list[dict]) -> str:
    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return fmt_float(float(v))
        return str(v)

    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_table(columns, rows))
