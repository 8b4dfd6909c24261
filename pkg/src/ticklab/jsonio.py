"""Byte-reproducible JSON: sorted keys, floats with 17 significant digits.

The standard encoder prints the shortest round-trip representation, which
is fine for reading back but varies in length; fixed 17-digit output makes
diffs between runs meaningful. Non-finite floats become ``null``.
"""
import enum
import json
import math

import numpy as np


def _float(x):
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, np.generic):
        obj = obj.item()
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, complex):
        _emit({"re": obj.real, "im": obj.imag}, indent, level, out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for n, key in enumerate(sorted(obj, key=str)):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _emit(obj[key], indent, level + 1, out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(x, (int, float, np.generic)) and not isinstance(x, bool) for x in obj):
            parts = []
            for x in obj:
                part = []
                _emit(x, indent, level + 1, part)
                parts.append("".join(part))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for n, item in enumerate(obj):
            out.append(pad)
            _emit(item, indent, level + 1, out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def dumps(obj, indent=2):
    out = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"
