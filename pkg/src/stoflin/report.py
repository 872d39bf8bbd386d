"""Deterministic JSON rendering of reports.

Keys keep insertion order and floats are printed with 17 significant digits,
so identical runs give byte-identical output.
"""
from __future__ import annotations

import json
import math
from enum import Enum

import numpy as np


def _float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    text = "%.17g" % v
    if not any(ch in text for ch in ".eE"):
        text += ".0"
    return text


def _render(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Enum):
        return json.dumps(obj.value)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_render(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number, bool, str)) or v is None for v in obj):
            return "[" + ", ".join(_render(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _render(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Render ``obj`` (dicts, lists, scalars, arrays, objects with ``to_dict``) as JSON text."""
    return _render(obj, indent, 0) + "\n"
