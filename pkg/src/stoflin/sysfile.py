"""Reading and writing system-definition files.

The format is INI-style (parsed with :mod:`configparser`, keys case
sensitive)::

    [system]
    n = 2
    m = 1
    k = 1
    convention = ito
    x0 = 0, 0
    box = 1            ; sampling half-width, or "lo, hi" pairs per axis
    seed = 0

    [params]
    F = 1

    [f]
    f1 = x2
    f2 = -sin(x1)

    [g]
    g1 = 0
    g2 = 1

    [sigma]
    sigma1 = 0         ; with k > 1 use sigma<i>_<j> for row i, column j
    sigma2 = F*cos(x1)

    [transform]        ; optional
    T1 = x1
    Tinv1 = x1

    [feedback]         ; optional
    alpha = 0
    beta = 1

Expressions use the expression grammar of :mod:`stoflin.parser`.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import DimensionError, ParseError
from .expr import ZERO, simplify, to_string
from .fields import MatrixField, VectorField, as_matrix
from .parser import parse
from .sampling import DomainSampler
from .system import Convention, Diffeo, Feedback, StochasticSystem


@dataclass
class SystemFile:
    system: StochasticSystem
    transform: Diffeo | None = None
    feedback: Feedback | None = None


def _config() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    return cp


def _expr(text: str, n: int, where: str):
    try:
        return parse(text, n)
    except ParseError as exc:
        raise ParseError(f"{where}: {exc.message}", exc.offset) from None


def _floats(text: str, where: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ParseError(f"{where}: expected numbers, got {text!r}") from None


def _int(sec, key: str, default=None) -> int:
    if key not in sec:
        if default is None:
            raise ParseError(f"[system] is missing {key!r}")
        return default
    try:
        return int(sec[key])
    except ValueError:
        raise ParseError(f"[system] {key} must be an integer") from None


def _box(text: str | None, n: int) -> list:
    if text is None:
        return [(-1.0, 1.0)] * n
    vals = _floats(text, "[system] box")
    if len(vals) == 1:
        return [(-abs(vals[0]), abs(vals[0]))] * n
    if len(vals) == 2 * n:
        return [(vals[2 * i], vals[2 * i + 1]) for i in range(n)]
    raise ParseError(f"[system] box needs 1 or {2 * n} numbers")


def _components(cp, section: str, prefix: str, n: int) -> list:
    if not cp.has_section(section):
        raise ParseError(f"missing section [{section}]")
    sec = cp[section]
    out = []
    for i in range(1, n + 1):
        key = f"{prefix}{i}"
        if key not in sec:
            raise ParseError(f"[{section}] is missing {key}")
        out.append(_expr(sec[key], n, f"[{section}] {key}"))
    return out


def loads(text: str) -> SystemFile:
    """Parse a system file from a string.

    Raises
    ------
    ParseError
        Malformed document, missing entries or bad expressions.
    """
    cp = _read_sections(text)
    if not cp.has_section("system"):
        raise ParseError("missing section [system]")
    sec = cp["system"]
    n = _int(sec, "n")
    m = _int(sec, "m", 1)
    k = _int(sec, "k", 1)
    if n < 1 or k < 1:
        raise ParseError("[system] n and k must be positive")
    if m != 1:
        raise DimensionError("only single-input systems (m = 1) are supported")
    convention = Convention.from_name(sec.get("convention", "ito"))
    x0 = _floats(sec.get("x0", ", ".join(["0"] * n)), "[system] x0")
    if len(x0) != n:
        raise ParseError(f"[system] x0 needs {n} entries")
    params = {}
    if cp.has_section("params"):
        for name, val in cp["params"].items():
            try:
                params[name] = float(val)
            except ValueError:
                raise ParseError(f"[params] {name} is not a number") from None
    f = VectorField(_components(cp, "f", "f", n))
    g = VectorField(_components(cp, "g", "g", n))
    if convention is Convention.DETERMINISTIC and not cp.has_section("sigma"):
        sigma = VectorField.zero(n)
    elif k == 1:
        sigma = VectorField(_components(cp, "sigma", "sigma", n))
    else:
        if not cp.has_section("sigma"):
            raise ParseError("missing section [sigma]")
        ss = cp["sigma"]
        rows = []
        for i in range(1, n + 1):
            row = []
            for j in range(1, k + 1):
                key = f"sigma{i}_{j}"
                if key not in ss:
                    raise ParseError(f"[sigma] is missing {key}")
                row.append(_expr(ss[key], n, f"[sigma] {key}"))
            rows.append(row)
        sigma = MatrixField(rows)
    sampler = DomainSampler(_box(sec.get("box"), n), _int(sec, "seed", 0))
    system = StochasticSystem(f, g, sigma, convention, tuple(x0), params, sampler)

    transform = feedback = None
    if cp.has_section("transform"):
        fw = _components(cp, "transform", "T", n)
        inv = _components(cp, "transform", "Tinv", n) if "Tinv1" in cp["transform"] else None
        transform = Diffeo(fw, inv)
    if cp.has_section("feedback"):
        fs = cp["feedback"]
        feedback = Feedback(_expr(fs.get("alpha", "0"), n, "[feedback] alpha"), _expr(fs.get("beta", "1"), n, "[feedback] beta"))
    return SystemFile(system, transform, feedback)


def _read_sections(text: str):
    cp = _config()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"malformed file: {exc}") from None
    return cp


def load_transform(path, n: int) -> Diffeo:
    """Read a file holding a ``[transform]`` section for an ``n``-dimensional system."""
    cp = _read_sections(Path(path).read_text(encoding="utf-8"))
    fw = _components(cp, "transform", "T", n)
    inv = _components(cp, "transform", "Tinv", n) if "Tinv1" in cp["transform"] else None
    return Diffeo(fw, inv)


def load_feedback(path, n: int) -> Feedback:
    """Read a file holding a ``[feedback]`` section."""
    cp = _read_sections(Path(path).read_text(encoding="utf-8"))
    if not cp.has_section("feedback"):
        raise ParseError("missing section [feedback]")
    fs = cp["feedback"]
    return Feedback(_expr(fs.get("alpha", "0"), n, "[feedback] alpha"), _expr(fs.get("beta", "1"), n, "[feedback] beta"))


def load(path) -> SystemFile:
    return loads(Path(path).read_text(encoding="utf-8"))


def load_system(path) -> StochasticSystem:
    return load(path).system


def _text(e, n: int) -> str:
    """Readable form when it parses back to the same tree, exact form otherwise."""
    pretty = to_string(e)
    try:
        if simplify(parse(pretty, n)) == simplify(e):
            return pretty
    except ParseError:
        pass
    return to_string(e, exact=True)


def _num(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() else repr(float(v))


def dumps(s: StochasticSystem, transform: Diffeo | None = None, feedback: Feedback | None = None) -> str:
    """Serialize a system (in its own coordinates) to the file format."""
    if s.chart is not None:
        raise DimensionError("a system in chart form has no closed-form file representation")
    n, k = s.dim, s.noise_dim
    lines = ["[system]", f"n = {n}", "m = 1", f"k = {k}", f"convention = {s.convention.value}"]
    lines.append("x0 = " + ", ".join(_num(v) for v in s.x0))
    box = getattr(s.sampler, "box", None)
    if box is not None:
        lines.append("box = " + ", ".join(f"{_num(lo)}, {_num(hi)}" for lo, hi in box))
    seed = getattr(s.sampler, "rng_seed", None)
    if seed is not None:
        lines.append(f"seed = {seed}")
    if s.params:
        lines += ["", "[params]"] + [f"{name} = {_num(v)}" for name, v in s.params.items()]
    lines += ["", "[f]"] + [f"f{i} = {_text(e, n)}" for i, e in enumerate(s.f, 1)]
    lines += ["", "[g]"] + [f"g{i} = {_text(e, n)}" for i, e in enumerate(s.g, 1)]
    sm = as_matrix(s.sigma)
    if s.convention is not Convention.DETERMINISTIC or any(e != ZERO for row in sm.rows for e in row):
        lines += ["", "[sigma]"]
        for i, row in enumerate(sm.rows, 1):
            if k == 1:
                lines.append(f"sigma{i} = {_text(row[0], n)}")
            else:
                lines += [f"sigma{i}_{j} = {_text(e, n)}" for j, e in enumerate(row, 1)]
    if transform is not None:
        lines += ["", "[transform]"] + [f"T{i} = {_text(e, n)}" for i, e in enumerate(transform.forward, 1)]
        if transform.inverse is not None:
            lines += [f"Tinv{i} = {_text(e, n)}" for i, e in enumerate(transform.inverse, 1)]
    if feedback is not None:
        lines += ["", "[feedback]", f"alpha = {_text(feedback.alpha, n)}", f"beta = {_text(feedback.beta, n)}"]
    return "\n".join(lines) + "\n"


def dump(path, s: StochasticSystem, transform: Diffeo | None = None, feedback: Feedback | None = None) -> None:
    Path(path).write_text(dumps(s, transform, feedback), encoding="utf-8")
