"""Line-oriented run configuration: ``[section]`` headers, ``key = value``
pairs, ``#`` comments, expressions in double quotes.

Example::

    [problem]
    order = 1
    interval = 0, 1
    lagrangian = "y1^2/2"

    [boundary]
    left = 0:0
    right = 0:1
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ConfigError, VarregError
from .expr import parse


@dataclass
class ProblemSection:
    order: int = 0
    interval: tuple = ()
    lagrangian: str = ""
    forcing: Optional[str] = None
    forcing_sign: float = -1.0


@dataclass
class BoundarySection:
    left: dict = field(default_factory=dict)
    right: dict = field(default_factory=dict)


@dataclass
class DiscretizationSection:
    degree: int = 12
    panels: int = 32
    nodes: int = 5
    grid: int = 1025


@dataclass
class SolverSection:
    tol: float = 1e-10
    max_iter: int = 100


@dataclass
class MollifySection:
    source: Optional[str] = None
    widths: tuple = (0.25, 0.125, 0.0625, 0.03125)
    box: tuple = (-10.0, 10.0)
    kernel_nodes: int = 24


@dataclass
class OutputSection:
    directory: str = "out"
    formats: tuple = ("csv",)


@dataclass
class RunConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    boundary: BoundarySection = field(default_factory=BoundarySection)
    discretization: DiscretizationSection = field(default_factory=DiscretizationSection)
    solver: SolverSection = field(default_factory=SolverSection)
    mollify: MollifySection = field(default_factory=MollifySection)
    output: OutputSection = field(default_factory=OutputSection)


def _int(text):
    if not re.fullmatch(r"[+-]?\d+", text):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(text)


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _expr(text):
    if len(text) < 2 or text[0] != '"' or text[-1] != '"':
        raise ValueError(f"expressions must be double-quoted, got {text}")
    body = text[1:-1]
    parse(body)
    return body


def _string(text):
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return text[1:-1]
    return text


def _floats(text):
    parts = [p.strip() for p in _string(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(_float(p) for p in parts)


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError(f"expected two numbers, got {len(vals)}")
    return vals


def _order_values(text):
    out = {}
    body = _string(text).strip()
    if not body:
        return out
    for item in body.split(","):
        if ":" not in item:
            raise ValueError(f"expected order:value, got {item.strip()!r}")
        k, v = item.split(":", 1)
        k = _int(k.strip())
        if k in out:
            raise ValueError(f"derivative order {k} given twice")
        out[k] = _float(v.strip())
    return out


def _words(text):
    return tuple(w.strip() for w in _string(text).split(",") if w.strip())


SCHEMA = {
    "problem": {"order": _int, "interval": _pair, "lagrangian": _expr, "forcing": _expr,
                "forcing_sign": _float},
    "boundary": {"left": _order_values, "right": _order_values},
    "discretization": {"degree": _int, "panels": _int, "nodes": _int, "grid": _int},
    "solver": {"tol": _float, "max_iter": _int},
    "mollify": {"source": _expr, "widths": _floats, "box": _pair, "kernel_nodes": _int},
    "output": {"directory": _string, "formats": _words},
}
MANDATORY = {"problem": ("order", "interval", "lagrangian")}


def _strip_comment(line):
    inside = False
    for i, ch in enumerate(line):
        if ch == '"':
            inside = not inside
        elif ch == "#" and not inside:
            return line[:i]
    return line


def parse_config(text: str, require_problem: bool = True) -> RunConfig:
    """Parse and validate; every error carries the offending line number."""
    cfg = RunConfig()
    seen = {}  # (section, key) -> line
    section_line = {}
    section = None
    last_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in section_line:
                raise ConfigError(f"section [{section}] repeated (first at line {section_line[section]})",
                                  lineno)
            section_line[section] = lineno
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in seen:
            raise ConfigError(
                f"duplicate key {key!r} in [{section}] at lines {seen[(section, key)]} and {lineno}", lineno)
        seen[(section, key)] = lineno
        try:
            parsed = SCHEMA[section][key](value)
        except (ValueError, VarregError) as exc:
            raise ConfigError(f"{section}.{key}: {exc}", lineno) from None
        setattr(getattr(cfg, section), key, parsed)

    if require_problem:
        for sec, keys in MANDATORY.items():
            for key in keys:
                if (sec, key) not in seen:
                    raise ConfigError(f"missing mandatory key {sec}.{key}", section_line.get(sec, last_line))
    _validate(cfg, seen, require_problem)
    return cfg


def _validate(cfg: RunConfig, seen: dict, require_problem: bool):
    def fail(sec, key, msg):
        raise ConfigError(f"{sec}.{key}: {msg}", seen.get((sec, key)))

    p = cfg.problem
    if require_problem or ("problem", "order") in seen:
        if p.order < 1:
            fail("problem", "order", "order must be >= 1")
        if p.interval and not p.interval[0] < p.interval[1]:
            fail("problem", "interval", "need a < b")
        for side in ("left", "right"):
            for k in getattr(cfg.boundary, side):
                if not 0 <= k <= p.order:
                    fail("boundary", side, f"derivative order {k} outside 0..{p.order}")
        if p.lagrangian:
            from .expr import free_variables
            for name in free_variables(parse(p.lagrangian)):
                if name != "t" and int(name[1:]) > p.order:
                    fail("problem", "lagrangian", f"{name} exceeds order {p.order}")
    d = cfg.discretization
    if d.degree < 1:
        fail("discretization", "degree", "must be >= 1")
    if d.panels < 1:
        fail("discretization", "panels", "must be >= 1")
    if d.nodes < 1:
        fail("discretization", "nodes", "must be >= 1")
    if d.grid < 257 or d.grid % 2 == 0:
        fail("discretization", "grid", "must be odd and >= 257")
    s = cfg.solver
    if not s.tol > 0:
        fail("solver", "tol", "must be > 0")
    if s.max_iter < 0:
        fail("solver", "max_iter", "must be >= 0")
    m = cfg.mollify
    w = m.widths
    if any(x <= 0 for x in w) or any(x <= y for x, y in zip(w, w[1:])):
        fail("mollify", "widths", "must be positive and strictly decreasing")
    if not m.box[0] < m.box[1]:
        fail("mollify", "box", "need lo < hi")
    if m.kernel_nodes < 2:
        fail("mollify", "kernel_nodes", "must be >= 2")
    for f in cfg.output.formats:
        if f not in ("csv", "svg"):
            fail("output", "formats", f"unknown format {f!r}")


def section_items(cfg: RunConfig):
    """(section, key, value) triples, for echoing into reports."""
    for sec in SCHEMA:
        obj = getattr(cfg, sec)
        for f in fields(obj):
            yield sec, f.name, getattr(obj, f.name)
