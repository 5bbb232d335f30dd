"""Experiment configuration files.

One ``key = value`` pair per line; ``#`` starts a comment.  Values are bare
words, numbers, lists (``[0.2, 0.1]``) or set expressions (see
:mod:`gaussgmt.lab.grammar`).  Unknown or repeated keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..errors import ConfigError
from ..semigroup import MODES
from .grammar import canonical_set_text, format_node, parse_ast, parse_value

EXPERIMENTS = ("semigroup", "perimeter", "theorem1", "representation", "union", "poincare",
               "graph_bound", "reduced_boundary", "hausdorff_sup")
GRAPHS = ("segment", "sine")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    set: str | None = None
    other_set: str | None = None
    test_sets: tuple[str, ...] | None = None
    dim: int | None = None
    spectrum: tuple[float, ...] | None = None
    t_grid: tuple[float, ...] | None = None
    t0: float | None = None
    count: int | None = None
    frames: tuple[tuple[int, ...], ...] | None = None
    points: int | None = None
    graph: str | None = None
    t_bar: float | None = None
    mode: str | None = None
    mc_samples: int | None = None
    gh_order: int | None = None
    quad_max_dim: int | None = None
    resolution: int | None = None
    tolerance: float | None = None
    seed: int | None = None
    output: str | None = None


_KINDS = {
    "experiment": "tag", "set": "set", "other_set": "set", "test_sets": "sets", "dim": "int",
    "spectrum": "floats", "t_grid": "floats", "t0": "float", "count": "int", "frames": "frames",
    "points": "int", "graph": "tag", "t_bar": "float", "mode": "tag", "mc_samples": "int",
    "gh_order": "int", "quad_max_dim": "int", "resolution": "int", "tolerance": "float",
    "seed": "int", "output": "text",
}
_TAGS = {"experiment": EXPERIMENTS, "graph": GRAPHS, "mode": MODES}
_POSITIVE = {"dim", "count", "points", "mc_samples", "gh_order", "quad_max_dim", "resolution"}


def _convert(key, text, line, col):
    kind = _KINDS[key]
    if kind == "tag":
        if text not in _TAGS[key]:
            raise ConfigError(f"{key} must be one of {', '.join(_TAGS[key])}; got {text!r}", line, col)
        return text
    if kind == "text":
        if not text:
            raise ConfigError(f"{key} needs a value", line, col)
        return text
    if kind == "set":
        return canonical_set_text(text, line, col)
    if kind == "sets":
        node = parse_ast(text, line, col)
        if node[0] != "list" or not node[1]:
            raise ConfigError(f"{key} must be a nonempty list of set expressions", line, col)
        out = []
        for item in node[1]:
            s = format_node(item)
            out.append(canonical_set_text(s, line, col))
        return tuple(out)
    v = parse_value(text, line, col)
    if kind in ("int", "float"):
        if isinstance(v, list):
            raise ConfigError(f"{key} must be a number", line, col)
        if kind == "int":
            if v != int(v):
                raise ConfigError(f"{key} must be an integer", line, col)
            v = int(v)
            if key in _POSITIVE and v <= 0:
                raise ConfigError(f"{key} must be positive", line, col)
            if key == "seed" and v < 0:
                raise ConfigError("seed must be nonnegative", line, col)
            return v
        return float(v)
    if kind == "floats":
        if not isinstance(v, list) or not v or any(isinstance(x, list) for x in v):
            raise ConfigError(f"{key} must be a nonempty list of numbers", line, col)
        return tuple(float(x) for x in v)
    # frames: list of lists of integers
    if not isinstance(v, list) or not v or not all(isinstance(r, list) and r for r in v):
        raise ConfigError(f"{key} must be a list of coordinate lists such as [[0], [0, 1]]", line, col)
    if any(x != int(x) or x < 0 for r in v for x in r):
        raise ConfigError(f"{key} entries must be nonnegative integers", line, col)
    return tuple(tuple(int(x) for x in r) for r in v)


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if "=" not in line:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError("expected 'key = value'", ln, col)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        if key not in _KINDS:
            raise ConfigError(f"unknown key {key!r}", ln, key_col)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", ln, key_col)
        val = value_part.strip()
        val_col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        values[key] = _convert(key, val, ln, val_col)
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'", 1, 1)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(kind, v) -> str:
    if kind in ("tag", "text", "set"):
        return str(v)
    if kind == "sets":
        return "[" + ", ".join(v) + "]"
    if kind == "int":
        return str(v)
    if kind == "float":
        return repr(float(v))
    if kind == "floats":
        return "[" + ", ".join(repr(float(x)) for x in v) + "]"
    return "[" + ", ".join("[" + ", ".join(str(x) for x in r) + "]" for r in v) + "]"


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is not None:
            lines.append(f"{f.name} = {_fmt(_KINDS[f.name], v)}")
    return "\n".join(lines) + "\n"


def as_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[f.name] = v
    return out
