"""Text syntax for set specifications.

::

    halfspace(dir=[1, 0], c=0.5)
    ball(center=[0, 0], r=1)
    box([-1, 1] x [-inf, 2])            # or box(lower=[..], upper=[..])
    polytope(A=[[1, 0], [0, 1]], b=[1, 1])
    simplex([[0, 0], [1, 0], [0, 1]])
    cylinder(base=box([-1, 1]), coords=[3], dim=10)
    union_disjoint(A, B)
    complement(A)

Coordinates are 0-based.  Numbers accept ``inf``/``-inf``.  Errors carry
the line and column of the offending character.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, GaussGMTError
from ..sets import (Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace, Polytope,
                    SetModel)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>[+-]?(?:inf|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[()\[\],=x])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    """Split ``text``; positions are reported relative to ``(line, col)``."""
    out = []
    pos = 0
    ln, cl = line, col
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ConfigError(f"unexpected character {text[pos]!r}", ln, cl)
        kind = m.lastgroup
        s = m.group()
        if kind == "name" and s == "x":
            kind = "punct"
        if kind == "name" and s == "inf":
            kind = "num"
        if kind != "ws":
            out.append(Token(kind, s, ln, cl))
        for ch in s:
            if ch == "\n":
                ln, cl = ln + 1, 1
            else:
                cl += 1
        pos = m.end()
    out.append(Token("end", "", ln, cl))
    return out


# AST nodes: ("call", name, args, kwargs) | ("list", items) | ("num", value) | ("product", intervals)


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, msg, tok=None):
        tok = tok or self.tok
        raise ConfigError(msg, tok.line, tok.col)

    def expect(self, text):
        if self.tok.text != text:
            self.fail(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        self.i += 1

    def value(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            v = ("num", float(tok.text))
        elif tok.text == "[":
            v = self.list_()
        elif tok.kind == "name":
            v = self.call()
        else:
            self.fail(f"expected a value, found {tok.text or 'end of input'!r}")
        if self.tok.text == "x":
            if v[0] != "list":
                self.fail("only intervals can be multiplied with 'x'")
            parts = [v]
            while self.tok.text == "x":
                self.i += 1
                if self.tok.text != "[":
                    self.fail("expected an interval after 'x'")
                parts.append(self.list_())
            v = ("product", parts)
        return v

    def list_(self):
        self.expect("[")
        items = []
        if self.tok.text != "]":
            items.append(self.value())
            while self.tok.text == ",":
                self.i += 1
                items.append(self.value())
        self.expect("]")
        return ("list", items)

    def call(self):
        name_tok = self.tok
        self.i += 1
        self.expect("(")
        args, kwargs = [], {}
        if self.tok.text != ")":
            while True:
                if self.tok.kind == "name" and self.toks[self.i + 1].text == "=":
                    key = self.tok
                    self.i += 2
                    if key.text in kwargs:
                        self.fail(f"duplicate argument {key.text!r}", key)
                    kwargs[key.text] = (self.value(), key)
                else:
                    if kwargs:
                        self.fail("positional argument after keyword argument")
                    args.append(self.value())
                if self.tok.text != ",":
                    break
                self.i += 1
        self.expect(")")
        return ("call", name_tok, args, kwargs)


def parse_ast(text: str, line: int = 1, col: int = 1):
    p = _Parser(tokenize(text, line, col))
    node = p.value()
    if p.tok.kind != "end":
        p.fail(f"unexpected trailing input {p.tok.text!r}")
    return node


def parse_value(text: str, line: int = 1, col: int = 1):
    """Plain numbers and (nested) lists as Python floats/lists."""
    return _plain(parse_ast(text, line, col), Token("num", text, line, col))


def _plain(node, where: Token):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "list":
        return [_plain(v, where) for v in node[1]]
    raise ConfigError("expected a number or a list of numbers", where.line, where.col)


def _vector(node, where, name):
    v = _plain(node, where)
    if not isinstance(v, list) or not v or any(isinstance(x, list) for x in v):
        raise ConfigError(f"{name} must be a nonempty list of numbers", where.line, where.col)
    return np.array(v, float)


def _matrix(node, where, name):
    v = _plain(node, where)
    if (not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v)
            or len({len(r) for r in v}) != 1):
        raise ConfigError(f"{name} must be a rectangular list of lists", where.line, where.col)
    return np.array(v, float)


def _number(node, where, name):
    v = _plain(node, where)
    if isinstance(v, list):
        raise ConfigError(f"{name} must be a number", where.line, where.col)
    return v


_SIGNATURES = {
    "halfspace": ((), ("dir", "c")),
    "ball": ((), ("center", "r")),
    "box": (("intervals",), ("lower", "upper")),
    "polytope": ((), ("A", "b")),
    "simplex": (("vertices",), ()),
    "cylinder": ((), ("base", "coords", "dim")),
    "union_disjoint": (("left", "right"), ()),
    "complement": (("inner",), ()),
}


def build(node) -> SetModel:
    if node[0] != "call":
        raise ConfigError("expected a set expression such as ball(center=[0, 0], r=1)", 1, 1)
    _, tok, args, kwargs = node
    name = tok.text
    if name not in _SIGNATURES:
        raise ConfigError(f"unknown set {name!r}; expected one of {sorted(_SIGNATURES)}",
                          tok.line, tok.col)
    positional, keywords = _SIGNATURES[name]
    if len(args) > len(positional):
        raise ConfigError(f"{name} takes at most {len(positional)} positional arguments",
                          tok.line, tok.col)
    for key, (_, ktok) in kwargs.items():
        if key not in keywords:
            raise ConfigError(f"{name} has no argument {key!r}", ktok.line, ktok.col)
    kw = {k: v for k, (v, _) in kwargs.items()}
    where = {k: t for k, (_, t) in kwargs.items()}

    def need(key):
        if key not in kw:
            raise ConfigError(f"{name} needs {key}=...", tok.line, tok.col)
        return kw[key]

    try:
        if name == "halfspace":
            return Halfspace(_vector(need("dir"), where["dir"], "dir"), _number(need("c"), where["c"], "c"))
        if name == "ball":
            return Ball(_vector(need("center"), where["center"], "center"),
                        _number(need("r"), where["r"], "r"))
        if name == "box":
            if args:
                if kw:
                    raise ConfigError("box takes intervals or lower/upper, not both", tok.line, tok.col)
                node_ = args[0]
                parts = node_[1] if node_[0] == "product" else [node_]
                iv = [_vector(p, tok, "interval") for p in parts]
                if any(len(v) != 2 for v in iv):
                    raise ConfigError("intervals are written [a, b]", tok.line, tok.col)
                return Box([v[0] for v in iv], [v[1] for v in iv])
            return Box(_vector(need("lower"), where["lower"], "lower"),
                       _vector(need("upper"), where["upper"], "upper"))
        if name == "polytope":
            return Polytope(_matrix(need("A"), where["A"], "A"), _vector(need("b"), where["b"], "b"))
        if name == "simplex":
            if not args:
                raise ConfigError("simplex needs a list of vertices", tok.line, tok.col)
            return Polytope.simplex(_matrix(args[0], tok, "vertices"))
        if name == "cylinder":
            base = build(need("base"))
            coords = [int(c) for c in _vector(need("coords"), where["coords"], "coords")]
            dim = int(_number(kw["dim"], where["dim"], "dim")) if "dim" in kw else max(coords) + 1
            return CylinderLift(base, tuple(coords), dim)
        if name == "union_disjoint":
            if len(args) != 2:
                raise ConfigError("union_disjoint takes two sets", tok.line, tok.col)
            return DisjointUnion(build(args[0]), build(args[1]))
        if len(args) != 1:
            raise ConfigError("complement takes one set", tok.line, tok.col)
        return Complement(build(args[0]))
    except ConfigError:
        raise
    except (GaussGMTError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {name}: {exc}", tok.line, tok.col) from exc


def parse_set(text: str, line: int = 1, col: int = 1) -> SetModel:
    """Parse a set expression; ``line``/``col`` locate ``text`` inside a larger file."""
    return build(parse_ast(text, line, col))


def _fmt_num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def format_node(node) -> str:
    """Canonical text of a parsed expression (stable spacing and number format)."""
    kind = node[0]
    if kind == "num":
        return _fmt_num(node[1])
    if kind == "list":
        return "[" + ", ".join(format_node(v) for v in node[1]) + "]"
    if kind == "product":
        return " x ".join(format_node(v) for v in node[1])
    _, tok, args, kwargs = node
    parts = [format_node(a) for a in args] + [f"{k}={format_node(v)}" for k, (v, _) in kwargs.items()]
    return f"{tok.text}({', '.join(parts)})"


def canonical_set_text(text: str, line: int = 1, col: int = 1) -> str:
    """Validate ``text`` as a set and return its canonical spelling."""
    node = parse_ast(text, line, col)
    build(node)
    return format_node(node)
