"""Dictionary parameterization of the unknown potential: V = Phi c.

The default library holds ten candidate functions in a frozen order so
coefficient indices stay stable across runs. Custom libraries come from
(name, expression) pairs in a small expression grammar: the identifier x,
numbers, + - * / ^, sin, cos, exp, and parentheses. Columns are raw
function samples by default; an optional unit-norm column mode exists for
conditioning studies, with coefficients mapped back before reporting.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (DimensionMismatchError, ExpressionError,
                     NonfiniteSampleError)
from .grids import Grid1D

DEFAULT_EXPRESSIONS: tuple[str, ...] = (
    "x",
    "sin(x)",
    "cos(x)",
    "x^2",
    "sin(x)^2",
    "cos(x)^2",
    "exp(-x)",
    "exp(-2*x)",
    "exp(-x^2)",
    "exp(-2*x^2)",
)

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*)|([()+\-*/^]))")
_FUNCS: dict[str, Callable] = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _tokenize(text: str) -> list[str]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExpressionError(f"bad character {text[pos]!r} in {text!r}")
        num, ident, dstar, op = m.groups()
        tokens.append(num or ident or ("^" if dstar else op))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive-descent parser producing a vectorized callable of x."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ExpressionError(f"unexpected end of expression in {self.text!r}")
        self.pos += 1
        return tok

    def parse(self) -> Callable[[np.ndarray], np.ndarray]:
        fn = self.expr()
        if self.peek() is not None:
            raise ExpressionError(f"trailing tokens after {self.peek()!r} in {self.text!r}")
        return fn

    def expr(self):
        fn = self.term()
        while self.peek() in ("+", "-"):
            op, rhs = self.take(), self.term()
            lhs = fn
            fn = ((lambda x, a=lhs, b=rhs: a(x) + b(x)) if op == "+"
                  else (lambda x, a=lhs, b=rhs: a(x) - b(x)))
        return fn

    def term(self):
        fn = self.factor()
        while self.peek() in ("*", "/"):
            op, rhs = self.take(), self.factor()
            lhs = fn
            fn = ((lambda x, a=lhs, b=rhs: a(x) * b(x)) if op == "*"
                  else (lambda x, a=lhs, b=rhs: a(x) / b(x)))
        return fn

    def factor(self):
        if self.peek() in ("+", "-"):
            op = self.take()
            inner = self.factor()
            return inner if op == "+" else (lambda x, f=inner: -f(x))
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.take()
            expo = self.factor()  # right-associative, allows unary minus
            return lambda x, b=base, e=expo: b(x) ** e(x)
        return base

    def atom(self):
        tok = self.take()
        if re.fullmatch(r"\d+\.?\d*(?:[eE][+-]?\d+)?", tok):
            val = float(tok)
            return lambda x, v=val: np.full_like(np.asarray(x, dtype=float), v)
        if tok == "(":
            fn = self.expr()
            if self.take() != ")":
                raise ExpressionError(f"missing ')' in {self.text!r}")
            return fn
        if tok in _FUNCS:
            if self.take() != "(":
                raise ExpressionError(f"{tok} needs parenthesized argument in {self.text!r}")
            arg = self.expr()
            if self.take() != ")":
                raise ExpressionError(f"missing ')' in {self.text!r}")
            f = _FUNCS[tok]
            return lambda x, g=arg, f=f: f(g(x))
        if tok == "x":
            return lambda x: np.asarray(x, dtype=float)
        raise ExpressionError(f"unknown identifier {tok!r} in {self.text!r}")


def parse_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression string to a vectorized function of x."""
    return _Parser(text).parse()


@dataclass(frozen=True)
class Library:
    """Ordered set of named candidate functions."""

    entries: tuple[tuple[str, Callable[[np.ndarray], np.ndarray]], ...]

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate library names in {names}")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def default_library() -> Library:
    """The frozen ten-function library used by the bundled scenarios."""
    return library_from_pairs([(e, e) for e in DEFAULT_EXPRESSIONS])


def library_from_pairs(pairs: Sequence[tuple[str, str]]) -> Library:
    """Build a library from (name, expression) pairs."""
    return Library(tuple((name, parse_expression(expr)) for name, expr in pairs))


def library_from_names(names: Sequence[str]) -> Library:
    """Select a subset of the default library by name, in the given order."""
    base = dict(default_library().entries)
    missing = [n for n in names if n not in base]
    if missing:
        raise ExpressionError(
            f"unknown library names {missing}; known: {list(base)}")
    return Library(tuple((n, base[n]) for n in names))


@dataclass
class DictionaryMatrix:
    """Sampled library: column i holds entry i evaluated at the grid points.

    column_scales[i] is the divisor applied to column i (all ones for raw
    sampling); coefficients found against scaled columns map back to the
    raw convention via to_raw_coeffs.
    """

    matrix: np.ndarray
    names: list[str]
    grid: Grid1D
    column_scales: np.ndarray

    @property
    def n_functions(self) -> int:
        return self.matrix.shape[1]

    def condition_number(self) -> float:
        """Conditioning diagnostic of the sampled columns (reported, not acted on)."""
        return float(np.linalg.cond(self.matrix))

    def normalized(self) -> "DictionaryMatrix":
        """Unit-norm column variant for conditioning studies."""
        scales = np.linalg.norm(self.matrix, axis=0)
        return DictionaryMatrix(self.matrix / scales, list(self.names),
                                self.grid, self.column_scales * scales)

    def to_raw_coeffs(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c, dtype=float) / self.column_scales


def assemble(lib: Library, grid: Grid1D) -> DictionaryMatrix:
    """Sample every library entry on the grid points."""
    cols = []
    with np.errstate(over="ignore", invalid="ignore"):
        for name, fn in lib.entries:
            col = np.asarray(fn(grid.points), dtype=float)
            if col.shape != (grid.M,):
                raise DimensionMismatchError(
                    f"library entry {name!r} returned shape {col.shape}")
            if not np.all(np.isfinite(col)):
                raise NonfiniteSampleError(
                    f"library entry {name!r} is non-finite on [{grid.a}, {grid.b}]")
            cols.append(col)
    return DictionaryMatrix(np.stack(cols, axis=1), lib.names, grid,
                            np.ones(len(lib)))


def synthesize(Phi: DictionaryMatrix | np.ndarray, c: np.ndarray) -> np.ndarray:
    """Potential samples V = Phi c."""
    mat = Phi.matrix if isinstance(Phi, DictionaryMatrix) else np.asarray(Phi, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.shape != (mat.shape[1],):
        raise DimensionMismatchError(
            f"coefficient shape {c.shape} vs {mat.shape[1]} columns")
    return mat @ c


def soft_threshold(c: np.ndarray, theta: float) -> np.ndarray:
    """Proximal map of theta*||.||_1: sign(c)*max(|c|-theta, 0)."""
    if theta < 0.0:
        raise ValueError(f"need theta >= 0, got {theta}")
    c = np.asarray(c, dtype=float)
    return np.sign(c) * np.maximum(np.abs(c) - theta, 0.0)
