"""Series filtering, spectra, and virtual-sensor arithmetic.

All operations are pure functions over immutable series: same input, same
bits out. The spectrum contract is numeric agreement with the unnormalized
DFT definition; internally it may use any algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import AlignmentError, ConfigError
from .events import ChannelId

MAX_SPECTRUM_N = 65536


@dataclass(frozen=True)
class Series:
    """Uniformly sampled values on one channel starting at step ``t0``."""

    channel: ChannelId
    t0: int
    values: tuple[float, ...]
    dt: int = 1

    def __post_init__(self) -> None:
        if self.dt < 1:
            raise ConfigError(f"series dt must be >= 1, got {self.dt}")
        for v in self.values:
            if not math.isfinite(v):
                raise ConfigError(f"series value must be finite, got {v}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Spectrum:
    """DFT magnitudes |X_k| for k = 0..n-1 of one source window."""

    channel: ChannelId
    n: int
    magnitudes: tuple[float, ...]

    @property
    def bins(self) -> Iterator[tuple[int, float]]:
        return iter(enumerate(self.magnitudes))


def moving_average(s: Series, window: int) -> Series:
    """Sliding mean; output element i averages input[i .. i+window-1]."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window > len(s):
        raise ValueError(f"window {window} exceeds series length {len(s)}")
    if window == 1:
        return s
    arr = np.asarray(s.values, dtype=float)
    out = np.convolve(arr, np.ones(window), mode="valid") / window
    return Series(
        channel=s.channel,
        t0=s.t0 + (window - 1) * s.dt,
        values=tuple(float(v) for v in out),
        dt=s.dt,
    )


def ewma(s: Series, alpha: float) -> Series:
    """Exponentially weighted moving average: y_i = a*x_i + (1-a)*y_{i-1}."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    out: list[float] = []
    y = 0.0
    for i, x in enumerate(s.values):
        y = x if i == 0 else alpha * x + (1 - alpha) * y
        out.append(y)
    return Series(channel=s.channel, t0=s.t0, values=tuple(out), dt=s.dt)


def spectrum(window: Series) -> Spectrum:
    """Magnitudes of the unnormalized DFT of the window."""
    n = len(window)
    if not 2 <= n <= MAX_SPECTRUM_N:
        raise ValueError(f"spectrum window length must be in [2, {MAX_SPECTRUM_N}], got {n}")
    mags = np.abs(np.fft.fft(np.asarray(window.values, dtype=float)))
    return Spectrum(channel=window.channel, n=n, magnitudes=tuple(float(m) for m in mags))


# --- virtual-sensor expression language -----------------------------------
#
# expr   := term (('+' | '-') term)*
# term   := factor (('*' | '/') factor)*
# factor := NUMBER | IDENT | '(' expr ')' | '-' factor
#
# Only +, -, *, / over constants and input channel names.


@dataclass(frozen=True)
class _Const:
    value: float


@dataclass(frozen=True)
class _Var:
    name: str


@dataclass(frozen=True)
class _BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class _Neg:
    operand: "Expr"


Expr = _Const | _Var | _BinOp | _Neg

_TOKEN_OPS = set("+-*/()")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in _TOKEN_OPS:
            tokens.append(c)
            i += 1
        elif c.isdigit() or c == ".":
            j = i
            while j < len(text) and (text[j].isdigit() or text[j] in ".eE" or
                                     (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            tokens.append(text[i:j])
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
        else:
            raise ConfigError(f"unexpected character {c!r} in expression {text!r}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[str], source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ConfigError(f"unexpected end of expression {self.source!r}")
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        if self.peek() is not None:
            raise ConfigError(f"trailing tokens after expression {self.source!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = _BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = _BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        tok = self.take()
        if tok == "(":
            node = self.expr()
            if self.take() != ")":
                raise ConfigError(f"unbalanced parentheses in {self.source!r}")
            return node
        if tok == "-":
            return _Neg(self.factor())
        if tok and (tok[0].isdigit() or tok[0] == "."):
            try:
                return _Const(float(tok))
            except ValueError:
                raise ConfigError(f"bad number {tok!r} in {self.source!r}") from None
        if tok and (tok[0].isalpha() or tok[0] == "_"):
            return _Var(tok)
        raise ConfigError(f"unexpected token {tok!r} in {self.source!r}")


def parse_expression(text: str) -> Expr:
    """Parse a virtual-sensor arithmetic expression; ConfigError on bad syntax."""
    tokens = _tokenize(text)
    if not tokens:
        raise ConfigError("empty expression")
    return _Parser(tokens, text).parse()


def evaluate_expression(expr: Expr, env: dict[str, float]) -> float:
    """Evaluate a parsed expression against channel values."""
    if isinstance(expr, _Const):
        return expr.value
    if isinstance(expr, _Var):
        if expr.name not in env:
            raise ConfigError(f"unknown identifier {expr.name!r} in expression")
        return env[expr.name]
    if isinstance(expr, _Neg):
        return -evaluate_expression(expr.operand, env)
    left = evaluate_expression(expr.left, env)
    right = evaluate_expression(expr.right, env)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise ZeroDivisionError(f"division by zero in virtual channel expression")
    return left / right


def virtual_channel(inputs: Sequence[Series], expr: str, name: ChannelId) -> Series:
    """Pointwise evaluation of ``expr`` over aligned input series."""
    if not inputs:
        raise ConfigError("virtual channel requires at least one input series")
    first = inputs[0]
    for s in inputs[1:]:
        if (s.t0, s.dt, len(s)) != (first.t0, first.dt, len(first)):
            raise AlignmentError(
                f"series {s.channel} misaligned with {first.channel}: "
                f"({s.t0},{s.dt},{len(s)}) vs ({first.t0},{first.dt},{len(first)})"
            )
    ast = parse_expression(expr)
    out = []
    for i in range(len(first)):
        env = {s.channel: s.values[i] for s in inputs}
        out.append(evaluate_expression(ast, env))
    return Series(channel=name, t0=first.t0, values=tuple(out), dt=first.dt)
