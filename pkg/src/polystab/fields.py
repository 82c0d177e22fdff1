"""Scalar-field specifications for A.

The CLI grammar covers the affine/quadratic fields the theory emphasizes:

    "extremal"                    -- solve for the canonical affine A
    "affine:a0,a1[,a2]"           -- a0 + a1 x (+ a2 y)
    any expression in x, y (or x1, x2) built from numbers, + - * ^ and
    parentheses, with total degree at most 2, e.g. "48*x^2 - 48*x + 10".

Richer fields require programmatic use (pass any callable to the evaluator).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import AffineFunc


@dataclass(frozen=True)
class QuadraticPoly:
    """c0 + cx x + cy y + cxx x^2 + cxy x y + cyy y^2 (1D: y-terms zero)."""

    dimension: int
    coeffs: tuple  # (c0, cx, cy, cxx, cxy, cyy)

    @property
    def degree(self):
        c0, cx, cy, cxx, cxy, cyy = self.coeffs
        if any(abs(v) > 0 for v in (cxx, cxy, cyy)):
            return 2
        if any(abs(v) > 0 for v in (cx, cy)):
            return 1
        return 0

    def __call__(self, pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        c0, cx, cy, cxx, cxy, cyy = self.coeffs
        x = p[:, 0]
        y = p[:, 1] if self.dimension == 2 else 0.0
        return c0 + cx * x + cy * y + cxx * x * x + cxy * x * y + cyy * y * y

    def as_affine(self):
        if self.degree > 1:
            raise ValueError("field is not affine")
        c0, cx, cy = self.coeffs[:3]
        return AffineFunc(c0, (cx,) if self.dimension == 1 else (cx, cy))


class _Parser:
    """Recursive-descent parser for quadratic polynomial expressions."""

    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, msg):
        raise ValueError(f"bad field expression at column {self.pos}: {msg} in {self.text!r}")

    def peek(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self):
        poly = self.expr()
        if self.peek():
            self.error("trailing input")
        return poly

    def expr(self):
        sign = 1.0
        ch = self.peek()
        if ch in "+-":
            self.pos += 1
            sign = -1.0 if ch == "-" else 1.0
        poly = _scale(self.term(), sign)
        while True:
            ch = self.peek()
            if ch == "+":
                self.pos += 1
                poly = _add(poly, self.term())
            elif ch == "-":
                self.pos += 1
                poly = _add(poly, _scale(self.term(), -1.0))
            else:
                return poly

    def term(self):
        poly = self.factor()
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                poly = _mul(poly, self.factor())
            elif ch == "/":
                self.pos += 1
                other = self.factor()
                if set(other) != {(0, 0)} and other:
                    self.error("division only by constants")
                poly = _scale(poly, 1.0 / other.get((0, 0), 0.0))
            else:
                return poly

    def factor(self):
        base = self.atom()
        if self.peek() == "^":
            self.pos += 1
            ch = self.peek()
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if self.pos == start:
                self.error("integer exponent expected")
            k = int(self.text[start:self.pos])
            out = {(0, 0): 1.0}
            for _ in range(k):
                out = _mul(out, base)
            return out
        return base

    def atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            inner = self.expr()
            if self.peek() != ")":
                self.error("missing ')'")
            self.pos += 1
            return inner
        if ch == "-":
            self.pos += 1
            return _scale(self.atom(), -1.0)
        if ch.isalpha():
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isalnum():
                self.pos += 1
            name = self.text[start:self.pos]
            if name in ("x", "x1"):
                return {(1, 0): 1.0}
            if name in ("y", "x2"):
                return {(0, 1): 1.0}
            self.error(f"unknown symbol {name!r}")
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"):
            nxt = self.text[self.pos]
            if nxt in "eE" and self.pos + 1 < len(self.text) and self.text[self.pos + 1] in "+-":
                self.pos += 2
            else:
                self.pos += 1
        if start == self.pos:
            self.error("number or symbol expected")
        return {(0, 0): float(self.text[start:self.pos])}


def _add(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) + v
    return out


def _scale(a, s):
    return {k: v * s for k, v in a.items()}


def _mul(a, b):
    out: dict = {}
    for (i1, j1), v1 in a.items():
        for (i2, j2), v2 in b.items():
            k = (i1 + i2, j1 + j2)
            out[k] = out.get(k, 0.0) + v1 * v2
    return out


def parse_field(text: str, dimension: int):
    """Parse a field specification into AffineFunc or QuadraticPoly.

    The literal "extremal" is resolved by the caller (needs the polytope).
    """
    text = text.strip()
    if text.startswith("affine:"):
        parts = [float(v) for v in text[len("affine:"):].split(",")]
        if len(parts) != dimension + 1:
            raise ValueError(f"affine spec needs {dimension + 1} coefficients")
        return AffineFunc(parts[0], tuple(parts[1:]))
    poly = _Parser(text).parse()
    if any(i + j > 2 for i, j in poly):
        raise ValueError("field expressions are limited to total degree 2")
    if dimension == 1 and any(j > 0 for _, j in poly):
        raise ValueError("1D field cannot involve y")
    coeffs = (
        poly.get((0, 0), 0.0), poly.get((1, 0), 0.0), poly.get((0, 1), 0.0),
        poly.get((2, 0), 0.0), poly.get((1, 1), 0.0), poly.get((0, 2), 0.0),
    )
    q = QuadraticPoly(dimension, coeffs)
    if q.degree <= 1:
        return q.as_affine()
    return q
