"""Infix expressions over ``x1..xn`` with symbolic differentiation.

Expressions are parsed into small tuples, differentiated symbolically and
turned into Python source twice: a scalar version compiled with numba and a
version vectorized over rows for the numpy path.

Grammar::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?
    atom  := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
"""
from __future__ import annotations

import math
import re
from collections import Counter
from typing import List, Sequence, Tuple

import numpy as np

from ._accel import MAT_SIG, USE_NUMBA, VEC_SIG, njit
from .errors import SpecError

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "log")

Node = tuple

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex) if m.lastindex else m.end()
        if m.group(1):
            toks.append(("num", m.group(1), start))
        elif m.group(2):
            toks.append(("name", m.group(2), start))
        elif m.group(3) and not m.group(3).isspace():
            toks.append(("op", m.group(3), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


def _line_col(text: str, offset: int) -> Tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.text = text
        self.n_vars = n_vars
        self.toks = _tokenize(text)
        self.i = 0

    def error(self, msg, offset=None):
        if offset is None:
            offset = self.toks[self.i][2]
        line, col = _line_col(self.text, offset)
        raise SpecError(msg, line, col)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            self.error(f"expected '{op}'", tok[2])

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.error(f"unexpected '{tok[1]}'")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            inner = self.unary()
            return neg(inner) if tok[1] == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return num(float(val))
        if kind == "name":
            if val == "pi":
                return num(math.pi)
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n_vars:
                    self.error(f"variable {val} outside x1..x{self.n_vars}", off)
                return ("var", k - 1)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return call(val, arg)
            self.error(f"unknown name '{val}'", off)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of expression", off)
        self.error(f"unexpected '{val}'", off)


def parse(text: str, n_vars: int) -> Node:
    """Parse ``text`` into an expression tree; raises SpecError with position."""
    return _Parser(text, n_vars).parse()


# -- constructors with light simplification ---------------------------------

def num(v: float) -> Node:
    return ("num", float(v))


def _is(node, v):
    return node[0] == "num" and node[1] == v


def neg(a):
    if a[0] == "num":
        return num(-a[1])
    if a[0] == "neg":
        return a[1]
    return ("neg", a)


def add(a, b):
    if a[0] == "num" and b[0] == "num":
        return num(a[1] + b[1])
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return ("add", a, b)


def sub(a, b):
    if a[0] == "num" and b[0] == "num":
        return num(a[1] - b[1])
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return ("sub", a, b)


def mul(a, b):
    if a[0] == "num" and b[0] == "num":
        return num(a[1] * b[1])
    if _is(a, 0.0) or _is(b, 0.0):
        return num(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return ("mul", a, b)


def div(a, b):
    if _is(a, 0.0):
        return num(0.0)
    if _is(b, 1.0):
        return a
    if a[0] == "num" and b[0] == "num" and b[1] != 0.0:
        return num(a[1] / b[1])
    return ("div", a, b)


def power(a, b):
    if _is(b, 0.0):
        return num(1.0)
    if _is(b, 1.0):
        return a
    if a[0] == "num" and b[0] == "num":
        try:
            return num(a[1] ** b[1])
        except (OverflowError, ZeroDivisionError):
            pass
    return ("pow", a, b)


def call(name, a):
    return ("call", name, a)


def var(i: int) -> Node:
    return ("var", i)


# -- calculus ----------------------------------------------------------------

def diff(node: Node, i: int) -> Node:
    """Symbolic partial derivative with respect to ``x_{i+1}``."""
    k = node[0]
    if k == "num":
        return num(0.0)
    if k == "var":
        return num(1.0 if node[1] == i else 0.0)
    if k == "neg":
        return neg(diff(node[1], i))
    if k in ("add", "sub"):
        f = add if k == "add" else sub
        return f(diff(node[1], i), diff(node[2], i))
    if k == "mul":
        a, b = node[1], node[2]
        return add(mul(diff(a, i), b), mul(a, diff(b, i)))
    if k == "div":
        a, b = node[1], node[2]
        da, db = diff(a, i), diff(b, i)
        return sub(div(da, b), div(mul(a, db), power(b, num(2.0))))
    if k == "pow":
        a, b = node[1], node[2]
        da, db = diff(a, i), diff(b, i)
        if b[0] == "num":
            return mul(mul(num(b[1]), power(a, num(b[1] - 1.0))), da)
        return mul(node, add(mul(db, call("log", a)), div(mul(b, da), a)))
    if k == "call":
        name, a = node[1], node[2]
        da = diff(a, i)
        if _is(da, 0.0):
            return num(0.0)
        if name == "sin":
            return mul(call("cos", a), da)
        if name == "cos":
            return neg(mul(call("sin", a), da))
        if name == "exp":
            return mul(node, da)
        if name == "sqrt":
            return div(da, mul(num(2.0), node))
        if name == "log":
            return div(da, a)
    raise ValueError(f"cannot differentiate node {k}")


def evaluate(node: Node, x: Sequence[float]) -> float:
    """Reference tree-walking evaluator (used in tests)."""
    k = node[0]
    if k == "num":
        return node[1]
    if k == "var":
        return float(x[node[1]])
    if k == "neg":
        return -evaluate(node[1], x)
    if k == "call":
        return getattr(math, node[1])(evaluate(node[2], x))
    a, b = evaluate(node[1], x), evaluate(node[2], x)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if k == "div":
        return a / b
    return a ** b


# -- code generation ---------------------------------------------------------

_OPS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "**"}


def _leaf_source(node: Node, vectorized: bool) -> str:
    if node[0] == "num":
        return repr(node[1])
    return f"x[:, {node[1]}]" if vectorized else f"x[{node[1]}]"


def _node_source(node: Node, vectorized: bool, child) -> str:
    k = node[0]
    if k in ("num", "var"):
        return _leaf_source(node, vectorized)
    if k == "neg":
        return f"(-{child(node[1])})"
    if k == "call":
        mod = "np" if vectorized else "math"
        return f"{mod}.{node[1]}({child(node[2])})"
    if k == "pow" and node[2][0] == "num" and node[2][1] == 2.0:
        a = child(node[1])
        return f"({a}*{a})"
    return f"({child(node[1])}{_OPS[k]}{child(node[2])})"


def to_source(node: Node, vectorized: bool) -> str:
    return _node_source(node, vectorized, lambda c: to_source(c, vectorized))


def _count_subtrees(roots) -> Counter:
    counts: Counter = Counter()

    def walk(nd):
        counts[nd] += 1
        if counts[nd] == 1 and nd[0] not in ("num", "var"):
            for c in nd[1:]:
                if isinstance(c, tuple):
                    walk(c)

    for r in roots:
        walk(r)
    return counts


def _cse_source(roots, vectorized: bool):
    """Source for each root with repeated subtrees bound to temporaries."""
    counts = _count_subtrees(roots)
    names: dict = {}
    lines: List[str] = []

    def emit(nd):
        if nd in names:
            return names[nd]
        if nd[0] in ("num", "var"):
            return _leaf_source(nd, vectorized)
        src = _node_source(nd, vectorized, emit)
        if counts[nd] > 1:
            name = f"t{len(names)}"
            lines.append(f"    {name} = {src}")
            names[nd] = name
            return name
        return src

    exprs = [emit(r) for r in roots]
    return lines, exprs


def _compile(src: str, name: str, sig=None):
    ns = {"np": np, "math": math}
    exec(compile(src, f"<morsecx:{name}>", "exec"), ns)
    fn = ns[name]
    return njit(sig)(fn) if sig is not None else fn


def compile_vector(nodes: List[Node], name: str, jit: bool = True):
    """Return ``(scalar_fn, vectorized_fn)`` evaluating a list of expressions.

    ``scalar_fn(x)`` maps shape ``(n,)`` to ``(m,)``; ``vectorized_fn(X)``
    maps ``(N, n)`` to ``(N, m)``.  The scalar version is only built (and
    jitted) when numba acceleration is on and ``jit`` is set; otherwise it
    is ``None``.
    """
    m = len(nodes)
    lines = [f"def {name}(x):"]
    vlines = [f"def {name}(x):"]
    for target, vec in ((lines, False), (vlines, True)):
        tmp, exprs = _cse_source(nodes, vec)
        target.extend(tmp)
        target.append(f"    out = np.empty({(f'(x.shape[0], {m})' if vec else m)})")
        for j, e in enumerate(exprs):
            target.append(f"    out[:, {j}] = {e}" if vec else f"    out[{j}] = {e}")
        target.append("    return out")
    scalar = _compile("\n".join(lines), name, VEC_SIG) if USE_NUMBA and jit else None
    vec = _compile("\n".join(vlines), name)
    return scalar, vec


def compile_matrix(rows: List[List[Node]], name: str, jit: bool = True):
    """Like :func:`compile_vector` for a matrix of expressions (zeros skipped)."""
    m, n = len(rows), len(rows[0]) if rows else 0
    cells = [(i, j, nd) for i, row in enumerate(rows) for j, nd in enumerate(row) if not _is(nd, 0.0)]
    lines = [f"def {name}(x):"]
    vlines = [f"def {name}(x):"]
    for target, vec in ((lines, False), (vlines, True)):
        tmp, exprs = _cse_source([c[2] for c in cells], vec)
        target.extend(tmp)
        target.append(f"    out = np.zeros({(f'(x.shape[0], {m}, {n})' if vec else (m, n))})")
        for (i, j, _), e in zip(cells, exprs):
            target.append(f"    out[:, {i}, {j}] = {e}" if vec else f"    out[{i}, {j}] = {e}")
        target.append("    return out")
    scalar = _compile("\n".join(lines), name, MAT_SIG) if USE_NUMBA and jit else None
    vec = _compile("\n".join(vlines), name)
    return scalar, vec


def to_infix(node: Node) -> str:
    """Render a tree back to the input syntax."""
    k = node[0]
    if k == "num":
        return repr(node[1])
    if k == "var":
        return f"x{node[1] + 1}"
    if k == "neg":
        return f"(-{to_infix(node[1])})"
    if k == "call":
        return f"{node[1]}({to_infix(node[2])})"
    op = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[k]
    return f"({to_infix(node[1])}{op}{to_infix(node[2])})"
