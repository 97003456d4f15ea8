"""Interval calculus for the Hausdorff measure of non-compactness.

Set expressions are trees whose atoms carry their measure by declaration:
a finite point set and a compact set have ``beta = 0``, a ball of radius
``r`` in an infinite-dimensional subspace has ``beta = r``.  The nodes are
combined with the usual rules (max over unions, homogeneity, invariance
under convex hull and closure, subadditivity of sums, monotonicity).
All arithmetic is done on :class:`fractions.Fraction`, so the rules hold
exactly rather than up to rounding.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple, Union as _U

import numpy as np

Number = _U[int, float, Fraction]


def _q(v: Number) -> Fraction:
    if isinstance(v, float) and not math.isfinite(v):
        raise ValueError("non-finite number")
    return Fraction(v)


@dataclass(frozen=True)
class BetaBound:
    """Closed interval ``[lower, upper]`` containing the true measure."""

    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        lo, hi = _q(self.lower), _q(self.upper)
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid bound [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def exact(cls, v: Number) -> "BetaBound":
        return cls(v, v)

    @property
    def is_exact(self) -> bool:
        return self.lower == self.upper

    def scaled(self, lam: Number) -> "BetaBound":
        a = abs(_q(lam))
        return BetaBound(a * self.lower, a * self.upper)

    def __contains__(self, v) -> bool:
        return self.lower <= _q(v) <= self.upper

    def as_floats(self) -> Tuple[float, float]:
        return float(self.lower), float(self.upper)

    def __repr__(self):
        lo, hi = self.as_floats()
        return f"BetaBound([{lo:g}, {hi:g}])"


# --------------------------------------------------------------------- trees


class SetExpr:
    """Base class of set expression nodes."""

    kind = "SetExpr"

    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class FinitePointSet(SetExpr):
    points: tuple = ()
    kind = "FinitePointSet"


@dataclass(frozen=True)
class Ball(SetExpr):
    """Ball of radius ``r`` inside an infinite-dimensional subspace."""

    radius: Number = 1
    kind = "Ball"

    def __post_init__(self):
        if _q(self.radius) < 0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class Compact(SetExpr):
    label: str = "K"
    kind = "Compact"


@dataclass(frozen=True)
class Union(SetExpr):
    parts: tuple = ()
    kind = "Union"

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ValueError("empty union")

    def children(self):
        return tuple(self.parts)


@dataclass(frozen=True)
class Scale(SetExpr):
    factor: Number
    child: SetExpr
    kind = "Scale"

    def __post_init__(self):
        if isinstance(self.factor, complex):
            raise ValueError("scale factor must be real")

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class MinkowskiSum(SetExpr):
    left: SetExpr
    right: SetExpr
    kind = "MinkowskiSum"

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class ConvexHull(SetExpr):
    child: SetExpr
    kind = "ConvexHull"

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Closure(SetExpr):
    child: SetExpr
    kind = "Closure"

    def children(self):
        return (self.child,)


@dataclass(frozen=True)
class Subset(SetExpr):
    """An unspecified subset of ``child``; ``marker`` only names it."""

    child: SetExpr
    marker: str = "A"
    kind = "Subset"

    def children(self):
        return (self.child,)


def beta(e: SetExpr) -> BetaBound:
    """Interval enclosure of the measure of non-compactness of ``e``.

    The result is degenerate whenever ``e`` contains no
    :class:`MinkowskiSum` or :class:`Subset` node.
    """
    if isinstance(e, (FinitePointSet, Compact)):
        return BetaBound(0, 0)
    if isinstance(e, Ball):
        return BetaBound.exact(e.radius)
    if isinstance(e, Union):
        bs = [beta(c) for c in e.parts]
        return BetaBound(max(b.lower for b in bs), max(b.upper for b in bs))
    if isinstance(e, Scale):
        return beta(e.child).scaled(e.factor)
    if isinstance(e, MinkowskiSum):
        a, b = beta(e.left), beta(e.right)
        lo = max(a.lower - b.upper, b.lower - a.upper, Fraction(0))
        return BetaBound(lo, a.upper + b.upper)
    if isinstance(e, (ConvexHull, Closure)):
        return beta(e.child)
    if isinstance(e, Subset):
        return BetaBound(0, beta(e.child).upper)
    raise TypeError(f"not a set expression: {e!r}")


def gronwall_propagate(c: Number, t_star: Number, beta0: BetaBound) -> BetaBound:
    """Bound on the measure of the flow image of a set over ``[0, t_star]``.

    The interval is cut into ``n = floor(c t_star) + 1`` steps of length
    ``tau = t_star / n`` (so ``tau c < 1``); each step multiplies the
    measure by at most ``1 / (1 - tau c)``.
    """
    c, t_star = _q(c), _q(t_star)
    if c < 0 or t_star < 0:
        raise ValueError("c and t_star must be nonnegative")
    n = math.floor(c * t_star) + 1
    tau = t_star / n
    factor = (1 / (1 - tau * c)) ** n
    return BetaBound(beta0.lower * factor, beta0.upper * factor)


# ------------------------------------------------------------------- json

def _num_schema():
    return {"oneOf": [{"type": "number"},
                      {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}


def _kids(n_min, n_max=None):
    d = {"type": "array", "minItems": n_min, "items": {"$ref": "#/$defs/node"}}
    if n_max is not None:
        d["maxItems"] = n_max
    return d


# per-type constraints; dispatch on "type" with if/then keeps validation
# linear in the tree size (oneOf would revisit every subtree per branch)
_NODE_RULES = {
    "FinitePointSet": ({"points": {"type": "array",
                                   "items": {"type": "array", "items": {"type": "number"}}}}, []),
    "Ball": ({"radius": {"$ref": "#/$defs/num"}}, ["radius"]),
    "Compact": ({"label": {"type": "string"}}, []),
    "Union": ({"children": _kids(1)}, ["children"]),
    "Scale": ({"factor": {"$ref": "#/$defs/num"}, "children": _kids(1, 1)}, ["factor", "children"]),
    "MinkowskiSum": ({"children": _kids(2, 2)}, ["children"]),
    "ConvexHull": ({"children": _kids(1, 1)}, ["children"]),
    "Closure": ({"children": _kids(1, 1)}, ["children"]),
    "Subset": ({"marker": {"type": "string"}, "children": _kids(1, 1)}, ["children"]),
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$ref": "#/$defs/node",
    "$defs": {
        "num": _num_schema(),
        "node": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": sorted(_NODE_RULES)}},
            "allOf": [
                {"if": {"properties": {"type": {"const": t}}},
                 "then": {"properties": dict(props, type={"const": t}),
                          "required": req, "additionalProperties": False}}
                for t, (props, req) in _NODE_RULES.items()
            ],
        },
    },
}


def _num_out(v):
    v = Fraction(v)
    if v.denominator == 1:
        return int(v)
    return f"{v.numerator}/{v.denominator}"


def _num_in(v):
    return Fraction(v) if isinstance(v, str) else v


def to_dict(e: SetExpr) -> dict:
    """JSON-ready dict; rational parameters are written as ``"p/q"``."""
    if isinstance(e, FinitePointSet):
        return {"type": e.kind, "points": [list(map(float, p)) for p in e.points]}
    if isinstance(e, Ball):
        return {"type": e.kind, "radius": _num_out(e.radius)}
    if isinstance(e, Compact):
        return {"type": e.kind, "label": e.label}
    d = {"type": e.kind, "children": [to_dict(c) for c in e.children()]}
    if isinstance(e, Scale):
        d["factor"] = _num_out(e.factor)
    if isinstance(e, Subset):
        d["marker"] = e.marker
    return d


_VALIDATOR = None


def validate(d: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when ``d`` is not a set expression."""
    global _VALIDATOR
    if _VALIDATOR is None:
        import jsonschema

        _VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)
    _VALIDATOR.validate(d)


def from_dict(d: dict, check: bool = True) -> SetExpr:
    if check:
        validate(d)
    t = d["type"]
    kids = [from_dict(c, False) for c in d.get("children", [])]
    if t == "FinitePointSet":
        return FinitePointSet(tuple(tuple(p) for p in d.get("points", [])))
    if t == "Ball":
        return Ball(_num_in(d["radius"]))
    if t == "Compact":
        return Compact(d.get("label", "K"))
    if t == "Union":
        return Union(tuple(kids))
    if t == "Scale":
        return Scale(_num_in(d["factor"]), kids[0])
    if t == "MinkowskiSum":
        return MinkowskiSum(kids[0], kids[1])
    if t == "ConvexHull":
        return ConvexHull(kids[0])
    if t == "Closure":
        return Closure(kids[0])
    return Subset(kids[0], d.get("marker", "A"))


def dumps(e: SetExpr) -> str:
    return json.dumps(to_dict(e), sort_keys=True)


def loads(s: str) -> SetExpr:
    return from_dict(json.loads(s))


# ------------------------------------------------------------ random trees

def _random_rational(rng, lo=-4, hi=4, den=8) -> Fraction:
    return Fraction(int(rng.integers(lo * den, hi * den + 1)), den)


def random_tree(rng: np.random.Generator, depth: int = 4) -> SetExpr:
    """Random well-formed expression with rational parameters."""
    if depth <= 0 or rng.random() < 0.25:
        k = rng.integers(3)
        if k == 0:
            pts = tuple(tuple(rng.normal(size=2).round(3)) for _ in range(rng.integers(1, 4)))
            return FinitePointSet(pts)
        if k == 1:
            return Ball(abs(_random_rational(rng, 0, 3)))
        return Compact()
    k = rng.integers(7)
    sub = lambda: random_tree(rng, depth - 1)  # noqa: E731
    if k == 0:
        return Union(tuple(sub() for _ in range(rng.integers(1, 4))))
    if k == 1:
        return Scale(_random_rational(rng), sub())
    if k == 2:
        return MinkowskiSum(sub(), sub())
    if k == 3:
        return ConvexHull(sub())
    if k == 4:
        return Closure(sub())
    if k == 5:
        return Subset(sub(), f"A{int(rng.integers(100))}")
    return Union((sub(), sub()))


def has_inexact_nodes(e: SetExpr) -> bool:
    if isinstance(e, (MinkowskiSum, Subset)):
        return True
    return any(has_inexact_nodes(c) for c in e.children())
