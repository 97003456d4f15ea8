import json
from fractions import Fraction

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morsecx import beta as bc
from morsecx.beta import (Ball, BetaBound, Closure, Compact, ConvexHull, FinitePointSet, MinkowskiSum, Scale,
                          Subset, Union, beta, gronwall_propagate, has_inexact_nodes, random_tree)


def trees(n=1000, seed=17):
    rng = np.random.default_rng(seed)
    return [random_tree(rng) for _ in range(n)]


@pytest.mark.parametrize("expr, lo, hi", [
    (FinitePointSet(((0.0, 1.0),)), 0, 0),
    (Compact(), 0, 0),
    (Scale(-2, Ball(1)), 2, 2),
    (ConvexHull(Union((Ball(1), Ball(Fraction(1, 2))))), 1, 1),
    (Closure(Ball(Fraction(3, 4))), Fraction(3, 4), Fraction(3, 4)),
    (MinkowskiSum(Ball(1), Ball(Fraction(1, 4))), Fraction(3, 4), Fraction(5, 4)),
    (MinkowskiSum(Ball(1), Compact()), 1, 1),
    (Subset(Ball(2)), 0, 2),
    (Scale(0, Ball(5)), 0, 0),
])
def test_beta_examples(expr, lo, hi):
    assert beta(expr) == BetaBound(lo, hi)


def test_gronwall_hand_example():
    # n = floor(1*2) + 1 = 3, tau = 2/3, factor (1/(1 - 2/3))^3 = 27
    assert gronwall_propagate(1, 2, BetaBound.exact(1)) == BetaBound(27, 27)


def test_gronwall_zero_rate():
    b = BetaBound(Fraction(1, 3), 2)
    assert gronwall_propagate(0, 5, b) == b


def test_gronwall_zero_measure():
    rng = np.random.default_rng(5)
    for _ in range(100):
        c = Fraction(int(rng.integers(0, 400)), int(rng.integers(1, 40)))
        t = Fraction(int(rng.integers(0, 400)), int(rng.integers(1, 40)))
        assert gronwall_propagate(c, t, BetaBound(0, 0)) == BetaBound(0, 0)


def test_gronwall_rejects_negative():
    with pytest.raises(ValueError):
        gronwall_propagate(-1, 1, BetaBound(0, 0))


@pytest.mark.parametrize("lo, hi", [(-1, 0), (2, 1)])
def test_invalid_bound(lo, hi):
    with pytest.raises(ValueError):
        BetaBound(lo, hi)


def test_invalid_nodes():
    with pytest.raises(ValueError):
        Ball(-1)
    with pytest.raises(ValueError):
        Union(())
    with pytest.raises(ValueError):
        Scale(1j, Ball(1))


# -- axiom suite ---------------------------------------------------------------------

def test_axioms_random_trees():
    rng = np.random.default_rng(18)
    for e in trees():
        b = beta(e)
        assert b.lower <= b.upper
        if not has_inexact_nodes(e):
            assert b.is_exact
        other = random_tree(rng, 2)
        bo = beta(other)
        # union: max, exactly
        u = beta(Union((e, other)))
        assert u == BetaBound(max(b.lower, bo.lower), max(b.upper, bo.upper))
        # homogeneity
        lam = Fraction(-7, 3)
        assert beta(Scale(lam, e)) == BetaBound(abs(lam) * b.lower, abs(lam) * b.upper)
        # convex hull and closure invariance, idempotent closure
        assert beta(ConvexHull(e)) == b == beta(Closure(e))
        assert beta(Closure(Closure(e))) == beta(Closure(e))
        # monotonicity: a subset never measures more
        s = beta(Subset(e))
        assert s.lower == 0 and s.upper == b.upper
        # subadditivity of sums
        m = beta(MinkowskiSum(e, other))
        assert m.upper == b.upper + bo.upper
        assert m.lower <= m.upper


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_minkowski_reverse_triangle(s1, s2):
    a = beta(random_tree(np.random.default_rng(s1), 3))
    b = beta(random_tree(np.random.default_rng(s2), 3))
    m = beta(MinkowskiSum(Ball(a.upper), Ball(b.upper)))
    assert m.lower == abs(a.upper - b.upper)
    assert m.upper == a.upper + b.upper


# -- JSON ---------------------------------------------------------------------------

def test_round_trip_random_trees():
    for e in trees(300, seed=3):
        text = bc.dumps(e)
        back = bc.loads(text)
        assert bc.dumps(back) == text
        assert beta(back) == beta(e)


def test_rationals_serialised_as_strings():
    d = bc.to_dict(Scale(Fraction(1, 3), Ball(Fraction(5, 2))))
    assert d["factor"] == "1/3" and d["children"][0]["radius"] == "5/2"
    assert beta(bc.from_dict(d)) == BetaBound.exact(Fraction(5, 6))


@pytest.mark.parametrize("doc", [
    {"type": "Ball"},
    {"type": "Ball", "radius": "one"},
    {"type": "Union", "children": []},
    {"type": "Scale", "factor": 2, "children": [{"type": "Compact"}, {"type": "Compact"}]},
    {"type": "MinkowskiSum", "children": [{"type": "Compact"}]},
    {"type": "Hexagon"},
    {"type": "Compact", "radius": 1},
])
def test_schema_rejects(doc):
    with pytest.raises(jsonschema.ValidationError):
        bc.from_dict(doc)


def test_schema_is_valid_draft():
    jsonschema.Draft202012Validator.check_schema(bc.SCHEMA)
    json.dumps(bc.SCHEMA)
