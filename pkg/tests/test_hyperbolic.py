import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from morsecx.errors import LambdaTooLarge, NotHyperbolic, TooFar
from morsecx.grassmann import Subspace, projector, relative_dimension, subspace_distance
from morsecx.hyperbolic import (adapted_product, coercivity, flow_norm, hyperbolic_rotation,
                                perturbation_slope, split)

from oracles import random_subspace


def coord(n, *idx):
    return Subspace.coordinate(n, idx)


def random_hyperbolic(rng, n, gap=0.3, k=None):
    """Random matrix with spectral gap ``gap`` and unstable dimension ``k``
    (random when omitted)."""
    k = int(rng.integers(0, n + 1)) if k is None else k
    re = np.concatenate([rng.uniform(gap, 2, k), -rng.uniform(gap, 2, n - k)])
    T = rng.normal(size=(n, n)) + 2 * np.eye(n)
    D = np.diag(re) + np.triu(rng.normal(scale=0.5, size=(n, n)), 1)
    return T @ D @ np.linalg.inv(T), k


# -- split ---------------------------------------------------------------------------

def test_split_diagonal():
    op = split(np.diag([1.0, -1.0]))
    assert subspace_distance(op.V_plus, coord(2, 0)) < 1e-12
    assert subspace_distance(op.V_minus, coord(2, 1)) < 1e-12
    assert op.morse_index == 1 and op.gap == pytest.approx(1.0)


@pytest.mark.parametrize("L", [
    [[0.0, 1.0], [-1.0, 0.0]],
    [[0.0, 0.0], [0.0, -1.0]],
    [[1e-12, 0.0], [0.0, 1.0]],
])
def test_split_not_hyperbolic(L):
    with pytest.raises(NotHyperbolic):
        split(np.array(L))


def test_split_model_operator():
    P = np.diag([1.0, 1, 1, 0, 0, 0])
    op = split(P - (np.eye(6) - P))
    assert subspace_distance(op.V_plus, coord(6, 0, 1, 2)) < 1e-12
    assert subspace_distance(op.V_minus, coord(6, 3, 4, 5)) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_split_invariance_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    L, k = random_hyperbolic(rng, 5)
    op = split(L)
    assert op.V_plus.dim == k and op.V_minus.dim == 5 - k
    for V in (op.V_plus, op.V_minus):
        P = projector(V)
        assert np.linalg.norm((np.eye(5) - P) @ L @ P) < 1e-8 * max(1, np.linalg.norm(L))
    assert subspace_distance(op.V_plus, split(-L).V_minus) < 1e-8
    # spectral projector (oblique, along the other space) commutes with L
    T = np.hstack([op.V_plus.basis, op.V_minus.basis])
    Pi = T @ np.diag([1.0] * k + [0.0] * (5 - k)) @ np.linalg.inv(T)
    assert np.linalg.norm(Pi @ L - L @ Pi) < 1e-8 * max(1, np.linalg.norm(L)) * np.linalg.cond(T)


# -- adapted product -----------------------------------------------------------------

def test_adapted_product_already_adapted():
    L = np.diag([2.0, -2.0])
    ap = adapted_product(L, 1.0)
    assert np.all(np.linalg.eigvalsh(ap.G) > 0)
    assert coercivity(L, ap.G, [1, 0]) >= 1.0
    assert coercivity(L, ap.G, [0, 1]) <= -1.0
    # G is diagonal in the eigenbasis: the axes stay orthogonal
    assert abs(ap.G[0, 1]) < 1e-12


def test_adapted_product_jordan_block():
    L = np.array([[1.0, 5.0], [0.0, 1.0]])
    # Euclidean product fails: <L x, x> can be negative
    assert min(coercivity(L, np.eye(2), x) for x in ([1, -1], [1, -0.3], [0.2, -1])) < 0.5
    ap = adapted_product(L, 0.5)
    assert np.linalg.norm(ap.G - ap.G[0, 0] * np.eye(2)) > 1e-3
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(100, 2)):
        assert coercivity(L, ap.G, x) >= 0.5 - 1e-9


def test_adapted_product_mirrored():
    L = np.array([[1.0, 5.0], [0.0, 1.0]])
    ap = adapted_product(-L, 0.5)
    rng = np.random.default_rng(1)
    for x in rng.normal(size=(100, 2)):
        assert coercivity(-L, ap.G, x) <= -0.5 + 1e-9


@pytest.mark.parametrize("seed", range(15))
def test_adapted_product_random(seed):
    rng = np.random.default_rng(100 + seed)
    L, k = random_hyperbolic(rng, 4)
    op = split(L)
    ap = adapted_product(op)
    assert np.min(np.linalg.eigvalsh(ap.G)) > 0
    for _ in range(20):
        xp = op.V_plus.basis @ rng.normal(size=op.V_plus.dim)
        xm = op.V_minus.basis @ rng.normal(size=op.V_minus.dim)
        if op.V_plus.dim:
            assert coercivity(L, ap.G, xp) >= ap.lam - 1e-8
            assert abs(xp @ ap.G @ xm) < 1e-8 * np.sqrt((xp @ ap.G @ xp) * (xm @ ap.G @ xm)) + 1e-14
        if op.V_minus.dim:
            assert coercivity(L, ap.G, xm) <= -ap.lam + 1e-8
    # the frame is orthonormal for G and its first columns span V_plus
    assert np.linalg.norm(ap.frame.T @ ap.G @ ap.frame - np.eye(4)) < 1e-8
    if k:
        assert op.V_plus.contains(ap.frame[:, :k], 1e-8)


def test_adapted_product_lambda_too_large():
    with pytest.raises(LambdaTooLarge):
        adapted_product(np.diag([1.0, -1.0]), 1.0)


# -- hyperbolic rotation ------------------------------------------------------------

def _moved(rot, V):
    return Subspace.span(expm(rot.A) @ V.basis)


def test_rotation_identity():
    V = coord(3, 0, 1)
    rot = hyperbolic_rotation(V, V)
    ev = np.linalg.eigvalsh(rot.S)
    assert np.all(np.isclose(ev, rot.theta) | np.isclose(ev, 1 / rot.theta))
    assert subspace_distance(_moved(rot, V), V) < 1e-10


def test_rotation_small_angle():
    V = coord(2, 0)
    W = Subspace.span(np.array([np.cos(0.2), np.sin(0.2)]))
    rot = hyperbolic_rotation(V, W)
    assert np.allclose(rot.A, rot.A.T)
    assert abs(np.linalg.det(rot.A)) > 1e-6
    assert subspace_distance(_moved(rot, V), W) < 1e-8


def test_rotation_too_far():
    with pytest.raises(TooFar):
        hyperbolic_rotation(coord(2, 0), coord(2, 1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_rotation_random(seed):
    rng = np.random.default_rng(seed)
    n = 6
    k = int(rng.integers(1, n))
    V = random_subspace(rng, n, k)
    W = Subspace.span(V.basis + 0.3 * rng.normal(size=(n, k)))
    if subspace_distance(V, W) > 0.99:
        return
    rot = hyperbolic_rotation(V, W)
    assert subspace_distance(_moved(rot, V), W) < 1e-8
    ev = np.linalg.eigvalsh(rot.S)
    th = rot.theta
    assert np.all(ev > 0)
    assert np.all((ev <= th + 1e-12) | ((ev >= 1 / th - 1e-12) & (ev < 1 / th + th)))


# -- perturbations -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(8))
def test_perturbation_slope(seed):
    rng = np.random.default_rng(seed)
    L, _ = random_hyperbolic(rng, 5, gap=0.5, k=2)
    K = rng.normal(size=(5, 2)) @ rng.normal(size=(2, 5))
    K /= np.linalg.norm(K, 2)
    assert perturbation_slope(L, K) == pytest.approx(1.0, abs=0.1)


@pytest.mark.parametrize("seed", range(20))
def test_finite_rank_perturbation_relative_dimension(seed):
    rng = np.random.default_rng(seed)
    L, _ = random_hyperbolic(rng, 6)
    K = 3 * rng.normal(size=(6, 2)) @ rng.normal(size=(2, 6))
    try:
        Vk = split(L + K).V_plus
    except NotHyperbolic:
        return
    d = relative_dimension(Vk, split(L).V_plus)
    assert d == Vk.dim - split(L).V_plus.dim


def test_flow_norm():
    assert flow_norm(np.diag([-1.0, -2.0]), 1.0) == pytest.approx(np.exp(-1))
