import numpy as np
import pytest
from scipy.linalg import expm

from morsecx.grassmann import Subspace, projector, subspace_distance
from morsecx.hyperbolic import split
from morsecx.ode_operator import (ConstantSegment, OperatorPath, PolynomialSegment, construct_costra,
                                  costra_chain, fundamental_solution, projector_drift, propagate,
                                  random_path, riccati_flow, section4_intersection_dims,
                                  stable_angle_profile, stable_unstable)


def constant_path(L):
    L = np.asarray(L, dtype=float)
    return OperatorPath(L, L, 0.0, 1.0, [ConstantSegment(0.0, 1.0, L)])


def model_operator(n_half):
    return np.diag(np.r_[-np.ones(n_half), np.ones(n_half)])


# -- fundamental solution ------------------------------------------------------------

def test_constant_path_matches_expm():
    L = np.array([[0.3, 1.0], [-0.5, -0.2]])
    X = fundamental_solution(constant_path(L), 1.0)
    assert np.linalg.norm(X - expm(L)) < 1e-9


def test_polynomial_segment_matches_expm():
    # a "polynomial" segment with a single constant coefficient is integrated
    # by the Runge-Kutta path, not the exponential shortcut
    L = np.array([[0.3, 1.0], [-0.5, -0.2]])
    path = OperatorPath(L, L, 0.0, 1.0, [PolynomialSegment(0.0, 1.0, [L])])
    assert np.linalg.norm(fundamental_solution(path, 1.0) - expm(L)) < 1e-9


@pytest.mark.parametrize("t", [-2.5, -1.0, 1.5, 3.0])
def test_costra_tails_are_model_operator(t):
    path = construct_costra(3, 2)
    A = model_operator(3)
    if t < 0:
        assert np.linalg.norm(path(t) - A) == 0
        X = fundamental_solution(path, t, path.t0)
        assert np.linalg.norm(X - expm((t - path.t0) * A)) < 1e-9
    else:
        assert np.linalg.norm(path(t) - path.A_plus) == 0
        # reflection through the end of the chain: V_minus has dimension n_half + k
        assert np.allclose(np.linalg.eigvalsh(path.A_plus), np.r_[-np.ones(5), np.ones(1)])
        X = fundamental_solution(path, t, path.t1)
        assert np.linalg.norm(X - expm((t - path.t1) * path.A_plus)) < 1e-9


def test_cocycle_seed3():
    rng = np.random.default_rng(3)
    path = random_path(rng, 4, 2, 1)
    for _ in range(5):
        s, t = rng.uniform(-2, 2, size=2)
        lhs = fundamental_solution(path, t + s, 0.0)
        rhs = fundamental_solution(path, t + s, s) @ fundamental_solution(path, s, 0.0)
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs) < 1e-7


def test_inverse_by_backward_propagation():
    path = random_path(np.random.default_rng(4), 3, 1, 2)
    X = fundamental_solution(path, 1.7)
    Y = fundamental_solution(path, 0.0, 1.7)
    assert np.linalg.norm(X @ Y - np.eye(3)) < 1e-8


# -- stable and unstable spaces ------------------------------------------------------

def test_stable_unstable_diagonal():
    su = stable_unstable(constant_path(np.diag([1.0, -1.0])))
    assert subspace_distance(su.Ws, Subspace.coordinate(2, [1])) < 1e-10
    assert subspace_distance(su.Wu, Subspace.coordinate(2, [0])) < 1e-10
    assert su.fredholm_index == 0


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_costra_index(k):
    su = stable_unstable(construct_costra(3, k))
    pd = su.pair
    assert su.fredholm_index == k == pd.index
    assert pd.intersection.dim == k and pd.cosum.dim == 0
    assert (su.Ws + su.Wu).dim == 6
    assert su.residual < 1e-6


def test_costra_chain_steps_below_one():
    chain = costra_chain(4, 3)
    assert all(subspace_distance(a, b) < 1 for a, b in zip(chain, chain[1:]))
    assert chain[0].dim == chain[-1].dim == 7


@pytest.mark.parametrize("seed", range(4))
def test_reversal_duality(seed):
    path = random_path(np.random.default_rng(seed), 4, 1, 3)
    a, b = stable_unstable(path), stable_unstable(path.reversed())
    assert subspace_distance(b.Wu, a.Ws) < 1e-6
    assert subspace_distance(b.Ws, a.Wu) < 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_adjoint_duality(seed):
    path = random_path(np.random.default_rng(10 + seed), 4, 2, 2)
    a, b = stable_unstable(path), stable_unstable(path.transposed_negative())
    assert subspace_distance(b.Ws, a.Ws.complement()) < 1e-6
    assert b.fredholm_index == -a.fredholm_index


def test_invariant_projector_keeps_stable_space():
    # A(t) leaves V = span(e3, e4) invariant and V_minus(A_plus) = V
    n = 4
    rng = np.random.default_rng(8)
    base = np.diag([1.0, 1.5, -1.0, -2.0])
    low = np.zeros((n, n))
    low[2:, :2] = rng.normal(size=(2, 2))
    Am = base
    Ap = base + low
    R = rng.normal(size=(n, n))
    R[:2, 2:] = 0.0
    path = OperatorPath(Am, Ap, 0.0, 1.0, [PolynomialSegment(0.0, 1.0, [Am, R, Ap - Am - R])])
    V = Subspace.coordinate(n, [2, 3])
    P = projector(V)
    for t in np.linspace(0, 1, 5):
        assert np.linalg.norm((path(t) @ P - P @ path(t)) @ P) < 1e-12
    assert subspace_distance(split(Ap).V_minus, V) < 1e-12
    su = stable_unstable(path)
    for t in (0.0, 0.5, 1.0, 3.0):
        Y = propagate(path, su.Ws.basis, 0.0, t, orthonormalize=True)
        assert subspace_distance(Subspace.span(Y), V) < 1e-6


def _random_paths(count=20, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 6))
        km, kp = (int(rng.integers(1, n)) for _ in range(2))
        out.append(random_path(rng, n, km, kp))
    return out


def test_stable_space_convergence_random_paths():
    for path in _random_paths():
        su = stable_unstable(path)
        assert su.residual < 1e-4
        T = su.T_used
        ts = np.linspace(path.t1 + 1, T, 10)
        prof = stable_angle_profile(path, ts, 2 * T)
        slope = np.polyfit(ts, np.log(prof), 1)[0]
        assert slope <= -0.5 * path.gap
        assert su.fredholm_index == su.pair.index


@pytest.mark.parametrize("idx", range(0, 20, 4))
def test_supplement_growth(idx):
    path = _random_paths()[idx]
    su = stable_unstable(path)
    B = su.Ws.complement().basis
    T = su.T_used / 2
    ts = np.linspace(T / 2, T, 6)
    smin = [np.linalg.svd(propagate(path, B, 0.0, t), compute_uv=False)[-1] for t in ts]
    slope = np.polyfit(ts, np.log(smin), 1)[0]
    assert slope >= 0.5 * split(path.A_plus).gap


# -- Riccati flow --------------------------------------------------------------------

def test_riccati_zero_operator():
    V0 = Subspace.span(np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]]))
    P = riccati_flow(constant_path(np.zeros((3, 3))), V0, 3.0)
    assert np.linalg.norm(P - projector(V0)) < 1e-12


def test_riccati_diagonal_limit():
    V0 = Subspace.span(np.array([1.0, 1.0]))
    P = riccati_flow(constant_path(np.diag([1.0, -1.0])), V0, 10.0)
    # oracle: X(t) V0 = span(e^t e1 + e^-t e2)
    v = np.array([np.exp(10.0), np.exp(-10.0)])
    exact = np.outer(v, v) / (v @ v)
    assert np.linalg.norm(P - exact) < 1e-8
    assert subspace_distance(Subspace.span(P[:, [0]]), Subspace.coordinate(2, [0])) < 1e-3


def test_riccati_consistency_seed5():
    rng = np.random.default_rng(5)
    path = random_path(rng, 4, 2, 2)
    V0 = Subspace.span(rng.normal(size=(4, 2)))
    P = riccati_flow(path, V0, 1.0)
    exact = projector(Subspace.span(fundamental_solution(path, 1.0) @ V0.basis))
    assert np.linalg.norm(P - exact) < 1e-6


def test_riccati_random_instances():
    rng = np.random.default_rng(77)
    ts = np.linspace(0, 10, 11)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        path = random_path(rng, n, int(rng.integers(1, n)), int(rng.integers(1, n)))
        V0 = Subspace.span(rng.normal(size=(n, int(rng.integers(1, n)))))
        Ps, drift = riccati_flow(path, V0, ts, return_drift=True)
        assert drift < 1e-8
        B, tp = V0.basis, 0.0
        for t, P in zip(ts, Ps):
            B = propagate(path, B, tp, t, orthonormalize=True)
            tp = t
            assert np.linalg.norm(P - projector(Subspace.span(B)), 2) < 1e-6
            assert max(projector_drift(P)) < 1e-8


def test_riccati_long_horizon_drift():
    rng = np.random.default_rng(31)
    path = random_path(rng, 4, 1, 3)
    V0 = Subspace.span(rng.normal(size=(4, 2)))
    _, drift = riccati_flow(path, V0, [5.0, 10.0, 20.0], return_drift=True)
    assert drift < 1e-8
    _, drift = riccati_flow(path, V0, -20.0, return_drift=True)
    assert drift < 1e-8


# -- product example -----------------------------------------------------------------

@pytest.mark.parametrize("n_half, k, dims", [(3, 1, (1, 2)), (3, 0, (1, 1)), (4, 2, (1, 3)), (3, 2, (1, 3))])
def test_section4_dims(n_half, k, dims):
    assert section4_intersection_dims(n_half, k) == dims
