"""Hyperbolic linear operators: spectral splitting, adapted inner products
and the symmetric rotation carrying one subspace onto a nearby one."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm, schur

from .errors import LambdaTooLarge, NotHyperbolic, TooFar
from .grassmann import Subspace, subspace_distance

TAU_HYP = 1e-9


@dataclass(frozen=True, eq=False)
class HyperbolicOperator:
    """Operator together with its invariant splitting ``V_plus + V_minus``.

    ``V_plus`` is the span of the generalized eigenvectors with positive real
    part.  ``gap`` is the smallest ``|Re sigma|``.
    """

    matrix: np.ndarray
    V_plus: Subspace
    V_minus: Subspace
    gap: float

    @property
    def lam(self) -> float:
        """Default coercivity constant, ``0.9 * gap``."""
        return 0.9 * self.gap

    @property
    def morse_index(self) -> int:
        return self.V_plus.dim


def split(L, tol: float = TAU_HYP) -> HyperbolicOperator:
    """Spectral splitting of ``L`` through an ordered real Schur form."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n == 0:
        return HyperbolicOperator(L, Subspace.zero(0), Subspace.zero(0), np.inf)
    ev = np.linalg.eigvals(L)
    re = np.abs(ev.real)
    if np.min(re) < tol:
        raise NotHyperbolic(f"eigenvalue with |Re| = {np.min(re):.3e} <= {tol:g}")
    _, Qp, kp = schur(L, output="real", sort="rhp")
    _, Qm, km = schur(L, output="real", sort="lhp")
    Vp = Subspace.span(Qp[:, :kp]) if kp else Subspace.zero(n)
    Vm = Subspace.span(Qm[:, :km]) if km else Subspace.zero(n)
    return HyperbolicOperator(L, Vp, Vm, float(np.min(re)))


def _restrict(L: np.ndarray, V: Subspace) -> np.ndarray:
    return V.basis.T @ L @ V.basis


def _decay_gram(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """``int_0^k exp(tM)^T exp(tM) dt`` with ``k`` the first integer such that
    ``||exp(kM)|| <= 1``.  Composite Simpson, refined until converged."""
    d = M.shape[0]
    if d == 0:
        return np.zeros((0, 0))
    E1 = expm(M)
    k, P = 1, E1.copy()
    while np.linalg.norm(P, 2) > 1.0:
        k += 1
        P = P @ E1
        if k > 10000:
            raise LambdaTooLarge("flow does not contract; spectrum not in the half plane")
    panels = 64 * k
    prev = None
    while True:
        h = k / panels
        step = expm(h * M)
        E = np.eye(d)
        G = np.zeros((d, d))
        for i in range(panels + 1):
            w = 1.0 if i in (0, panels) else (4.0 if i % 2 else 2.0)
            G += w * (E.T @ E)
            E = step @ E
        G *= h / 3.0
        if prev is not None and np.max(np.abs(G - prev)) < tol * max(1.0, np.max(np.abs(G))):
            return G
        prev = G
        panels *= 2
        if panels > 64 * k * 64:
            return G


@dataclass(frozen=True, eq=False)
class AdaptedProduct:
    """Inner product ``<x, y> = x^T G y`` adapted to a hyperbolic operator.

    ``frame`` maps chart coordinates ``(u, s)`` to R^n so that the adapted
    product becomes the Euclidean one and the first ``n_unstable`` coordinates
    span ``V_plus``.
    """

    G: np.ndarray
    lam: float
    frame: np.ndarray
    n_unstable: int

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sqrt(x @ self.G @ x))


def adapted_product(L, lam: Optional[float] = None) -> AdaptedProduct:
    """Inner product for which ``<L x, x> >= lam |x|^2`` on ``V_plus``,
    ``<L x, x> <= -lam |x|^2`` on ``V_minus`` and ``V_plus`` is orthogonal to
    ``V_minus``."""
    op = L if isinstance(L, HyperbolicOperator) else split(L)
    if lam is None:
        lam = op.lam
    if lam >= op.gap:
        raise LambdaTooLarge(f"lambda = {lam:g} >= spectral gap {op.gap:g}")
    A = op.matrix
    Bp, Bm = op.V_plus.basis, op.V_minus.basis
    kp, km = Bp.shape[1], Bm.shape[1]
    Gp = _decay_gram(-_restrict(A, op.V_plus) + lam * np.eye(kp))
    Gm = _decay_gram(_restrict(A, op.V_minus) + lam * np.eye(km))
    T = np.hstack([Bp, Bm])
    Gz = np.zeros((kp + km, kp + km))
    Gz[:kp, :kp] = Gp
    Gz[kp:, kp:] = Gm
    Tinv = np.linalg.inv(T)
    G = Tinv.T @ Gz @ Tinv
    G = 0.5 * (G + G.T)
    # chart frame: columns orthonormal for G
    Rp = np.linalg.cholesky(Gp).T if kp else np.zeros((0, 0))
    Rm = np.linalg.cholesky(Gm).T if km else np.zeros((0, 0))
    frame = np.hstack([Bp @ np.linalg.inv(Rp) if kp else Bp,
                       Bm @ np.linalg.inv(Rm) if km else Bm])
    return AdaptedProduct(G, float(lam), frame, kp)


def coercivity(L, G, x) -> float:
    """Ratio ``<L x, x>_G / <x, x>_G``."""
    x = np.asarray(x, dtype=float)
    return float((x @ G @ (L @ x)) / (x @ G @ x))


@dataclass(frozen=True, eq=False)
class Rotation:
    """Symmetric ``A`` with ``exp(A) V = W``, plus the data used to build it."""

    A: np.ndarray
    S: np.ndarray
    theta: float
    graph_norm: float


def hyperbolic_rotation(V: Subspace, W: Subspace) -> Rotation:
    """Symmetric generator carrying ``V`` onto the nearby subspace ``W``.

    ``W`` is written as the graph of ``L: V -> V^perp``; in the splitting
    ``V + V^perp`` we take ``S = [[t, t L^T], [t L, 1/t]]`` with
    ``t = 1 / (2 (1 + ||L||))`` and return ``A = log S``.
    """
    dist = subspace_distance(V, W)
    if V.dim != W.dim or dist >= 1.0 - 1e-12:
        raise TooFar(f"subspace distance {dist:.3g} is not below 1")
    n, k = V.ambient_dim, V.dim
    Bv, Bc = V.basis, V.complement().basis
    C = Bv.T @ W.basis
    D = Bc.T @ W.basis
    Lg = D @ np.linalg.inv(C) if k else np.zeros((n - k, 0))
    nrm = float(np.linalg.norm(Lg, 2)) if Lg.size else 0.0
    theta = 1.0 / (2.0 * (1.0 + nrm))
    S = np.zeros((n, n))
    S[:k, :k] = theta * np.eye(k)
    S[k:, k:] = np.eye(n - k) / theta
    S[k:, :k] = theta * Lg
    S[:k, k:] = theta * Lg.T
    Q = np.hstack([Bv, Bc])
    w, U = np.linalg.eigh(S)
    A = Q @ (U * np.log(w)) @ U.T @ Q.T
    return Rotation(0.5 * (A + A.T), Q @ S @ Q.T, theta, nrm)


def perturbation_slope(L, K, eps=(1e-3, 1e-4, 1e-5)) -> float:
    """Log-log slope of ``eps -> dist(V_plus(L + eps K), V_plus(L))``."""
    base = split(L).V_plus
    d = [subspace_distance(split(np.asarray(L) + e * np.asarray(K)).V_plus, base) for e in eps]
    return float(np.polyfit(np.log(eps), np.log(d), 1)[0])


def flow_norm(L, t: float) -> float:
    return float(np.linalg.norm(expm(t * np.asarray(L, dtype=float)), 2))
