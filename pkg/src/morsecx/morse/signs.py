"""Orientation signs of connecting orbits.

For an orbit ``W`` from ``x`` to ``y`` with ``m(x) = m(y) + 1`` pick a point
``p`` on it.  Tangent frames are carried along the orbit by the variational
equation, re-orthonormalised with orientation-preserving QR after every
chunk:

* ``S = T_p W^s(y)``: the oriented stable space of ``y`` transported
  backward from the end of the orbit (backward flow makes it dominant);
* ``U = T_p W^u(x)``: the unstable space of ``x`` transported forward;
* ``Y``: the orthogonal complement of ``F(p)`` in ``S``, oriented by
  transporting it backward to the start and comparing with the stable
  space of ``x``.

With ``omega`` the orientation of ``(S, V)`` and ``alpha`` that of
``(Y, V)``, the sign is the ``e`` for which ``e F(p)`` followed by
``alpha`` gives ``omega``.
"""
from __future__ import annotations

import numpy as np

from ..errors import NonTransverse
from ..grassmann import (Orientation, Subspace, _relative_sign, first_from_pair_orientation,
                         orient_product, orient_subspace, pair_data, pair_orientation_from_first,
                         principal_angles)
from ..integrate import variational_flow
from .orbits import ConnectingOrbit
from .problem import FlowProblem, RestPoint


def qr_positive(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span(M) with the orientation of M."""
    if M.shape[1] == 0:
        return M
    Q, R = np.linalg.qr(M)
    return Q * np.sign(np.diag(R))


def _complement_in(v: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``v`` in span(B)."""
    v = v / np.linalg.norm(v)
    R = B - np.outer(v, v @ B)
    U, _, _ = np.linalg.svd(R, full_matrices=False)
    return U[:, :B.shape[1] - 1]


def _chunk_matrices(problem: FlowProblem, p0: np.ndarray, T: float, chunk: float):
    """Points ``P[c]`` along the orbit and the one-chunk fundamental
    matrices ``M[c]`` (mapping tangent vectors at ``P[c]`` to ``P[c+1]``)."""
    tol = problem.tol
    nc = max(1, int(np.ceil(T / chunk)))
    dt = T / nc
    P = [np.asarray(p0, dtype=float)]
    M = []
    for _ in range(nc):
        y, Mc = variational_flow(problem.field, P[-1], dt, rtol=tol.rtol, atol=tol.atol)
        P.append(y)
        M.append(Mc)
    return np.array(P), M


def _spectral_sign(rows: np.ndarray, A: np.ndarray, B: np.ndarray) -> int:
    """Relative orientation of two complements of the same subspace,
    compared through the projection given by ``rows``."""
    if A.shape[1] == 0:
        return 1
    return _relative_sign(qr_positive((rows @ A)), rows @ B)


def orbit_sign(problem: FlowProblem, orbit: ConnectingOrbit, x: RestPoint, y: RestPoint,
               chunk: float = 0.5, n_coro: int = 5) -> int:
    """Sign ``+1`` or ``-1`` of a connecting orbit for the orientation seeds
    of ``x`` and ``y``; diagnostics are stored in ``orbit.diagnostics``.

    Raises NonTransverse if ``T_p W^u(x)`` and ``T_p W^s(y)`` meet at an
    angle below the problem's transversality tolerance (outside the flow
    direction).
    """
    n = problem.dim
    V = problem.comparison_V
    i0 = orbit.diagnostics.get("launch_index", 1)
    p0 = orbit.y[i0]
    t_rel = orbit.t[i0:-1] - orbit.t[i0]
    T = float(t_rel[-1])
    P, M = _chunk_matrices(problem, p0, T, chunk)
    nc = len(M)
    fv = problem.f.values(P)
    cp = int(np.clip(np.argmin(np.abs(fv - 0.5 * (x.value + y.value))), 1, nc - 1)) if nc > 1 else 0

    # stable frame of y, carried backward from the end of the orbit
    oHs_y = first_from_pair_orientation(y.orientation_seed)
    S = qr_positive(oHs_y.sign_basis)
    coro = []
    sample_at = set(np.linspace(cp, nc, n_coro).astype(int).tolist())
    for c in range(nc - 1, cp - 1, -1):
        S = qr_positive(np.linalg.solve(M[c], S))
        if c in sample_at:
            coro.append(pair_data(Subspace.span(S), V).index)
    # unstable frame of x, carried forward from the start
    U = qr_positive(x.H_u.basis)
    for c in range(cp):
        U = qr_positive(M[c] @ U)

    Fp = problem.F(P[cp])
    Fp = Fp / np.linalg.norm(Fp)
    Ssub = Subspace.span(S)
    oS = orient_subspace(Ssub, S)

    # transversality: U and S meet only along F(p)
    Uc = _complement_in(Fp, U)
    if Uc.shape[1]:
        ang = float(np.min(principal_angles(Subspace.span(Uc), Ssub)))
    else:
        ang = float(np.pi / 2)
    if ang < problem.tol.transversal:
        raise NonTransverse(f"orbit {x.label} -> {y.label}: tangent spaces meet at angle {ang:.2e}")
    meet = int(np.sum(principal_angles(Subspace.span(U), Ssub) < 1e-5))

    # Y: complement of F(p) in S, oriented against the stable space of x
    Y = _complement_in(Fp, S)
    Ysub = Subspace.span(Y) if Y.shape[1] else Subspace.zero(n)
    Yb = Ysub.basis
    for c in range(cp - 1, -1, -1):
        Yb = qr_positive(np.linalg.solve(M[c], Yb))
    oHs_x = first_from_pair_orientation(x.orientation_seed)
    rows = x.spectral_coordinates()[x.morse_index:]
    oY = Orientation(Ysub, oHs_x.sign * _spectral_sign(rows, x.H_s.basis, Yb))

    omega = pair_orientation_from_first(oS, V)
    alpha = pair_orientation_from_first(oY, V)
    tau = orient_subspace(Subspace.span(Fp[:, None]), Fp[:, None])
    prod = first_from_pair_orientation(orient_product(tau, alpha))
    sign = _relative_sign(oS.sign_basis, prod.sign_basis)
    orbit.sign = int(sign)
    orbit.diagnostics.update(
        transversality_angle=ang,
        tangent_intersection_dim=meet,
        expected_intersection_dim=x.morse_index - y.morse_index,
        stable_pair_indices=coro,
        expected_stable_pair_index=-y.relative_index,
        chunks=nc,
        sample_chunk=cp,
    )
    return orbit.sign
