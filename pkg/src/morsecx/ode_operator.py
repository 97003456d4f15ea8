"""Linear non-autonomous systems ``x' = A(t) x`` with hyperbolic limits.

A path is constant (or exponentially relaxing) outside ``[t0, t1]``.  The
module computes fundamental solutions, the stable space ``W_s`` at time 0
(initial data whose solution decays as ``t -> +inf``), the unstable space
``W_u`` (decay as ``t -> -inf``), the index of the pair, and the flow of
orthogonal projectors onto evolving subspaces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from .errors import NoConvergence
from .grassmann import Subspace, geodesic, pair_data, projector, subspace_distance
from .hyperbolic import hyperbolic_rotation, split
from .integrate import dopri5, linear_tail

RTOL = ATOL = 1e-10


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


class Segment:
    """Piece of a path on ``[a, b]``."""

    a: float
    b: float

    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def pieces(self) -> List[Tuple[float, float, Optional[np.ndarray]]]:
        """Sub-intervals, each with its constant matrix or ``None`` if smooth."""
        return [(self.a, self.b, None)]


class ConstantSegment(Segment):
    def __init__(self, a: float, b: float, M):
        self.a, self.b, self.M = float(a), float(b), np.asarray(M, dtype=float)

    def __call__(self, t):
        return self.M

    def pieces(self):
        return [(self.a, self.b, self.M)]


class PolynomialSegment(Segment):
    """``A(t) = sum_i C_i s^i`` with ``s = (t - a) / (b - a)``."""

    def __init__(self, a: float, b: float, coeffs: Sequence):
        self.a, self.b = float(a), float(b)
        self.coeffs = [np.asarray(C, dtype=float) for C in coeffs]

    def __call__(self, t):
        s = (t - self.a) / (self.b - self.a)
        out = np.zeros_like(self.coeffs[0])
        for C in reversed(self.coeffs):
            out = out * s + C
        return out


class MollifiedSteps(Segment):
    """Step function ``M_j`` on ``[tau_{j-1}, tau_j)`` smoothed by a C-infinity
    bump of the given width centred on every jump."""

    def __init__(self, taus: Sequence[float], mats: Sequence, width: float):
        self.taus = [float(t) for t in taus]
        self.mats = [np.asarray(M, dtype=float) for M in mats]
        if len(self.mats) != len(self.taus) + 1:
            raise ValueError("need one more matrix than jump points")
        self.width = float(width)
        self.a = self.taus[0] - width / 2
        self.b = self.taus[-1] + width / 2

    def __call__(self, t):
        out = self.mats[0].copy()
        w = self.width
        for tau, lo, hi in zip(self.taus, self.mats[:-1], self.mats[1:]):
            out += (hi - lo) * float(smooth_step((t - tau + w / 2) / w))
        return out

    def pieces(self):
        w = self.width
        out = []
        for j, tau in enumerate(self.taus):
            out.append((tau - w / 2, tau + w / 2, None))
            if j + 1 < len(self.taus):
                out.append((tau + w / 2, self.taus[j + 1] - w / 2, self.mats[j + 1]))
        return [p for p in out if p[1] > p[0]]


@dataclass(eq=False)
class OperatorPath:
    """Path ``t -> A(t)`` of n x n matrices.

    ``A(t) = A_minus + exp(rate (t - t0)) K`` for ``t <= t0`` when
    ``tail_minus = (K, rate)`` is given, and ``A_minus`` otherwise;
    symmetrically for ``t >= t1``.  Inside ``[t0, t1]`` the segments apply.
    """

    A_minus: np.ndarray
    A_plus: np.ndarray
    t0: float
    t1: float
    segments: List[Segment] = field(default_factory=list)
    tail_minus: Optional[Tuple[np.ndarray, float]] = None
    tail_plus: Optional[Tuple[np.ndarray, float]] = None

    @property
    def n(self) -> int:
        return self.A_plus.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        if t <= self.t0:
            if self.tail_minus is None:
                return self.A_minus
            K, mu = self.tail_minus
            return self.A_minus + np.exp(mu * (t - self.t0)) * K
        if t >= self.t1:
            if self.tail_plus is None:
                return self.A_plus
            K, mu = self.tail_plus
            return self.A_plus + np.exp(-mu * (t - self.t1)) * K
        for seg in self.segments:
            if seg.a <= t <= seg.b:
                return seg(t)
        raise ValueError(f"no segment covers t = {t}")

    @property
    def gap(self) -> float:
        return min(split(self.A_minus).gap, split(self.A_plus).gap)

    def pieces(self, a: float, b: float):
        """Sub-intervals of ``[a, b]`` (a < b) with constant matrix or None."""
        cuts = [(-np.inf, self.t0, self.A_minus if self.tail_minus is None else None)]
        for seg in sorted(self.segments, key=lambda s: s.a):
            cuts.extend(seg.pieces())
        cuts.append((self.t1, np.inf, self.A_plus if self.tail_plus is None else None))
        out = []
        for lo, hi, M in cuts:
            lo2, hi2 = max(lo, a), min(hi, b)
            if hi2 > lo2:
                out.append((lo2, hi2, M))
        return out

    def tail(self, a: float, b: float):
        """``(A, K, rate, tref)`` with ``A(t) = A + exp(rate (t - tref)) K`` on
        ``[a, b]`` if that interval lies in an exponential tail, else None."""
        if b <= self.t0 and self.tail_minus is not None:
            K, mu = self.tail_minus
            return self.A_minus, K, mu, self.t0
        if a >= self.t1 and self.tail_plus is not None:
            K, mu = self.tail_plus
            return self.A_plus, K, -mu, self.t1
        return None

    def reversed(self) -> "OperatorPath":
        """The path ``t -> -A(-t)``."""
        segs = [_ReversedSegment(s) for s in self.segments]
        flip = (lambda tl: None if tl is None else (-tl[0], tl[1]))
        return OperatorPath(-self.A_plus, -self.A_minus, -self.t1, -self.t0, segs,
                            flip(self.tail_plus), flip(self.tail_minus))

    def transposed_negative(self) -> "OperatorPath":
        """The path ``t -> -A(t)^T``."""
        segs = [_MappedSegment(s, lambda M: -M.T) for s in self.segments]
        flip = (lambda tl: None if tl is None else (-tl[0].T, tl[1]))
        return OperatorPath(-self.A_minus.T, -self.A_plus.T, self.t0, self.t1, segs,
                            flip(self.tail_minus), flip(self.tail_plus))


class _ReversedSegment(Segment):
    def __init__(self, seg: Segment):
        self.seg, self.a, self.b = seg, -seg.b, -seg.a

    def __call__(self, t):
        return -self.seg(-t)

    def pieces(self):
        return [(-hi, -lo, None if M is None else -M) for lo, hi, M in reversed(self.seg.pieces())]


class _MappedSegment(Segment):
    def __init__(self, seg: Segment, fn):
        self.seg, self.fn, self.a, self.b = seg, fn, seg.a, seg.b

    def __call__(self, t):
        return self.fn(self.seg(t))

    def pieces(self):
        return [(lo, hi, None if M is None else self.fn(M)) for lo, hi, M in self.seg.pieces()]


# -- propagation ---------------------------------------------------------------

def _qr_pos(Y: np.ndarray) -> np.ndarray:
    """Orthonormal factor of ``Y`` with positive diagonal in ``R``, so that
    orientation of the column frame is preserved."""
    Q, R = np.linalg.qr(Y)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def _chunks(lo, hi, max_len):
    n = max(1, int(np.ceil((hi - lo) / max_len)))
    edges = np.linspace(lo, hi, n + 1)
    return list(zip(edges[:-1], edges[1:]))


def propagate(path: OperatorPath, Y, s: float, t: float, orthonormalize: bool = False,
              chunk: float = 1.0, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Carry the columns of ``Y`` from time ``s`` to time ``t`` along
    ``x' = A(t) x``.  With ``orthonormalize`` the frame is re-orthonormalized
    (orientation-preserving QR) after every chunk, which keeps the column span
    accurate over long horizons."""
    Y = np.array(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if s == t or Y.shape[1] == 0:
        return _qr_pos(Y) if orthonormalize and Y.shape[1] else Y
    fwd = t > s
    pieces = path.pieces(min(s, t), max(s, t))
    if not fwd:
        pieces = pieces[::-1]
    stats = {}
    for lo, hi, M in pieces:
        spans = _chunks(lo, hi, chunk)
        if not fwd:
            spans = [(c1, c0) for c0, c1 in reversed(spans)]
        for c0, c1 in spans:
            tail = None if M is not None else path.tail(min(c0, c1), max(c0, c1))
            if M is not None:
                Y = expm((c1 - c0) * M) @ Y
            elif tail is not None:
                Y, stats["h"] = linear_tail(*tail, Y, c0, c1, rtol, atol, stats.get("h"))
            else:
                Y = dopri5(lambda tt, Z: path(tt) @ Z, c0, Y, c1, rtol, atol,
                           h0=stats.get("h"), stats=stats)
            if orthonormalize:
                Y = _qr_pos(Y)
    return Y


def fundamental_solution(path: OperatorPath, t: float, s: float = 0.0) -> np.ndarray:
    """``X(t, s)``: the solution operator from time ``s`` to time ``t``."""
    return propagate(path, np.eye(path.n), s, t)


@dataclass(frozen=True, eq=False)
class StableUnstable:
    """Stable and unstable spaces at time 0 and the index of the pair."""

    Ws: Subspace
    Wu: Subspace
    fredholm_index: int
    T_used: float
    residual: float

    @property
    def pair(self):
        return pair_data(self.Ws, self.Wu)


def _from_horizon(path, B, T, direction):
    """Propagate ``B`` from ``direction * 2T`` to ``direction * T`` and on to 0."""
    Z = propagate(path, B, direction * 2 * T, direction * T, orthonormalize=True)
    Z0 = propagate(path, Z, direction * T, 0.0, orthonormalize=True)
    return Subspace.span(Z), Subspace.span(Z0)


def stable_unstable(path: OperatorPath, T: Optional[float] = None, tol: float = 1e-8,
                    max_doublings: int = 6) -> StableUnstable:
    """Approximate ``W_s`` and ``W_u`` at time 0 by transport from a horizon.

    ``W_s`` is obtained by carrying ``V_minus(A_plus)`` back from time ``2T``
    and ``W_u`` by carrying ``V_plus(A_minus)`` forward from ``-2T``.  The
    horizon starts at ``max(|t0|, |t1|) + 10 / gap`` and doubles until the
    residual (angle between the transported space at ``+-T`` and the
    asymptotic space) and the change between successive horizons are below
    ``tol``.
    """
    sp, sm = split(path.A_plus), split(path.A_minus)
    gap = min(sp.gap, sm.gap)
    if T is None:
        T = max(abs(path.t0), abs(path.t1)) + 10.0 / gap
    prev = None
    for _ in range(max_doublings + 1):
        ZsT, Ws = _from_horizon(path, sp.V_minus.basis, T, 1.0)
        ZuT, Wu = _from_horizon(path, sm.V_plus.basis, T, -1.0)
        residual = max(subspace_distance(ZsT, sp.V_minus), subspace_distance(ZuT, sm.V_plus))
        change = np.inf if prev is None else max(subspace_distance(Ws, prev[0]),
                                                 subspace_distance(Wu, prev[1]))
        if residual < tol and (change < tol or prev is None and residual < 1e-3 * tol):
            return StableUnstable(Ws, Wu, pair_data(Ws, Wu).index, float(T), float(residual))
        prev = (Ws, Wu)
        T *= 2.0
    raise NoConvergence(f"stable/unstable spaces did not settle (residual {residual:.2e})")


def stable_angle_profile(path: OperatorPath, times: Sequence[float], horizon: float) -> np.ndarray:
    """Distance between the stable space at time ``t`` and ``V_minus(A_plus)``.

    The stable space at time ``t`` is computed by backward transport from
    ``horizon``, which is numerically stable."""
    target = split(path.A_plus).V_minus
    B = target.basis
    out = []
    t_prev = horizon
    for t in sorted(times, reverse=True):
        B = propagate(path, B, t_prev, t, orthonormalize=True)
        t_prev = t
        out.append(subspace_distance(Subspace.span(B), target))
    order = np.argsort(np.argsort(-np.asarray(times)))
    return np.asarray(out)[order]


# -- projector flow ---------------------------------------------------------------

def _riccati_rhs(path):
    def rhs(t, P):
        A = path(t)
        Q = np.eye(P.shape[0]) - P
        return Q @ A @ P + P @ A.T @ Q
    return rhs


def _nearest_projector(P: np.ndarray, rank: int) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (P + P.T))
    U = U[:, np.argsort(w)[::-1][:rank]]
    return U @ U.T


def riccati_flow(path: OperatorPath, V0: Subspace, t, s: float = 0.0,
                 rtol: float = RTOL, atol: float = ATOL, reproject: float = 0.1,
                 return_drift: bool = False):
    """Orthogonal projector onto ``X(t, s) V0`` by integrating
    ``P' = (I - P) A P + P A^T (I - P)``.

    The set of rank-k projectors is invariant but repelling for this
    equation, so the solution is pulled back onto it (nearest projector of
    the same rank) every ``reproject`` time units.  With ``return_drift`` the
    largest ``||P^2 - P||`` seen just before a pull-back is returned too.

    ``t`` may be a scalar or a monotone sequence of times on one side of
    ``s``; a list of projectors is returned in that case.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    P = projector(V0)
    rank = V0.dim
    rhs = _riccati_rhs(path)
    out = []
    cur = float(s)
    drift = 0.0
    for target in times:
        lo, hi = min(cur, target), max(cur, target)
        pieces = path.pieces(lo, hi) if hi > lo else []
        if target < cur:
            pieces = pieces[::-1]
        for a, b, _ in pieces:
            spans = _chunks(a, b, reproject)
            if target < cur:
                spans = [(c1, c0) for c0, c1 in reversed(spans)]
            for c0, c1 in spans:
                P = dopri5(rhs, c0, P, c1, rtol, atol)
                drift = max(drift, projector_drift(P)[0])
                P = _nearest_projector(P, rank)
        cur = float(target)
        out.append(P.copy())
    res = out[0] if np.ndim(t) == 0 else out
    return (res, drift) if return_drift else res


def projector_drift(P: np.ndarray) -> Tuple[float, float]:
    """``(||P^2 - P||, ||P - P^T||)`` in the spectral norm."""
    return float(np.linalg.norm(P @ P - P, 2)), float(np.linalg.norm(P - P.T, 2))


# -- finite shadows of the index constructions -----------------------------------

def costra_chain(n_half: int, k: int, m: int = 4):
    """Subspaces ``V_0, ..., V_m`` from ``H_minus + W`` to its shift by ``k``.

    ``H_minus = span(e_0..e_{n_half-1})``, ``W = span(e_{n_half}..e_{n_half+k-1})``
    and the target is the image of ``V_0`` under the cyclic shift by ``-k``.
    Consecutive members lie at distance below 1.
    """
    n = 2 * n_half
    if not 0 <= k <= n_half:
        raise ValueError("need 0 <= k <= n_half")
    V0 = Subspace.coordinate(n, range(n_half + k))
    shift = np.roll(np.eye(n), -k, axis=0)
    Vm = Subspace.span(shift @ V0.basis)
    return [geodesic(V0, Vm, j / m) for j in range(m + 1)]


def construct_costra(n_half: int, k: int, m: int = 4) -> OperatorPath:
    """Smooth path from ``P_plus - P_minus`` whose pair ``(W_s, W_u)`` has index ``k``.

    The chain from :func:`costra_chain` is traversed with the symmetric
    generators ``A_j`` of :func:`hyperbolic_rotation` (so that
    ``exp(A_j / m) V_{j-1} = V_j``), laid out as a step function on
    ``[w/2, 1 - w/2]`` with ``w = 1 / (4m)`` and smoothed with a bump of
    width ``w``.  Beyond ``t = 1`` the path is the hyperbolic operator with
    stable space ``V_m``.
    """
    n = 2 * n_half
    A_minus = np.diag(np.r_[-np.ones(n_half), np.ones(n_half)])
    chain = costra_chain(n_half, k, m)
    Vm = chain[-1]
    A_plus = np.eye(n) - 2.0 * projector(Vm)
    if k == 0:
        return OperatorPath(A_minus, A_plus, 0.0, 1.0, [ConstantSegment(0.0, 1.0, A_minus)])
    w = 1.0 / (4 * m)
    ell = (1.0 - w) / m
    taus = [w / 2 + j * ell for j in range(m + 1)]
    mats = [A_minus]
    for j in range(1, m + 1):
        rot = hyperbolic_rotation(chain[j - 1], chain[j])
        mats.append(rot.A / (m * ell))
    mats.append(A_plus)
    return OperatorPath(A_minus, A_plus, 0.0, 1.0, [MollifiedSteps(taus, mats, w)])


def section4_intersection_dims(n_half: int, k: int) -> Tuple[int, int]:
    """Dimensions of the two intersection components in the product
    example: the trivial one is 1-dimensional, the other is
    ``dim(W_s & W_u) + 1`` (one extra dimension from the circle factor)."""
    su = stable_unstable(construct_costra(n_half, k))
    return 1, su.pair.intersection.dim + 1


def random_path(rng: np.random.Generator, n: int, n_unstable_minus: int, n_unstable_plus: int,
                tail_rate: Optional[float] = None, tail_scale: float = 0.5) -> OperatorPath:
    """Random path between two hyperbolic matrices with real spectra in
    ``+-[1, 2]``, a quadratic bump on ``[0, 1]`` and optional exponentially
    decaying tails."""
    def hyp(k):
        d = np.r_[rng.uniform(1, 2, k), -rng.uniform(1, 2, n - k)]
        Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
        S = np.eye(n) + 0.3 * rng.normal(size=(n, n)) / np.sqrt(n)
        return Q @ S @ np.diag(d) @ np.linalg.inv(S) @ Q.T

    Am, Ap = hyp(n_unstable_minus), hyp(n_unstable_plus)
    gap = min(split(Am).gap, split(Ap).gap)
    mu = gap if tail_rate is None else tail_rate
    Km = tail_scale * rng.normal(size=(n, n)) / np.sqrt(n)
    Kp = tail_scale * rng.normal(size=(n, n)) / np.sqrt(n)
    R = rng.normal(size=(n, n))
    start, end = Am + Km, Ap + Kp
    seg = PolynomialSegment(0.0, 1.0, [start, end - start + R, -R])
    return OperatorPath(Am, Ap, 0.0, 1.0, [seg], (Km, mu), (Kp, mu))
