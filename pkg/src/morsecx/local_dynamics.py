"""Local dynamics near a hyperbolic rest point: charts adapted to the
splitting, graph transforms and local invariant manifolds, exit behaviour
from the box ``Q(r) = {|u| <= r, |s| <= r}``."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import expm

from ._accel import USE_NUMBA, njit
from .errors import ContractionLost, NoConvergence
from .fields import VectorField
from .hyperbolic import AdaptedProduct, HyperbolicOperator, adapted_product, split
from .integrate import flow_map

MAX_UNSTABLE_DIM = 3


@dataclass(eq=False)
class RestPointChart:
    """Chart ``x = center + frame @ w`` with ``w = (u, s)``.

    In chart coordinates the adapted inner product is Euclidean and the
    first ``n_u`` coordinates span the unstable space.
    """

    center: np.ndarray
    linearization: HyperbolicOperator
    product: AdaptedProduct
    r: float
    field: VectorField
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        self.frame = self.product.frame
        self.frame_inv = np.linalg.inv(self.frame)
        self.n_u = self.product.n_unstable
        self.n_s = self.center.size - self.n_u
        L = self.frame_inv @ self.linearization.matrix @ self.frame
        self.L_u = L[:self.n_u, :self.n_u]
        self.L_s = L[self.n_u:, self.n_u:]

    def to_chart(self, X) -> np.ndarray:
        return (np.atleast_2d(X) - self.center) @ self.frame_inv.T

    def from_chart(self, W) -> np.ndarray:
        return self.center + np.atleast_2d(W) @ self.frame.T

    def F_local(self, w) -> np.ndarray:
        """Vector field in chart coordinates."""
        x = self.from_chart(w)[0]
        return self.frame_inv @ self.field.F(x)

    def flow(self, W, t: float) -> np.ndarray:
        """Time-``t`` flow of chart points (rows of ``W``)."""
        Y = flow_map(self.field, self.from_chart(W), t, rtol=self.rtol, atol=self.atol)
        return self.to_chart(Y)

    def box_norm(self, W) -> np.ndarray:
        W = np.atleast_2d(W)
        nu = np.linalg.norm(W[:, :self.n_u], axis=1)
        ns = np.linalg.norm(W[:, self.n_u:], axis=1)
        return np.maximum(nu, ns)

    def reversed(self) -> "RestPointChart":
        """Chart of the time-reversed field (roles of u and s swap)."""
        rev = self.field.reversed()
        op = split(-self.linearization.matrix)
        prod = adapted_product(op, self.product.lam)
        return RestPointChart(self.center, op, prod, self.r, rev, self.rtol, self.atol)


def make_chart(field: VectorField, center, r: Optional[float] = 0.5, lam: Optional[float] = None,
               select: bool = False, **kw) -> RestPointChart:
    """Chart at a hyperbolic rest point of ``field``.

    With ``select`` the radius ``r`` is halved until one unit-time graph
    transform contracts by a factor below 0.9 (see :func:`select_radius`).
    """
    center = np.asarray(center, dtype=float)
    op = split(field.J(center))
    prod = adapted_product(op, lam)
    chart = RestPointChart(center, op, prod, float(r), field, **kw)
    if select:
        chart.r = select_radius(chart)
    return chart


# -- graphs ----------------------------------------------------------------------

def _interp_numpy(lo, h, m, values, U):
    N, k = U.shape
    ns = values.shape[-1]
    x = (U - lo) / h
    idx = np.clip(np.floor(x).astype(np.int64), 0, m - 2)
    frac = np.clip(x - idx, 0.0, 1.0)
    out = np.zeros((N, ns))
    flat = values.reshape(-1, ns)
    strides = np.array([m ** (k - 1 - j) for j in range(k)], dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=k):
        c = np.array(corner)
        w = np.prod(np.where(c == 1, frac, 1.0 - frac), axis=1)
        out += w[:, None] * flat[(idx + c) @ strides]
    return out


@njit(cache=True)
def _interp_numba(lo, h, m, flat, U):
    N, k = U.shape
    ns = flat.shape[1]
    out = np.zeros((N, ns))
    idx = np.empty(k, dtype=np.int64)
    frac = np.empty(k)
    for p in range(N):
        for j in range(k):
            x = (U[p, j] - lo) / h
            i = int(np.floor(x))
            i = min(max(i, 0), m - 2)
            idx[j] = i
            frac[j] = min(max(x - i, 0.0), 1.0)
        for corner in range(2 ** k):
            w = 1.0
            lin = 0
            for j in range(k):
                bit = (corner >> (k - 1 - j)) & 1
                w *= frac[j] if bit else 1.0 - frac[j]
                lin = lin * m + idx[j] + bit
            for q in range(ns):
                out[p, q] += w * flat[lin, q]
    return out


def interp_multilinear(lo: float, h: float, m: int, values: np.ndarray, U) -> np.ndarray:
    """Multilinear interpolation on the uniform grid ``lo + h * i``,
    ``i = 0..m-1`` in each of ``k`` dimensions; ``values`` has shape
    ``(m,) * k + (ns,)``.  Points outside the cube are clamped."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if USE_NUMBA:
        ns = values.shape[-1]
        return _interp_numba(lo, h, m, np.ascontiguousarray(values.reshape(-1, ns)),
                             np.ascontiguousarray(U))
    return _interp_numpy(lo, h, m, values, U)


@dataclass(eq=False)
class GraphMap:
    """Map ``sigma: H_u(r) -> H_s(r)`` sampled on a uniform tensor grid over
    the cube ``[-r, r]^n_u`` and extended multilinearly."""

    n_u: int
    n_s: int
    r: float
    m: int
    values: np.ndarray

    @classmethod
    def constant(cls, n_u: int, n_s: int, r: float, m: int, c=None) -> "GraphMap":
        c = np.zeros(n_s) if c is None else np.asarray(c, dtype=float)
        vals = np.broadcast_to(c, (m,) * n_u + (n_s,)).copy()
        return cls(n_u, n_s, r, m, vals)

    @classmethod
    def from_function(cls, n_u, n_s, r, m, fn) -> "GraphMap":
        g = cls.constant(n_u, n_s, r, m)
        g.values = np.asarray(fn(g.nodes()), dtype=float).reshape(g.values.shape)
        return g

    @property
    def h(self) -> float:
        return 2 * self.r / (self.m - 1) if self.m > 1 else 1.0

    def nodes(self) -> np.ndarray:
        if self.n_u == 0:
            return np.zeros((1, 0))
        axis = np.linspace(-self.r, self.r, self.m)
        mesh = np.meshgrid(*([axis] * self.n_u), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def flat_values(self) -> np.ndarray:
        return self.values.reshape(-1, self.n_s)

    def __call__(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self.n_u == 0:
            return np.repeat(self.values.reshape(1, self.n_s), U.shape[0], axis=0)
        if self.n_s == 0:
            return np.zeros((U.shape[0], 0))
        return interp_multilinear(-self.r, self.h, self.m, self.values, U)

    @property
    def lipschitz_bound(self) -> float:
        return sampled_lipschitz(self)

    def sup_distance(self, other: "GraphMap") -> float:
        if self.n_s == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.flat_values() - other.flat_values(), axis=1)))


def sampled_lipschitz(g: GraphMap, radius: Optional[float] = None) -> float:
    """Largest difference quotient between neighbouring grid nodes (axis and
    diagonal neighbours), optionally restricted to ``|u| <= radius``."""
    if g.n_u == 0 or g.n_s == 0 or g.m < 2:
        return 0.0
    U = g.nodes().reshape((g.m,) * g.n_u + (g.n_u,))
    V = g.values
    best = 0.0
    for off in itertools.product((0, 1), repeat=g.n_u):
        if not any(off):
            continue
        sl_a = tuple(slice(0, g.m - o) for o in off)
        sl_b = tuple(slice(o, g.m) for o in off)
        du = np.linalg.norm(U[sl_b] - U[sl_a], axis=-1)
        dv = np.linalg.norm(V[sl_b] - V[sl_a], axis=-1)
        if radius is not None:
            keep = (np.linalg.norm(U[sl_a], axis=-1) <= radius + 1e-12) & \
                   (np.linalg.norm(U[sl_b], axis=-1) <= radius + 1e-12)
            if not keep.any():
                continue
            du, dv = du[keep], dv[keep]
        best = max(best, float(np.max(dv / du)))
    return best


def graph_transform(chart: RestPointChart, sigma: GraphMap, t: float = 1.0,
                    max_iter: int = 20, tol: float = 1e-12) -> GraphMap:
    """Image of the graph of ``sigma`` under the time-``t`` flow, as a graph.

    For every grid node ``u*`` a damped Newton iteration (step halving by
    0.5 while the residual does not decrease) finds ``u0`` with
    ``P_u phi_t(u0, sigma(u0)) = u*``; the new value is
    ``P_s phi_t(u0, sigma(u0))``.  Raises ContractionLost if some node does
    not converge within ``max_iter`` iterations.
    """
    k = chart.n_u
    targets = sigma.nodes()
    N = targets.shape[0]

    def image(U0):
        W0 = np.hstack([U0, sigma(U0)])
        return chart.flow(W0, t)

    if k == 0:
        W1 = image(targets)
        return GraphMap(0, chart.n_s, sigma.r, sigma.m, W1[:, k:].reshape(sigma.values.shape))
    U0 = targets @ expm(-t * chart.L_u).T
    W1 = image(U0)
    R = W1[:, :k] - targets
    res = np.linalg.norm(R, axis=1)
    scale = max(sigma.r, 1e-300)
    delta = 1e-7 * scale
    for _ in range(max_iter):
        active = res > tol * scale
        if not active.any():
            break
        ia = np.flatnonzero(active)
        Ua = U0[ia]
        J = np.empty((ia.size, k, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = delta
            Wp = image(Ua + e)
            Wm = image(Ua - e)
            J[:, :, j] = (Wp[:, :k] - Wm[:, :k]) / (2 * delta)
        step = np.linalg.solve(J, R[ia][:, :, None])[:, :, 0]
        lam = 1.0
        todo = np.arange(ia.size)
        progressed = False
        for _ in range(8):
            nodes = ia[todo]
            trial = U0[nodes] - lam * step[todo]
            Wt = image(trial)
            rt = np.linalg.norm(Wt[:, :k] - targets[nodes], axis=1)
            ok = rt < res[nodes]
            acc = nodes[ok]
            U0[acc], W1[acc], res[acc] = trial[ok], Wt[ok], rt[ok]
            R[acc] = Wt[ok][:, :k] - targets[acc]
            progressed |= bool(ok.any())
            todo = todo[~ok]
            if todo.size == 0:
                break
            lam *= 0.5
        if not progressed:
            break
    if np.any(res > 1e-8 * scale):
        raise ContractionLost(f"shooting residual {res.max():.2e} after {max_iter} iterations")
    return GraphMap(k, chart.n_s, sigma.r, sigma.m, W1[:, k:].reshape(sigma.values.shape))


def local_unstable(chart: RestPointChart, m: int = 17, t: float = 1.0, tol: float = 1e-11,
                   max_iter: int = 80, start: Optional[GraphMap] = None) -> GraphMap:
    """Local unstable manifold as the limit of graph transforms from ``sigma = 0``."""
    if chart.n_u > MAX_UNSTABLE_DIM:
        raise ValueError(f"unstable dimension {chart.n_u} exceeds {MAX_UNSTABLE_DIM}")
    g = GraphMap.constant(chart.n_u, chart.n_s, chart.r, m if chart.n_u else 1) if start is None else start
    for _ in range(max_iter):
        new = graph_transform(chart, g, t)
        d = new.sup_distance(g)
        g = new
        if d < tol:
            return g
    raise NoConvergence(f"graph iteration did not settle (last change {d:.2e})")


def local_stable(chart: RestPointChart, **kw) -> GraphMap:
    """Local stable manifold, via the unstable manifold of the reversed field.

    The result maps stable coordinates to unstable ones."""
    return local_unstable(chart.reversed(), **kw)


def graph_points(chart: RestPointChart, g: GraphMap) -> np.ndarray:
    """Grid points of the graph of ``g`` in original coordinates."""
    U = g.nodes()
    return chart.from_chart(np.hstack([U, g(U)]))


def contraction_factor(chart: RestPointChart, t: float = 1.0, m: int = 5) -> float:
    """Measured contraction of one graph transform on the pair ``0``,
    ``const = (r/2) e_1``."""
    if chart.n_s == 0:
        return 0.0
    m = m if chart.n_u else 1
    a = GraphMap.constant(chart.n_u, chart.n_s, chart.r, m)
    c = np.zeros(chart.n_s)
    c[0] = chart.r / 2
    b = GraphMap.constant(chart.n_u, chart.n_s, chart.r, m, c)
    ga, gb = graph_transform(chart, a, t), graph_transform(chart, b, t)
    return ga.sup_distance(gb) / a.sup_distance(b)


def select_radius(chart: RestPointChart, factor: float = 0.9, max_halvings: int = 20) -> float:
    """Halve ``chart.r`` until :func:`contraction_factor` is below ``factor``."""
    r = chart.r
    for _ in range(max_halvings):
        chart.r = r
        try:
            if contraction_factor(chart) < factor:
                return r
        except ContractionLost:
            pass
        r /= 2
    raise ContractionLost("no radius gives a contraction")


def lipschitz_settle(chart: RestPointChart, theta: float = 0.2, shrink: float = 0.5,
                     m: int = 17, t_max: int = 30) -> Tuple[int, float]:
    """First integer time ``t0`` after which graph transforms of Lipschitz-1
    probe graphs have sampled Lipschitz constant below ``theta`` on the
    shrunken ball ``|u| <= shrink * r``.  Returns ``(t0, shrink * r)``."""
    r0 = shrink * chart.r
    probes = []
    k, ns = chart.n_u, chart.n_s
    for sgn in (1.0, -1.0):
        def fn(U, sgn=sgn):
            out = np.zeros((U.shape[0], ns))
            q = min(k, ns)
            out[:, :q] = sgn * U[:, :q]
            return np.clip(out, -chart.r, chart.r)
        probes.append(GraphMap.from_function(k, ns, chart.r, m, fn))
    probes.append(GraphMap.constant(k, ns, chart.r, m))
    for t0 in range(1, t_max + 1):
        probes = [graph_transform(chart, g, 1.0) for g in probes]
        if all(sampled_lipschitz(g, r0) < theta for g in probes):
            return t0, r0
    raise NoConvergence("Lipschitz bound not reached")


# -- exits --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExitReport:
    """How an orbit leaves ``Q(r)``: time, face (``"Q+"`` through the
    unstable face ``|u| = r``, ``"Q-"`` through ``|s| = r``) and exit point
    in chart coordinates."""

    exited: bool
    time: float
    face: Optional[str]
    point: np.ndarray
    reentered: bool = False


def exit_check(chart: RestPointChart, p, direction: int = 1, horizon: float = 50.0,
               dt: float = 0.05, after: float = 5.0) -> ExitReport:
    """Follow the orbit of the chart point ``p`` forward (``direction=1``) or
    backward until it leaves ``Q(r)``, locate the exit time by bisection and
    report the face.  The orbit is followed for ``after`` more time units to
    detect re-entry."""
    w = np.asarray(p, dtype=float).reshape(1, -1)
    r = chart.r
    if chart.box_norm(w)[0] > r:
        raise ValueError("starting point is outside Q(r)")
    sgn = 1.0 if direction > 0 else -1.0
    t = 0.0
    while t < horizon:
        w_next = chart.flow(w, sgn * dt)
        if chart.box_norm(w_next)[0] > r:
            lo, hi = 0.0, dt
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if chart.box_norm(chart.flow(w, sgn * mid))[0] > r:
                    hi = mid
                else:
                    lo = mid
            pt = chart.flow(w, sgn * hi)[0]
            nu = np.linalg.norm(pt[:chart.n_u])
            ns = np.linalg.norm(pt[chart.n_u:])
            face = "Q+" if nu >= ns else "Q-"
            cur, re = pt[None], False
            for _ in range(int(np.ceil(after / dt))):
                cur = chart.flow(cur, sgn * dt)
                if chart.box_norm(cur)[0] < r * (1 - 1e-6):
                    re = True
                    break
            return ExitReport(True, t + hi, face, pt, re)
        w = w_next
        t += dt
    return ExitReport(False, horizon, None, w[0], False)


def linearization_error(chart: RestPointChart, w, t: float) -> float:
    """Relative error ``|exp(tL) w - phi_t(w)| / |exp(tL) w|`` in chart
    coordinates."""
    w = np.asarray(w, dtype=float)
    L = chart.frame_inv @ chart.linearization.matrix @ chart.frame
    lin = expm(t * L) @ w
    return float(np.linalg.norm(lin - chart.flow(w[None], t)[0]) / np.linalg.norm(lin))
