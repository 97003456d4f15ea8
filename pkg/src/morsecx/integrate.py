"""Dormand-Prince 5(4) integration.

Two implementations of the same scheme are kept:

* a per-orbit kernel compiled with numba, used when the vector field
  provides a jitted ``F_nb``;
* a batched numpy kernel that advances many orbits with one shared step
  size, used otherwise (or when ``MORSECX_NO_NUMBA=1``).

A plain single-vector integrator for non-autonomous right-hand sides
(:func:`dopri5`) serves the linear path equations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from ._accel import MAT_FN, USE_NUMBA, VEC_FN, njit

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1 = B1 - 5179 / 57600
E3 = B3 - 7571 / 16695
E4 = B4 - 393 / 640
E5 = B5 + 92097 / 339200
E6 = B6 - 187 / 2100
E7 = -1 / 40

STATUS_DONE, STATUS_STOPPED, STATUS_ESCAPED, STATUS_FAILED = 0, 1, 2, 3


def _stages(F, y, h, sgn):
    k1 = sgn * F(y)
    k2 = sgn * F(y + h * (A21 * k1))
    k3 = sgn * F(y + h * (A31 * k1 + A32 * k2))
    k4 = sgn * F(y + h * (A41 * k1 + A42 * k2 + A43 * k3))
    k5 = sgn * F(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
    k6 = sgn * F(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
    y5 = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
    k7 = sgn * F(y5)
    err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
    return y5, err


_stages_nb = njit(_stages)


def _orbit_kernel(F, y0, t_end, rtol, atol, max_step, stop_pts, stop_tol,
                  period, lo, hi, record, max_steps):
    n = y0.size
    sgn = 1.0 if t_end >= 0 else -1.0
    T = abs(t_end)
    cap = 256 if record else 2
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    y = y0.copy()
    t = 0.0
    ts[0] = 0.0
    ys[0] = y
    m = 1
    h = min(max_step, 1e-2, T)
    status = STATUS_DONE
    hit = -1
    steps = 0
    while t < T:
        if steps >= max_steps or h < 1e-14 * max(1.0, t):
            status = STATUS_FAILED
            break
        steps += 1
        last = t + h >= T
        if last:
            h = T - t
        y5, err = _stages_nb(F, y, h, sgn)
        acc = 0.0
        for i in range(n):
            sc = atol + rtol * max(abs(y[i]), abs(y5[i]))
            acc += (err[i] / sc) ** 2
        en = np.sqrt(acc / n)
        if not np.isfinite(en):
            h *= 0.2
            continue
        if en <= 1.0:
            t = T if last else t + h
            y = y5
            if record:
                if m == cap:
                    cap *= 2
                    ts2 = np.empty(cap)
                    ys2 = np.empty((cap, n))
                    ts2[:m] = ts[:m]
                    ys2[:m] = ys[:m]
                    ts, ys = ts2, ys2
                ts[m] = sgn * t
                ys[m] = y
                m += 1
            escaped = False
            for i in range(n):
                if period[i] == 0.0 and (y[i] < lo[i] or y[i] > hi[i]):
                    escaped = True
            if escaped:
                status = STATUS_ESCAPED
                break
            for j in range(stop_pts.shape[0]):
                d2 = 0.0
                for i in range(n):
                    d = y[i] - stop_pts[j, i]
                    if period[i] > 0.0:
                        d -= period[i] * np.round(d / period[i])
                    d2 += d * d
                if d2 < stop_tol * stop_tol:
                    status = STATUS_STOPPED
                    hit = j
            if status == STATUS_STOPPED:
                break
        fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        h = min(max_step, h * fac)
    if not record:
        ts[1] = sgn * t
        ys[1] = y
        m = 2
    return ts[:m].copy(), ys[:m].copy(), status, hit


if USE_NUMBA:
    from numba import types as _t

    _orbit_kernel = njit(
        _t.Tuple((_t.float64[::1], _t.float64[:, ::1], _t.int64, _t.int64))(
            VEC_FN, _t.float64[::1], _t.float64, _t.float64, _t.float64, _t.float64,
            _t.float64[:, ::1], _t.float64, _t.float64[::1], _t.float64[::1], _t.float64[::1],
            _t.boolean, _t.int64),
        cache=True, nogil=True)(_orbit_kernel)


def _aug_rhs(F, J, z, n, sgn):
    out = np.empty_like(z)
    out[:n] = sgn * F(z[:n].copy())
    A = J(z[:n].copy())
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += A[i, k] * z[n + k * n + j]
            out[n + i * n + j] = sgn * acc
    return out


_aug_rhs_nb = njit(_aug_rhs)


def _var_kernel(F, J, z0, t_end, rtol, atol, max_step):
    """DOPRI5 for the state and its fundamental matrix, ``z = (y, M)``."""
    n = int(np.round((np.sqrt(1.0 + 4.0 * z0.size) - 1.0) / 2.0))
    sgn = 1.0 if t_end >= 0 else -1.0
    T = abs(t_end)
    z = z0.copy()
    t = 0.0
    h = min(max_step, 1e-2, T)
    N = z.size
    while t < T:
        if h < 1e-14 * max(1.0, t):
            z[:] = np.nan
            break
        last = t + h >= T
        if last:
            h = T - t
        k1 = _aug_rhs_nb(F, J, z, n, sgn)
        k2 = _aug_rhs_nb(F, J, z + h * (A21 * k1), n, sgn)
        k3 = _aug_rhs_nb(F, J, z + h * (A31 * k1 + A32 * k2), n, sgn)
        k4 = _aug_rhs_nb(F, J, z + h * (A41 * k1 + A42 * k2 + A43 * k3), n, sgn)
        k5 = _aug_rhs_nb(F, J, z + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), n, sgn)
        k6 = _aug_rhs_nb(F, J, z + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), n, sgn)
        z5 = z + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = _aug_rhs_nb(F, J, z5, n, sgn)
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        acc = 0.0
        for i in range(N):
            sc = atol + rtol * max(abs(z[i]), abs(z5[i]))
            acc += (err[i] / sc) ** 2
        en = np.sqrt(acc / N)
        if not np.isfinite(en):
            h *= 0.2
            continue
        if en <= 1.0:
            t = T if last else t + h
            z = z5
        fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        h = min(max_step, h * fac)
    return z


if USE_NUMBA:
    _var_kernel = njit(_t.float64[::1](VEC_FN, MAT_FN, _t.float64[::1], _t.float64, _t.float64,
                                       _t.float64, _t.float64), cache=True, nogil=True)(_var_kernel)


def _batch_kernel(F, Y0, t_end, rtol, atol, max_step, stop_pts, stop_tol,
                  period, lo, hi, record, max_steps):
    """Vectorized integration of all rows of ``Y0`` with a shared step."""
    N, n = Y0.shape
    sgn = 1.0 if t_end >= 0 else -1.0
    T = abs(t_end)
    Y = Y0.copy()
    active = np.ones(N, dtype=bool)
    status = np.full(N, STATUS_DONE)
    hit = np.full(N, -1)
    t_stop = np.full(N, sgn * T)
    hist_t = [0.0]
    hist_y = [Y.copy()]
    t, h, steps = 0.0, min(max_step, 1e-2, T), 0
    periodic = period > 0
    while t < T and active.any():
        if steps >= max_steps or h < 1e-14 * max(1.0, t):
            status[active] = STATUS_FAILED
            t_stop[active] = sgn * t
            break
        steps += 1
        last = t + h >= T
        if last:
            h = T - t
        ya = Y[active]
        y5, err = _stages(F, ya, h, sgn)
        sc = atol + rtol * np.maximum(np.abs(ya), np.abs(y5))
        en = np.sqrt(np.mean((err / sc) ** 2, axis=1))
        emax = np.max(en)
        if not np.isfinite(emax):
            h *= 0.2
            continue
        if emax <= 1.0:
            t = T if last else t + h
            idx = np.flatnonzero(active)
            Y[idx] = y5
            if record:
                hist_t.append(sgn * t)
                hist_y.append(Y.copy())
            out = np.any(~periodic & ((y5 < lo) | (y5 > hi)), axis=1)
            status[idx[out]] = STATUS_ESCAPED
            t_stop[idx[out]] = sgn * t
            done = out.copy()
            if stop_pts.shape[0]:
                d = y5[:, None, :] - stop_pts[None, :, :]
                per = np.where(periodic, period, 1.0)
                d = np.where(periodic, d - per * np.round(d / per), d)
                dist = np.sqrt(np.sum(d * d, axis=2))
                near = np.min(dist, axis=1) < stop_tol
                near &= ~out
                status[idx[near]] = STATUS_STOPPED
                hit[idx[near]] = np.argmin(dist[near], axis=1)
                t_stop[idx[near]] = sgn * t
                done |= near
            active[idx[done]] = False
        fac = 5.0 if emax == 0.0 else min(5.0, max(0.2, 0.9 * emax ** -0.2))
        h = min(max_step, h * fac)
    trajs = []
    ht = np.asarray(hist_t)
    for i in range(N):
        if record:
            m = int(np.searchsorted(sgn * ht, sgn * t_stop[i], side="right"))
            ts = ht[:m]
            ys = np.array([hy[i] for hy in hist_y[:m]])
        else:
            ts = np.array([0.0, t_stop[i]])
            ys = np.vstack([Y0[i], Y[i]])
        trajs.append(Trajectory(ts, ys, int(status[i]), int(hit[i])))
    return trajs


@dataclass
class Trajectory:
    """Samples of one orbit: times ``t`` and states ``y`` (one row each)."""

    t: np.ndarray
    y: np.ndarray
    status: int
    stop_index: int = -1

    @property
    def end(self) -> np.ndarray:
        return self.y[-1]


def integrate_orbits(field, Y0, t_end: float, *, rtol: float = 1e-10, atol: float = 1e-10,
                     max_step: float = np.inf, record: bool = True, stop_points=None,
                     stop_tol: float = 0.0, period=None, bounds=None,
                     max_steps: int = 200000, use_numba: Optional[bool] = None) -> List[Trajectory]:
    """Integrate ``y' = F(y)`` from each row of ``Y0`` up to time ``t_end``.

    ``t_end < 0`` integrates backward.  An orbit stops early when it comes
    within ``stop_tol`` of one of ``stop_points`` (distances are taken modulo
    ``period`` in periodic coordinates, marked by a positive entry) or leaves
    the box ``bounds = (lo, hi)``.
    """
    Y0 = np.atleast_2d(np.asarray(Y0, dtype=float))
    N, n = Y0.shape
    stop_pts = np.zeros((0, n)) if stop_points is None else np.atleast_2d(np.asarray(stop_points, dtype=float))
    stop_pts = np.ascontiguousarray(stop_pts.reshape(-1, n))
    period = np.zeros(n) if period is None else np.asarray(period, dtype=float)
    if bounds is None:
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    else:
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (n,)).copy() for b in bounds)
    if use_numba is None:
        use_numba = USE_NUMBA and getattr(field, "F_nb", None) is not None
    if use_numba:
        # the reversed field reuses F_nb integrated backward in time
        ts_sign = getattr(field, "time_sign", 1.0)
        out = []
        for i in range(N):
            ts, ys, st, hit = _orbit_kernel(field.F_nb, np.ascontiguousarray(Y0[i]), ts_sign * float(t_end),
                                            rtol, atol, float(max_step), stop_pts, float(stop_tol),
                                            period, lo, hi, record, max_steps)
            out.append(Trajectory(ts_sign * ts, ys, int(st), int(hit)))
        return out
    return _batch_kernel(field.F_vec, Y0, float(t_end), rtol, atol, float(max_step), stop_pts,
                         float(stop_tol), period, lo, hi, record, max_steps)


def flow_map(field, Y0, t: float, **kw) -> np.ndarray:
    """Time-``t`` flow of every row of ``Y0``."""
    trajs = integrate_orbits(field, Y0, t, record=False, **kw)
    return np.array([tr.end for tr in trajs])


def variational_flow(field, y0, t: float, M0=None, rtol: float = 1e-10, atol: float = 1e-10,
                     max_step: float = np.inf, use_numba: Optional[bool] = None):
    """Flow ``y(t)`` together with ``M(t) = D phi_t(y0) M0`` (``M0 = I`` by
    default).  Returns ``(y, M)``."""
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    M0 = np.eye(n) if M0 is None else np.asarray(M0, dtype=float)
    z0 = np.concatenate([y0, M0.ravel()])
    if use_numba is None:
        use_numba = USE_NUMBA and field.F_nb is not None and field.J_nb is not None
    if use_numba:
        ts = getattr(field, "time_sign", 1.0)
        z = _var_kernel(field.F_nb, field.J_nb, z0, ts * float(t), rtol, atol, float(max_step))
    else:
        z = flow_map(field.variational(), z0[None, :], t, rtol=rtol, atol=atol, max_step=max_step,
                     use_numba=False)[0]
    return z[:n].copy(), z[n:].reshape(n, n).copy()


def dopri5(fun: Callable, t0: float, y0, t1: float, rtol: float = 1e-10, atol: float = 1e-10,
           t_eval=None, max_step: float = np.inf, h0: Optional[float] = None,
           stats: Optional[dict] = None):
    """Integrate the non-autonomous system ``y' = fun(t, y)`` from t0 to t1.

    Returns ``y(t1)``, or the values at the increasing (or decreasing, when
    integrating backward) times ``t_eval`` when given.  Steps are clipped so
    that every requested time is hit exactly.  If ``stats`` is a dict, the
    last unclipped step size is stored under ``"h"`` (useful as ``h0`` of a
    continuation).
    """
    y = np.array(y0, dtype=float)
    sgn = 1.0 if t1 >= t0 else -1.0
    targets = [t1] if t_eval is None else list(t_eval)
    out = []
    t = float(t0)
    h = min(max_step, h0 if h0 is not None else 1e-2, abs(t1 - t0) or 1.0)
    shape = y.shape

    def F(z, tt):
        return np.asarray(fun(tt, z.reshape(shape)), dtype=float).ravel()

    yv = y.ravel().copy()
    for target in targets:
        while sgn * (target - t) > 1e-15 * max(1.0, abs(t)):
            clipped = h >= sgn * (target - t)
            step = sgn * (target - t) if clipped else h
            ts = t
            k1 = F(yv, ts)
            k2 = F(yv + sgn * step * A21 * k1, ts + sgn * C2 * step)
            k3 = F(yv + sgn * step * (A31 * k1 + A32 * k2), ts + sgn * C3 * step)
            k4 = F(yv + sgn * step * (A41 * k1 + A42 * k2 + A43 * k3), ts + sgn * C4 * step)
            k5 = F(yv + sgn * step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), ts + sgn * C5 * step)
            k6 = F(yv + sgn * step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                   ts + sgn * step)
            y5 = yv + sgn * step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            k7 = F(y5, ts + sgn * step)
            err = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            sc = atol + rtol * np.maximum(np.abs(yv), np.abs(y5))
            en = float(np.sqrt(np.mean((err / sc) ** 2)))
            if not np.isfinite(en):
                h = 0.2 * step
                continue
            fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            if en <= 1.0:
                yv = y5
                if clipped:
                    break
                t = ts + sgn * step
                h = min(max_step, step * fac)
            else:
                h = min(max_step, step * fac)
                if h < 1e-14 * max(1.0, abs(t)):
                    raise FloatingPointError("step size underflow")
        t = target
        out.append(yv.reshape(shape).copy())
    if stats is not None:
        stats["h"] = h
    return out[0] if t_eval is None else out


def _tail_kernel(A, K, rate, tref, Y0, t0, t1, rtol, atol, h0):
    """DOPRI5 for ``Y' = (A + exp(rate (t - tref)) K) Y`` from t0 to t1.

    Same step control as :func:`dopri5`; returns ``(Y(t1), last step)``.
    """
    sgn = 1.0 if t1 >= t0 else -1.0
    y = Y0.copy()
    t = t0
    h = min(h0, abs(t1 - t0))
    cs = np.array([0.0, C2, C3, C4, C5, 1.0, 1.0])
    while sgn * (t1 - t) > 1e-15 * max(1.0, abs(t)):
        clipped = h >= sgn * (t1 - t)
        step = sgn * (t1 - t) if clipped else h
        d = sgn * step
        M1 = A + np.exp(rate * (t - tref)) * K
        M2 = A + np.exp(rate * (t + d * cs[1] - tref)) * K
        M3 = A + np.exp(rate * (t + d * cs[2] - tref)) * K
        M4 = A + np.exp(rate * (t + d * cs[3] - tref)) * K
        M5 = A + np.exp(rate * (t + d * cs[4] - tref)) * K
        M6 = A + np.exp(rate * (t + d - tref)) * K
        k1 = M1 @ y
        k2 = M2 @ (y + d * A21 * k1)
        k3 = M3 @ (y + d * (A31 * k1 + A32 * k2))
        k4 = M4 @ (y + d * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = M5 @ (y + d * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = M6 @ (y + d * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y5 = y + d * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = M6 @ y5
        err = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        en = np.sqrt(np.mean((err / sc) ** 2))
        if not np.isfinite(en):
            h = 0.2 * step
            continue
        fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        if en <= 1.0:
            y = y5
            if clipped:
                break
            t = t + d
            h = step * fac
        else:
            h = step * fac
            if h < 1e-14 * max(1.0, abs(t)):
                raise FloatingPointError("step size underflow")
    return y, h


_tail_kernel_nb = njit(cache=True)(_tail_kernel)


def linear_tail(A, K, rate: float, tref: float, Y0, t0: float, t1: float,
                rtol: float = 1e-10, atol: float = 1e-10, h0: Optional[float] = None):
    """Propagate ``Y' = (A + exp(rate (t - tref)) K) Y`` from ``t0`` to ``t1``.

    The exponentially decaying tails of operator paths have this form; the
    compiled kernel avoids a Python call per stage.  Returns ``(Y, h)`` with
    ``h`` the last step size.
    """
    args = (np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(K, dtype=float),
            float(rate), float(tref), np.ascontiguousarray(Y0, dtype=float),
            float(t0), float(t1), float(rtol), float(atol), float(1e-2 if h0 is None else h0))
    return (_tail_kernel_nb if USE_NUMBA else _tail_kernel)(*args)


def rk_step(fun: Callable, y, h: float, sgn: float = 1.0):
    """One explicit Dormand-Prince step of the autonomous field ``fun``."""
    y5, _ = _stages(fun, np.asarray(y, dtype=float), h, sgn)
    return y5
