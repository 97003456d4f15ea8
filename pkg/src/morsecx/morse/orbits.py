"""Connecting orbits between rest points whose indices differ by one.

Orbits are launched from a small sphere in the local unstable manifold of
the source.  For an unstable dimension of one the two branches are
followed; for dimension two the launch angle is swept and every change of
side with which the orbits pass a target saddle is bisected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import NonTransverse, UnresolvedOrbit
from ..integrate import STATUS_STOPPED, Trajectory, integrate_orbits
from ..local_dynamics import GraphMap, RestPointChart, local_unstable, make_chart
from .problem import FlowProblem, RestPoint

MAX_SWEEP_INDEX = 2


@dataclass(eq=False)
class ConnectingOrbit:
    """Sampled orbit from ``source`` to ``target`` (labels of rest points).

    ``y`` starts at the source and ends at the target; the interior rows
    are flow samples and ``t`` their times (the end rows repeat the times of
    the extreme samples).  Time zero is the launch point, stored at row
    ``diagnostics["launch_index"]``.  ``param`` is the branch sign or the
    launch angle.
    """

    source: int
    target: int
    t: np.ndarray
    y: np.ndarray
    param: float
    end_distance: float
    sign: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(eq=False)
class Passage:
    closest: float
    index: int
    side: int


@dataclass(eq=False)
class Sweep:
    """Result of shooting from one source.

    ``angles`` and ``ends`` describe the launch family: ``ends[j]`` is the
    label of the rest point where the orbit launched at ``angles[j]`` stops
    (``-1`` if it stops nowhere).  ``critical`` lists ``(angle, orbit)`` for
    orbits ending at rest points of index one less than the source.
    """

    source: int
    angles: np.ndarray
    ends: np.ndarray
    orbits: List[ConnectingOrbit]
    critical: List[Tuple[float, ConnectingOrbit]]
    levels: Optional[np.ndarray] = None
    signatures: Optional[np.ndarray] = None
    shooter: Optional["Shooter"] = None


class Shooter:
    """Launches orbits from a rest point of ``problem``."""

    def __init__(self, problem: FlowProblem, rest_points: List[RestPoint], source: RestPoint,
                 t_max: float = 200.0, max_step: float = 0.05):
        self.problem = problem
        self.points = rest_points
        self.x = source
        tol = problem.tol
        self.r_shoot = tol.shoot
        self.t_max = t_max
        self.max_step = max_step
        locs = np.array([p.location for p in rest_points])
        dists = [problem.domain.distance(a, b) for i, a in enumerate(locs) for b in locs[i + 1:]]
        self.rho = 0.2 * (min(dists) if dists else 1.0)
        # orbits are launched from the circle of radius r_launch inside the
        # local unstable graph; a larger circle keeps the launch family from
        # being squeezed when the unstable eigenvalues differ
        self.chart = make_chart(problem.field, source.location, r=min(0.25 * self.rho, 0.2),
                                select=True, rtol=tol.rtol, atol=tol.atol)
        k = self.chart.n_u
        self.graph: Optional[GraphMap] = None
        if 0 < k <= MAX_SWEEP_INDEX:
            self.graph = local_unstable(self.chart, m=17 if k == 1 else 13)
        self.r_launch = 0.5 * self.chart.r
        # orbits only stop at sinks; stopping at saddles would cut a whole
        # interval of launch angles out of the family
        self.targets = [p for p in rest_points if p.morse_index == source.morse_index - 1]
        self.stops = [p for p in rest_points if p.morse_index == 0 and p is not source]
        self.stop_locs = np.array([p.location for p in self.stops]).reshape(-1, problem.dim)
        self._rows = {p.label: p.spectral_coordinates()[:p.morse_index] for p in self.targets}

    def launch_points(self, U) -> np.ndarray:
        U = np.atleast_2d(U)
        S = self.graph(U) if self.graph is not None else np.zeros((U.shape[0], self.chart.n_s))
        return self.chart.from_chart(np.hstack([U, S]))

    def integrate(self, U) -> List[Trajectory]:
        p, tol = self.problem, self.problem.tol
        dom = p.domain
        bounds = None
        if np.all(dom.period == 0):
            span = dom.hi - dom.lo
            bounds = (dom.lo - 0.5 * span, dom.hi + 0.5 * span)
        return integrate_orbits(p.field, self.launch_points(U), self.t_max, rtol=tol.rtol,
                                atol=tol.atol, max_step=self.max_step, stop_points=self.stop_locs,
                                stop_tol=0.5 * tol.orbit, period=dom.period, bounds=bounds)

    def end_label(self, tr: Trajectory) -> int:
        if tr.status == STATUS_STOPPED and tr.stop_index >= 0:
            return self.stops[tr.stop_index].label
        return -1

    def passage(self, tr: Trajectory, y: RestPoint) -> Optional[Passage]:
        """Closest approach to ``y`` during the first visit of its
        ``rho``-ball and the side (sign of the unstable coordinate) on which
        the orbit leaves; side 0 means the orbit stopped at ``y``."""
        dom = self.problem.domain
        d = dom.distance(tr.y, y.location)
        inside = np.flatnonzero(d < self.rho)
        if inside.size == 0:
            return None
        first = inside[0]
        gaps = np.flatnonzero(np.diff(inside) > 1)
        last = inside[gaps[0]] if gaps.size else inside[-1]
        c = first + int(np.argmin(d[first:last + 1]))
        if self.end_label(tr) == y.label:
            return Passage(float(d[c]), c, 0)
        later = np.flatnonzero(d[c:] >= 0.5 * self.rho)
        j = c + later[0] if later.size else len(d) - 1
        u = self._rows[y.label] @ dom.displacement(y.location, tr.y[j])
        side = 0 if u[0] == 0 else (1 if u[0] > 0 else -1)
        return Passage(float(d[c]), c, side)

    def backward_tail(self, p0) -> Trajectory:
        """Backward orbit from ``p0`` up to its closest approach to the source."""
        p, tol = self.problem, self.problem.tol
        tr = integrate_orbits(p.field.reversed(), [p0], self.t_max, rtol=tol.rtol, atol=tol.atol,
                              max_step=self.max_step, stop_points=[self.x.location],
                              stop_tol=self.r_shoot, period=p.domain.period)[0]
        d = p.domain.distance(tr.y, self.x.location)
        c = int(np.argmin(d))
        return Trajectory(tr.t[:c + 1], tr.y[:c + 1], tr.status)

    def truncated(self, tr: Trajectory, y: RestPoint, c: int, param: float) -> ConnectingOrbit:
        """Orbit samples from the source to the closest approach (index ``c``)
        to ``y``, with both rest points appended."""
        dom = self.problem.domain
        back = self.backward_tail(tr.y[0])
        ys = np.vstack([back.y[:0:-1], tr.y[:c + 1]])
        ts = np.concatenate([-back.t[:0:-1], tr.t[:c + 1]])
        # rest points in the same periodic copy as the samples
        ystart = ys[0] + dom.displacement(ys[0], self.x.location)
        yend = ys[-1] + dom.displacement(ys[-1], y.location)
        dist = float(dom.distance(ys[-1], y.location))
        orb = ConnectingOrbit(self.x.label, y.label, np.concatenate([[ts[0]], ts, [ts[-1]]]),
                              np.vstack([ystart, ys, yend]), param, dist)
        orb.diagnostics["launch_index"] = len(back.t)
        orb.diagnostics["start_distance"] = float(dom.distance(ys[0], self.x.location))
        return orb

    # -- index one: two branches -------------------------------------------------

    def branches(self) -> List[ConnectingOrbit]:
        out = []
        trs = self.integrate(np.array([[self.r_launch], [-self.r_launch]]))
        for sgn, tr in zip((1.0, -1.0), trs):
            self._check_no_equal_index_hit(tr)
            lab = self.end_label(tr)
            if lab < 0 or self.points[lab].morse_index != self.x.morse_index - 1:
                continue
            out.append(self.truncated(tr, self.points[lab], len(tr.t) - 1, sgn))
        return out

    def _check_no_equal_index_hit(self, tr: Trajectory) -> None:
        """An unstable branch that runs into a rest point of index at least
        ``m(x)`` lies in its stable manifold, which is not transverse."""
        dom = self.problem.domain
        for p in self.points:
            if p is self.x or p.morse_index < self.x.morse_index:
                continue
            d = float(np.min(dom.distance(tr.y, p.location)))
            if d < self.problem.tol.orbit:
                raise NonTransverse(f"unstable branch of rest point {self.x.label} runs into rest "
                                    f"point {p.label} of index {p.morse_index} (distance {d:.1e})")

    # -- index two: angle sweep ---------------------------------------------------

    def _at(self, angles) -> List[Trajectory]:
        a = np.atleast_1d(angles)
        return self.integrate(self.r_launch * np.stack([np.cos(a), np.sin(a)], axis=1))

    def _signature(self, tr: Trajectory, levels: np.ndarray) -> np.ndarray:
        """Positions where the orbit crosses the Lyapunov ``levels``; levels
        below the end of the orbit map to its last point."""
        fv = self.problem.f.values(tr.y)
        # f decreases along orbits; np.interp wants increasing abscissae
        fr, yr = fv[::-1], tr.y[::-1]
        keep = np.concatenate([[True], np.diff(fr) > 0])
        fr, yr = fr[keep], yr[keep]
        return np.stack([np.interp(levels, fr, yr[:, i]) for i in range(yr.shape[1])], axis=1)

    def _gap(self, sa: np.ndarray, sb: np.ndarray) -> float:
        return float(np.max(self.problem.domain.distance(sa, sb)))

    def sweep(self, n0: int = 128, min_width: float = 1e-14, max_orbits: int = 20000,
              phase: float = 0.0) -> Sweep:
        """Sweep the launch circle.

        Neighbouring launch angles are subdivided while their orbits differ
        by more than ``rho / 2`` at some Lyapunov level.  Intervals that
        still show a gap at width ``min_width`` contain an orbit ending at a
        rest point of index one less; the sample closest to it is kept.
        The initial grid is rotated by ``phase`` grid steps.
        """
        angles = list(2 * np.pi * (np.arange(n0 + 1) + phase) / n0)
        trs = self._at(angles[:-1])
        f_hi = min(float(np.min(self.problem.f.values(tr.y[:1]))) for tr in trs)
        f_lo = min(p.value for p in self.points)
        levels = np.linspace(f_lo, f_hi, 32)
        data = {a: (tr, self._signature(tr, levels)) for a, tr in zip(angles, trs)}
        data[angles[-1]] = data[angles[0]]
        thr = 0.5 * self.rho
        todo = [(a, b) for a, b in zip(angles[:-1], angles[1:])]
        critical = []
        while todo:
            split = []
            for a, b in todo:
                if self._gap(data[a][1], data[b][1]) <= thr:
                    continue
                if b - a < min_width:
                    critical.append((a, b))
                else:
                    split.append((a, b))
            if len(data) + len(split) > max_orbits:
                raise UnresolvedOrbit(f"launch family of rest point {self.x.label} needs more than "
                                      f"{max_orbits} orbits")
            mids = [0.5 * (a + b) for a, b in split]
            for m, tr in zip(mids, self._at(mids) if mids else []):
                data[m] = (tr, self._signature(tr, levels))
            todo = [iv for (a, b), m in zip(split, mids) for iv in ((a, m), (m, b))]
        # adjacent critical intervals come from one orbit hit in the middle
        merged: List[List[float]] = []
        for a, b in sorted(critical):
            if merged and a <= merged[-1][1]:
                merged[-1][1] = b
            else:
                merged.append([a, b])
        crit = []
        for a, b in merged:
            cands = [m for m in data if a <= m <= b]
            best = None
            for m in cands:
                tr = data[m][0]
                for y in self.targets:
                    d = self.problem.domain.distance(tr.y, y.location)
                    c = int(np.argmin(d))
                    if best is None or d[c] < best[0]:
                        best = (float(d[c]), m, y, c)
            if best is None or best[0] >= self.problem.tol.orbit:
                d = np.inf if best is None else best[0]
                raise UnresolvedOrbit(f"orbit from rest point {self.x.label} near angle {a:.6f} "
                                      f"not resolved (closest approach {d:.2e})")
            d, m, y, c = best
            orb = self.truncated(data[m][0], y, c, float(np.mod(m, 2 * np.pi)))
            orb.diagnostics["sides"] = (self._side(data[a][0], y), self._side(data[b][0], y))
            crit.append((orb.param, orb))
        crit.sort(key=lambda e: e[0])
        keys = sorted((k for k in data if k < angles[-1]), key=lambda k: np.mod(k, 2 * np.pi))
        ends = np.array([self.end_label(data[k][0]) for k in keys])
        sigs = np.array([data[k][1] for k in keys])
        return Sweep(self.x.label, np.mod(keys, 2 * np.pi), ends, [o for _, o in crit], crit, levels, sigs, self)

    def _side(self, tr: Trajectory, y: RestPoint) -> int:
        ps = self.passage(tr, y)
        return 0 if ps is None else ps.side


def shoot(problem: FlowProblem, rest_points: List[RestPoint], x: RestPoint, phase: float = 0.0, **kw):
    """Connecting orbits from ``x`` to rest points of index one less.

    Returns ``(orbits, sweep)`` where ``sweep`` is ``None`` unless the
    unstable dimension is two.
    """
    k = x.morse_index
    if k == 0 or not any(p.morse_index == k - 1 for p in rest_points):
        return [], None
    if k > MAX_SWEEP_INDEX:
        raise NotImplementedError(f"orbit search from a rest point of Morse index {k} (max {MAX_SWEEP_INDEX})")
    sh = Shooter(problem, rest_points, x, **kw)
    if k == 1:
        return sh.branches(), None
    sw = sh.sweep(phase=phase)
    return sw.orbits, sw


def find_connecting_orbits(problem: FlowProblem, rest_points: List[RestPoint], x: RestPoint,
                           y: RestPoint) -> List[ConnectingOrbit]:
    """Connecting orbits from ``x`` to ``y`` (``m(x) = m(y) + 1``)."""
    orbits, _ = shoot(problem, rest_points, x)
    return [o for o in orbits if o.target == y.label]
