"""Broken flow lines at the ends of one-parameter orbit families.

For a source ``x`` of index two the launch circle is cut by the critical
angles (orbits ending at saddles) into arcs of orbits ending at the same
sink ``z``.  At each end of an arc the orbits converge to a broken line
``x -> y -> z``; the two broken lines bounding an arc are paired, and their
sign products must be opposite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .._accel import USE_NUMBA, njit
from .orbits import ConnectingOrbit, Shooter, Sweep
from .problem import FlowProblem, RestPoint


@dataclass(eq=False)
class BrokenLine:
    """Concatenation ``first`` (x to y) then ``second`` (y to z).

    ``angle`` is the critical launch angle and ``toward`` is ``+1`` when the
    arc of orbits converging to this broken line lies at larger angles.
    """

    first: ConnectingOrbit
    second: ConnectingOrbit
    angle: float
    toward: int
    arc: Tuple[float, float]

    @property
    def sign(self) -> int:
        return int(self.first.sign) * int(self.second.sign)

    def points(self) -> np.ndarray:
        # both pieces pass through y; move the second into the same periodic copy
        shift = self.first.y[-1] - self.second.y[0]
        return np.vstack([self.first.y, self.second.y + shift])


@dataclass(eq=False)
class BrokenPair:
    a: BrokenLine
    b: BrokenLine

    @property
    def cancels(self) -> bool:
        return self.a.sign == -self.b.sign


# -- Hausdorff distance --------------------------------------------------------------

def _directed_numpy(A, B, period):
    worst = 0.0
    per = period > 0
    for i in range(0, A.shape[0], 512):
        D = A[i:i + 512, None, :] - B[None, :, :]
        if per.any():
            D[..., per] = D[..., per] - period[per] * np.round(D[..., per] / period[per])
        d = np.sqrt(np.min(np.sum(D * D, axis=2), axis=1))
        worst = max(worst, float(np.max(d)))
    return worst


def _directed_loop(A, B, period):
    worst = 0.0
    n = A.shape[1]
    for i in range(A.shape[0]):
        best = np.inf
        for j in range(B.shape[0]):
            s = 0.0
            for k in range(n):
                d = A[i, k] - B[j, k]
                if period[k] > 0:
                    d -= period[k] * np.round(d / period[k])
                s += d * d
                if s >= best:
                    break
            if s < best:
                best = s
        if best > worst:
            worst = best
    return np.sqrt(worst)


_directed_numba = njit(cache=True)(_directed_loop) if USE_NUMBA else None


def densify(P: np.ndarray, h: float) -> np.ndarray:
    """Polyline ``P`` with extra points so that consecutive points are at
    most ``h`` apart."""
    out = [P[:1]]
    for a, b in zip(P[:-1], P[1:]):
        k = max(1, int(np.ceil(np.linalg.norm(b - a) / h)))
        s = np.arange(1, k + 1)[:, None] / k
        out.append(a + s * (b - a))
    return np.vstack(out)


def hausdorff(A, B, period=None, h: float = 5e-3, use_numba: Optional[bool] = None) -> float:
    """Hausdorff distance between two polylines (densified to spacing ``h``)."""
    A = np.ascontiguousarray(densify(np.asarray(A, float), h))
    B = np.ascontiguousarray(densify(np.asarray(B, float), h))
    period = np.zeros(A.shape[1]) if period is None else np.asarray(period, float)
    if use_numba is None:
        use_numba = _directed_numba is not None
    f = _directed_numba if use_numba else _directed_numpy
    return max(f(A, B, period), f(B, A, period))


# -- detection -------------------------------------------------------------------------

def _side(y: RestPoint, orbit: ConnectingOrbit, problem: FlowProblem) -> int:
    """Side of ``y`` on which an orbit out of ``y`` leaves (unstable coordinate)."""
    i = orbit.diagnostics.get("launch_index", 1)
    u = y.spectral_coordinates()[:1] @ problem.domain.displacement(y.location, orbit.y[i])
    return 1 if u[0] > 0 else -1


def _arc_end(sweep: Sweep, a: float, b: float) -> int:
    """Sink reached by the launch angles strictly between ``a`` and ``b``
    (mod 2 pi); ``-1`` when they disagree or none was sampled."""
    ang = np.mod(sweep.angles - a, 2 * np.pi)
    width = np.mod(b - a, 2 * np.pi) or 2 * np.pi
    inside = (ang > 1e-9 * width) & (ang < width * (1 - 1e-9))
    ends = set(sweep.ends[inside].tolist())
    return ends.pop() if len(ends) == 1 else -1


def broken_lines(problem: FlowProblem, rest_points: List[RestPoint], sweep: Sweep,
                 orbits_from: Dict[int, List[ConnectingOrbit]]) -> List[BrokenPair]:
    """Pairs of broken lines bounding the arcs of the launch family of
    ``sweep.source``.  ``orbits_from[y]`` are the signed orbits out of each
    saddle ``y``."""
    crit = sweep.critical
    pairs: List[BrokenPair] = []
    if not crit:
        return pairs
    angles = [a for a, _ in crit]
    lines_after, lines_before = [], []
    for i, (a, orb) in enumerate(crit):
        y = rest_points[orb.target]
        sides = orb.diagnostics.get("sides", (0, 0))
        nxt = angles[(i + 1) % len(crit)]
        prv = angles[i - 1]
        for toward, side, arc, store in ((1, sides[1], (a, nxt), lines_after),
                                         (-1, sides[0], (prv, a), lines_before)):
            z = _arc_end(sweep, *arc)
            second = [o for o in orbits_from.get(y.label, []) if o.target == z
                      and _side(y, o, problem) == side]
            store.append(BrokenLine(orb, second[0], a, toward, arc) if len(second) == 1 else None)
    for i in range(len(crit)):
        a, b = lines_after[i], lines_before[(i + 1) % len(crit)]
        if a is not None and b is not None:
            pairs.append(BrokenPair(a, b))
    return pairs


def broken_flow_lines(problem: FlowProblem, rest_points: List[RestPoint], sweep: Sweep,
                      orbits_from: Dict[int, List[ConnectingOrbit]], z: RestPoint) -> List[BrokenLine]:
    """Broken lines from ``sweep.source`` to ``z``, in pairing order."""
    out = []
    for p in broken_lines(problem, rest_points, sweep, orbits_from):
        if p.a.second.target == z.label:
            out.extend([p.a, p.b])
    return out


def _level_arclength(problem: FlowProblem, sweep: Sweep, level: float):
    """Cumulative arc length of the curve where the launch family crosses
    the Lyapunov level closest to ``level``, at the sampled angles."""
    li = int(np.argmin(np.abs(sweep.levels - level)))
    C = sweep.signatures[:, li, :]
    steps = problem.domain.distance(C[:-1], C[1:])
    closing = float(problem.domain.distance(C[-1], C[0]))
    return np.concatenate([[0.0], np.cumsum(steps)]), closing


def convergence_profile(problem: FlowProblem, rest_points: List[RestPoint], sweep: Sweep,
                        line: BrokenLine, offsets: Sequence[float] = (1e-1, 1e-2, 1e-3)) -> List[float]:
    """Hausdorff distances between orbit closures of the family and the
    broken line ``line``.

    The family is parametrised by arc length along its crossing with the
    Lyapunov level halfway between the source and the saddle; ``offsets``
    are fractions of the arc length of the adjacent arc, measured from the
    broken line toward that arc.
    """
    x = rest_points[line.first.source]
    y = rest_points[line.first.target]
    z = rest_points[line.second.target]
    s, closing = _level_arclength(problem, sweep, 0.5 * (x.value + y.value))
    ang = sweep.angles
    total = s[-1] + closing
    # unwrap one turn so that arcs crossing the first sample are monotone
    base = ang[0]
    ang2 = np.concatenate([ang, ang + 2 * np.pi, [base + 4 * np.pi]])
    s2 = np.concatenate([s, s + total, [2 * total]])
    lo = line.arc[0] + (2 * np.pi if line.arc[0] < base else 0.0)
    hi = line.arc[1]
    while hi <= lo:
        hi += 2 * np.pi
    s_lo, s_hi = np.interp([lo, hi], ang2, s2)
    width = s_hi - s_lo
    s_star = s_lo if line.toward > 0 else s_hi
    targets = [s_star + line.toward * d * width for d in offsets]
    angles = np.interp(targets, s2, ang2)
    sh = sweep.shooter if sweep.shooter is not None else Shooter(problem, rest_points, x)
    out = []
    broken = line.points()
    for a, tr in zip(angles, sh._at(angles)):
        orb = sh.truncated(tr, z, len(tr.t) - 1, float(a))
        out.append(hausdorff(orb.y, broken, problem.domain.period))
    return out
