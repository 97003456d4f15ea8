"""Rest points by damped Newton iteration from seed points."""
from __future__ import annotations

from typing import List, Optional

import numpy as np

from ..errors import NonHyperbolicRestPoint, NotHyperbolic
from ..grassmann import Orientation, pair_data, relative_dimension
from ..hyperbolic import split
from .problem import FlowProblem, RestPoint


def newton(problem: FlowProblem, x0, tol: float = 1e-10, max_iter: int = 60) -> Optional[np.ndarray]:
    """Damped Newton for ``F(x) = 0``; ``None`` when it fails or leaves the domain."""
    x = np.asarray(x0, dtype=float).copy()
    res = np.linalg.norm(problem.F(x))
    for _ in range(max_iter):
        if not np.isfinite(res):
            return None
        if res < tol:
            return problem.domain.wrap(x)
        try:
            step = np.linalg.solve(problem.J(x), -problem.F(x))
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(problem.J(x), -problem.F(x), rcond=None)[0]
        a = 1.0
        while a > 1e-6:
            trial = x + a * step
            r = np.linalg.norm(problem.F(trial))
            if np.isfinite(r) and r < res:
                break
            a *= 0.5
        else:
            return None
        x, res = trial, r
        if not problem.domain.contains(problem.domain.wrap(x)):
            return None
    return problem.domain.wrap(x) if res < tol else None


def _dedup(problem: FlowProblem, pts: List[np.ndarray], radius: float) -> List[np.ndarray]:
    out: List[np.ndarray] = []
    for p in pts:
        if all(problem.domain.distance(p, q) > radius for q in out):
            out.append(p)
    return out


def make_rest_point(problem: FlowProblem, x, label: int = 0) -> RestPoint:
    """Classify a zero ``x`` of the field: splitting, indices, orientation seed."""
    x = np.asarray(x, dtype=float)
    # a Newton residual r near a degenerate zero leaves a gap of order r^(2/3)
    # or smaller, so the gap must dominate the cube root of the residual
    tol = max(problem.tol.hyperbolic, problem.tol.newton ** (1 / 3))
    try:
        op = split(problem.J(x), tol)
    except NotHyperbolic as err:
        raise NonHyperbolicRestPoint(f"rest point at {np.round(x, 6).tolist()}: {err}") from None
    V = problem.comparison_V
    seed = Orientation(pair_data(op.V_minus, V), 1)
    try:
        eig = np.linalg.eigvalsh(problem.f.hessian(x))
        hess_ok = bool(np.min(np.abs(eig)) > 1e-6)
    except Exception:
        hess_ok = False
    return RestPoint(label, x, op, op.morse_index, relative_dimension(op.V_plus, V), seed,
                     float(problem.f(x)), hess_ok)


def find_rest_points(problem: FlowProblem, seeds=None, dedup: float = 1e-6,
                     rejected: Optional[list] = None) -> List[RestPoint]:
    """All rest points reached by Newton from ``seeds`` (default: the
    problem's seeds), sorted by decreasing Lyapunov value.

    Degenerate zeros raise NonHyperbolicRestPoint, unless ``rejected`` is a
    list: then they are appended to it as ``(location, message)`` and left
    out of the result.
    """
    seeds = problem.seeds if seeds is None else np.atleast_2d(seeds)
    found = [x for x in (newton(problem, s, problem.tol.newton) for s in seeds) if x is not None]
    found = _dedup(problem, found, dedup)
    found.sort(key=lambda p: (-float(problem.f(p)), tuple(np.round(p, 9))))
    out: List[RestPoint] = []
    for x in found:
        try:
            out.append(make_rest_point(problem, x, len(out)))
        except NonHyperbolicRestPoint as err:
            if rejected is None:
                raise
            rejected.append((x, str(err)))
    return out
