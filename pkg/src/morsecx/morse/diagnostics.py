"""Palais-Smale band diagnostic and the exc-field regression."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from ..integrate import integrate_orbits
from .problem import FlowProblem, RestPoint


@dataclass
class BandReport:
    """Rest points with ``a <= f <= b`` and the smallest ``|Df[F]|`` over
    sampled points of the band outside ``exclude``-balls around rest points."""

    a: float
    b: float
    rest_points: List[int]
    gap: float
    samples_used: int


def ps_band_diagnostic(problem: FlowProblem, rest_points: List[RestPoint], a: float, b: float,
                       n_samples: int = 4000, exclude: float = 0.1) -> BandReport:
    if not a < b:
        raise ValueError("need a < b")
    inside = [p.label for p in rest_points if a <= p.value <= b]
    X = problem.samples(n_samples)
    fv = problem.f.values(X)
    keep = (fv >= a) & (fv <= b)
    for p in rest_points:
        keep &= problem.domain.distance(X, p.location) > exclude
    X = X[keep]
    if X.shape[0] == 0:
        return BandReport(a, b, inside, float("nan"), 0)
    dfF = np.abs(np.einsum("ij,ij->i", problem.f.grads(X), problem.field.F_vec(X)))
    return BandReport(a, b, inside, float(np.min(dfF)), int(X.shape[0]))


def exc_exact(K: int, k: int, t: float) -> np.ndarray:
    """Closed form ``e_-k + (t^2/4 + t/sqrt(k)) e_k`` in the coordinates of
    :func:`morsecx.catalog.exc_field`."""
    x = np.zeros(2 * K)
    x[k - 1] = 1.0
    x[K + k - 1] = t * t / 4 + t / np.sqrt(k)
    return x


def exc_regression(K: int = 20, ks: Sequence[int] = (1, 4, 9),
                   times: Sequence[float] = (0.5, 1.0)) -> Dict[tuple, float]:
    """Max-norm error of the integrated exc flow against the closed form,
    keyed by ``(k, t)``."""
    from ..catalog import exc_field

    field = exc_field(K)
    X0 = np.array([exc_exact(K, k, 0.0) for k in ks])
    errs = {}
    for t in times:
        trs = integrate_orbits(field, X0, t, rtol=1e-12, atol=1e-12, record=False)
        for k, tr in zip(ks, trs):
            errs[(k, float(t))] = float(np.max(np.abs(tr.end - exc_exact(K, k, t))))
    return errs
