"""The pipeline: rest points, connecting orbits, signs, complex, homology."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..grassmann import Subspace, relative_dimension
from .broken import BrokenPair, broken_lines
from .complex import ChainComplex, Homology, assemble_complex, homology, morse_polynomial_check
from .orbits import ConnectingOrbit, Sweep, shoot
from .problem import FlowProblem, RestPoint
from .restpoints import find_rest_points
from .signs import orbit_sign


def relative_index(x: RestPoint, V: Subspace) -> int:
    """Relative Morse index ``dim(H^u_x, V)``."""
    return relative_dimension(x.H_u, V)


@dataclass(eq=False)
class MorseComplexReport:
    """Rest points, signed orbits, boundary matrices and homology."""

    problem: str
    rest_points: List[RestPoint]
    orbits: List[ConnectingOrbit]
    complex: ChainComplex
    homology: Homology
    morse_poly_ok: bool
    morse_Q: Dict[int, int]
    broken: List[BrokenPair] = field(default_factory=list)
    sweeps: Dict[int, Sweep] = field(default_factory=dict)
    non_hyperbolic: List[Tuple[np.ndarray, str]] = field(default_factory=list)

    @property
    def betti(self) -> List[int]:
        q = sorted(self.homology.betti)
        return [self.homology.betti[k] for k in q]

    def counts(self) -> List[Tuple[int, int, int]]:
        return sorted((x, y, c) for (x, y), c in self.complex.counts.items())

    def checks(self) -> Dict[str, bool]:
        """Structural identities verified on this report."""
        ubu = all(o.diagnostics.get("tangent_intersection_dim") == o.diagnostics.get("expected_intersection_dim")
                  for o in self.orbits)
        coro = all(all(i == o.diagnostics.get("expected_stable_pair_index")
                       for i in o.diagnostics.get("stable_pair_indices", []))
                   for o in self.orbits)
        decreasing = all(_f_decreasing(o) for o in self.orbits)
        return {
            "boundary_square_zero": self.complex.square_zero_defect() == 0,
            "morse_relations": self.morse_poly_ok,
            "intersection_dimension": ubu,
            "stable_pair_index": coro,
            "broken_lines_cancel": all(p.cancels for p in self.broken),
            "lyapunov_decreasing": decreasing,
            "rest_points_hyperbolic": not self.non_hyperbolic,
        }


def _f_decreasing(o: ConnectingOrbit, slack: float = 1e-12) -> bool:
    """f decreases along the samples; near rest points consecutive samples
    differ by roundoff only, hence the slack."""
    v = o.diagnostics.get("f_values")
    return v is None or bool(np.all(np.diff(v) < slack) and v[-1] < v[0])


def _orbits_from(problem, rps, x, phase=0.0):
    orbs, sw = shoot(problem, rps, x, phase=phase)
    for o in orbs:
        orbit_sign(problem, o, x, rps[o.target])
        o.diagnostics["f_values"] = problem.f.values(o.y[1:-1])
    return x.label, orbs, sw


def analyze(problem: FlowProblem, rest_points: Optional[List[RestPoint]] = None, threads: int = 1,
            flip: Optional[Tuple[int, int, int]] = None, with_broken: bool = True,
            phase: float = 0.0) -> MorseComplexReport:
    """Run the whole pipeline on ``problem``.

    ``threads`` fans the orbit searches out over source rest points; results
    are merged in label order.  ``flip = (source, target, k)`` negates the
    sign of the ``k``-th orbit between the two rest points (a negative
    control for the square-zero check).  ``phase`` rotates the initial
    grid of the launch-angle sweeps.
    """
    rejected: List[Tuple[np.ndarray, str]] = []
    rps = find_rest_points(problem, rejected=rejected) if rest_points is None else rest_points
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda x: _orbits_from(problem, rps, x, phase), rps))
    else:
        results = [_orbits_from(problem, rps, x, phase) for x in rps]
    results.sort(key=lambda r: r[0])
    orbits: List[ConnectingOrbit] = []
    sweeps: Dict[int, Sweep] = {}
    by_source: Dict[int, List[ConnectingOrbit]] = {}
    for lab, orbs, sw in results:
        orbs = sorted(orbs, key=lambda o: (o.target, o.param))
        by_source[lab] = orbs
        orbits.extend(orbs)
        if sw is not None:
            sweeps[lab] = sw
    if flip is not None:
        sel = [o for o in orbits if (o.source, o.target) == tuple(flip[:2])]
        sel[flip[2]].sign = -sel[flip[2]].sign
    pairs: List[BrokenPair] = []
    if with_broken:
        for lab in sorted(sweeps):
            pairs.extend(broken_lines(problem, rps, sweeps[lab], by_source))
    degrees = {p.label: p.relative_index for p in rps}
    cx = assemble_complex(degrees, [(o.source, o.target, o.sign) for o in orbits])
    hom = homology(cx.chain_dims, cx.boundaries)
    ok, Q = morse_polynomial_check(cx.chain_dims, hom.betti, hom.ranks)
    return MorseComplexReport(problem.name, rps, orbits, cx, hom, ok, Q, pairs, sweeps, rejected)
