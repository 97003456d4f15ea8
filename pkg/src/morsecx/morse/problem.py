"""Problem description: vector field, Lyapunov function, comparison space."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..fields import ScalarFunction, VectorField
from ..grassmann import Orientation, Subspace
from ..hyperbolic import HyperbolicOperator


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances.

    ``orbit`` is the distance at which an orbit counts as having reached a
    rest point, ``shoot`` the radius of the sphere in the unstable space from
    which orbits are launched, ``transversal`` the smallest admissible
    principal angle between tangent spaces of invariant manifolds.
    """

    rank: float = 1e-8
    newton: float = 1e-10
    orbit: float = 1e-3
    hyperbolic: float = 1e-9
    rtol: float = 1e-10
    atol: float = 1e-12
    shoot: float = 1e-4
    transversal: float = 1e-4

    def scaled(self, factor: float) -> "Tolerances":
        """Every tolerance multiplied by ``factor``."""
        return replace(self, **{k: v * factor for k, v in asdict(self).items()})

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Domain:
    """Box in R^n whose coordinates may be periodic (``period[i] > 0``)."""

    lo: np.ndarray
    hi: np.ndarray
    period: np.ndarray

    @classmethod
    def box(cls, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        return cls(lo, hi, np.zeros_like(lo))

    @classmethod
    def torus(cls, n: int):
        return cls(np.zeros(n), np.full(n, 2 * np.pi), np.full(n, 2 * np.pi))

    @property
    def dim(self) -> int:
        return self.lo.size

    def wrap(self, x) -> np.ndarray:
        x = np.array(x, dtype=float)
        per = self.period > 0
        x[..., per] = np.mod(x[..., per], self.period[per])
        return x

    def displacement(self, x, y) -> np.ndarray:
        """``y - x`` with periodic coordinates reduced to ``[-P/2, P/2)``."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        per = self.period > 0
        if per.any():
            P = self.period[per]
            d[..., per] = d[..., per] - P * np.round(d[..., per] / P)
        return d

    def distance(self, x, y):
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    def contains(self, x) -> bool:
        per = self.period > 0
        x = np.asarray(x)
        return bool(np.all(per | ((x >= self.lo) & (x <= self.hi))))

    def grid(self, n: int) -> np.ndarray:
        axes = [np.linspace(a, b, n, endpoint=p == 0) for a, b, p in zip(self.lo, self.hi, self.period)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(eq=False)
class FlowProblem:
    """Gradient-like flow ``x' = F(x)`` with Lyapunov function ``f``.

    ``seeds`` are Newton starting points for rest-point search and
    ``samples(k)`` returns about ``k`` points of the phase space (used for
    Lyapunov and Palais-Smale diagnostics).
    """

    name: str
    field: VectorField
    f: ScalarFunction
    comparison_V: Subspace
    domain: Domain
    seeds: np.ndarray
    samples: Callable[[int], np.ndarray]
    tol: Tolerances = field(default_factory=Tolerances)
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.field.n

    def F(self, x) -> np.ndarray:
        return self.field.F(x)

    def J(self, x) -> np.ndarray:
        return self.field.J(x)

    def lyapunov_violations(self, n: int = 400, exclude: float = 1e-3) -> int:
        """Number of sampled points with ``Df(p)[F(p)] >= 0`` and
        ``|F(p)| > exclude``."""
        X = self.samples(n)
        FX = self.field.F_vec(X)
        dfF = np.einsum("ij,ij->i", self.f.grads(X), FX)
        moving = np.linalg.norm(FX, axis=1) > exclude
        return int(np.sum((dfF >= 0) & moving))


@dataclass(eq=False)
class RestPoint:
    """Hyperbolic rest point with its indices and orientation seed.

    ``orientation_seed`` orients the pair ``(H^s_x, comparison_V)``.
    """

    label: int
    location: np.ndarray
    jacobian_splitting: HyperbolicOperator
    morse_index: int
    relative_index: int
    orientation_seed: Orientation
    value: float
    hessian_ok: bool = True

    @property
    def H_u(self) -> Subspace:
        return self.jacobian_splitting.V_plus

    @property
    def H_s(self) -> Subspace:
        return self.jacobian_splitting.V_minus

    def spectral_coordinates(self) -> np.ndarray:
        """Rows mapping a vector to its ``(H_u, H_s)`` coordinates in the
        splitting bases (the spectral projections)."""
        T = np.hstack([self.H_u.basis, self.H_s.basis])
        return np.linalg.inv(T)

    def flipped(self) -> "RestPoint":
        return replace(self, orientation_seed=-self.orientation_seed)
