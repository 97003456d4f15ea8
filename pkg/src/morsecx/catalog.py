"""Built-in flows with known rest points and boundary operators."""
from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from . import expr as ex
from .fields import ScalarFunction, VectorField, fd_jacobian, field_from_nodes, negative_gradient
from .grassmann import Subspace
from .morse.problem import Domain, FlowProblem, Tolerances
from .ode_operator import smooth_step


def fibonacci_sphere(k: int) -> np.ndarray:
    """``k`` nearly uniform points on the unit sphere."""
    i = np.arange(k) + 0.5
    z = 1 - 2 * i / k
    rho = np.sqrt(1 - z * z)
    phi = np.pi * (3 - np.sqrt(5)) * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _box_samples(lo, hi, seed=0):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)

    def samples(k):
        rng = np.random.default_rng(seed)
        return lo + (hi - lo) * rng.random((k, lo.size))

    return samples


def _gradient_problem(name, f_text, n, domain, seeds, samples, V=None, **meta) -> FlowProblem:
    node = ex.parse(f_text, n)
    f = ScalarFunction(node, n)
    field = negative_gradient(f, name)
    V = Subspace.zero(n) if V is None else V
    return FlowProblem(name, field, f, V, domain, np.asarray(seeds, float), samples,
                       Tolerances(), dict(meta, f=f_text))


def _sphere_problem(name, h_text, kappa):
    r2 = "(x1^2 + x2^2 + x3^2)"
    text = f"{h_text} + {0.5 * kappa!r}*({r2} - 1)^2"
    return _gradient_problem(name, text, 3, Domain.box([-2] * 3, [2] * 3),
                             fibonacci_sphere(60), fibonacci_sphere, kappa=kappa)


def sphere_height(kappa: float = 1.0) -> FlowProblem:
    """Height function on the unit sphere in R^3, normally attracting.

    One maximum at the north pole and one minimum at the south pole.
    """
    return _sphere_problem("sphere_height", "x3/sqrt(x1^2 + x2^2 + x3^2)", kappa)


def pinched_sphere(alpha: float = 0.65, kappa: float = 1.0) -> FlowProblem:
    """Sphere with height ``z - alpha x^2`` (``alpha > 1/2``).

    Rest points: maximum N, saddle S at the south pole and two minima
    ``P = (+-sqrt(1 - 1/(4 alpha^2)), 0, -1/(2 alpha))``.
    """
    r2 = "(x1^2 + x2^2 + x3^2)"
    h = f"x3/sqrt{r2} - {alpha!r}*x1^2/{r2}"
    return _sphere_problem("pinched_sphere", h, kappa)


def tilted_torus(R: float = 2.0, r: float = 1.0, tilt: float = 0.1) -> FlowProblem:
    """Tilted height function on the embedded torus in angle coordinates.

    ``x1`` is the longitude and ``x2`` the meridian angle; the field is the
    negative gradient for the induced metric ``diag((R + r cos x2)^2, r^2)``.
    """
    c, s = float(np.cos(tilt)), float(np.sin(tilt))
    h_text = f"{c!r}*({R!r} + {r!r}*cos(x2))*cos(x1) + {s * r!r}*sin(x2)"
    node = ex.parse(h_text, 2)
    f = ScalarFunction(node, 2)
    g11 = ex.parse(f"({R!r} + {r!r}*cos(x2))^2", 2)
    nodes = [ex.neg(ex.div(f.grad_nodes[0], g11)), ex.neg(ex.div(f.grad_nodes[1], ex.num(r * r)))]
    field = field_from_nodes(nodes, "tilted_torus")
    dom = Domain.torus(2)
    seeds = dom.grid(9)

    def samples(k):
        m = max(2, int(np.ceil(np.sqrt(k))))
        return dom.grid(m)

    return FlowProblem("tilted_torus", field, f, Subspace.zero(2), dom, seeds, samples,
                       Tolerances(), dict(f=h_text, R=R, r=r, tilt=tilt))


def double_well() -> FlowProblem:
    """``f = (x^2 - 1)^2 + y^2``: one saddle between two minima."""
    lo, hi = [-2.0, -2.0], [2.0, 2.0]
    seeds = Domain.box(lo, hi).grid(7)
    return _gradient_problem("double_well", "(x1^2 - 1)^2 + x2^2", 2, Domain.box(lo, hi), seeds,
                             _box_samples(lo, hi))


def ex2_quadratic(K: int = 10, eps: float = 0.01) -> FlowProblem:
    """Quadratic saddle of signature ``(K, K)`` plus a small bump.

    ``f = 1/2 |xi_+|^2 - 1/2 |xi_-|^2 + eps exp(-|xi|^2/4) sum_k xi_k^2 / 2^k``
    where ``xi_+`` are the first ``K`` coordinates.  The comparison space is
    the span of the last ``K`` coordinates, so the origin has relative
    index zero.
    """
    n = 2 * K
    quad = " + ".join(f"{0.5 if i < K else -0.5!r}*x{i + 1}^2" for i in range(n))
    norm2 = " + ".join(f"x{i + 1}^2" for i in range(n))
    bump = " + ".join(f"x{k}^2/{2.0 ** k!r}" for k in range(1, K + 1))
    text = f"{quad} + {eps!r}*exp(-({norm2})/4)*({bump})"
    V = Subspace.coordinate(n, range(K, n))
    lo, hi = [-3.0] * n, [3.0] * n
    rng = np.random.default_rng(7)
    seeds = np.vstack([np.zeros(n), 0.05 * rng.standard_normal((4, n))])
    return _gradient_problem("ex2_quadratic", text, n, Domain.box(lo, hi), seeds,
                             _box_samples(lo, hi), V=V, K=K, eps=eps)


def _psi(s):
    return smooth_step(np.clip(s, 0.0, 1.0))


def exc_profiles(K: int):
    """The scalar profiles ``(f_k, g_k)`` of :func:`exc_field`, vectorized in
    ``k = 1..K`` (second argument) and in ``s``."""
    k = np.arange(1, K + 1, dtype=float)

    def f_k(s):
        d = 1.0 / (2 * k)
        w = _psi(s - 2.0)
        S = s * _psi((s + d) / d) * (1 - w) + 2.5 * w
        return np.sqrt(S + 1.0 / k)

    def g_k(s):
        a = 1.0 / (2 * k)
        rise = _psi((s - (1 - 1.0 / k)) / a)
        fall = _psi(((1 + 1.0 / k + a) - s) / a)
        return rise * fall

    return f_k, g_k


def exc_field(K: int = 20) -> VectorField:
    """Field on R^(2K) whose flow from ``e_-k`` is
    ``e_-k + (t^2/4 + t/sqrt(k)) e_k`` for ``0 <= t <= 1``.

    Coordinates ``0..K-1`` hold ``xi . e_-k`` and ``K..2K-1`` hold
    ``xi . e_k``.  The time-one map is not locally Lipschitz at the origin
    uniformly in ``K``: the displacement of ``e_-k`` stays near
    ``1/4`` while the slope at small times grows like ``sqrt(k)``.
    """
    f_k, g_k = exc_profiles(K)

    def F_vec(X):
        X = np.atleast_2d(X)
        lo, hi = X[:, :K], X[:, K:]
        chi = _psi(3.0 - np.linalg.norm(X, axis=1))
        out = np.zeros_like(X)
        out[:, K:] = chi[:, None] * g_k(lo) * f_k(hi)
        return out

    def J_vec(X):
        F1 = lambda x: F_vec(x.reshape(1, -1))[0]
        return np.array([fd_jacobian(F1, x) for x in np.atleast_2d(X)])

    return VectorField(2 * K, F_vec, J_vec, None, None, "exc")


BUILTINS: Dict[str, Callable[..., FlowProblem]] = {
    "sphere_height": sphere_height,
    "pinched_sphere": pinched_sphere,
    "tilted_torus": tilted_torus,
    "double_well": double_well,
    "ex2_quadratic": ex2_quadratic,
}
