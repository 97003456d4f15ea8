"""Vector fields in the two forms consumed by the integrators."""
from __future__ import annotations

from typing import Callable, List, Optional, Sequence

import numpy as np

from . import expr as ex
from ._accel import USE_NUMBA

_counter = [0]


def _fresh(prefix: str) -> str:
    _counter[0] += 1
    return f"{prefix}_{_counter[0]}"


def fd_jacobian(F: Callable, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``F`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((F(x).size, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h * max(1.0, abs(x[j]))
        J[:, j] = (F(x + e) - F(x - e)) / (2 * e[j])
    return J


class VectorField:
    """Autonomous vector field on R^n.

    Parameters
    ----------
    n : int
        Dimension.
    F_vec : callable
        Row-wise evaluation, ``(N, n) -> (N, n)``.
    J_vec : callable, optional
        Row-wise Jacobian, ``(N, n) -> (N, n, n)``.  Central differences are
        used when omitted.
    F_nb, J_nb : numba dispatchers, optional
        Scalar versions for the compiled integrators.
    time_sign : float
        ``-1`` marks the reversed field ``-F``: the compiled integrators then
        run ``F_nb`` backward in time instead of compiling a negated copy.
    """

    def __init__(self, n: int, F_vec: Callable, J_vec: Optional[Callable] = None,
                 F_nb=None, J_nb=None, name: str = "field", time_sign: float = 1.0,
                 builder: Optional[Callable] = None):
        self.n = n
        self.F_vec = F_vec
        self.J_vec = J_vec
        self._nb = (F_nb, J_nb) if USE_NUMBA else (None, None)
        # builder() -> (F_nb, J_nb) compiles on first use
        self._builder = builder if USE_NUMBA else None
        self.name = name
        self.time_sign = time_sign
        self._reversed = None
        self._variational = None

    def _compiled(self):
        if self._builder is not None:
            self._nb = self._builder()
            self._builder = None
        return self._nb

    @property
    def F_nb(self):
        return self._compiled()[0]

    @property
    def J_nb(self):
        return self._compiled()[1]

    def F(self, x) -> np.ndarray:
        return self.F_vec(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def J(self, x) -> np.ndarray:
        if self.J_vec is not None:
            return self.J_vec(np.asarray(x, dtype=float).reshape(1, -1))[0]
        return fd_jacobian(self.F, x)

    def J_rows(self, X) -> np.ndarray:
        if self.J_vec is not None:
            return self.J_vec(X)
        return np.array([fd_jacobian(self.F, x) for x in X])

    def reversed(self) -> "VectorField":
        """The field ``-F``."""
        if self._reversed is None:
            Fv, Jv = self.F_vec, self.J_vec
            rev = VectorField(self.n, lambda X: -Fv(X),
                              None if Jv is None else (lambda X: -Jv(X)),
                              None, None, self.name + "_rev", -self.time_sign,
                              builder=self._compiled if USE_NUMBA else None)
            rev._reversed = self
            self._reversed = rev
        return self._reversed

    def variational(self) -> "VectorField":
        """Field on ``R^(n + n^2)`` carrying ``(y, M)`` with ``M' = DF(y) M``
        (numpy evaluation only; see :func:`integrate.variational_flow`)."""
        if self._variational is None:
            n = self.n

            def aug_vec(Z):
                Y = Z[:, :n]
                M = Z[:, n:].reshape(-1, n, n)
                out = np.empty_like(Z)
                out[:, :n] = self.F_vec(Y)
                out[:, n:] = np.matmul(self.J_rows(Y), M).reshape(Z.shape[0], -1)
                return out

            self._variational = VectorField(n + n * n, aug_vec, None, None, None, self.name + "_var")
        return self._variational


def field_from_nodes(nodes: Sequence[tuple], name: str = "field") -> VectorField:
    """Compile a list of expression trees into a :class:`VectorField`."""
    n = len(nodes)
    nodes = list(nodes)
    jac = [[ex.diff(nd, j) for j in range(n)] for nd in nodes]
    fname, jname = _fresh("F"), _fresh("J")
    _, F_vec = ex.compile_vector(nodes, fname, jit=False)
    _, J_vec = ex.compile_matrix(jac, jname, jit=False)

    def build():
        return ex.compile_vector(nodes, fname)[0], ex.compile_matrix(jac, jname)[0]

    return VectorField(n, F_vec, J_vec, name=name, builder=build)


class ScalarFunction:
    """Scalar function with symbolic gradient (used as Lyapunov function)."""

    def __init__(self, node: tuple, n: int):
        self.node = node
        self.n = n
        self.grad_nodes: List[tuple] = [ex.diff(node, j) for j in range(n)]
        _, self._f_vec = ex.compile_vector([node], _fresh("f"), jit=False)
        _, self._g_vec = ex.compile_vector(self.grad_nodes, _fresh("g"), jit=False)

    def __call__(self, x) -> float:
        return float(self._f_vec(np.asarray(x, dtype=float).reshape(1, -1))[0, 0])

    def values(self, X) -> np.ndarray:
        return self._f_vec(np.atleast_2d(np.asarray(X, dtype=float)))[:, 0]

    def grad(self, x) -> np.ndarray:
        return self._g_vec(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def grads(self, X) -> np.ndarray:
        return self._g_vec(np.atleast_2d(np.asarray(X, dtype=float)))

    def hessian(self, x) -> np.ndarray:
        return fd_jacobian(self.grad, x, 1e-5)


def negative_gradient(f: ScalarFunction, name: str = "gradient") -> VectorField:
    """The field ``-grad f`` with exact symbolic Jacobian."""
    return field_from_nodes([ex.neg(g) for g in f.grad_nodes], name)
