"""Independent reference computations used by the tests."""
from fractions import Fraction

import numpy as np

from morsecx.grassmann import Subspace


def exact_rank(M) -> int:
    """Rank of a rational matrix by fraction Gaussian elimination."""
    A = [[Fraction(v) for v in row] for row in np.asarray(M).tolist()]
    if not A:
        return 0
    rows, cols = len(A), len(A[0])
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        for i in range(rows):
            if i != r and A[i][c] != 0:
                f = A[i][c] / A[r][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        r += 1
        if r == rows:
            break
    return r


def integer_pair(rng, n, kv, kw, shared):
    """Integer spanning matrices of two subspaces forced to share
    ``shared`` directions (more if the dimensions force it)."""
    C = rng.integers(-3, 4, size=(n, shared))
    A = rng.integers(-3, 4, size=(n, kv - shared))
    B = rng.integers(-3, 4, size=(n, kw - shared))
    MV = np.hstack([C, A])
    MW = np.hstack([C, B])
    return MV, MW


def random_subspace(rng, n, k) -> Subspace:
    if k == 0:
        return Subspace.zero(n)
    return Subspace.span(rng.normal(size=(n, k)))


def det_sign(M) -> int:
    if M.shape[1] == 0:
        return 1
    d = np.linalg.det(M)
    return 1 if d > 0 else -1


def product_sign_oracle(oX, oP, c_new, rng) -> int:
    """Sign of ``o_X ^ o_(V,W)`` against the canonical orientation of the
    product pair, for pairs without intersection.

    ``oX`` is the orientation of X, ``oP`` the orientation of ``(V, W)`` and
    ``c_new`` the canonical cosum basis of ``(X + V, W)``.  Arbitrary
    (non-orthonormal) bases of V and W are used; they cancel.
    """
    V, W = oP.subject.first, oP.subject.second
    c_old = oP.sign_basis[1]
    v = V.basis @ (rng.normal(size=(V.dim, V.dim)) + 3 * np.eye(V.dim))
    w = W.basis @ (rng.normal(size=(W.dim, W.dim)) + 3 * np.eye(W.dim))
    x = oX.subject.basis
    s = oX.sign * det_sign(np.hstack([x, v, w, c_new])) * det_sign(np.hstack([v, w, c_old]))
    # a trivial cosum cannot carry the sign in a basis
    return s * oP.sign if c_old.shape[1] == 0 else s


def same_orientation(o1, o2) -> bool:
    """Whether two orientations of the same determinant line agree, compared
    through their representing bases."""
    if isinstance(o1.subject, Subspace):
        B1, B2 = o1.sign_basis, o2.sign_basis
        return B1.shape[1] == 0 and o1.sign == o2.sign or det_sign(B1.T @ B2) > 0
    a1, c1 = o1.sign_basis
    a2, c2 = o2.sign_basis
    if a1.shape[1] == 0 and c1.shape[1] == 0:
        return o1.sign == o2.sign
    s = 1
    if a1.shape[1]:
        s *= det_sign(a1.T @ a2)
    if c1.shape[1]:
        s *= det_sign(c1.T @ c2)
    return s > 0
