"""Subspaces of R^n, Fredholm pairs and their orientations.

A subspace is stored through an orthonormal basis in canonical form.  An
SVD gives some orthonormal basis ``U``; since it is only determined up to a
rotation (all singular values of an orthonormal spanning set coincide), it
is replaced by the eigenbasis of the compression ``U^T diag(w) U`` of a fixed
weight operator with distinct weights ``w_i = sqrt(i + 1)``, ordered by
eigenvalue.  That basis depends only on the subspace.  Every column is then
flipped so that its entry of largest magnitude is positive (ties go to the
lowest index).  Coordinate subspaces get sorted standard basis vectors.

Orientations of a pair ``(V, W)`` live on the line
``Det(V, W) = Lambda^max(V & W) (x) Lambda^max((V + W)^perp)^*``.  In finite
dimension this line is canonically isomorphic to
``Det V (x) Det W (x) (Det R^n)^*`` through the frame map

    (a, c)  ->  [a v'] (x) [a w'] (x) [a v' w' c]^*

where ``a`` spans ``V & W``, ``c`` spans the cosum and ``v'``, ``w'``
supplement ``a`` in ``V`` and ``W``.  The product ``o_X ^ o`` then only acts
on the first factor, which makes associativity and the sign rules exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import subspace_angles

from .errors import DirectSumFailure, RankDeficient

TAU_RANK = 1e-8


def _weights(n: int) -> np.ndarray:
    return np.sqrt(np.arange(1.0, n + 1.0))


def _canonical(U: np.ndarray) -> np.ndarray:
    """Canonical basis of the span of the orthonormal columns of ``U``."""
    k = U.shape[1]
    if k == 0:
        return U
    if k > 1:
        S = U.T @ (_weights(U.shape[0])[:, None] * U)
        _, R = np.linalg.eigh(0.5 * (S + S.T))
        U = U @ R
    return _canonical_signs(U)


def _canonical_signs(B: np.ndarray) -> np.ndarray:
    if B.shape[1] == 0:
        return B
    idx = np.argmax(np.abs(B), axis=0)
    s = np.sign(B[idx, np.arange(B.shape[1])])
    s[s == 0] = 1.0
    return B * s


def orthonormal_span(M: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    """Canonical orthonormal basis of the column span of ``M``.

    Singular values below ``tol`` (default ``1e-8 * sigma_max``) are treated
    as zero.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    n = M.shape[0]
    if M.shape[1] == 0 or not np.any(M):
        return np.zeros((n, 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if tol is None:
        tol = TAU_RANK * s[0]
    r = int(np.sum(s > tol))
    return _canonical(U[:, :r])


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^n with an orthonormal canonical basis."""

    basis: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def span(cls, M, tol: Optional[float] = None) -> "Subspace":
        """Column span of ``M``, silently dropping dependent columns."""
        return cls(orthonormal_span(M, tol))

    @classmethod
    def from_basis(cls, M) -> "Subspace":
        """Subspace spanned by ``M``, which must have full column rank."""
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M[:, None]
        out = orthonormal_span(M)
        if out.shape[1] != M.shape[1]:
            raise RankDeficient(f"basis of {M.shape[1]} columns has rank {out.shape[1]}")
        return cls(out)

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @classmethod
    def coordinate(cls, n: int, indices) -> "Subspace":
        """Span of the standard basis vectors ``e_i`` for ``i`` in ``indices``."""
        return cls(np.eye(n)[:, sorted(indices)])

    def projector(self) -> np.ndarray:
        return projector(self)

    def complement(self) -> "Subspace":
        """Orthogonal complement."""
        n, k = self.basis.shape
        if k == 0:
            return Subspace.full(n)
        U, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(_canonical(U[:, k:]))

    def __add__(self, other: "Subspace") -> "Subspace":
        return Subspace.span(np.hstack([self.basis, other.basis]))

    def contains(self, v, tol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=float).reshape(self.ambient_dim, -1)
        r = v - self.basis @ (self.basis.T @ v)
        return bool(np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(v)))

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def projector(V: Subspace) -> np.ndarray:
    """Orthogonal projector onto ``V``."""
    return V.basis @ V.basis.T


def subspace_distance(V: Subspace, W: Subspace) -> float:
    """Gap metric ``||P_V - P_W||_2``; equals 1 when dimensions differ."""
    if V.dim != W.dim:
        return 1.0
    if V.dim == 0:
        return 0.0
    return float(min(1.0, np.linalg.norm(projector(V) - projector(W), 2)))


def principal_angles(V: Subspace, W: Subspace) -> np.ndarray:
    """Principal angles in increasing order (empty if either space is 0)."""
    if V.dim == 0 or W.dim == 0:
        return np.zeros(0)
    return np.sort(subspace_angles(V.basis, W.basis))


@dataclass(frozen=True, eq=False)
class FredholmPairData:
    """Intersection, cosum ``(V + W)^perp`` and index of a pair ``(V, W)``."""

    first: Subspace
    second: Subspace
    intersection: Subspace
    cosum: Subspace
    index: int


def pair_data(V: Subspace, W: Subspace, tol: Optional[float] = None) -> FredholmPairData:
    """Intersection and cosum of ``V`` and ``W`` from one SVD of ``[B_V | -B_W]``."""
    n = V.ambient_dim
    if W.ambient_dim != n:
        raise ValueError("subspaces live in different ambient spaces")
    kv, kw = V.dim, W.dim
    M = np.hstack([V.basis, -W.basis])
    if kv + kw == 0:
        return FredholmPairData(V, W, Subspace.zero(n), Subspace.full(n), -n)
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    if tol is None:
        tol = TAU_RANK * (s[0] if s.size else 1.0)
    r = int(np.sum(s > tol))
    null = Vt[r:].T
    inter = Subspace.span(V.basis @ null[:kv], tol=1e-3) if null.shape[1] else Subspace.zero(n)
    cosum = Subspace(_canonical(U[:, r:]))
    return FredholmPairData(V, W, inter, cosum, inter.dim - cosum.dim)


def relative_dimension(V: Subspace, W: Subspace) -> int:
    """``dim(V & W^perp) - dim(V^perp & W)``, the index of ``(V, W^perp)``."""
    return pair_data(V, W.complement()).index


def is_compact_perturbation(P: np.ndarray, Q: np.ndarray) -> bool:
    """Every operator is compact in finite dimension."""
    return True


def is_fredholm_pair(V: Subspace, W: Subspace) -> bool:
    """Every pair is Fredholm in finite dimension."""
    return True


def index_additivity_check(V: Subspace, W: Subspace, Z: Subspace) -> bool:
    """Check ``ind(W, Z) = ind(V, Z) + dim(W, V)``."""
    return pair_data(W, Z).index == pair_data(V, Z).index + relative_dimension(W, V)


def geodesic(V: Subspace, W: Subspace, s: float) -> Subspace:
    """Point at fraction ``s`` on the shortest Grassmann geodesic from V to W."""
    if V.dim != W.dim:
        raise ValueError("geodesic needs subspaces of equal dimension")
    if V.dim == 0:
        return V
    U, sig, Yt = np.linalg.svd(V.basis.T @ W.basis)
    u = V.basis @ U
    w = W.basis @ Yt.T
    theta = np.arccos(np.clip(sig, -1.0, 1.0))
    d = w - u * np.cos(theta)
    norms = np.linalg.norm(d, axis=0)
    d = np.where(norms > 1e-14, d / np.where(norms > 1e-14, norms, 1.0), 0.0)
    return Subspace.span(u * np.cos(s * theta) + d * np.sin(s * theta))


# -- orientations -----------------------------------------------------------

Subject = Union[Subspace, FredholmPairData]


@dataclass(frozen=True, eq=False)
class Orientation:
    """Orientation of a subspace or of the determinant line of a pair.

    ``sign`` is taken relative to the canonical basis of the subspace, or to
    the canonical bases of intersection and cosum for a pair.
    """

    subject: Subject
    sign: int

    @property
    def sign_basis(self):
        """An ordered basis representing the orientation.

        For a pair this is ``(intersection basis, cosum basis)``.  When both
        are zero-dimensional the sign cannot be carried by a basis and only
        ``sign`` is meaningful.
        """
        if isinstance(self.subject, Subspace):
            return _signed(self.subject.basis, self.sign)
        a, c = self.subject.intersection.basis, self.subject.cosum.basis
        if a.shape[1]:
            return _signed(a, self.sign), c
        return a, _signed(c, self.sign)

    def __neg__(self) -> "Orientation":
        return Orientation(self.subject, -self.sign)


def _signed(B: np.ndarray, sign: int) -> np.ndarray:
    if B.shape[1] == 0 or sign > 0:
        return B
    B = B.copy()
    B[:, 0] = -B[:, 0]
    return B


def _sgn(x: float) -> int:
    if x == 0 or not np.isfinite(x):
        raise DirectSumFailure("degenerate frame while comparing orientations")
    return 1 if x > 0 else -1


def _relative_sign(A: np.ndarray, B: np.ndarray) -> int:
    """Sign of the change of basis between two bases of the same space.

    ``A`` must be orthonormal.
    """
    if A.shape[1] == 0:
        return 1
    return _sgn(np.linalg.det(A.T @ B))


def orient_subspace(V: Subspace, basis) -> Orientation:
    """Orientation of ``V`` induced by an ordered basis of it."""
    basis = np.asarray(basis, dtype=float).reshape(V.ambient_dim, -1)
    if basis.shape[1] != V.dim:
        raise ValueError("basis size does not match the dimension")
    return Orientation(V, _relative_sign(V.basis, basis))


def orient_pair(pd: FredholmPairData, a=None, c=None) -> Orientation:
    """Orientation of ``Det(V, W)`` from bases ``a`` of the intersection and
    ``c`` of the cosum (canonical bases when omitted)."""
    s = 1
    if a is not None:
        s *= _relative_sign(pd.intersection.basis, np.asarray(a, dtype=float))
    if c is not None:
        s *= _relative_sign(pd.cosum.basis, np.asarray(c, dtype=float))
    return Orientation(pd, s)


def _supplement(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(a) in span(B)."""
    k = B.shape[1] - a.shape[1]
    if k == 0:
        return np.zeros((B.shape[0], 0))
    R = B - a @ (a.T @ B)
    U, _, _ = np.linalg.svd(R, full_matrices=False)
    return _canonical(U[:, :k])


def _frames(pd: FredholmPairData):
    a = pd.intersection.basis
    v = _supplement(a, pd.first.basis)
    w = _supplement(a, pd.second.basis)
    c = pd.cosum.basis
    return np.hstack([a, v]), np.hstack([a, w]), np.hstack([a, v, w, c])


def _det_sign(M: np.ndarray) -> int:
    if M.shape[1] == 0:
        return 1
    return _sgn(np.linalg.det(M))


def orient_product(oX: Orientation, oP: Orientation) -> Orientation:
    """Orientation of ``(X + V, W)`` from orientations of ``X`` and ``(V, W)``.

    Requires ``X & V = 0``.
    """
    X = oX.subject
    pd = oP.subject
    if not isinstance(X, Subspace) or not isinstance(pd, FredholmPairData):
        raise TypeError("orient_product takes a subspace and a pair orientation")
    if pair_data(X, pd.first).intersection.dim:
        raise DirectSumFailure("X meets the first space of the pair")
    T1, T2, T3 = _frames(pd)
    XV = np.hstack([X.basis, T1])
    new = pair_data(Subspace.span(XV), pd.second)
    N1, N2, N3 = _frames(new)
    # the sign is carried explicitly so that the zero space is handled too
    s = oX.sign * oP.sign * _relative_sign(N1, XV) * _relative_sign(N2, T2)
    s *= _det_sign(N3) * _det_sign(T3)
    return Orientation(new, s)


def wedge(oX: Orientation, oY: Orientation) -> Orientation:
    """Orientation of ``X + Y`` given by the concatenated bases (X & Y = 0)."""
    B = np.hstack([oX.subject.basis, oY.subject.basis])
    S = Subspace.span(B) if B.shape[1] else Subspace.zero(B.shape[0])
    if S.dim != B.shape[1]:
        raise DirectSumFailure("subspaces are not in direct sum")
    return Orientation(S, oX.sign * oY.sign * _relative_sign(S.basis, B))


def pair_orientation_from_first(oS: Orientation, W: Subspace) -> Orientation:
    """Orientation of ``(S, W)`` corresponding to an orientation of ``S``.

    ``W`` carries its canonical orientation and R^n the standard one.
    """
    pd = pair_data(oS.subject, W)
    T1, T2, T3 = _frames(pd)
    s = oS.sign * _relative_sign(T1, oS.subject.basis) * _relative_sign(W.basis, T2) * _det_sign(T3)
    return Orientation(pd, s)


def first_from_pair_orientation(oP: Orientation) -> Orientation:
    """Inverse of :func:`pair_orientation_from_first`."""
    S = oP.subject.first
    trial = pair_orientation_from_first(Orientation(S, 1), oP.subject.second)
    return Orientation(S, trial.sign * oP.sign)
