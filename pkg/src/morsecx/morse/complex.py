"""Morse complex over the integers: boundary matrices, Smith normal form,
homology and the Morse polynomial identity."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..errors import BoundaryNotSquareZero


def smith_normal_form(A) -> Tuple[np.ndarray, List[int]]:
    """Diagonal of the Smith normal form of an integer matrix.

    Returns ``(D, factors)`` with ``D`` the diagonal form (same shape as
    ``A``) and ``factors`` its nonzero diagonal entries, each dividing the
    next.  Plain Python integers are used, so entries cannot overflow.
    """
    M = [[int(v) for v in row] for row in np.asarray(A, dtype=object).reshape(np.shape(A))]
    m = len(M)
    n = len(M[0]) if m else 0
    t = 0
    while t < min(m, n):
        nz = [(abs(M[i][j]), i, j) for i in range(t, m) for j in range(t, n) if M[i][j]]
        if not nz:
            break
        _, i, j = min(nz)
        M[t], M[i] = M[i], M[t]
        for row in M:
            row[t], row[j] = row[j], row[t]
        done = False
        while not done:
            done = True
            p = M[t][t]
            for i in range(t + 1, m):
                q = M[i][t] // p
                if q:
                    M[i] = [a - q * b for a, b in zip(M[i], M[t])]
                if M[i][t]:
                    done = False
            for j in range(t + 1, n):
                q = M[t][j] // p
                if q:
                    for row in M:
                        row[j] -= q * row[t]
                if M[t][j]:
                    done = False
            if not done:
                # a remainder is smaller than the pivot: move it to the pivot
                nz = [(abs(M[i][t]), i, t) for i in range(t + 1, m) if M[i][t]]
                nz += [(abs(M[t][j]), t, j) for j in range(t + 1, n) if M[t][j]]
                _, i, j = min(nz)
                M[t], M[i] = M[i], M[t]
                for row in M:
                    row[t], row[j] = row[j], row[t]
                continue
            # pivot must divide the rest of the block
            bad = [(i, j) for i in range(t + 1, m) for j in range(t + 1, n) if M[i][j] % p]
            if bad:
                i, _ = bad[0]
                M[t] = [a + b for a, b in zip(M[t], M[i])]
                done = False
        if M[t][t] < 0:
            M[t] = [-a for a in M[t]]
        t += 1
    D = np.zeros((m, n), dtype=object)
    factors = []
    for k in range(min(m, n)):
        D[k, k] = M[k][k]
        if M[k][k]:
            factors.append(M[k][k])
    return D, factors


@dataclass
class Homology:
    betti: Dict[int, int]
    torsion: Dict[int, List[int]]
    ranks: Dict[int, int]


def homology(chain_dims: Dict[int, int], boundaries: Dict[int, np.ndarray]) -> Homology:
    """Integral homology of a complex with ``C_q`` of rank ``chain_dims[q]``
    and ``boundaries[q]: C_q -> C_{q-1}`` (shape ``(dim C_{q-1}, dim C_q)``)."""
    ranks, factors = {}, {}
    for q in chain_dims:
        B = boundaries.get(q)
        if B is None or B.size == 0:
            ranks[q], factors[q] = 0, []
        else:
            _, f = smith_normal_form(B)
            ranks[q], factors[q] = len(f), f
    betti, torsion = {}, {}
    for q, c in chain_dims.items():
        betti[q] = c - ranks.get(q, 0) - ranks.get(q + 1, 0)
        torsion[q] = [abs(d) for d in factors.get(q + 1, []) if abs(d) > 1]
    return Homology(betti, torsion, ranks)


def morse_polynomial_check(chain_dims: Dict[int, int], betti: Dict[int, int],
                           ranks: Dict[int, int]) -> Tuple[bool, Dict[int, int]]:
    """Check ``sum c_q t^q - sum b_q t^q = (1 + t) Q(t)`` with ``Q_q`` the
    rank of ``d_{q+1}``; returns ``(holds and Q >= 0, Q)``."""
    Q = {q: ranks.get(q + 1, 0) for q in chain_dims}
    degs = set(chain_dims) | {q + 1 for q in chain_dims}
    ok = all(Q[q] >= 0 for q in Q)
    for d in degs:
        lhs = chain_dims.get(d, 0) - betti.get(d, 0)
        rhs = Q.get(d, 0) + Q.get(d - 1, 0)
        ok &= lhs == rhs
    return bool(ok), Q


@dataclass
class ChainComplex:
    """Generators grouped by degree and integer boundary matrices."""

    generators: Dict[int, List[int]]
    boundaries: Dict[int, np.ndarray]
    counts: Dict[Tuple[int, int], int] = field(default_factory=dict)

    @property
    def chain_dims(self) -> Dict[int, int]:
        return {q: len(g) for q, g in sorted(self.generators.items())}

    def square_zero_defect(self) -> int:
        """Largest entry of any ``d_{q-1} d_q``."""
        worst = 0
        for q, B in self.boundaries.items():
            A = self.boundaries.get(q - 1)
            if A is None or A.size == 0 or B.size == 0:
                continue
            worst = max(worst, int(np.max(np.abs(A.astype(np.int64) @ B.astype(np.int64)))))
        return worst


def assemble_complex(degrees: Dict[int, int], signed_orbits) -> ChainComplex:
    """Chain complex from rest-point degrees and signed orbits.

    ``degrees`` maps rest-point labels to their (relative) index and
    ``signed_orbits`` yields ``(source, target, sign)``.  The matrix entry
    for ``(y, x)`` is the sum of signs of orbits from ``x`` to ``y``.
    Raises BoundaryNotSquareZero if some ``d d`` is nonzero.
    """
    gens: Dict[int, List[int]] = {}
    for lab, q in sorted(degrees.items(), key=lambda e: (e[1], e[0])):
        gens.setdefault(q, []).append(lab)
    lo, hi = min(gens, default=0), max(gens, default=0)
    for q in range(lo, hi + 1):
        gens.setdefault(q, [])
    pos = {lab: gens[q].index(lab) for lab, q in degrees.items()}
    counts: Dict[Tuple[int, int], int] = {}
    for x, y, s in signed_orbits:
        if degrees[x] != degrees[y] + 1:
            continue
        counts[(x, y)] = counts.get((x, y), 0) + int(s)
    bd = {}
    for q in range(lo, hi + 1):
        B = np.zeros((len(gens.get(q - 1, [])), len(gens[q])), dtype=np.int64)
        for (x, y), c in counts.items():
            if degrees[x] == q:
                B[pos[y], pos[x]] = c
        bd[q] = B
    cx = ChainComplex({q: gens[q] for q in sorted(gens)}, bd, counts)
    defect = cx.square_zero_defect()
    if defect:
        raise BoundaryNotSquareZero(f"d^2 has an entry of size {defect}")
    return cx
