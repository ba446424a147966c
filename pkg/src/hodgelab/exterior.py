"""Exterior algebra of R^d in the standard basis dx_I.

All signs are permutation parities computed by inversion counting, so every
result here is an exact integer.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

from .errors import DegreeOutOfRangeError


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Strictly increasing index set I in {1..d}, labelling dx_I."""

    indices: tuple[int, ...]
    d: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing: {idx}")
        if idx and (idx[0] < 1 or idx[-1] > self.d):
            raise ValueError(f"indices {idx} outside 1..{self.d}")

    @property
    def degree(self) -> int:
        return len(self.indices)

    def __contains__(self, j):
        return j in self.indices

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return "{" + ",".join(map(str, self.indices)) + "}"


def permutation_sign(seq) -> int:
    """Parity of a sequence of distinct integers, (-1)^inversions; 0 on repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    inv = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inv % 2 else 1


def basis(d: int, k: int) -> list[MultiIndex]:
    """Lexicographically ordered basis of k-forms on R^d; length C(d, k)."""
    if k < 0 or k > d:
        raise DegreeOutOfRangeError(f"degree {k} outside 0..{d}")
    return [MultiIndex(c, d) for c in itertools.combinations(range(1, d + 1), k)]


def basis_size(d: int, k: int) -> int:
    return comb(d, k) if 0 <= k <= d else 0


def insertion_sign(j: int, I: MultiIndex) -> int:
    """Sign relating dx_j wedge dx_{I'} to the sorted basis element.

    For j not in I: dx_j ^ dx_I = s dx_{I u {j}}.
    For j in I:     dx_j ^ dx_{I \\ {j}} = s dx_I.
    In both cases s = (-1)^(number of elements of I smaller than j).
    """
    if not 1 <= j <= I.d:
        raise ValueError(f"index {j} outside 1..{I.d}")
    rest = [i for i in I.indices if i != j]
    return permutation_sign([j] + rest)


def wedge(I: MultiIndex, J: MultiIndex) -> tuple[MultiIndex | None, int]:
    """dx_I ^ dx_J = s dx_K; returns (K, s), or (None, 0) if I and J overlap."""
    s = permutation_sign(I.indices + J.indices)
    if s == 0:
        return None, 0
    return MultiIndex(tuple(sorted(I.indices + J.indices)), I.d), s


def hodge_star(d: int, I: MultiIndex) -> tuple[MultiIndex, int]:
    """Return (J, s) with *dx_I = s dx_J, J the complement of I.

    s is fixed by dx_I ^ (s dx_J) = dx_1 ^ ... ^ dx_d.
    """
    if I.d != d:
        raise ValueError(f"multi-index lives in dimension {I.d}, not {d}")
    J = tuple(i for i in range(1, d + 1) if i not in I.indices)
    return MultiIndex(J, d), permutation_sign(I.indices + J)


def codifferential_sign(d: int, k: int) -> int:
    """Sign in delta_k = (-1)^(k+1) *^{-1} d *, for 0 <= k <= d-1."""
    if k < 0 or k > d - 1:
        raise DegreeOutOfRangeError(f"codifferential degree {k} outside 0..{d - 1}")
    return -1 if (k + 1) % 2 else 1


def dirac_terms(I: MultiIndex) -> list[tuple[int, MultiIndex, int]]:
    """Coordinate form of (d + delta)(f dx_I) as (j, J, c): sum of c * d_j f * dx_J.

    Creation terms come from j not in I, annihilation terms from j in I.
    """
    terms = []
    for j in range(1, I.d + 1):
        if j in I:
            J = MultiIndex(tuple(i for i in I.indices if i != j), I.d)
            terms.append((j, J, -insertion_sign(j, I)))
        else:
            J = MultiIndex(tuple(sorted(I.indices + (j,))), I.d)
            terms.append((j, J, insertion_sign(j, I)))
    return terms
