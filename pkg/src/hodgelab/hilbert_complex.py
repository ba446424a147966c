"""Finite-dimensional Hilbert complexes and their Hodge Laplacian spectra.

A complex is a chain of coboundary matrices D_k (level k -> k+1) together
with SPD Gram matrices M_k. The Hilbert adjoint of D_k is
M_k^{-1} D_k^T M_{k+1}; it is applied through factorisations, never formed.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigensolve import generalized_symmetric_eig, integer_rank, sparse_generalized_eig
from .errors import DegreeOutOfRangeError, RangeError, ShapeError, SolverError
from .spectrum import DISCRETE_TOL, Spectrum

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000
ZERO_REL_TOL = 1e-10


def _as_matrix(A):
    return A if sp.issparse(A) else np.asarray(A, dtype=float)


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _is_integer(A):
    data = A.data if sp.issparse(A) else np.asarray(A)
    return bool(np.all(np.asarray(data) == np.round(np.asarray(data))))


@dataclass
class FiniteHilbertComplex:
    """0 -> H_0 -D_0-> H_1 -> ... -D_{d-1}-> H_d -> 0 with Gram matrices M_k."""

    D: list
    M: list

    def __post_init__(self):
        self.D = [_as_matrix(x) for x in self.D]
        self.M = [_as_matrix(x) for x in self.M]
        if len(self.D) != len(self.M) - 1:
            raise ShapeError(f"{len(self.M)} levels need {len(self.M) - 1} coboundaries, got {len(self.D)}")
        n = self.n
        for k, Dk in enumerate(self.D):
            if Dk.shape != (n[k + 1], n[k]):
                raise ShapeError(f"D_{k} has shape {Dk.shape}, expected {(n[k + 1], n[k])}")
        for k, Mk in enumerate(self.M):
            if Mk.shape != (n[k], n[k]):
                raise ShapeError(f"M_{k} is not square: {Mk.shape}")

    @property
    def d(self):
        return len(self.M) - 1

    @property
    def n(self):
        return [Mk.shape[0] for Mk in self.M]

    @cached_property
    def integer(self):
        return all(_is_integer(Dk) for Dk in self.D)

    def _check_degree(self, k, top=None):
        top = self.d if top is None else top
        if not 0 <= k <= top:
            raise DegreeOutOfRangeError(f"degree {k} outside 0..{top}")

    @cached_property
    def ranks(self):
        """Ranks of D_0..D_{d-1}; exact when the entries are integers."""
        out = []
        for Dk in self.D:
            if min(Dk.shape) == 0:
                out.append(0)
            elif self.integer:
                out.append(integer_rank(Dk))
            else:
                s = np.linalg.svd(_dense(Dk), compute_uv=False)
                out.append(int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0)
        return tuple(out)

    def rank(self, k):
        return self.ranks[k] if 0 <= k < self.d else 0

    def betti(self):
        return [self.n[k] - self.rank(k) - self.rank(k - 1) for k in range(self.d + 1)]

    def euler_characteristic(self):
        return sum((-1) ** k * b for k, b in enumerate(self.betti()))

    def stiffness(self, k):
        """D_k^T M_{k+1} D_k, the matrix of the form |T_k u|^2 on level k."""
        if k >= self.d:
            return sp.csr_matrix((self.n[k], self.n[k]))
        Dk = self.D[k]
        A = Dk.T @ self.M[k + 1] @ Dk
        return A

    def adjoint(self, k, v):
        """Apply T_k^* = M_k^{-1} D_k^T M_{k+1} to v (level k+1 -> level k)."""
        rhs = self.D[k].T @ (self.M[k + 1] @ v)
        return _mass_solver(self.M[k])(rhs)


def _mass_solver(M):
    if sp.issparse(M):
        return spla.factorized(sp.csc_matrix(M))
    c = sla.cho_factor(M)
    return lambda b: sla.cho_solve(c, b)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ComplexDiagnostics:
    residual_abs: list  # max |D_{k+1} D_k|
    residual_rel: list  # ||D_{k+1} D_k||_F / (||D_{k+1}||_F ||D_k||_F)
    mass_min_eig: list
    mass_symmetry: list
    passed: bool

    def summary(self):
        return (
            f"max|DD|={max(self.residual_abs, default=0.0):.3e}, "
            f"min eig M={min(self.mass_min_eig, default=math.inf):.3e}, passed={self.passed}"
        )


def _min_eig(M):
    n = M.shape[0]
    if n == 0:
        return math.inf
    if n <= 400 or not sp.issparse(M):
        return float(np.linalg.eigvalsh(_dense(M))[0])
    w = spla.eigsh(sp.csc_matrix(M), k=1, sigma=0, which="LM", v0=np.ones(n), return_eigenvectors=False)
    return float(w[0])


def _fro(X):
    return float(spla.norm(X)) if sp.issparse(X) else float(np.linalg.norm(X))


def validate(cx: FiniteHilbertComplex, tol=1e-12) -> ComplexDiagnostics:
    res_abs, res_rel = [], []
    for k in range(cx.d - 1):
        P = cx.D[k + 1] @ cx.D[k]
        a = float(abs(P).max()) if P.shape[0] * P.shape[1] else 0.0
        nP, n1, n0 = (_fro(X) for X in (P, cx.D[k + 1], cx.D[k]))
        res_abs.append(a)
        res_rel.append(float(nP / (n1 * n0)) if n1 * n0 > 0 else 0.0)
    mins, syms = [], []
    for Mk in cx.M:
        asym = abs(Mk - Mk.T)
        syms.append(float(asym.max()) if Mk.shape[0] else 0.0)
        mins.append(_min_eig(Mk))
    if cx.integer:
        dd_ok = all(a == 0 for a in res_abs)
    else:
        dd_ok = all(r <= tol for r in res_rel)
    mass_ok = all(m > 0 for m in mins) and all(
        s <= 1e-12 * max(abs(Mk).max(), 1e-300) for s, Mk in zip(syms, cx.M) if Mk.shape[0]
    )
    return ComplexDiagnostics(res_abs, res_rel, mins, syms, dd_ok and mass_ok)


# ---------------------------------------------------------------------------
# Hodge decomposition


@dataclass
class HodgeDecomposition:
    """M_k-orthonormal bases (as columns) of the three Hodge summands of level k."""

    harmonic: np.ndarray
    exact: np.ndarray  # range of D_{k-1}
    coexact: np.ndarray  # range of the adjoint of D_k

    @property
    def dims(self):
        return self.harmonic.shape[1], self.exact.shape[1], self.coexact.shape[1]


def _orth(Y, r):
    if r == 0 or Y.shape[1] == 0:
        return np.zeros((Y.shape[0], 0))
    U, _, _ = np.linalg.svd(Y, full_matrices=False)
    return U[:, :r]


def hodge_decompose(cx: FiniteHilbertComplex, k: int) -> HodgeDecomposition:
    cx._check_degree(k)
    n = cx.n[k]
    M = _dense(cx.M[k])
    L = np.linalg.cholesky(M)
    # y = L^T x turns the M-inner product into the Euclidean one
    if k > 0:
        QE = _orth(L.T @ _dense(cx.D[k - 1]), cx.rank(k - 1))
    else:
        QE = np.zeros((n, 0))
    if k < cx.d:
        QC = _orth(sla.solve_triangular(L, _dense(cx.D[k]).T, lower=True), cx.rank(k))
    else:
        QC = np.zeros((n, 0))
    both = np.hstack([QE, QC])
    hdim = n - both.shape[1]
    if hdim:
        U, _, _ = np.linalg.svd(both, full_matrices=True) if both.shape[1] else (np.eye(n), None, None)
        QH = U[:, both.shape[1]:]
    else:
        QH = np.zeros((n, 0))
    back = lambda Q: sla.solve_triangular(L.T, Q, lower=False) if Q.shape[1] else np.zeros((n, 0))  # noqa: E731
    return HodgeDecomposition(back(QH), back(QE), back(QC))


# ---------------------------------------------------------------------------
# spectra


@dataclass
class HodgeSpectrumBundle:
    """Positive partial spectra sigma_k of T_k^*T_k plus harmonic dimensions.

    ``reliable[k]`` bounds the range on which sigma_k is complete (inf when
    every nonzero eigenvalue was computed).
    """

    d: int
    sigma: list
    betti: list
    chi: int
    reliable: list
    cluster_tol: float = DISCRETE_TOL
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sigma = [np.sort(np.asarray(s, dtype=float)) for s in self.sigma]
        if len(self.sigma) != self.d or len(self.betti) != self.d + 1:
            raise ShapeError("bundle needs d sigma lists and d+1 Betti numbers")
        if any(s.size and s[0] <= 0 for s in self.sigma):
            raise ValueError("sigma entries must be strictly positive")
        if self.chi != sum((-1) ** k * b for k, b in enumerate(self.betti)):
            raise ValueError("chi does not match the Betti numbers")

    @property
    def reliable_lambda(self):
        return min(self.reliable, default=math.inf)

    def reliable_for(self, k):
        r = math.inf
        if k - 1 >= 0:
            r = min(r, self.reliable[k - 1])
        if k < self.d:
            r = min(r, self.reliable[k])
        return r

    def to_dict(self):
        rl = self.reliable_lambda
        return {
            "d": self.d,
            "sigma": [s.tolist() for s in self.sigma],
            "betti": list(self.betti),
            "chi": self.chi,
            "reliable_lambda": None if math.isinf(rl) else rl,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data, cluster_tol=DISCRETE_TOL):
        d = data["d"]
        rl = data.get("reliable_lambda")
        rl = math.inf if rl is None else rl
        return cls(d, data["sigma"], data["betti"], data["chi"], [rl] * d, cluster_tol)


def _reliable_bound(values, tol):
    """Largest lambda below which a truncated ascending list is surely complete."""
    if values.size == 0:
        return 0.0
    return float(values[-1] * (1 - 3 * max(tol, 1e-12)))


def _zero_count(cx, k, A_scale=None):
    return cx.n[k] - cx.rank(k)


def _sigma_dense(cx, k, count):
    n = cx.n[k]
    z = _zero_count(cx, k)
    avail = n - z
    m = avail if count is None else min(count, avail)
    if m <= 0:
        return np.zeros(0), avail
    A = _dense(cx.stiffness(k))
    B = _dense(cx.M[k])
    first = z - 1 if z > 0 else 0
    res = generalized_symmetric_eig(A, B, m + (1 if z > 0 else 0), first=first)
    vals = res.values
    if z > 0:
        kernel_top, vals = vals[0], vals[1:]
        if kernel_top > ZERO_REL_TOL * max(res.scale, 1.0) or vals[0] <= ZERO_REL_TOL * max(res.scale, 1.0):
            raise SolverError(
                f"degree {k}: zero/nonzero split inconsistent with rank (kernel value {kernel_top:.3e}, "
                f"first positive {vals[0]:.3e})"
            )
    return vals, avail


def _sigma_sparse(cx, k, count):
    """Shift-invert on the stiffness plus a gradient penalty.

    Adding alpha * M_k D_{k-1} P^{-1} D_{k-1}^T M_k (P = diag M_{k-1}) leaves
    every eigenpair orthogonal to range(D_{k-1}) untouched and pushes the
    range(D_{k-1}) block up by alpha; alpha grows until no such spurious pair
    remains among the computed ones.
    """
    n = cx.n[k]
    avail = n - _zero_count(cx, k)
    m = avail if count is None else min(count, avail)
    if m <= 0:
        return np.zeros(0), avail
    A = sp.csr_matrix(cx.stiffness(k))
    B = sp.csr_matrix(cx.M[k])
    harmonic = cx.betti()[k]
    if k == 0:
        res = sparse_generalized_eig(A, B, harmonic + m)
        return res.values[harmonic:], avail
    E = B @ cx.D[k - 1]
    Pinv = sp.diags(1.0 / sp.csr_matrix(cx.M[k - 1]).diagonal())
    G = E @ Pinv @ E.T
    alpha = 1.0
    for _ in range(12):
        res = sparse_generalized_eig(A + alpha * G, B, harmonic + m)
        V = res.vectors
        rq = np.einsum("ij,ij->j", V, A @ V)
        spurious = np.abs(rq - res.values) > 1e-6 * np.maximum(res.values, 1e-300)
        spurious[:harmonic] = False
        if not spurious.any():
            return res.values[harmonic:], avail
        alpha *= 10.0 * res.values[-1] / max(res.values[spurious].min(), 1e-300)
    raise SolverError(f"degree {k}: gradient penalty failed to separate spurious modes")


def nonzero_spectrum(cx, k, count=None, method="auto"):
    """Lowest positive eigenvalues of (D_k^T M_{k+1} D_k, M_k) and how many exist."""
    if k >= cx.d:
        return np.zeros(0), 0
    if method == "auto":
        method = "sparse" if cx.n[k] > DENSE_LIMIT and count is not None and count < cx.n[k] // 10 else "dense"
    if method == "dense":
        return _sigma_dense(cx, k, count)
    return _sigma_sparse(cx, k, count)


def dual_nonzero_spectrum(cx, k, count=None):
    """The same sigma_k computed from T_k T_k^* on level k+1 (dense)."""
    n1 = cx.n[k + 1]
    z = n1 - cx.rank(k)
    avail = n1 - z
    m = avail if count is None else min(count, avail)
    if m <= 0:
        return np.zeros(0)
    Mk = _dense(cx.M[k])
    M1 = _dense(cx.M[k + 1])
    W = M1 @ _dense(cx.D[k])
    A = W @ sla.cho_solve(sla.cho_factor(Mk), W.T)
    return generalized_symmetric_eig(A, M1, m, first=z).values


def partial_spectra(cx: FiniteHilbertComplex, count=None, method="auto", cluster_tol=DISCRETE_TOL, label=""):
    """Bundle of the lowest ``count`` positive eigenvalues in each degree.

    ``count`` may be an int, None (everything) or a per-degree list; a zero
    entry skips that degree, leaving it reliable only at lambda = 0.
    """
    counts = count if isinstance(count, (list, tuple)) else [count] * cx.d
    if len(counts) != cx.d:
        raise ShapeError(f"need {cx.d} per-degree counts, got {len(counts)}")
    sigma, reliable = [], []
    for k in range(cx.d):
        if counts[k] == 0:
            sigma.append(np.zeros(0))
            reliable.append(0.0)
            continue
        vals, avail = nonzero_spectrum(cx, k, counts[k], method)
        sigma.append(vals)
        reliable.append(math.inf if len(vals) >= avail else _reliable_bound(vals, cluster_tol))
    betti = cx.betti()
    chi = sum((-1) ** k * b for k, b in enumerate(betti))
    return HodgeSpectrumBundle(cx.d, sigma, betti, chi, reliable, cluster_tol, label)


def laplacian_spectrum(bundle: HodgeSpectrumBundle, k: int) -> Spectrum:
    """spec(Delta_k) = {0}^{b_k} + sigma_{k-1} + sigma_k."""
    if not 0 <= k <= bundle.d:
        raise DegreeOutOfRangeError(f"degree {k} outside 0..{bundle.d}")
    parts = [np.zeros(bundle.betti[k])]
    if k > 0:
        parts.append(bundle.sigma[k - 1])
    if k < bundle.d:
        parts.append(bundle.sigma[k])
    return Spectrum(np.concatenate(parts), bundle.cluster_tol, bundle.reliable_for(k), f"Delta_{k}")


def alternating_counting_sum(bundle: HodgeSpectrumBundle, lam: float) -> int:
    """sum_k (-1)^k N(Delta_k, lam); equal to chi by telescoping."""
    if lam > bundle.reliable_lambda:
        raise RangeError(f"lambda={lam} beyond reliable range {bundle.reliable_lambda}")
    total = sum((-1) ** k * laplacian_spectrum(bundle, k).counting(lam) for k in range(bundle.d + 1))
    if total != bundle.chi:
        raise AssertionError(f"alternating counting sum {total} != chi {bundle.chi} at lambda={lam}")
    return total


# ---------------------------------------------------------------------------
# random complexes for property tests


def _random_gram(rng, n, eps=1e-3):
    if n == 0:
        return np.zeros((0, 0))
    A = rng.standard_normal((n, n)) / math.sqrt(n)
    return A @ A.T + eps * np.eye(n)


def random_complex(seed: int, profile=None) -> FiniteHilbertComplex:
    """Cochain complex of a random simplicial complex with random SPD Gram matrices.

    ``profile`` keys: vertices (default 7), facets (default 6), top (top
    simplex dimension, default 3), max_level (cap on any level size, <= 40).
    """
    p = {"vertices": 7, "facets": 6, "top": 3, "max_level": 40}
    p.update(profile or {})
    rng = np.random.default_rng(seed)
    top = int(p["top"])
    nv = int(p["vertices"])
    while True:
        facets = set()
        for _ in range(int(p["facets"])):
            size = int(rng.integers(1, top + 2))
            facets.add(tuple(sorted(rng.choice(nv, size=size, replace=False).tolist())))
        levels = [set() for _ in range(top + 1)]
        for f in facets:
            for r in range(1, len(f) + 1):
                for face in itertools.combinations(f, r):
                    levels[r - 1].add(face)
        if max(len(L) for L in levels) <= p["max_level"]:
            break
    simp = [sorted(L) for L in levels]
    index = [{s: i for i, s in enumerate(S)} for S in simp]
    D = []
    for k in range(top):
        Dk = np.zeros((len(simp[k + 1]), len(simp[k])), dtype=np.int64)
        for t, s in enumerate(simp[k + 1]):
            for i in range(k + 2):
                Dk[t, index[k][s[:i] + s[i + 1 :]]] = -1 if i % 2 else 1
        D.append(Dk)
    M = [_random_gram(rng, len(S)) for S in simp]
    return FiniteHilbertComplex(D, M)
