"""Numerical kernels: generalized symmetric eigenpairs, exact rank, Glazman bound."""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DefinitenessError, DependentSubspaceError, ShapeError, SolverError

log = logging.getLogger(__name__)

PSD_TOL = 1e-10


@dataclass(frozen=True)
class EigenResult:
    """Lowest eigenpairs of A v = lambda B v.

    ``vectors`` are B-orthonormal columns; ``residuals[i]`` is
    ||A v_i - lambda_i B v_i|| / ||B v_i||.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    scale: float


def _dense(M):
    if sp.issparse(M):
        return M.toarray()
    return np.asarray(M, dtype=float)


def _fix_signs(V):
    # first component above noise level made positive, for reproducible output
    for i in range(V.shape[1]):
        col = V[:, i]
        big = np.abs(col) > 1e-10 * max(np.abs(col).max(), 1e-300)
        if big.any() and col[np.argmax(big)] < 0:
            V[:, i] = -col
    return V


def _residuals(A, B, values, vectors):
    AV = A @ vectors
    BV = B @ vectors
    num = np.linalg.norm(AV - BV * values, axis=0)
    den = np.linalg.norm(BV, axis=0)
    return num / np.where(den > 0, den, 1.0)


def _spectral_scale(A, B, values):
    a = np.abs(A).sum(axis=0).max() if A.size else 0.0
    b_diag = np.diag(B)
    s = a / max(b_diag.min(), 1e-300) if b_diag.size else 0.0
    if values.size:
        s = max(s, float(np.abs(values).max()))
    return max(s, 1e-300)


def _psd_guard(values, scale):
    tol = PSD_TOL * scale
    if values.size and values[0] < -tol:
        raise SolverError(
            f"eigenvalue {values[0]:.3e} below PSD guard -{tol:.1e}; "
            "the stiffness matrix is not positive semidefinite"
        )
    neg = values < 0
    if neg.any():
        log.debug("clamping %d tiny negative eigenvalues to 0", int(neg.sum()))
        values = np.where(neg, 0.0, values)
    return values


def generalized_symmetric_eig(A, B, m=None, first=0) -> EigenResult:
    """Eigenpairs first..first+m-1 (ascending) of the pencil (A, B).

    Dense path: Cholesky reduction of B, Householder tridiagonalisation and
    implicit QL/QR iteration (LAPACK ?sygv / ?sygvx through scipy).
    """
    A = _dense(A)
    B = _dense(B)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise ShapeError(f"pencil shapes {A.shape} and {B.shape} do not match")
    if m is None:
        m = n - first
    if first < 0 or m < 0 or first + m > n:
        raise ShapeError(f"requested eigenpairs {first}..{first + m - 1} of {n}")
    if m == 0:
        return EigenResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), 1.0)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        if first == 0 and m == n:
            w, V = sla.eigh(A, B, driver="gv", check_finite=True)
        else:
            w, V = sla.eigh(A, B, driver="gvx", subset_by_index=[first, first + m - 1])
    except np.linalg.LinAlgError as exc:
        msg = str(exc)
        if "positive definite" in msg or "leading minor" in msg:
            raise DefinitenessError(f"B is not positive definite: {msg}") from exc
        raise SolverError(f"eigensolver did not converge: {msg}") from exc
    scale = _spectral_scale(A, B, w)
    w = _psd_guard(w, scale)
    V = _fix_signs(V)
    res = _residuals(A, B, w, V)
    if res.size and res.max() > 1e-6 * scale:
        raise SolverError("eigenpair residual too large", residual=float(res.max()))
    return EigenResult(w, V, res, scale)


def sparse_generalized_eig(A, B, m, shift=None) -> EigenResult:
    """Lowest m eigenpairs by shift-invert Lanczos; for large sparse pencils.

    The start vector is fixed so repeated runs give identical output.
    """
    A = sp.csc_matrix(A)
    B = sp.csc_matrix(B)
    n = A.shape[0]
    if m >= n - 1:
        return generalized_symmetric_eig(A, B, m)
    if shift is None:
        shift = -1e-3 * abs(A.diagonal()).max() / max(B.diagonal().max(), 1e-300)
    v0 = np.ones(n) / np.sqrt(n)
    try:
        w, V = spla.eigsh(A, k=m, M=B, sigma=shift, which="LM", v0=v0, tol=1e-13)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"ARPACK did not converge: {exc}") from exc
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    # re-orthonormalise in the B inner product (ARPACK output is close already)
    G = V.T @ (B @ V)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    V = np.linalg.solve(L, V.T).T
    scale = max(float(np.abs(w).max()), abs(A.diagonal()).max() / max(B.diagonal().min(), 1e-300))
    w = _psd_guard(w, scale)
    V = _fix_signs(V)
    res = _residuals(A, B, w, V)
    if res.max() > 1e-6 * scale:
        raise SolverError("eigenpair residual too large", residual=float(res.max()))
    return EigenResult(w, V, res, scale)


# ---------------------------------------------------------------------------
# exact rank


def _to_rows(Z):
    if sp.issparse(Z):
        C = sp.coo_matrix(Z)
        shape = C.shape
        triples = zip(C.row.tolist(), C.col.tolist(), C.data.tolist())
    else:
        arr = np.asarray(Z)
        shape = arr.shape
        if arr.ndim != 2:
            raise ShapeError("integer_rank expects a 2-D matrix")
        r, c = np.nonzero(arr)
        triples = zip(r.tolist(), c.tolist(), arr[r, c].tolist())
    rows = [dict() for _ in range(shape[0])]
    for i, j, v in triples:
        iv = int(v)
        if iv != v:
            raise ValueError(f"non-integer entry {v} at ({i}, {j})")
        if iv:
            rows[i][j] = rows[i].get(j, 0) + iv
    return rows, shape


def integer_rank(Z) -> int:
    """Exact rank over Q of an integer matrix.

    Sparse fraction-free elimination on Python integers (no overflow), with a
    Markowitz-style pivot order: column singletons first (no fill-in), then
    the shortest row, preferring unit pivots so that simplicial boundary
    matrices almost never need row scaling.
    """
    rows, _ = _to_rows(Z)
    rows = {i: r for i, r in enumerate(rows) if r}
    cols: dict[int, set] = {}
    for i, r in rows.items():
        for j in r:
            cols.setdefault(j, set()).add(i)
    singles = [j for j, s in cols.items() if len(s) == 1]
    heap = [(len(r), i) for i, r in rows.items()]
    heapq.heapify(heap)

    def drop_entry(k, c):
        s = cols[c]
        s.discard(k)
        if len(s) == 1:
            singles.append(c)
        elif not s:
            del cols[c]

    def remove_row(i):
        for c in rows.pop(i):
            drop_entry(i, c)

    rank = 0
    while rows:
        pivot_row = None
        while singles:
            j = singles.pop()
            s = cols.get(j)
            if s is not None and len(s) == 1:
                pivot_row = next(iter(s))
                break
        if pivot_row is not None:
            remove_row(pivot_row)
            rank += 1
            continue
        while True:
            n, i = heapq.heappop(heap)
            if i in rows and len(rows[i]) == n:
                break
        r = rows[i]
        j = min(r, key=lambda c: (abs(r[c]) != 1, len(cols[c]), c))
        p = r[j]
        for k in sorted(cols[j] - {i}):
            rk = rows[k]
            a = rk[j]
            if p in (1, -1):
                f = a * p
            else:
                for c in rk:
                    rk[c] *= p
                f = a
            for c, v in r.items():
                nv = rk.get(c, 0) - f * v
                if nv:
                    if c not in rk:
                        cols[c].add(k)
                    rk[c] = nv
                elif c in rk:
                    del rk[c]
                    drop_entry(k, c)
            if p not in (1, -1) and rk:
                g = math.gcd(*rk.values())
                if g > 1:
                    for c in rk:
                        rk[c] //= g
            if rk:
                heapq.heappush(heap, (len(rk), k))
            else:
                del rows[k]
        remove_row(i)
        rank += 1
    return rank


# ---------------------------------------------------------------------------
# Glazman


def glazman_certificate(A, B, V, lam, rel_tol=1e-12):
    """Certify N(A, B; lam) >= dim V from a trial subspace.

    Returns (certified, dim V): certified iff the Rayleigh quotient is <= lam
    on all of span V, i.e. the top eigenvalue of (V^T A V, V^T B V) is.
    """
    A = _dense(A)
    B = _dense(B)
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    k = V.shape[1]
    if k == 0:
        return True, 0
    G = V.T @ B @ V
    G = 0.5 * (G + G.T)
    g = np.linalg.eigvalsh(G)
    if g[0] <= 1e-12 * max(g[-1], 1e-300):
        raise DependentSubspaceError(f"trial subspace is rank deficient (gram eigenvalue {g[0]:.2e})")
    H = V.T @ A @ V
    H = 0.5 * (H + H.T)
    top = sla.eigh(H, G, eigvals_only=True)[-1]
    slack = 1e-14 * max(abs(top), 1.0)
    return bool(top <= lam * (1 + rel_tol) + slack), k
