"""Lowest-order Whitney forms on simplicial meshes.

The coboundary matrices are the integer incidence matrices of the mesh; all
geometry lives in the mass matrices. Absolute boundary conditions keep every
simplex as a degree of freedom and are imposed weakly; relative conditions
keep only simplices off the boundary.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, UnsupportedError
from .hilbert_complex import (
    FiniteHilbertComplex,
    HodgeSpectrumBundle,
    laplacian_spectrum,
    nonzero_spectrum,
    partial_spectra,
)
from .mesh import SimplicialMesh
from .spectrum import DISCRETE_TOL, Spectrum

BCS = ("absolute", "relative")


class WhitneyAssembly(FiniteHilbertComplex):
    """Whitney complex of a mesh; ``active[k]`` lists the retained k-simplices."""

    def __init__(self, D, M, mesh, bc, active):
        super().__init__(D, M)
        self.mesh = mesh
        self.bc = bc
        self.active = active


def _barycentric_gradients(P):
    """Gradients of the barycentric coordinates, shape (m, d+1, d)."""
    E = P[:, 1:, :] - P[:, :1, :]  # (m, d, d), rows are edge vectors
    Einv = np.linalg.inv(E)  # columns give gradients of lambda_1..lambda_d
    g = np.transpose(Einv, (0, 2, 1))
    g0 = -g.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g], axis=1)


def whitney_mass_local(P, k):
    """Element mass matrices of Whitney k-forms, shape (m, C(d+1,k+1), C(d+1,k+1)).

    P holds the vertex coordinates of each element in increasing global
    vertex order, so local faces inherit the global orientation.
    """
    m, npts, d = P.shape
    E = P[:, 1:, :] - P[:, :1, :]
    vol = np.abs(np.linalg.det(E)) / math.factorial(d)
    grads = _barycentric_gradients(P)
    G = np.einsum("mai,mbi->mab", grads, grads)
    faces = list(itertools.combinations(range(d + 1), k + 1))
    nf = len(faces)
    # integral of lambda_a lambda_b over the element
    lam_int = vol[:, None, None] * (1.0 + np.eye(d + 1))[None] / ((d + 1) * (d + 2))
    out = np.zeros((m, nf, nf))
    kf = math.factorial(k) ** 2
    for p, s in enumerate(faces):
        for q in range(p, nf):
            t = faces[q]
            acc = np.zeros(m)
            for i, si in enumerate(s):
                A = s[:i] + s[i + 1 :]
                for j, tj in enumerate(t):
                    B = t[:j] + t[j + 1 :]
                    if k == 0:
                        det = 1.0
                    else:
                        det = np.linalg.det(G[:, list(A)][:, :, list(B)])
                    acc += (-1) ** (i + j) * lam_int[:, si, tj] * det
            out[:, p, q] = out[:, q, p] = kf * acc
    return out


def whitney_mass(mesh: SimplicialMesh, k: int):
    """Global Whitney mass matrix on all k-simplices (sparse CSR)."""
    d = mesh.d
    cells = mesh.simplices[d]
    P = mesh.vertices[cells]
    local = whitney_mass_local(P, k)
    faces = list(itertools.combinations(range(d + 1), k + 1))
    idx = mesh.index[k]
    glob = np.array([[idx[t] for t in map(tuple, cells[:, list(f)].tolist())] for f in faces]).T
    nf = len(faces)
    rows = np.repeat(glob, nf, axis=1).ravel()
    cols = np.tile(glob, (1, nf)).ravel()
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n(k), mesh.n(k))).tocsr()
    M.sum_duplicates()
    return M


def assemble(mesh: SimplicialMesh, bc: str = "absolute") -> WhitneyAssembly:
    if bc not in BCS:
        raise ValueError(f"bc must be one of {BCS}, not {bc!r}")
    d = mesh.d
    scale = np.ptp(mesh.vertices, axis=0).max()
    P = mesh.vertices[mesh.simplices[d]]
    vol = np.abs(np.linalg.det(P[:, 1:, :] - P[:, :1, :])) / math.factorial(d)
    bad = np.nonzero(vol < 1e-14 * scale**d)[0]
    if bad.size:
        raise AssemblyError(f"degenerate element {mesh.simplices[d][bad[0]].tolist()}")
    if bc == "absolute":
        active = [np.arange(mesh.n(k)) for k in range(d + 1)]
    else:
        active = [mesh.interior(k) for k in range(d + 1)]
    D = [mesh.coboundary_restricted(k, active) for k in range(d)]
    M = []
    for k in range(d + 1):
        Mk = whitney_mass(mesh, k)
        M.append(Mk[active[k]][:, active[k]].tocsr())
    return WhitneyAssembly(D, M, mesh, bc, active)


def full_bundle(mesh: SimplicialMesh, count=None, bc="absolute", method="auto") -> HodgeSpectrumBundle:
    cx = assemble(mesh, bc)
    return partial_spectra(cx, count, method=method, label=f"whitney/{bc}")


def _reliable(vals, avail):
    if len(vals) >= avail:
        return math.inf
    return float(vals[-1]) * (1 - 3 * DISCRETE_TOL) if len(vals) else 0.0


def _degree_spectrum(cx, k, count, method="auto"):
    """Lowest ``count`` eigenvalues of the discrete Hodge Laplacian on level k, from one sigma list."""
    betti = cx.betti()
    need = max(count - betti[k], 0)
    vals, avail = nonzero_spectrum(cx, k, need, method)
    return np.concatenate([np.zeros(betti[k]), vals]), _reliable(vals, avail)


def neumann_spectrum(mesh: SimplicialMesh, count: int, method="auto") -> Spectrum:
    """Continuous piecewise-linear Neumann eigenvalues; the first is 0."""
    cx = assemble(mesh, "absolute")
    vals, rel = _degree_spectrum(cx, 0, count, method)
    return Spectrum(vals[:count], DISCRETE_TOL, rel, "neumann/feec")


def dirichlet_spectrum(mesh: SimplicialMesh, count: int, route: str = "primal", method="auto") -> Spectrum:
    """Dirichlet eigenvalues from interior P1 elements or from the top-form route."""
    if route == "primal":
        cx = assemble(mesh, "relative")
        vals, avail = nonzero_spectrum(cx, 0, count, method)
    elif route == "top_form":
        cx = assemble(mesh, "absolute")
        vals, avail = nonzero_spectrum(cx, mesh.d - 1, count, method)
    else:
        raise ValueError(f"route must be primal or top_form, not {route!r}")
    rel = _reliable(vals, avail)
    return Spectrum(vals, DISCRETE_TOL, rel, f"dirichlet/feec/{route}")


def curl_curl_spectrum(mesh: SimplicialMesh, count: int, method="auto") -> Spectrum:
    """{0}^{b_{d-1}} together with sigma_{d-2} of the absolute complex."""
    d = mesh.d
    if d < 2:
        raise UnsupportedError("curl curl needs d >= 2")
    cx = assemble(mesh, "absolute")
    b = cx.betti()[d - 1]
    need = max(count - b, 0)
    vals, avail = nonzero_spectrum(cx, d - 2, need, method)
    rel = _reliable(vals, avail)
    return Spectrum(np.concatenate([np.zeros(b), vals]), DISCRETE_TOL, rel, "curl_curl/feec")


__all__ = [
    "WhitneyAssembly",
    "assemble",
    "whitney_mass",
    "whitney_mass_local",
    "full_bundle",
    "neumann_spectrum",
    "dirichlet_spectrum",
    "curl_curl_spectrum",
    "laplacian_spectrum",
]
