"""Simplicial meshes of planar and solid domains.

A mesh is built from its top cells only; all lower simplices, boundary flags
and signed incidence matrices are derived. Simplices are stored as sorted
vertex tuples and oriented by that order. Top cells also carry an orientation
sign so that (sign * sorted-order volume) is positive.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .eigensolve import integer_rank
from .errors import MeshGenerationError

KINDS = ("rectangle", "box", "disc", "annulus", "l_shape", "disc_with_g_holes", "ball")


@dataclass(frozen=True)
class DomainSpec:
    """A named test geometry plus the number of uniform refinements to apply."""

    kind: str
    params: dict = field(default_factory=dict)
    refinement_level: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeshGenerationError(f"unknown domain kind {self.kind!r}")
        if self.refinement_level < 0:
            raise MeshGenerationError("refinement_level must be nonnegative")
        for key, val in self.params.items():
            if key != "g" and val <= 0:
                raise MeshGenerationError(f"parameter {key}={val} must be positive")
        if self.kind == "annulus" and not self.params["r_in"] < self.params["r_out"]:
            raise MeshGenerationError("annulus needs r_in < r_out")

    def with_level(self, level):
        return DomainSpec(self.kind, dict(self.params), level)

    @property
    def dimension(self):
        return 3 if self.kind in ("box", "ball") else 2

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params), "refinement_level": self.refinement_level}

    @classmethod
    def rectangle(cls, a=1.0, b=1.0, level=0):
        return cls("rectangle", {"a": a, "b": b}, level)

    @classmethod
    def box(cls, a=1.0, b=1.0, c=1.0, level=0):
        return cls("box", {"a": a, "b": b, "c": c}, level)

    @classmethod
    def disc(cls, radius=1.0, resolution=4, level=0):
        return cls("disc", {"radius": radius, "resolution": resolution}, level)

    @classmethod
    def annulus(cls, r_in=0.5, r_out=1.0, resolution=16, level=0):
        return cls("annulus", {"r_in": r_in, "r_out": r_out, "resolution": resolution}, level)

    @classmethod
    def l_shape(cls, level=0):
        return cls("l_shape", {}, level)

    @classmethod
    def disc_with_g_holes(cls, g=2, level=0):
        return cls("disc_with_g_holes", {"g": g}, level)

    @classmethod
    def ball(cls, radius=1.0, resolution=2, level=0):
        return cls("ball", {"radius": radius, "resolution": resolution}, level)


def _signed_volume(points):
    """Signed volume of a simplex given by (d+1) x d vertex coordinates."""
    p = np.asarray(points, dtype=float)
    d = p.shape[1]
    return np.linalg.det(p[1:] - p[0]) / math.factorial(d)


class SimplicialMesh:
    """Oriented simplicial complex embedded in R^d, d in {2, 3}.

    ``cells`` keeps the generator's vertex order (refinement depends on it);
    ``simplices[k]`` holds sorted vertex tuples in lexicographic order.
    """

    def __init__(self, vertices, cells):
        self.vertices = np.array(vertices, dtype=float)
        self.cells = np.array(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise MeshGenerationError("vertices must be an n x 2 or n x 3 array")
        self.d = self.vertices.shape[1]
        if self.cells.ndim != 2 or self.cells.shape[1] != self.d + 1 or len(self.cells) == 0:
            raise MeshGenerationError(f"cells must be an m x {self.d + 1} array")
        if self.cells.min() < 0 or self.cells.max() >= len(self.vertices):
            raise MeshGenerationError("cell references a missing vertex")
        self._build()
        self._check()

    # -- construction -------------------------------------------------------

    def _build(self):
        d = self.d
        top = np.sort(self.cells, axis=1)
        if len({tuple(t) for t in top.tolist()}) != len(top):
            raise MeshGenerationError("duplicate cells")
        simplices = [None] * (d + 1)
        simplices[d] = np.array(sorted(map(tuple, top.tolist())), dtype=np.int64)
        for k in range(d - 1, -1, -1):
            faces = set()
            for comb in itertools.combinations(range(d + 1), k + 1):
                faces.update(map(tuple, top[:, comb].tolist()))
            simplices[k] = np.array(sorted(faces), dtype=np.int64).reshape(-1, k + 1)
        used = set(simplices[0][:, 0].tolist())
        if len(used) != len(self.vertices):
            raise MeshGenerationError("mesh has vertices not used by any cell")
        self.simplices = simplices
        self.index = [{s: i for i, s in enumerate(map(tuple, S.tolist()))} for S in simplices]

        self.coboundary = []
        for k in range(d):
            rows, cols, vals = [], [], []
            idx = self.index[k]
            for t, simp in enumerate(self.simplices[k + 1].tolist()):
                for i in range(k + 2):
                    face = tuple(simp[:i] + simp[i + 1 :])
                    rows.append(t)
                    cols.append(idx[face])
                    vals.append(-1 if i % 2 else 1)
            D = sp.csr_matrix(
                (np.array(vals, dtype=np.int64), (rows, cols)),
                shape=(len(self.simplices[k + 1]), len(self.simplices[k])),
            )
            self.coboundary.append(D)

        # boundary: (d-1)-faces with exactly one top coface, and all their faces
        counts = np.asarray(abs(self.coboundary[d - 1]).sum(axis=0)).ravel()
        bflag = [None] * (d + 1)
        bflag[d] = np.zeros(len(simplices[d]), dtype=bool)
        bflag[d - 1] = counts == 1
        bfaces = simplices[d - 1][bflag[d - 1]]
        for k in range(d - 2, -1, -1):
            on = set()
            for comb in itertools.combinations(range(d), k + 1):
                on.update(map(tuple, bfaces[:, comb].tolist()))
            idx = self.index[k]
            flag = np.zeros(len(simplices[k]), dtype=bool)
            flag[[idx[s] for s in on]] = True
            bflag[k] = flag
        self.boundary_flag = bflag

        vols = np.array([_signed_volume(self.vertices[s]) for s in simplices[d]])
        self.orientation = np.where(vols < 0, -1, 1).astype(np.int64)
        self.volumes = np.abs(vols)

    def _check(self):
        d = self.d
        scale = np.ptp(self.vertices, axis=0).max()
        tiny = 1e-14 * scale**d
        bad = np.nonzero(self.volumes <= tiny)[0]
        if bad.size:
            raise MeshGenerationError(f"degenerate cell {self.simplices[d][bad[0]].tolist()}")
        counts = np.asarray(abs(self.coboundary[d - 1]).sum(axis=0)).ravel()
        if counts.max() > 2:
            raise MeshGenerationError("a facet has more than two cofaces; not a manifold mesh")
        if self.n_components() != 1:
            raise MeshGenerationError("mesh is not connected")

    # -- basic queries -------------------------------------------------------

    def n(self, k):
        return len(self.simplices[k])

    @property
    def counts(self):
        return tuple(self.n(k) for k in range(self.d + 1))

    def n_components(self):
        parent = list(range(self.n(0)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in self.simplices[1].tolist():
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        return len({find(a) for a in range(self.n(0))})

    def interior(self, k):
        """Indices of k-simplices not contained in the boundary."""
        return np.nonzero(~self.boundary_flag[k])[0]

    def coboundary_restricted(self, k, active=None):
        """Signed incidence D_k restricted to active (k, k+1)-simplex index sets."""
        D = self.coboundary[k]
        if active is None:
            return D
        return D[active[k + 1]][:, active[k]]

    def edge_lengths(self):
        e = self.simplices[1]
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def max_edge_length(self):
        return float(self.edge_lengths().max())

    def cell_volumes_signed(self):
        """Volumes of the top simplices under the global orientation (all > 0)."""
        return self.orientation * np.array([_signed_volume(self.vertices[s]) for s in self.simplices[self.d]])

    # -- topology ------------------------------------------------------------

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * self.n(k) for k in range(self.d + 1))

    @cached_property
    def _ranks(self):
        return tuple(integer_rank(D) for D in self.coboundary)

    @cached_property
    def _relative_ranks(self):
        act = [self.interior(k) for k in range(self.d + 1)]
        return tuple(integer_rank(self.coboundary_restricted(k, act)) for k in range(self.d))

    def coboundary_ranks(self, mode="absolute"):
        return self._ranks if mode == "absolute" else self._relative_ranks

    def betti_numbers(self, mode="absolute") -> list[int]:
        if mode not in ("absolute", "relative"):
            raise ValueError(f"mode must be absolute or relative, not {mode!r}")
        ranks = self.coboundary_ranks(mode)
        if mode == "absolute":
            sizes = [self.n(k) for k in range(self.d + 1)]
        else:
            sizes = [len(self.interior(k)) for k in range(self.d + 1)]
        out = []
        for k in range(self.d + 1):
            rk = ranks[k] if k < self.d else 0
            rk_prev = ranks[k - 1] if k > 0 else 0
            out.append(sizes[k] - rk - rk_prev)
        return out

    # -- io ------------------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {"dimension": self.d, "vertices": self.vertices.tolist(), "cells": self.cells.tolist()}
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        verts = data["vertices"]
        if any(len(v) != data["dimension"] for v in verts):
            raise MeshGenerationError("vertex coordinates do not match 'dimension'")
        return cls(verts, data["cells"])

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def __repr__(self):
        return f"SimplicialMesh(d={self.d}, counts={self.counts})"


# ---------------------------------------------------------------------------
# module-level operations


def euler_characteristic(mesh: SimplicialMesh) -> int:
    return mesh.euler_characteristic()


def betti_numbers(mesh: SimplicialMesh, mode="absolute") -> list[int]:
    return mesh.betti_numbers(mode)


def refine(mesh: SimplicialMesh) -> SimplicialMesh:
    """Uniform midpoint refinement: triangles into 4, tetrahedra into 8.

    Tetrahedra are split with Bey's ordering, which keeps the children of a
    Kuhn simplex congruent to it, so repeated refinement does not degrade.
    """
    verts = [tuple(v) for v in mesh.vertices.tolist()]
    mids = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in mids:
            mids[key] = len(verts)
            verts.append(tuple((np.array(verts[a]) + np.array(verts[b])) / 2))
        return mids[key]

    cells = []
    if mesh.d == 2:
        for x0, x1, x2 in mesh.cells.tolist():
            m01, m02, m12 = mid(x0, x1), mid(x0, x2), mid(x1, x2)
            cells += [(x0, m01, m02), (m01, x1, m12), (m02, m12, x2), (m01, m12, m02)]
    else:
        for x0, x1, x2, x3 in mesh.cells.tolist():
            x01, x02, x03 = mid(x0, x1), mid(x0, x2), mid(x0, x3)
            x12, x13, x23 = mid(x1, x2), mid(x1, x3), mid(x2, x3)
            cells += [
                (x0, x01, x02, x03),
                (x01, x1, x12, x13),
                (x02, x12, x2, x23),
                (x03, x13, x23, x3),
                (x01, x02, x03, x13),
                (x01, x02, x12, x13),
                (x02, x03, x13, x23),
                (x02, x12, x13, x23),
            ]
    return SimplicialMesh(verts, cells)


# -- generators ---------------------------------------------------------------


def _grid_cells_2d(nx, ny, keep=lambda i, j: True):
    """Vertex grid (nx+1) x (ny+1) and two triangles per kept unit cell."""
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    cells = []
    for j in range(ny):
        for i in range(nx):
            if not keep(i, j):
                continue
            a, b, c, e = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells += [(a, b, c), (a, c, e)]
    verts = [(i, j) for j in range(ny + 1) for i in range(nx + 1)]
    return verts, cells


def _compact(verts, cells):
    used = sorted({v for c in cells for v in c})
    remap = {v: i for i, v in enumerate(used)}
    return [verts[v] for v in used], [tuple(remap[v] for v in c) for c in cells]


def _kuhn_cube_cells(n):
    """Kuhn (Freudenthal) triangulation of an n^3 vertex-grid cube, 6 tets per cell."""
    vid = lambda i, j, k: (k * (n + 1) + j) * (n + 1) + i  # noqa: E731
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                for perm in itertools.permutations(range(3)):
                    p = [i, j, k]
                    path = [vid(*p)]
                    for axis in perm:
                        p[axis] += 1
                        path.append(vid(*p))
                    cells.append(tuple(path))
    grid = [(i / n, j / n, k / n) for k in range(n + 1) for j in range(n + 1) for i in range(n + 1)]
    return grid, cells


def _ring_stitch(inner, outer, inner_ang, outer_ang):
    """Triangulate the band between two closed rings by merging on angle.

    Both rings must start at angle 0 and list angles in increasing order.
    """
    ni, no = len(inner), len(outer)

    def ahead(angles, idx, n):
        return angles[(idx + 1) % n] + (2 * math.pi if idx + 1 >= n else 0.0)

    cells = []
    i = o = 0
    while i < ni or o < no:
        if o == no or (i < ni and ahead(inner_ang, i, ni) <= ahead(outer_ang, o, no)):
            cells.append((inner[i % ni], inner[(i + 1) % ni], outer[o % no]))
            i += 1
        else:
            cells.append((inner[i % ni], outer[(o + 1) % no], outer[o % no]))
            o += 1
    return cells


def _disc(radius, rings):
    if rings < 1:
        raise MeshGenerationError("disc resolution must be at least 1 ring")
    verts = [(0.0, 0.0)]
    cells = []
    prev = [0]
    prev_ang = None
    for r in range(1, rings + 1):
        m = 6 * r
        ang = [2 * math.pi * t / m for t in range(m)]
        ids = list(range(len(verts), len(verts) + m))
        rad = radius * r / rings
        verts += [(rad * math.cos(a), rad * math.sin(a)) for a in ang]
        if r == 1:
            cells += [(0, ids[t], ids[(t + 1) % m]) for t in range(m)]
        else:
            cells += _ring_stitch(prev, ids, prev_ang, ang)
        prev, prev_ang = ids, ang
    return verts, cells


def _annulus(r_in, r_out, n):
    if n < 3:
        raise MeshGenerationError("annulus needs at least 3 vertices per ring")
    layers = max(1, round(n * (r_out - r_in) / (math.pi * (r_in + r_out))))
    verts, cells = [], []
    for layer in range(layers + 1):
        rad = r_in + (r_out - r_in) * layer / layers
        verts += [(rad * math.cos(2 * math.pi * t / n), rad * math.sin(2 * math.pi * t / n)) for t in range(n)]
    for layer in range(layers):
        for t in range(n):
            a, b = layer * n + t, layer * n + (t + 1) % n
            c, e = a + n, b + n
            cells += [(a, b, e), (a, e, c)]
    return verts, cells


def _ball(radius, n):
    if n < 1:
        raise MeshGenerationError("ball resolution must be >= 1")
    grid, cells = _kuhn_cube_cells(2 * n)
    pts = 2 * np.array(grid) - 1
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    # smooth cube-to-ball map; the cube surface lands exactly on the sphere
    mapped = np.column_stack(
        [
            x * np.sqrt(1 - y**2 / 2 - z**2 / 2 + y**2 * z**2 / 3),
            y * np.sqrt(1 - z**2 / 2 - x**2 / 2 + z**2 * x**2 / 3),
            z * np.sqrt(1 - x**2 / 2 - y**2 / 2 + x**2 * y**2 / 3),
        ]
    )
    return (radius * mapped).tolist(), cells


def generate(spec: DomainSpec) -> SimplicialMesh:
    """Triangulate the domain described by ``spec`` and apply its refinements."""
    p = spec.params
    kind = spec.kind
    try:
        if kind == "rectangle":
            verts = [(0.0, 0.0), (p["a"], 0.0), (p["a"], p["b"]), (0.0, p["b"])]
            cells = [(0, 1, 2), (0, 2, 3)]
        elif kind == "box":
            grid, cells = _kuhn_cube_cells(1)
            verts = [(x * p["a"], y * p["b"], z * p["c"]) for x, y, z in grid]
        elif kind == "disc":
            verts, cells = _disc(p["radius"], int(p["resolution"]))
        elif kind == "annulus":
            verts, cells = _annulus(p["r_in"], p["r_out"], int(p["resolution"]))
        elif kind == "l_shape":
            verts, cells = _grid_cells_2d(2, 2, keep=lambda i, j: not (i == 1 and j == 0))
            verts, cells = _compact([(x - 1.0, y - 1.0) for x, y in verts], cells)
        elif kind == "disc_with_g_holes":
            g = int(p["g"])
            if g < 0:
                raise MeshGenerationError("number of holes must be >= 0")
            verts, cells = _grid_cells_2d(2 * g + 1, 3, keep=lambda i, j: not (j == 1 and i % 2 == 1))
            verts = [(float(x), float(y)) for x, y in verts]
        elif kind == "ball":
            verts, cells = _ball(p["radius"], int(p["resolution"]))
    except KeyError as exc:
        raise MeshGenerationError(f"missing parameter {exc} for {kind}") from exc
    mesh = SimplicialMesh(verts, cells)
    for _ in range(spec.refinement_level):
        mesh = refine(mesh)
    return mesh
