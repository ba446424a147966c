"""Sorted eigenvalue multisets with counting and multiplicity queries."""
from __future__ import annotations

import math

import numpy as np

from .errors import RangeError

ORACLE_TOL = 1e-12
DISCRETE_TOL = 1e-6


class Spectrum:
    """Eigenvalues in increasing order, complete up to ``reliable_max``.

    Values closer than ``cluster_tol`` (relative, chained) form one cluster;
    multiplicities and counting treat a cluster as a single eigenvalue.
    """

    def __init__(self, values, cluster_tol=DISCRETE_TOL, reliable_max=math.inf, label=""):
        vals = np.sort(np.asarray(values, dtype=float).ravel())
        if not 0 <= cluster_tol <= 1e-2:
            raise ValueError(f"cluster_tol {cluster_tol} outside [0, 1e-2]")
        self.values = vals
        self.cluster_tol = float(cluster_tol)
        self.reliable_max = float(reliable_max)
        self.label = label
        self._starts = self._cluster_starts()

    def _cluster_starts(self):
        v = self.values
        if v.size == 0:
            return np.zeros(0, dtype=int)
        gaps = np.diff(v) > self.cluster_tol * np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
        return np.concatenate([[0], np.nonzero(gaps)[0] + 1])

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values.tolist())

    def __repr__(self):
        head = ", ".join(f"{x:.6g}" for x in self.values[:6])
        more = ", ..." if len(self) > 6 else ""
        return f"Spectrum([{head}{more}], n={len(self)}, reliable_max={self.reliable_max:.6g})"

    def clusters(self):
        """List of (start, stop) index ranges, one per cluster."""
        ends = list(self._starts[1:]) + [len(self.values)]
        return list(zip(self._starts.tolist(), [int(e) for e in ends]))

    def _check_range(self, lam):
        if lam > self.reliable_max:
            raise RangeError(f"lambda={lam:.12g} beyond reliable range {self.reliable_max:.12g}")

    def counting(self, lam) -> int:
        """N(lam): number of eigenvalues <= lam, whole clusters at a time.

        A cluster counts entirely as soon as its smallest member is
        <= lam * (1 + cluster_tol).
        """
        self._check_range(lam)
        thr = lam + self.cluster_tol * abs(lam)
        total = 0
        for a, b in self.clusters():
            if self.values[a] <= thr:
                total = b
            else:
                break
        return total

    def multiplicity(self, lam) -> int:
        """Size of the cluster containing lam, or 0 if lam is not an eigenvalue."""
        self._check_range(lam)
        tol = self.cluster_tol
        for a, b in self.clusters():
            lo, hi = self.values[a], self.values[b - 1]
            if lo - tol * max(abs(lo), abs(lam)) <= lam <= hi + tol * max(abs(hi), abs(lam)):
                return b - a
            if lo > lam:
                break
        return 0

    def eigenvalue(self, j) -> float:
        """lambda_j, 1-based."""
        if j < 1:
            raise IndexError("eigenvalue indices start at 1")
        if j > len(self.values):
            raise RangeError(f"lambda_{j} requested but only {len(self.values)} values are known")
        return float(self.values[j - 1])

    def distinct(self):
        """Representative (smallest) value of each cluster."""
        return [float(self.values[a]) for a, _ in self.clusters()]

    def to_dict(self):
        return {
            "values": self.values.tolist(),
            "cluster_tol": self.cluster_tol,
            "reliable_max": None if math.isinf(self.reliable_max) else self.reliable_max,
            "label": self.label,
        }


def merge(*spectra, cluster_tol=None, label=""):
    """Multiset union; reliable range is the smallest of the inputs'."""
    vals = np.concatenate([s.values for s in spectra]) if spectra else np.zeros(0)
    tol = cluster_tol if cluster_tol is not None else max(s.cluster_tol for s in spectra)
    rel = min((s.reliable_max for s in spectra), default=math.inf)
    return Spectrum(vals, tol, rel, label)
