"""Eigenvalue inequality checks with structured reports.

Oracle spectra are compared exactly (up to ORACLE_TOL rounding). Discrete
spectra need an explicit relative margin eps, usually taken from
``convergence_study``: value comparisons then allow lhs <= rhs (1 + eps),
and counting comparisons evaluate the smaller side at lambda (1 - eps) and
the larger side at lambda (1 + eps).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import RangeError
from .hilbert_complex import HodgeSpectrumBundle, laplacian_spectrum
from .spectrum import ORACLE_TOL, Spectrum

ROW_FIELDS = ("j", "lambda", "step", "lhs", "rhs", "shift", "margin", "status", "sharp_shift", "tie")


class MarginRequiredError(ValueError):
    """A discrete spectrum was checked without a numerical margin."""


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x) or math.isnan(x):
            return None
        return float(f"{x:.12g}")
    return x


@dataclass
class InequalityReport:
    check: str
    domain: str
    rows: list
    tolerance: dict
    notes: list = field(default_factory=list)

    @property
    def verdict(self):
        return "pass" if all(r["status"] != "fail" for r in self.rows) else "fail"

    @property
    def passed(self):
        return self.verdict == "pass"

    def failures(self):
        return [r for r in self.rows if r["status"] == "fail"]

    def to_dict(self):
        return {
            "check": self.check,
            "domain": self.domain,
            "rows": [{k: _fmt(v) for k, v in r.items()} for r in self.rows],
            "tolerance": {k: _fmt(v) for k, v in self.tolerance.items()},
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_json(self, **kw):
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)

    def _table(self):
        keys = [k for k in ROW_FIELDS if any(k in r for r in self.rows)]
        return keys, [[_fmt(r.get(k, "")) for k in keys] for r in self.rows]

    def to_csv(self):
        keys, body = self._table()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        w.writerows(["" if v is None else v for v in row] for row in body)
        return buf.getvalue()

    def to_markdown(self):
        keys, body = self._table()
        out = [f"### {self.check} ({self.domain}): {self.verdict}", ""]
        out.append("| " + " | ".join(keys) + " |")
        out.append("|" + "---|" * len(keys))
        for row in body:
            out.append("| " + " | ".join("" if v is None else str(v) for v in row) + " |")
        return "\n".join(out) + "\n"

    def render(self, fmt):
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "md":
            return self.to_markdown()
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# tolerance policy


def _policy(spectra, margin):
    if margin is None:
        loose = [s.label or "?" for s in spectra if s.cluster_tol > ORACLE_TOL]
        if loose:
            raise MarginRequiredError(
                f"spectra {loose} are discrete; pass a margin (see convergence_study)"
            )
        return {"policy": "exact", "rel": ORACLE_TOL}, ORACLE_TOL
    if not 0 <= margin < 1:
        raise ValueError(f"margin {margin} outside [0, 1)")
    return {"policy": "margin", "rel": float(margin)}, float(margin)


def _bundle_spectra(bundle):
    return [laplacian_spectrum(bundle, k) for k in range(bundle.d + 1)]


def _value_row(j, lhs, rhs, shift, eps, **extra):
    gap = (rhs - lhs) / abs(rhs) if rhs else -lhs
    if lhs <= rhs * (1 + eps) + (0 if rhs else eps):
        status = "strict" if gap > eps else "pass"
    else:
        status = "fail"
    return {"j": j, **extra, "lhs": lhs, "rhs": rhs, "shift": shift, "margin": gap, "status": status}


def _count_row(j, lam, step, lhs, rhs, lhs_exact, rhs_exact):
    """Integer comparison lhs <= rhs; strict when it also holds with slack at eps = 0."""
    if lhs <= rhs:
        status = "strict" if lhs_exact < rhs_exact else "pass"
    else:
        status = "fail"
    return {"j": j, "lambda": lam, "step": step, "lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "status": status}


# ---------------------------------------------------------------------------
# counting helpers


def counting(s: Spectrum, lam) -> int:
    return s.counting(lam)


def multiplicity(s: Spectrum, lam) -> int:
    return s.multiplicity(lam)


def lambda_grid(dirichlet: Spectrum, n_values: int):
    """Distinct values among the first n eigenvalues and the midpoints between them."""
    vals = dirichlet.values[: n_values]
    distinct = Spectrum(vals, dirichlet.cluster_tol).distinct()
    grid = [0.5 * distinct[0]] if distinct else []
    for a, b in zip(distinct, distinct[1:]):
        grid += [a, 0.5 * (a + b)]
    if distinct:
        grid.append(distinct[-1])
    return grid


# ---------------------------------------------------------------------------
# shift rules


@dataclass(frozen=True)
class ShiftRule:
    """kind: constant | chi_plus_multiplicity | freitas | conjecture."""

    kind: str
    param: float = 0

    def shift(self, j, dirichlet: Spectrum):
        from .oracle import freitas_shift

        if self.kind == "constant":
            return int(self.param)
        if self.kind == "chi_plus_multiplicity":
            return int(self.param) + dirichlet.multiplicity(dirichlet.eigenvalue(j))
        if self.kind == "freitas":
            return freitas_shift(int(self.param), j)[1]
        if self.kind == "conjecture":
            return int(self.param)
        raise ValueError(f"unknown shift rule {self.kind!r}")

    def describe(self):
        return f"{self.kind}({_fmt(self.param)})"

    @classmethod
    def parse(cls, text):
        """'constant:2', 'chi_plus_multiplicity:1', 'freitas:3', 'conjecture:3'."""
        kind, _, val = text.partition(":")
        return cls(kind, float(val) if val else 0)


def _sharpness(neumann, j, rhs):
    """Largest shift that still holds at j, and the Neumann indices equal to rhs (if any)."""
    if rhs > neumann.reliable_max:
        return {"sharp_shift": None, "tie": None}
    count = neumann.counting(rhs)
    m = neumann.multiplicity(rhs)
    tie = f"{count - m + 1}..{count}" if m else None
    return {"sharp_shift": count - j, "tie": tie}


def check_shift(neumann: Spectrum, dirichlet: Spectrum, rule: ShiftRule, j_range, margin=None, domain=""):
    """lambda_{j + shift(j)}(neumann) <= lambda_j(dirichlet) for each j."""
    tol, eps = _policy([neumann, dirichlet], margin)
    rows, notes = [], []
    for j in j_range:
        rhs = dirichlet.eigenvalue(j)
        s = rule.shift(j, dirichlet)
        if j + s < 1:
            rows.append({"j": j, "lhs": None, "rhs": rhs, "shift": s, "margin": None, "status": "pass"})
            continue
        lhs = neumann.eigenvalue(j + s)
        rows.append({**_value_row(j, lhs, rhs, s, eps), **_sharpness(neumann, j, rhs)})
    if rule.kind == "chi_plus_multiplicity" and rule.param <= 0:
        # the multiplicity shift adds nothing here; report the constant-1 bound as well
        alt = check_shift(neumann, dirichlet, ShiftRule("constant", 1), j_range, margin, domain)
        for r in alt.rows:
            rows.append({**r, "step": "friedlander"})
        notes.append("chi <= 0: rows tagged 'friedlander' repeat the check with shift 1")
    return InequalityReport(f"shift/{rule.describe()}", domain, rows, tol, notes)


# ---------------------------------------------------------------------------
# lemma-level counting checks


def _n(s, lam):
    return s.counting(lam)


def check_base_estimate(bundle: HodgeSpectrumBundle, k: int, lambda_grid_, margin=None, domain=""):
    """C(d,k) N(Delta_d) <= N(Delta_k) <= C(d,k) N(Delta_0) at each grid point."""
    spectra = _bundle_spectra(bundle)
    tol, eps = _policy(spectra, margin)
    d = bundle.d
    c = comb(d, k)
    S0, Sk, Sd = spectra[0], spectra[k], spectra[d]
    rows = []
    for i, lam in enumerate(lambda_grid_, start=1):
        lo, hi = lam * (1 - eps), lam * (1 + eps)
        rows.append(_count_row(i, lam, "lower", c * _n(Sd, lo), _n(Sk, hi), c * _n(Sd, lam), _n(Sk, lam)))
        rows.append(_count_row(i, lam, "upper", _n(Sk, lo), c * _n(S0, hi), _n(Sk, lam), c * _n(S0, lam)))
    return InequalityReport(f"base_estimate/k={k}", domain, rows, tol)


def _top_lhs(Sd, d, lam):
    return d * _n(Sd, lam) + Sd.multiplicity(lam)


def check_top_shift(bundle: HodgeSpectrumBundle, lambda_grid_, margin=None, domain=""):
    """d N(Delta_d) + m(Delta_d) <= N(Delta_{d-1}) at each grid point."""
    spectra = _bundle_spectra(bundle)
    tol, eps = _policy(spectra, margin)
    d = bundle.d
    Sd, Sd1 = spectra[d], spectra[d - 1]
    rows = []
    for i, lam in enumerate(lambda_grid_, start=1):
        lo, hi = lam * (1 - eps), lam * (1 + eps)
        lhs = d * _n(Sd, lo) + Sd.multiplicity(lam)
        rows.append(_count_row(i, lam, "top_shift", lhs, _n(Sd1, hi), _top_lhs(Sd, d, lam), _n(Sd1, lam)))
    return InequalityReport("top_shift", domain, rows, tol)


def check_alternating_sum(bundle: HodgeSpectrumBundle, lambda_grid_, domain=""):
    """sum_k (-1)^k N(Delta_k, lambda) = chi; an identity, so no margin applies."""
    spectra = _bundle_spectra(bundle)
    rows = []
    for i, lam in enumerate(lambda_grid_, start=1):
        total = sum((-1) ** k * s.counting(lam) for k, s in enumerate(spectra))
        rows.append({"j": i, "lambda": lam, "step": "alternating_sum", "lhs": total, "rhs": bundle.chi,
                     "margin": 0, "status": "pass" if total == bundle.chi else "fail"})
    return InequalityReport("alternating_sum", domain, rows, {"policy": "exact", "rel": 0.0})


def friedlander_from_lemmas(bundle: HodgeSpectrumBundle, j_range, margin=None, domain=""):
    """Friedlander's inequality assembled from the two counting lemmas.

    At lambda = lambda_j(Delta_d): the base estimate (k = d-1) and the top
    shift give d N_D + m <= d N_N, hence N_N(lambda) >= j + 1, which is the
    same as lambda_{j+1}(Neumann) <= lambda_j(Dirichlet).
    """
    spectra = _bundle_spectra(bundle)
    tol, eps = _policy(spectra, margin)
    d = bundle.d
    N, D, S1 = spectra[0], spectra[d], spectra[d - 1]
    rows = []
    for j in j_range:
        lam = D.eigenvalue(j)
        lo, hi = lam * (1 - eps), lam * (1 + eps)
        m = D.multiplicity(lam)
        base = _count_row(j, lam, "base_estimate", _n(S1, lo), d * _n(N, hi), _n(S1, lam), d * _n(N, lam))
        top = _count_row(j, lam, "top_shift", d * _n(D, lo) + m, _n(S1, hi),
                         d * _n(D, lam) + m, _n(S1, lam))
        comb_row = _count_row(j, lam, "combined", d * _n(D, lo) + m, d * _n(N, hi),
                              d * _n(D, lam) + m, d * _n(N, lam))
        derived = _count_row(j, lam, "neumann_count", j + 1, _n(N, hi), j + 1, _n(N, lam))
        direct = _value_row(j, N.eigenvalue(j + 1), lam, 1, eps, step="conclusion")
        if derived["status"] != "fail" and direct["status"] == "fail":
            raise AssertionError(f"j={j}: counting conclusion holds but the direct comparison fails")
        rows += [base, top, comb_row, derived, direct]
    return InequalityReport("friedlander_from_lemmas", domain, rows, tol)


def check_curl_curl(curl: Spectrum, dirichlet: Spectrum, d: int, j_range, margin=None, domain="",
                    bundle: HodgeSpectrumBundle | None = None, probes=()):
    """lambda_{(d-1)j + m}(curl curl) <= lambda_j(Dirichlet), plus the counting identity."""
    tol, eps = _policy([curl, dirichlet], margin)
    rows = []
    for j in j_range:
        lam = dirichlet.eigenvalue(j)
        s = (d - 1) * j + dirichlet.multiplicity(lam) - j
        rows.append(_value_row(j, curl.eigenvalue(j + s), lam, s, eps, step="shift"))
    if bundle is not None:
        spectra = _bundle_spectra(bundle)
        C = Spectrum(
            np.concatenate([np.zeros(bundle.betti[d - 1]), bundle.sigma[d - 2]]),
            bundle.cluster_tol,
            bundle.reliable[d - 2],
        )
        for i, lam in enumerate(probes, start=1):
            lhs = C.counting(lam)
            rhs = spectra[d - 1].counting(lam) - spectra[d].counting(lam)
            rows.append({"j": i, "lambda": lam, "step": "counting_identity", "lhs": lhs, "rhs": rhs,
                         "margin": 0, "status": "pass" if lhs == rhs else "fail"})
    return InequalityReport(f"curl_curl/d={d}", domain, rows, tol)


# ---------------------------------------------------------------------------
# convergence


QUANTITIES = ("neumann", "dirichlet", "dirichlet_top", "curl_curl")


@dataclass
class ConvergenceTable:
    quantity: str
    domain: dict
    levels: list
    h: list
    values: np.ndarray  # (levels, count)
    extrapolated: np.ndarray
    order: np.ndarray
    rel_error: np.ndarray
    margin: float
    reference: np.ndarray | None = None

    def to_dict(self):
        out = {
            "quantity": self.quantity,
            "domain": self.domain,
            "levels": list(self.levels),
            "h": [_fmt(x) for x in self.h],
            "values": [[_fmt(x) for x in row] for row in self.values],
            "extrapolated": [_fmt(x) for x in self.extrapolated],
            "order": [_fmt(x) for x in self.order],
            "rel_error": [_fmt(x) for x in self.rel_error],
            "margin": _fmt(self.margin),
        }
        if self.reference is not None:
            out["reference"] = [_fmt(x) for x in self.reference]
            ref = self.reference
            with np.errstate(divide="ignore", invalid="ignore"):
                gap = np.where(ref != 0, (self.extrapolated - ref) / ref, self.extrapolated - ref)
            out["gap_to_reference"] = [_fmt(x) for x in gap]
        return out

    def _rows(self):
        head = ["j"] + [f"level{L}" for L in self.levels] + ["extrapolated", "order", "rel_error"]
        if self.reference is not None:
            head += ["reference", "gap"]
        body = []
        for j in range(self.values.shape[1]):
            row = [j + 1] + [_fmt(x) for x in self.values[:, j]]
            row += [_fmt(self.extrapolated[j]), _fmt(self.order[j]), _fmt(self.rel_error[j])]
            if self.reference is not None:
                r = self.reference[j]
                row += [_fmt(r), _fmt((self.extrapolated[j] - r) / r if r else self.extrapolated[j] - r)]
            body.append(row)
        return head, body

    def render(self, fmt):
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2)
        head, body = self._rows()
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(head)
            w.writerows(["" if v is None else v for v in row] for row in body)
            return buf.getvalue()
        if fmt == "md":
            out = [f"### convergence of {self.quantity}: margin {_fmt(self.margin)}", ""]
            out.append("| " + " | ".join(head) + " |")
            out.append("|" + "---|" * len(head))
            out += ["| " + " | ".join("" if v is None else str(v) for v in row) + " |" for row in body]
            return "\n".join(out) + "\n"
        raise ValueError(f"unknown format {fmt!r}")


def _quantity_values(mesh, quantity, count):
    from . import feec

    if quantity == "neumann":
        return feec.neumann_spectrum(mesh, count).values
    if quantity == "dirichlet":
        return feec.dirichlet_spectrum(mesh, count, "primal").values
    if quantity == "dirichlet_top":
        return feec.dirichlet_spectrum(mesh, count, "top_form").values
    if quantity == "curl_curl":
        return feec.curl_curl_spectrum(mesh, count).values
    raise ValueError(f"quantity must be one of {QUANTITIES}, not {quantity!r}")


def richardson(values):
    """Extrapolated limits, observed orders and relative error estimates per column.

    Uses the last three levels (h halves each time); with two levels the
    order is taken to be 2.
    """
    V = np.asarray(values, dtype=float)
    last = V[-1]
    d2 = V[-1] - V[-2]
    if V.shape[0] >= 3:
        d1 = V[-2] - V[-3]
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.log2(np.abs(d1 / d2))
        p = np.where(np.isfinite(p) & (d1 * d2 > 0), p, np.nan)
    else:
        p = np.full(last.shape, np.nan)
    p_use = np.clip(np.where(np.isnan(p), 2.0, p), 0.5, 4.0)
    lim = last + d2 / (2.0**p_use - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(lim != 0, np.abs(last - lim) / np.abs(lim), np.abs(last - lim))
    return lim, p, rel


def convergence_study(spec, levels: int, quantity: str, count: int, reference=None, meshes=None) -> ConvergenceTable:
    """Eigenvalues over successive uniform refinements starting at spec's level.

    The margin is twice the largest estimated relative error among the
    requested eigenvalues on the finest level.
    """
    from .mesh import generate, refine

    if levels < 2:
        raise ValueError("a convergence study needs at least 2 levels")
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}, not {quantity!r}")
    mesh = generate(spec)
    vals, hs, lv = [], [], []
    for i in range(levels):
        if i:
            mesh = refine(mesh)
        v = _quantity_values(mesh, quantity, count)
        if len(v) < count:
            raise RangeError(f"level {spec.refinement_level + i} has only {len(v)} eigenvalues")
        vals.append(v[:count])
        hs.append(mesh.max_edge_length())
        lv.append(spec.refinement_level + i)
    V = np.array(vals)
    lim, p, rel = richardson(V)
    ref = None if reference is None else np.asarray(reference[:count], dtype=float)
    # zero eigenvalues (Neumann constants, harmonic fields) carry no discretisation error
    positive = np.abs(lim) > 1e-8 * max(np.abs(lim).max(), 1.0)
    margin = 2.0 * float(rel[positive].max()) if positive.any() else 0.0
    return ConvergenceTable(quantity, spec.to_dict(), lv, hs, V, lim, p, rel, margin, ref)
