"""Closed-form Dirichlet and Neumann spectra: boxes and balls in dimensions 2 to 4."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import optimize, special

from .errors import RootIsolationError, UnsupportedError
from .hilbert_complex import HodgeSpectrumBundle
from .spectrum import ORACLE_TOL, Spectrum

KINDS = ("of_J", "of_J_derivative", "of_radial_derivative")
SCAN_STEP = 0.05


def _check_order(nu):
    if nu < 0 or (2 * nu) != int(2 * nu):
        raise ValueError(f"order {nu} must be a nonnegative integer or half-integer")


def bessel_j(nu, x):
    """J_nu(x) for integer or half-integer nu >= 0; vectorised in x."""
    _check_order(nu)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    out = special.jv(nu, x)
    return float(out) if out.ndim == 0 else out


def _radial_factor(nu, d):
    # d/dr [r^{-a} J_nu(r)] has the sign of l J_nu(r) - r J_{nu+1}(r), a = (d-2)/2, l = nu - a
    a = (d - 2) / 2
    l = nu - a
    return lambda x: l * special.jv(nu, x) - x * special.jv(nu + 1, x)


def _function(kind, nu, d=None):
    if kind == "of_J":
        return lambda x: special.jv(nu, x)
    if kind == "of_J_derivative":
        return lambda x: special.jvp(nu, x)
    if kind == "of_radial_derivative":
        if d is None:
            raise ValueError("of_radial_derivative needs the dimension d")
        return _radial_factor(nu, d)
    raise ValueError(f"kind must be one of {KINDS}, not {kind!r}")


def _refine(f, a, b):
    return optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def zeros_below(f, xmax, step=SCAN_STEP):
    """All sign changes of f on (0, xmax], refined by Brent's method."""
    if xmax <= step:
        return []
    x = np.arange(step, xmax + step, step)
    y = f(x)
    out = []
    for i in np.nonzero(np.signbit(y[:-1]) != np.signbit(y[1:]))[0]:
        if y[i] == 0:
            out.append(float(x[i]))
            continue
        r = _refine(f, x[i], x[i + 1])
        if r <= xmax:
            out.append(r)
    return out


def bessel_zero(kind, nu, n, d=None):
    """n-th positive zero (1-based) of J_nu, J_nu', or the ball radial derivative.

    For J_0' the zero at the origin counts as the first one, so that
    j'_{0,n+1} = j_{1,n}.
    """
    _check_order(nu)
    if n < 1:
        raise ValueError("zero index starts at 1")
    f = _function(kind, nu, d)
    if kind == "of_J_derivative" and nu == 0:
        if n == 1:
            return 0.0
        n -= 1
    # all zeros sit beyond nu, spaced by about pi
    xmax = nu + math.pi * (n + 2) + 2.0
    for _ in range(8):
        zs = zeros_below(f, xmax)
        if len(zs) >= n:
            return zs[n - 1]
        xmax *= 2
    raise RootIsolationError(f"could not isolate zero {n} of {kind} order {nu}")


# ---------------------------------------------------------------------------
# labelled spectra


@dataclass
class LabeledSpectrum:
    """Sorted eigenvalues with their quantum numbers; complete up to ``reliable_max``."""

    domain: str
    bc: str
    values: np.ndarray
    labels: list
    reliable_max: float = math.inf
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def spectrum(self, tol=ORACLE_TOL) -> Spectrum:
        return Spectrum(self.values, tol, self.reliable_max, f"{self.bc}/{self.domain}")

    def to_dict(self):
        return {
            "domain": self.domain,
            "bc": self.bc,
            "values": [float(v) for v in self.values],
            "labels": [list(lab) for lab in self.labels],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data):
        return cls(data["domain"], data["bc"], np.asarray(data["values"], dtype=float),
                   [tuple(x) for x in data["labels"]])


def _truncate(domain, bc, pairs, count, cutoff):
    """Keep the lowest ``count`` values plus any exact ties; pairs must cover [0, cutoff]."""
    pairs.sort(key=lambda p: (p[0], p[1]))
    vals = [v for v, _ in pairs]
    if len(vals) < count:
        raise RootIsolationError("enumeration cutoff too small")
    stop = count
    while stop < len(vals) and vals[stop] <= vals[count - 1] * (1 + ORACLE_TOL):
        stop += 1
    if stop < len(vals):
        reliable = 0.5 * (vals[stop - 1] + vals[stop])
    else:
        reliable = cutoff
    reliable = min(reliable, cutoff)
    return LabeledSpectrum(domain, bc, np.array(vals[:stop]), [lab for _, lab in pairs[:stop]], reliable)


def separable_spectrum(sides, bc, count) -> LabeledSpectrum:
    """Eigenvalues pi^2 sum (m_i / a_i)^2 of a box with the given side lengths."""
    sides = [float(a) for a in sides]
    if not 1 <= len(sides) <= 3 or min(sides) <= 0:
        raise ValueError("need 1 to 3 positive side lengths")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"bc must be dirichlet or neumann, not {bc!r}")
    lo = 1 if bc == "dirichlet" else 0
    cutoff = math.pi**2 * sum(1 / a**2 for a in sides) * 4
    while True:
        ranges = [range(lo, int(a * math.sqrt(cutoff) / math.pi) + 1) for a in sides]
        pairs = []
        for ms in itertools.product(*ranges):
            v = math.pi**2 * math.fsum((m / a) ** 2 for m, a in zip(ms, sides))
            if v <= cutoff:
                pairs.append((v, tuple(ms)))
        if len(pairs) > count:
            break
        cutoff *= 2
    name = "box(" + ",".join(f"{a:g}" for a in sides) + ")"
    return _truncate(name, bc, pairs, count, cutoff)


def harmonic_dimension(l, d):
    """Dimension of degree-l spherical harmonics on S^{d-1}."""
    def c(n, k):
        return comb(n, k) if n >= 0 else 0
    return c(l + d - 1, d - 1) - c(l + d - 3, d - 1)


def _ball_values_below(d, bc, cutoff):
    a = (d - 2) / 2
    rmax = math.sqrt(cutoff)
    pairs = []
    empty_run = 0
    l = 0
    while empty_run < 2:
        nu = l + a
        mult = harmonic_dimension(l, d)
        if bc == "dirichlet":
            zs = zeros_below(_function("of_J", nu), rmax)
        elif l == 0:
            # constants, then zeros of J_{a+1}
            zs = [0.0] + zeros_below(_function("of_J", a + 1), rmax)
        else:
            zs = zeros_below(_radial_factor(nu, d), rmax)
        for n, z in enumerate(zs, start=1):
            for h in range(mult):
                pairs.append((z * z, (l, n, h)))
        empty_run = empty_run + 1 if not zs else 0
        l += 1
    return pairs


def ball_spectrum(d, bc, count, radius=1.0) -> LabeledSpectrum:
    """Ball spectrum; labels are (l, radial index n, harmonic copy h)."""
    if d not in (2, 3, 4):
        raise UnsupportedError(f"ball oracle supports d = 2, 3, 4, not {d}")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError(f"bc must be dirichlet or neumann, not {bc!r}")
    cutoff = 16.0 + 4.0 * count ** (2 / d)
    while True:
        pairs = _ball_values_below(d, bc, cutoff)
        if len(pairs) > count:
            break
        cutoff *= 2
    s = _truncate(f"ball{d}d", bc, pairs, count, cutoff)
    if radius != 1.0:
        s.values = s.values / radius**2
        s.reliable_max /= radius**2
        s.domain += f"(r={radius:g})"
    return s


def disc_spectrum(bc, count, radius=1.0) -> LabeledSpectrum:
    return ball_spectrum(2, bc, count, radius)


def unit_ball_volume(d) -> float:
    """pi^{d/2} / Gamma(d/2 + 1) via V_d = (2 pi / d) V_{d-2}."""
    if d < 0:
        raise ValueError("dimension must be nonnegative")
    v = 1.0 if d % 2 == 0 else 2.0
    for k in range(2 if d % 2 == 0 else 3, d + 1, 2):
        v *= 2 * math.pi / k
    return v


def freitas_shift(d, j):
    """c(d, j) = d V_{d-1} / (2 V_d^{1-2/d}) j^{1-1/d} and its floor."""
    if d < 2 or j < 1:
        raise ValueError("need d >= 2 and j >= 1")
    if d == 2:
        c = 2.0 * math.sqrt(j)
    else:
        c = d * unit_ball_volume(d - 1) / (2 * unit_ball_volume(d) ** (1 - 2 / d)) * j ** (1 - 1 / d)
    r = round(c)
    fl = r if abs(c - r) <= 1e-12 * c else math.floor(c)
    return c, int(fl)


def disc_bundle_2d(count) -> HodgeSpectrumBundle:
    """Exact Hodge bundle of the unit disc: sigma_0 Neumann, sigma_1 Dirichlet."""
    neu = ball_spectrum(2, "neumann", count + 1)
    dir_ = ball_spectrum(2, "dirichlet", count)
    sigma0 = neu.values[1:]
    return HodgeSpectrumBundle(
        2,
        [sigma0, dir_.values],
        [1, 0, 0],
        1,
        [neu.reliable_max, dir_.reliable_max],
        ORACLE_TOL,
        "disc/oracle",
    )


# named oracle domains understood by the command line
DOMAINS = {
    "square": lambda bc, n: separable_spectrum([1.0, 1.0], bc, n),
    "rectangle_sqrt2": lambda bc, n: separable_spectrum([1.0, math.sqrt(2.0)], bc, n),
    "rectangle_golden": lambda bc, n: separable_spectrum([1.0, (1 + math.sqrt(5)) / 2], bc, n),
    "cube": lambda bc, n: separable_spectrum([1.0, 1.0, 1.0], bc, n),
    "disc": lambda bc, n: ball_spectrum(2, bc, n),
    "ball3d": lambda bc, n: ball_spectrum(3, bc, n),
    "ball4d": lambda bc, n: ball_spectrum(4, bc, n),
}

DOMAIN_DIM = {"square": 2, "rectangle_sqrt2": 2, "rectangle_golden": 2, "cube": 3, "disc": 2, "ball3d": 3, "ball4d": 4}
