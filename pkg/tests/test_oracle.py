import itertools
import math

import mpmath
import numpy as np
import pytest

from hodgelab import oracle
from hodgelab.errors import UnsupportedError
from hodgelab.hilbert_complex import alternating_counting_sum, laplacian_spectrum


def scan_zero(f, n, step=1e-4, start=1e-4):
    """Independent n-th zero: fine sign-change scan followed by bisection."""
    x = start
    fx = f(x)
    found = 0
    while True:
        y = x + step
        fy = f(y)
        if fx == 0 or (fx < 0) != (fy < 0):
            found += 1
            if found == n:
                a, b = x, y
                for _ in range(60):
                    m = 0.5 * (a + b)
                    if (f(a) < 0) != (f(m) < 0):
                        b = m
                    else:
                        a = m
                return 0.5 * (a + b)
        x, fx = y, fy


def test_bessel_values():
    assert oracle.bessel_j(0, 0.0) == 1.0
    assert oracle.bessel_j(1, 0.0) == 0.0
    assert abs(oracle.bessel_j(0.5, 1.0) - math.sqrt(2 / math.pi) * math.sin(1.0)) < 1e-14


@pytest.mark.parametrize("nu", [0, 1, 2.5, 7, 12.5])
def test_bessel_against_mpmath(nu):
    xs = np.linspace(0, 100, 57)
    ours = oracle.bessel_j(nu, xs)
    ref = np.array([float(mpmath.besselj(nu, x)) for x in xs])
    assert np.max(np.abs(ours - ref)) < 1e-12


def test_bessel_rejects_bad_order():
    with pytest.raises(ValueError):
        oracle.bessel_j(0.3, 1.0)


def test_first_zeros_against_scan():
    z = oracle.bessel_zero("of_J", 0, 1)
    assert abs(z - 2.4048255577) < 1e-10
    assert abs(z - scan_zero(lambda x: float(mpmath.besselj(0, x)), 1)) < 1e-10
    zp = oracle.bessel_zero("of_J_derivative", 1, 1)
    assert abs(zp - 1.8411837813) < 1e-10
    derivative = lambda x: float((mpmath.besselj(0, x) - mpmath.besselj(2, x)) / 2)  # noqa: E731
    assert abs(zp - scan_zero(derivative, 1)) < 1e-10


@pytest.mark.parametrize("nu,n", [(0, 5), (3, 2), (1.5, 3), (4, 4)])
def test_zeros_against_mpmath(nu, n):
    assert abs(oracle.bessel_zero("of_J", nu, n) - float(mpmath.besseljzero(nu, n))) < 1e-10
    assert abs(oracle.bessel_zero("of_J_derivative", nu, n) - float(mpmath.besseljzero(nu, n, derivative=1))) < 1e-10


def test_j1_equals_shifted_j0_prime():
    assert oracle.bessel_zero("of_J_derivative", 0, 1) == 0.0
    for n in range(1, 11):
        assert abs(oracle.bessel_zero("of_J", 1, n) - oracle.bessel_zero("of_J_derivative", 0, n + 1)) < 1e-10


def test_bessel_interlacing():
    for nu in range(6):
        for n in range(1, 11):
            a = oracle.bessel_zero("of_J", nu, n)
            b = oracle.bessel_zero("of_J", nu + 1, n)
            c = oracle.bessel_zero("of_J", nu, n + 1)
            assert a < b < c


@pytest.mark.parametrize("d,l", [(3, 0), (3, 2), (4, 1), (4, 3)])
def test_radial_derivative_zero_against_finite_differences(d, l):
    a = (d - 2) / 2
    nu = l + a
    z = oracle.bessel_zero("of_radial_derivative", nu, 1, d=d)
    g = lambda r: r ** (-a) * mpmath.besselj(nu, r)  # noqa: E731
    assert abs(float(mpmath.diff(g, z))) < 1e-10
    ref = float(mpmath.findroot(lambda r: mpmath.diff(g, r), z + 1e-3))
    assert abs(z - ref) < 1e-10


def test_separable_square():
    D = oracle.separable_spectrum([1, 1], "dirichlet", 10).spectrum()
    assert abs(D.eigenvalue(1) - 2 * math.pi**2) < 1e-12
    assert D.eigenvalue(2) == D.eigenvalue(3) == 5 * math.pi**2
    assert D.multiplicity(5 * math.pi**2) == 2
    N = oracle.separable_spectrum([1, 1], "neumann", 10).spectrum()
    assert list(N.values[:4] / math.pi**2) == pytest.approx([0, 1, 1, 2])
    assert N.counting(math.pi**2) == 3


@pytest.mark.parametrize("sides", [[1.0, 1.0], [1.0, math.sqrt(2)], [1.0, 1.3, 0.7]])
@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_separable_against_brute_force(sides, bc):
    s = oracle.separable_spectrum(sides, bc, 40)
    lo = 1 if bc == "dirichlet" else 0
    brute = sorted(
        math.pi**2 * sum((m / a) ** 2 for m, a in zip(ms, sides))
        for ms in itertools.product(range(lo, 30), repeat=len(sides))
    )
    assert np.allclose(s.values[:40], brute[:40], rtol=1e-13)


def test_friedlander_unit_square_instance():
    N = oracle.separable_spectrum([1, 1], "neumann", 60).spectrum()
    D = oracle.separable_spectrum([1, 1], "dirichlet", 50).spectrum()
    for j in range(1, 51):
        assert N.eigenvalue(j + 1) <= D.eigenvalue(j)


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_weyl_sanity_unit_square(bc):
    s = oracle.separable_spectrum([1, 1], bc, 200).spectrum()
    lam = 2000.0
    ratio = sum(s.values <= lam) / lam
    assert abs(ratio / (1 / (4 * math.pi)) - 1) < 0.10


def test_disc_values():
    D = oracle.ball_spectrum(2, "dirichlet", 5).spectrum()
    assert abs(D.eigenvalue(1) - 5.783185962946784) < 1e-9
    assert D.eigenvalue(2) == D.eigenvalue(3)
    assert abs(D.eigenvalue(2) - 14.681970642123893) < 1e-9
    N = oracle.ball_spectrum(2, "neumann", 8).spectrum()
    assert N.eigenvalue(6) == pytest.approx(D.eigenvalue(3), rel=1e-9)


def test_ball_edge_cases():
    for d, expected in [(2, 3), (3, 4), (4, 14)]:
        D = oracle.ball_spectrum(d, "dirichlet", 1).spectrum()
        N = oracle.ball_spectrum(d, "neumann", 30).spectrum()
        lam1 = D.eigenvalue(1)
        assert int(np.sum(N.values < lam1)) == expected
    N3 = oracle.ball_spectrum(3, "neumann", 5).spectrum()
    assert N3.multiplicity(N3.eigenvalue(2)) == 3


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_ball_completeness_under_doubling(d, bc):
    a = oracle.ball_spectrum(d, bc, 40)
    b = oracle.ball_spectrum(d, bc, 80)
    assert np.array_equal(a.values[:40], b.values[:40])


def test_ball_labels_carry_multiplicity():
    s = oracle.ball_spectrum(4, "neumann", 20)
    for (l, n, h), v in zip(s.labels, s.values):
        assert 0 <= h < oracle.harmonic_dimension(l, 4)
    assert [oracle.harmonic_dimension(l, 3) for l in range(5)] == [1, 3, 5, 7, 9]
    assert [oracle.harmonic_dimension(l, 4) for l in range(5)] == [1, 4, 9, 16, 25]
    assert [oracle.harmonic_dimension(l, 2) for l in range(4)] == [1, 2, 2, 2]


def test_ball_rejects_other_dimensions():
    with pytest.raises(UnsupportedError):
        oracle.ball_spectrum(5, "dirichlet", 3)


def test_labeled_json_round_trip():
    s = oracle.ball_spectrum(2, "dirichlet", 6)
    data = s.to_dict()
    assert set(data) == {"domain", "bc", "values", "labels"}
    s2 = oracle.LabeledSpectrum.from_dict(data)
    assert np.array_equal(s2.values, s.values)


def test_unit_ball_volume():
    for d in range(1, 9):
        assert oracle.unit_ball_volume(d) == pytest.approx(math.pi ** (d / 2) / math.gamma(d / 2 + 1), rel=1e-14)
    assert oracle.unit_ball_volume(1) == 2.0
    assert oracle.unit_ball_volume(2) == math.pi


def test_freitas_shift():
    assert oracle.freitas_shift(2, 1) == (2.0, 2)
    assert oracle.freitas_shift(2, 4) == (4.0, 4)
    for j in range(1, 60):
        assert oracle.freitas_shift(2, j)[0] == 2 * math.sqrt(j)
    c, f = oracle.freitas_shift(3, 1)
    assert c == pytest.approx(3 * math.pi / (2 * (4 * math.pi / 3) ** (1 / 3)), rel=1e-14)
    assert f == 2


def test_disc_bundle():
    b = oracle.disc_bundle_2d(30)
    assert b.betti == [1, 0, 0] and b.chi == 1
    s1 = laplacian_spectrum(b, 1)
    assert s1.eigenvalue(1) == pytest.approx(1.8411837813406593**2, rel=1e-12)
    for lam in np.linspace(0, 0.9 * b.reliable_lambda, 25):
        assert alternating_counting_sum(b, lam) == 1
